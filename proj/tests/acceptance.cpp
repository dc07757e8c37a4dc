#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "f4its/binary_io.hpp"
#include "f4its/caption_index.hpp"
#include "f4its/embedding_file.hpp"
#include "f4its/encoder.hpp"
#include "f4its/error.hpp"
#include "f4its/eval.hpp"
#include "f4its/reranker.hpp"
#include "f4its/retrieval.hpp"
#include "f4its/synthetic_corpus.hpp"

using namespace f4its;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
};

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) x = n(rng);
    return v;
}

EmbeddingVector unit(std::mt19937_64& rng, std::size_t dim) {
    return l2_normalize(EmbeddingVector(gaussian(rng, dim)));
}

CaptionIndex random_index(std::mt19937_64& rng, std::size_t count, std::size_t dim, const std::string& fingerprint) {
    std::vector<Caption> captions;
    std::vector<float> matrix;
    matrix.reserve(count * dim);
    for (std::size_t i = 0; i < count; ++i) {
        captions.push_back({fmt::format("c{:05}", i), fmt::format("caption {}", i), CaptionKind::dense});
        const auto v = unit(rng, dim);
        for (double x : v.values()) matrix.push_back(static_cast<float>(x));
    }
    // Rows were normalized in double; renormalize the stored floats.
    for (std::size_t i = 0; i < count; ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += double(matrix[i * dim + d]) * matrix[i * dim + d];
        const double n = std::sqrt(s);
        for (std::size_t d = 0; d < dim; ++d) matrix[i * dim + d] = static_cast<float>(matrix[i * dim + d] / n);
    }
    return CaptionIndex(std::move(captions), std::move(matrix), dim, CaptionKind::dense, fingerprint);
}

std::vector<std::string> ids_of(const RankedList& r) {
    std::vector<std::string> ids;
    for (const auto& e : r.entries) ids.push_back(e.caption_id);
    return ids;
}

const SyntheticCorpus& dense_corpus() {
    static const SyntheticCorpus corpus = [] {
        SyntheticParams p;
        p.task = CorpusTask::dense;
        p.seed = 42;
        return generate_corpus(p);
    }();
    return corpus;
}

const CaptionIndex& dense_index() {
    static const CaptionIndex index = build_index(dense_corpus().captions, SyntheticEncoder(dense_corpus().encoder));
    return index;
}

Outcome fusion_degeneration() {
    EncoderSpec spec;
    spec.dim = 64;
    spec.seed = 5;
    const SyntheticEncoder enc(spec);
    std::mt19937_64 rng(2024);
    const auto index = random_index(rng, 1000, 64, enc.fingerprint());
    const std::vector<std::string> words{"rice", "beans", "kimchi", "tofu", "basil", "lamb", "mango", "leek"};
    for (int q = 0; q < 500; ++q) {
        auto image = unit(rng, 64);
        auto text = words[rng() % words.size()] + " with " + words[rng() % words.size()];
        const QueryBundle b{fmt::format("q{}", q), std::move(image), std::move(text), std::nullopt, {}, std::nullopt};
        const auto base = search_topk(b.image, index, index.size());
        const auto fused = search_fused(b, index, FusionWeights(1.0, 0.0), TextSource::dense, enc, index.size());
        if (ids_of(base) != ids_of(fused)) {
            return {false, fmt::format("query {} ranking differs", q)};
        }
    }
    return {true, "500 queries, full 1000-caption rankings identical"};
}

Outcome oracle_equivalence() {
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (std::size_t dim : {8, 32, 256}) {
            std::mt19937_64 rng(seed * 1000 + dim);
            const auto index = random_index(rng, 1000, dim, "oracle");
            const auto query = unit(rng, dim);
            const auto naive = search_topk_naive(query, index, 37);
            for (std::size_t k : {1, 5, 37}) {
                for (unsigned workers : {0u, 1u, 3u, 8u}) {
                    SearchOptions opts;
                    opts.workers = workers;
                    const auto fast = search_topk(query, index, k, opts);
                    ++cases;
                    if (fast.entries.size() != k) return {false, "wrong result size"};
                    for (std::size_t i = 0; i < k; ++i) {
                        if (fast.entries[i].caption_id != naive.entries[i].caption_id) {
                            return {false, fmt::format("seed {} dim {} k {} rank {} differs", seed, dim, k, i + 1)};
                        }
                        worst = std::max(worst, std::abs(fast.entries[i].score - naive.entries[i].score));
                    }
                }
            }
        }
    }
    return {worst <= 1e-6, fmt::format("{} comparisons, max score diff {:.3g}", cases, worst)};
}

Outcome metric_correctness() {
    auto list = [](std::vector<std::string> ids) {
        RankedList r;
        double s = 1.0;
        for (auto& id : ids) {
            r.entries.push_back({id, s});
            s -= 0.1;
        }
        r.k = r.entries.size();
        return r;
    };
    const std::vector<std::string> ab{"a", "b"};
    const double ap = average_precision(list({"a", "x", "b"}), ab, 3);
    const double perfect = average_precision(list({"a", "b", "x"}), ab, 2);
    const double miss = average_precision(list({"x", "y", "z"}), ab, 3);
    const auto k = derive_k("scallop, cauliflower, greens, herb oil");
    const bool ok = std::abs(ap - 0.833333333333) <= 1e-9 && perfect == 1.0 && miss == 0.0 && k == 4;
    return {ok, fmt::format("AP {:.9f}, perfect {}, miss {}, k {}", ap, perfect, miss, k)};
}

Outcome fusion_lift() {
    const auto& c = dense_corpus();
    const SyntheticEncoder enc(c.encoder);
    const auto base = evaluate_corpus(c.bundles, dense_index(), enc, EvalConfig::baseline());
    EvalConfig fused;
    fused.weights = FusionWeights(0.7, 0.3);
    const auto lifted = evaluate_corpus(c.bundles, dense_index(), enc, fused);
    const bool in_band = base.recall_at_1 >= 0.30 && base.recall_at_1 <= 0.60;
    const bool recorded = base.recall_at_1 == c.baseline.recall_at_1;
    const bool lift = lifted.recall_at_1 >= base.recall_at_1 + 0.05;
    return {in_band && recorded && lift,
            fmt::format("baseline R@1 {:.4f} (manifest {:.4f}), fused R@1 {:.4f}, lift {:+.4f}", base.recall_at_1,
                        c.baseline.recall_at_1, lifted.recall_at_1, lifted.recall_at_1 - base.recall_at_1)};
}

Outcome sweep_shape() {
    const auto& c = dense_corpus();
    const SyntheticEncoder enc(c.encoder);
    const std::vector<double> grid{0.0, 0.2, 0.3, 1.0};
    const auto s = sweep_fusion_weight(c.bundles, dense_index(), enc, grid, EvalConfig{});
    const double at0 = s.values[0], at2 = s.values[1], at3 = s.values[2], at1 = s.values[3];
    const bool ok = at2 > at0 && at2 > at1 && at3 > at0 && at3 > at1;
    return {ok, fmt::format("R@1 w=0 {:.4f}, 0.2 {:.4f}, 0.3 {:.4f}, 1.0 {:.4f}", at0, at2, at3, at1)};
}

Outcome rerank_lift() {
    SyntheticParams p;
    p.task = CorpusTask::sparse;
    p.num_captions = 200;
    p.num_queries = 100;
    p.seed = 42;
    const auto c = generate_corpus(p);
    const SyntheticEncoder enc(c.encoder);
    const auto index = build_index(c.captions, enc);
    const FusionWeights w = FusionWeights::query_default();
    double plain = 0.0, reranked = 0.0;
    for (const auto& b : c.bundles) {
        const auto k = derive_k(*b.gt_sparse_text);
        const auto initial = search_fused(b, index, w, TextSource::sparse, enc, k);
        const auto after = retrieve_and_rerank(b, index, w, 50, k, enc);
        plain += average_precision(initial, b.gt_caption_ids, k);
        reranked += average_precision(after, b.gt_caption_ids, k);
    }
    plain /= static_cast<double>(c.bundles.size());
    reranked /= static_cast<double>(c.bundles.size());
    return {reranked >= plain + 0.10,
            fmt::format("mAP no-rerank {:.4f}, rerank(N=50) {:.4f}, lift {:+.4f}", plain, reranked, reranked - plain)};
}

Outcome rerank_properties() {
    EncoderSpec spec;
    spec.dim = 32;
    spec.seed = 9;
    const SyntheticEncoder enc(spec);
    const std::vector<std::string> vocab{"rice",  "beans", "kimchi", "tofu",   "basil", "lamb",  "mango",
                                         "leek",  "feta",  "olive",  "squid",  "pesto", "ginger", "clam",
                                         "bacon", "pear",  "kale",   "endive", "dill",  "fig"};
    std::vector<Caption> captions;
    for (const auto& v : vocab) captions.push_back({v, v, CaptionKind::sparse});
    const auto index = build_index(captions, enc);

    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto query = unit(rng, 32);
        const std::size_t n = 1 + rng() % vocab.size();
        const auto candidates = search_topk(query, index, n);
        std::vector<std::string> items;
        const std::size_t m = 1 + rng() % 4;
        for (std::size_t i = 0; i < m; ++i) items.push_back(vocab[rng() % vocab.size()]);
        std::string text;
        for (const auto& it : items) text += (text.empty() ? "" : ", ") + it;
        std::shuffle(items.begin(), items.end(), rng);
        std::string shuffled;
        for (const auto& it : items) shuffled += (shuffled.empty() ? "" : ",") + it;

        const auto once = rerank(candidates, parse_items(text), index, enc);
        const auto twice = rerank(once, parse_items(text), index, enc);
        const auto permuted = rerank(candidates, parse_items(shuffled), index, enc);
        auto before = ids_of(candidates), after = ids_of(once);
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        if (before != after) return {false, fmt::format("case {}: candidate set changed", trial)};
        if (ids_of(once) != ids_of(twice)) return {false, fmt::format("case {}: not idempotent", trial)};
        if (ids_of(once) != ids_of(permuted)) return {false, fmt::format("case {}: depends on item order", trial)};
        for (std::size_t i = 0; i < once.entries.size(); ++i) {
            if (once.entries[i].score != twice.entries[i].score || once.entries[i].score != permuted.entries[i].score) {
                return {false, fmt::format("case {}: scores differ", trial)};
            }
        }
    }
    return {true, "1000 randomized cases"};
}

Outcome bidirectional_consistency() {
    EncoderSpec spec;
    spec.dim = 64;
    spec.seed = 11;
    const SyntheticEncoder enc(spec);
    std::mt19937_64 rng(8);
    const auto index = random_index(rng, 300, 64, enc.fingerprint());
    const std::vector<std::string> words{"rice", "beans", "kimchi", "tofu", "basil", "lamb", "mango", "leek"};
    double worst = 0.0;
    for (int q = 0; q < 100; ++q) {
        auto image = unit(rng, 64);
        auto text = words[rng() % words.size()] + " and " + words[rng() % words.size()];
        const QueryBundle b{fmt::format("q{}", q), std::move(image), std::move(text), std::nullopt, {}, std::nullopt};
        const auto uni = search_fused(b, index, FusionWeights::query_default(), TextSource::dense, enc, index.size());
        const auto bi = search_bidirectional(b, index, FusionWeights::query_default(), FusionWeights(0.0, 1.0),
                                             TextSource::dense, enc, index.size());
        if (ids_of(uni) != ids_of(bi)) return {false, fmt::format("query {}: order differs for w_index=(0,1)", q)};
        for (std::size_t i = 0; i < uni.entries.size(); ++i) {
            worst = std::max(worst, std::abs(uni.entries[i].score - bi.entries[i].score));
        }
        const auto flat = search_bidirectional(b, index, FusionWeights::query_default(), FusionWeights(1.0, 0.0),
                                               TextSource::dense, enc, index.size());
        const auto ids = ids_of(flat);
        if (!std::is_sorted(ids.begin(), ids.end())) {
            return {false, fmt::format("query {}: w_index=(1,0) order is not ascending id", q)};
        }
    }
    return {worst <= 1e-6, fmt::format("100 queries, max score diff {:.3g}, (1,0) ascending ids", worst)};
}

Outcome persistence() {
    const auto& c = dense_corpus();
    const auto dir = std::filesystem::temp_directory_path() / fmt::format("f4its_acceptance_{}", ::getpid());
    std::filesystem::create_directories(dir);
    struct Cleanup {
        std::filesystem::path p;
        ~Cleanup() {
            std::error_code ec;
            std::filesystem::remove_all(p, ec);
        }
    } cleanup{dir};

    std::vector<EmbeddingRecord> records;
    for (const auto& b : c.bundles) records.push_back({b.image_id, b.image});
    write_embedding_file(records, dir / "a.f4e");
    write_embedding_file(records, dir / "b.f4e");
    const auto back = load_embedding_file(dir / "a.f4e");
    double worst = 0.0;
    if (back.size() != records.size()) return {false, "F4E record count changed"};
    for (std::size_t i = 0; i < back.size(); ++i) {
        if (back[i].id != records[i].id) return {false, "F4E id changed"};
        for (std::size_t d = 0; d < back[i].vector.dim(); ++d) {
            worst = std::max(worst, std::abs(back[i].vector[d] - records[i].vector[d]));
        }
    }

    const auto& index = dense_index();
    save_index(index, dir / "a.f4i");
    save_index(index, dir / "b.f4i");
    const auto loaded = load_index(dir / "a.f4i");
    if (loaded.size() != index.size() || loaded.kind() != index.kind() ||
        loaded.encoder_fingerprint() != index.encoder_fingerprint()) {
        return {false, "F4I header changed"};
    }
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (!(loaded.caption(i) == index.caption(i))) return {false, "F4I caption changed"};
        for (std::size_t d = 0; d < index.dim(); ++d) {
            worst = std::max(worst, std::abs(double(loaded.row(i)[d]) - double(index.row(i)[d])));
        }
    }
    const auto bytes = [](const std::filesystem::path& p) { return io::read_file(p); };
    const bool identical = bytes(dir / "a.f4e") == bytes(dir / "b.f4e") && bytes(dir / "a.f4i") == bytes(dir / "b.f4i");
    return {identical && worst <= 1e-7,
            fmt::format("{} vectors, {} captions, max value diff {:.3g}, double-save identical: {}", records.size(),
                        index.size(), worst, identical)};
}

Outcome parallel_determinism() {
    const auto& c = dense_corpus();
    const SyntheticEncoder enc(c.encoder);
    EvalConfig one;
    one.workers = 1;
    EvalConfig eight = one;
    eight.workers = 8;
    const auto a = evaluate_corpus(c.bundles, dense_index(), enc, one, "seed42");
    const auto b = evaluate_corpus(c.bundles, dense_index(), enc, eight, "seed42");
    const bool json = format_report(a, ReportFormat::json) == format_report(b, ReportFormat::json);
    const bool csv = format_report(a, ReportFormat::csv) == format_report(b, ReportFormat::csv);
    return {json && csv, fmt::format("{} queries, json identical: {}, csv identical: {}", a.per_query.size(), json, csv)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "fusion degeneration", 5, fusion_degeneration},
        {2, "oracle equivalence", 30, oracle_equivalence},
        {3, "metric correctness", 1, metric_correctness},
        {4, "fusion lift", 20, fusion_lift},
        {5, "sweep shape", 60, sweep_shape},
        {6, "rerank lift", 20, rerank_lift},
        {7, "rerank properties", 10, rerank_properties},
        {8, "bi-directional consistency", 5, bidirectional_consistency},
        {9, "persistence", 5, persistence},
        {10, "determinism under parallelism", 30, parallel_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.limit_seconds;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s [%d] %s: %s (%.2fs, limit %.0fs%s)\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(),
                    o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", over time");
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
