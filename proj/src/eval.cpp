#include "f4its/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "f4its/binary_io.hpp"
#include "f4its/error.hpp"
#include "f4its/reranker.hpp"

namespace f4its {

int recall_at_k(const RankedList& ranked, std::span<const std::string> gt_ids, std::size_t k) {
    const std::size_t limit = std::min(k, ranked.entries.size());
    for (std::size_t i = 0; i < limit; ++i) {
        if (std::find(gt_ids.begin(), gt_ids.end(), ranked.entries[i].caption_id) != gt_ids.end()) {
            return 1;
        }
    }
    return 0;
}

double average_precision(const RankedList& ranked, std::span<const std::string> gt_ids, std::size_t k) {
    const std::unordered_set<std::string_view> gt(gt_ids.begin(), gt_ids.end());
    if (gt.empty()) {
        throw Error(ErrorCode::EmptyGroundTruth, "average precision needs at least one ground-truth id");
    }
    const std::size_t limit = std::min(k, ranked.entries.size());
    std::unordered_set<std::string_view> found;
    double sum = 0.0;
    for (std::size_t i = 0; i < limit; ++i) {
        const auto& id = ranked.entries[i].caption_id;
        if (gt.contains(id) && found.insert(id).second) {
            sum += static_cast<double>(found.size()) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(gt.size());
}

std::size_t derive_k(std::string_view gt_sparse_caption) {
    return parse_items(gt_sparse_caption).phrases.size();
}

EvalConfig EvalConfig::baseline() {
    EvalConfig c;
    c.weights = FusionWeights::image_only();
    return c;
}

namespace {

std::size_t query_k(const QueryBundle& b) {
    if (b.gt_sparse_text) {
        return derive_k(*b.gt_sparse_text);
    }
    return std::unordered_set<std::string>(b.gt_caption_ids.begin(), b.gt_caption_ids.end()).size();
}

std::size_t query_depth(std::size_t k) {
    return std::max<std::size_t>(5, k);
}

void validate(std::span<const QueryBundle> bundles, const CaptionIndex& index, const EvalConfig& config) {
    if (bundles.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "no query bundles to evaluate");
    }
    if (config.rerank && index.kind() != CaptionKind::sparse) {
        throw Error(ErrorCode::ConfigConflict, "rerank requires a sparse caption index");
    }
    for (const auto& b : bundles) {
        if (b.gt_caption_ids.empty()) {
            throw Error(ErrorCode::EmptyGroundTruth, "bundle '" + b.image_id + "' has no ground-truth ids");
        }
        for (const auto& id : b.gt_caption_ids) {
            if (!index.find(id)) {
                throw Error(ErrorCode::UnknownGroundTruth,
                            "bundle '" + b.image_id + "' references unknown caption id '" + id + "'");
            }
        }
        if (b.image.dim() != index.dim()) {
            throw Error(ErrorCode::DimensionMismatch, "bundle '" + b.image_id + "' image dim " +
                                                          std::to_string(b.image.dim()) + " vs index dim " +
                                                          std::to_string(index.dim()));
        }
        if (config.rerank) {
            if (!b.sparse_text || b.sparse_text->empty()) {
                throw Error(ErrorCode::ConfigConflict, "rerank requires a sparse prediction for '" + b.image_id + "'");
            }
            const std::size_t depth = query_depth(query_k(b));
            if (config.pool != 0 && config.pool < depth) {
                throw Error(ErrorCode::ConfigConflict, "pool N=" + std::to_string(config.pool) +
                                                           " is smaller than the depth needed for '" + b.image_id +
                                                           "'");
            }
        }
    }
}

QueryResult evaluate_one(const QueryBundle& b, const CaptionIndex& index, const TextEncoder& encoder,
                         const EvalConfig& config) {
    QueryResult r;
    r.image_id = b.image_id;
    r.k = query_k(b);
    const auto ranked = run_query(b, index, encoder, config, query_depth(r.k));
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
        const auto& id = ranked.entries[i].caption_id;
        if (std::find(b.gt_caption_ids.begin(), b.gt_caption_ids.end(), id) != b.gt_caption_ids.end()) {
            r.gt_rank = i + 1;
            break;
        }
    }
    r.hit_at_1 = recall_at_k(ranked, b.gt_caption_ids, 1);
    r.hit_at_5 = recall_at_k(ranked, b.gt_caption_ids, 5);
    if (index.kind() == CaptionKind::sparse) {
        r.ap = average_precision(ranked, b.gt_caption_ids, r.k);
    }
    return r;
}

}  // namespace

RankedList run_query(const QueryBundle& bundle, const CaptionIndex& index, const TextEncoder& encoder,
                     const EvalConfig& config, std::size_t depth) {
    const SearchOptions search{1};
    const std::size_t n = config.rerank ? (config.pool == 0 ? default_pool_size(depth) : config.pool) : depth;
    if (n < depth) {
        throw Error(ErrorCode::ConfigConflict, "pool N smaller than evaluation depth");
    }
    auto ranked = config.bidirectional
                      ? search_bidirectional(bundle, index, config.weights, config.index_weights, config.text_source,
                                             encoder, n, search)
                      : search_fused(bundle, index, config.weights, config.text_source, encoder, n, search);
    if (config.rerank) {
        const auto items = parse_items(bundle.prediction(TextSource::sparse));
        ranked = rerank(ranked, items, index, encoder, RerankOptions{config.rerank_blend});
        if (ranked.entries.size() > depth) {
            ranked.entries.resize(depth);
        }
        ranked.k = depth;
    }
    return ranked;
}

EvalReport evaluate_corpus(std::span<const QueryBundle> bundles, const CaptionIndex& index,
                           const TextEncoder& encoder, const EvalConfig& config, std::string corpus_name) {
    validate(bundles, index, config);

    EvalReport report;
    report.corpus_name = std::move(corpus_name);
    report.config = config;
    report.encoder_fingerprint = encoder.fingerprint();
    report.index_fingerprint = index.encoder_fingerprint();
    if (report.encoder_fingerprint != report.index_fingerprint) {
        report.warnings.push_back("query encoder '" + report.encoder_fingerprint + "' differs from index encoder '" +
                                  report.index_fingerprint + "'");
    }

    std::vector<std::optional<QueryResult>> results(bundles.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(bundles.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < bundles.size(); ++i) {
            results[i] = evaluate_one(bundles[i], index, encoder, config);
        }
    } else {
        std::vector<std::exception_ptr> errors(bundles.size());
        {
            std::vector<std::jthread> threads;
            for (unsigned t = 0; t < workers; ++t) {
                threads.emplace_back([&, t] {
                    for (std::size_t i = t; i < bundles.size(); i += workers) {
                        try {
                            results[i] = evaluate_one(bundles[i], index, encoder, config);
                        } catch (...) {
                            errors[i] = std::current_exception();
                        }
                    }
                });
            }
        }
        // Lowest failing bundle wins, independent of scheduling.
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    double hits1 = 0.0;
    double hits5 = 0.0;
    double ap_sum = 0.0;
    for (auto& r : results) {
        hits1 += r->hit_at_1;
        hits5 += r->hit_at_5;
        if (r->ap) {
            ap_sum += *r->ap;
        }
        report.per_query.push_back(std::move(*r));
    }
    const auto n = static_cast<double>(bundles.size());
    report.recall_at_1 = hits1 / n;
    report.recall_at_5 = hits5 / n;
    if (index.kind() == CaptionKind::sparse) {
        report.mean_ap = ap_sum / n;
    }
    return report;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw Error(ErrorCode::InvalidArgument, "unknown report format '" + std::string(name) + "'");
}

std::string format_report(const EvalReport& report, ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out = "image_id,k,gt_rank,ap,hit@1,hit@5\n";
        for (const auto& q : report.per_query) {
            out += fmt::format("{},{},{},{},{},{}\n", q.image_id, q.k, q.gt_rank, q.ap ? fmt::format("{}", *q.ap) : "",
                               q.hit_at_1, q.hit_at_5);
        }
        return out;
    }

    using ojson = nlohmann::ordered_json;
    const auto& c = report.config;
    ojson j;
    j["corpus_name"] = report.corpus_name;
    j["config"] = {
        {"w_img", c.weights.image()},
        {"w_text", c.weights.text()},
        {"index_w_img", c.index_weights.image()},
        {"index_w_text", c.index_weights.text()},
        {"text_source", to_string(c.text_source)},
        {"bidirectional", c.bidirectional},
        {"rerank", c.rerank},
        {"pool", c.pool},
        {"rerank_blend", c.rerank_blend},
        {"encoder_fingerprint", report.encoder_fingerprint},
        {"index_fingerprint", report.index_fingerprint},
    };
    j["num_queries"] = report.per_query.size();
    j["recall_at_1"] = report.recall_at_1;
    j["recall_at_5"] = report.recall_at_5;
    j["mean_ap"] = report.mean_ap ? ojson(*report.mean_ap) : ojson(nullptr);
    j["warnings"] = report.warnings;
    ojson rows = ojson::array();
    for (const auto& q : report.per_query) {
        rows.push_back({
            {"image_id", q.image_id},
            {"k", q.k},
            {"gt_rank", q.gt_rank},
            {"ap", q.ap ? ojson(*q.ap) : ojson(nullptr)},
            {"hit_at_1", q.hit_at_1},
            {"hit_at_5", q.hit_at_5},
        });
    }
    j["per_query"] = std::move(rows);
    return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
    io::write_file(path, format_report(report, format));
}

std::string summary_line(const EvalReport& report) {
    std::string line = fmt::format("{} | R@1 {:.4f} | R@5 {:.4f}", report.corpus_name, report.recall_at_1,
                                   report.recall_at_5);
    if (report.mean_ap) {
        line += fmt::format(" | mAP {:.4f}", *report.mean_ap);
    }
    return line;
}

std::string_view to_string(SweepMetric metric) noexcept {
    switch (metric) {
        case SweepMetric::recall_at_1: return "recall_at_1";
        case SweepMetric::recall_at_5: return "recall_at_5";
        case SweepMetric::mean_ap: return "mean_ap";
    }
    return "unknown";
}

SweepMetric parse_sweep_metric(std::string_view name) {
    if (name == "recall_at_1" || name == "r1") return SweepMetric::recall_at_1;
    if (name == "recall_at_5" || name == "r5") return SweepMetric::recall_at_5;
    if (name == "mean_ap" || name == "map") return SweepMetric::mean_ap;
    throw Error(ErrorCode::InvalidArgument, "unknown sweep metric '" + std::string(name) + "'");
}

double SweepResult::peak() const {
    if (grid.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty sweep");
    }
    const auto best = std::max_element(values.begin(), values.end());
    return grid[static_cast<std::size_t>(best - values.begin())];
}

SweepResult sweep_fusion_weight(std::span<const QueryBundle> bundles, const CaptionIndex& index,
                                const TextEncoder& encoder, std::span<const double> grid, EvalConfig config,
                                SweepMetric metric) {
    if (grid.empty()) {
        throw Error(ErrorCode::InvalidArgument, "sweep grid is empty");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "sweep grid values must lie in [0,1]");
        }
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "sweep grid must be strictly increasing");
        }
    }
    if (metric == SweepMetric::mean_ap && index.kind() != CaptionKind::sparse) {
        throw Error(ErrorCode::ConfigConflict, "mean_ap sweep requires a sparse caption index");
    }

    SweepResult out;
    out.metric_name = std::string(to_string(metric));
    for (double g : grid) {
        config.weights = FusionWeights::from_text_weight(g);
        const auto report = evaluate_corpus(bundles, index, encoder, config);
        out.grid.push_back(g);
        switch (metric) {
            case SweepMetric::recall_at_1: out.values.push_back(report.recall_at_1); break;
            case SweepMetric::recall_at_5: out.values.push_back(report.recall_at_5); break;
            case SweepMetric::mean_ap: out.values.push_back(report.mean_ap.value_or(0.0)); break;
        }
    }
    return out;
}

std::string format_sweep_csv(const SweepResult& sweep) {
    std::string out = "w_text,metric\n";
    for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
        out += fmt::format("{},{}\n", sweep.grid[i], sweep.values[i]);
    }
    return out;
}

std::vector<double> grid_from_step(double step) {
    if (!(step > 0.0 && step <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "grid step must lie in (0,1]");
    }
    const double inv = 1.0 / step;
    const auto n = static_cast<long long>(std::llround(inv));
    std::vector<double> grid;
    if (std::abs(static_cast<double>(n) - inv) < 1e-9) {
        for (long long i = 0; i <= n; ++i) {
            grid.push_back(static_cast<double>(i) / static_cast<double>(n));
        }
    } else {
        for (long long i = 0; static_cast<double>(i) * step <= 1.0 + 1e-12; ++i) {
            grid.push_back(std::min(1.0, static_cast<double>(i) * step));
        }
    }
    return grid;
}

}  // namespace f4its
