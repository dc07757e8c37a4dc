#include "f4its/synthetic_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "f4its/binary_io.hpp"
#include "f4its/bundle_io.hpp"
#include "f4its/embedding_file.hpp"
#include "f4its/error.hpp"
#include "f4its/eval.hpp"

namespace f4its {

std::string_view to_string(CorpusTask task) noexcept {
    return task == CorpusTask::dense ? "dense" : "sparse";
}

CorpusTask parse_corpus_task(std::string_view name) {
    if (name == "dense") return CorpusTask::dense;
    if (name == "sparse") return CorpusTask::sparse;
    throw Error(ErrorCode::InvalidArgument, "unknown corpus task '" + std::string(name) + "'");
}

SyntheticParams SyntheticParams::resolved() const {
    SyntheticParams p = *this;
    const bool dense = task == CorpusTask::dense;
    if (p.num_captions == 0) p.num_captions = dense ? 1000 : 200;
    if (p.num_queries == 0) p.num_queries = dense ? p.num_captions : 100;
    if (p.vocab_size == 0) p.vocab_size = dense ? 120 : 2 * p.num_captions;
    if (p.noise_sigma < 0.0) p.noise_sigma = dense ? 0.24 : 0.05;
    if (p.dropout < 0.0) p.dropout = dense ? 0.5 : 0.25;
    return p;
}

void SyntheticParams::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (dim < 8) fail("dim must be >= 8");
    if (num_captions == 0) fail("num_captions must be >= 1");
    if (num_queries == 0) fail("num_queries must be >= 1");
    if (items_min == 0 || items_min > items_max) fail("items-per-caption range must satisfy 1 <= min <= max");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise sigma must be finite and >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1); 1 leaves prediction texts empty");
    if (task == CorpusTask::dense) {
        if (items_max > vocab_size) fail("items_max exceeds vocab_size");
        if (num_queries > num_captions) fail("dense task needs num_queries <= num_captions");
    } else {
        if (items_max + distractors > num_captions) fail("items_max + distractors exceeds the ingredient count");
        if (vocab_size < num_captions) fail("sparse task needs vocab_size >= num_captions");
        if (!(distractor_weight >= 0.0) || !std::isfinite(distractor_weight)) fail("distractor weight must be >= 0");
    }
}

namespace {

const std::vector<std::string> kCaptionTemplates = {
    "a plate of {}",
    "the dish contains {}",
    "{} served on a white plate",
    "grilled {} with sauce",
    "a bowl with {} on top",
};

const std::vector<std::string> kPredictionTemplates = {
    "this image shows {}",
    "a photo of food with {}",
    "looks like {} in the picture",
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, n).
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

std::unordered_set<std::string> template_tokens() {
    std::unordered_set<std::string> out;
    for (const auto* pool : {&kCaptionTemplates, &kPredictionTemplates}) {
        for (const auto& t : *pool) {
            for (auto& tok : tokenize(t)) {
                out.insert(tok);
            }
        }
    }
    out.insert("and");
    return out;
}

std::vector<std::string> make_words(Rng& rng, std::size_t count) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    const auto reserved = template_tokens();
    std::unordered_set<std::string> seen;
    std::vector<std::string> words;
    while (words.size() < count) {
        const std::size_t syllables = rng.between(2, 3);
        std::string w;
        for (std::size_t s = 0; s < syllables; ++s) {
            w.push_back(consonants[rng.below(consonants.size())]);
            w.push_back(vowels[rng.below(vowels.size())]);
        }
        if (!reserved.contains(w) && seen.insert(w).second) {
            words.push_back(std::move(w));
        }
    }
    return words;
}

std::string join_list(const std::vector<std::string>& items) {
    if (items.size() == 1) {
        return items.front();
    }
    std::string out;
    for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        if (i > 0) out += ", ";
        out += items[i];
    }
    return out + " and " + items.back();
}

std::string join_commas(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += ", ";
        out += items[i];
    }
    return out;
}

std::string fill(const std::string& tmpl, const std::string& list) {
    std::string out = tmpl;
    out.replace(out.find("{}"), 2, list);
    return out;
}

std::vector<std::string> sample_distinct(Rng& rng, const std::vector<std::string>& pool, std::size_t n) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(pool[idx[i]]);
    }
    return out;
}

/// Removes round(dropout * n) items but always keeps at least one.
std::vector<std::string> drop_items(Rng& rng, std::vector<std::string> items, double dropout) {
    const auto n = items.size();
    const auto drop = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::llround(dropout * static_cast<double>(n))));
    rng.shuffle(items);
    items.resize(n - drop);
    return items;
}

std::uint64_t noise_seed(std::uint64_t seed, std::size_t i) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(i) + 1));
}

std::string caption_id(char prefix, std::size_t i) {
    std::string digits = std::to_string(i);
    return std::string(1, prefix) + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

void generate_dense(SyntheticCorpus& c, Rng& rng) {
    const auto& p = c.params;
    const auto vocab = make_words(rng, p.vocab_size);

    std::set<std::vector<std::string>> used;
    std::vector<std::vector<std::string>> item_sets;
    std::size_t guard = 0;
    while (item_sets.size() < p.num_captions) {
        if (++guard > 100 * p.num_captions) {
            throw Error(ErrorCode::InvalidArgument, "vocabulary too small for unique item sets");
        }
        auto items = sample_distinct(rng, vocab, rng.between(p.items_min, p.items_max));
        auto key = items;
        std::sort(key.begin(), key.end());
        if (used.insert(key).second) {
            item_sets.push_back(std::move(items));
        }
    }
    for (std::size_t i = 0; i < item_sets.size(); ++i) {
        const auto& tmpl = kCaptionTemplates[rng.below(kCaptionTemplates.size())];
        c.captions.push_back({caption_id('c', i), fill(tmpl, join_list(item_sets[i])), CaptionKind::dense});
    }

    std::vector<std::size_t> order(p.num_captions);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t q = 0; q < p.num_queries; ++q) {
        const std::size_t target = order[q];
        const auto kept = drop_items(rng, item_sets[target], p.dropout);
        const auto& tmpl = kPredictionTemplates[rng.below(kPredictionTemplates.size())];
        c.bundles.push_back(QueryBundle{
            caption_id('q', q),
            encode_image_synthetic(c.captions[target].text, p.noise_sigma, c.encoder, noise_seed(p.seed, q)),
            fill(tmpl, join_list(kept)),
            join_commas(kept),
            {c.captions[target].id},
            std::nullopt,
        });
    }
}

void generate_sparse(SyntheticCorpus& c, Rng& rng) {
    const auto& p = c.params;
    auto words = make_words(rng, p.vocab_size);
    rng.shuffle(words);

    // Ingredient phrases never share a word, so token overlap identifies them.
    std::vector<std::string> phrases;
    std::size_t next_word = 0;
    for (std::size_t i = 0; i < p.num_captions; ++i) {
        const std::size_t remaining_words = words.size() - next_word;
        const std::size_t remaining_phrases = p.num_captions - i;
        const bool two_words = remaining_words > remaining_phrases && rng.below(10) < 3;
        std::string phrase = words[next_word++];
        if (two_words) {
            phrase += " " + words[next_word++];
        }
        phrases.push_back(phrase);
        c.captions.push_back({caption_id('s', i), phrase, CaptionKind::sparse});
    }

    std::vector<EmbeddingVector> phrase_vectors;
    phrase_vectors.reserve(phrases.size());
    for (const auto& ph : phrases) {
        phrase_vectors.push_back(encode_text_synthetic(ph, c.encoder));
    }

    std::vector<std::size_t> all(p.num_captions);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    for (std::size_t q = 0; q < p.num_queries; ++q) {
        const std::size_t n_items = rng.between(p.items_min, p.items_max);
        auto picked = all;
        for (std::size_t i = 0; i < n_items + p.distractors; ++i) {
            std::swap(picked[i], picked[i + rng.below(picked.size() - i)]);
        }
        std::vector<std::string> gt_items;
        std::vector<std::string> gt_ids;
        for (std::size_t i = 0; i < n_items; ++i) {
            gt_items.push_back(phrases[picked[i]]);
            gt_ids.push_back(c.captions[picked[i]].id);
        }
        const auto gt_text = join_commas(gt_items);

        // Image = clean view of the GT items, pulled towards the distractors, plus noise.
        const auto clean = encode_text_synthetic(gt_text, c.encoder);
        const auto noise = gaussian_vector(noise_seed(p.seed, q), p.dim);
        std::vector<double> image(p.dim);
        for (std::size_t d = 0; d < p.dim; ++d) {
            double v = clean[d] + p.noise_sigma * noise[d];
            for (std::size_t j = 0; j < p.distractors; ++j) {
                v += p.distractor_weight * phrase_vectors[picked[n_items + j]][d];
            }
            image[d] = v;
        }

        const auto kept = drop_items(rng, gt_items, p.dropout);
        const auto& tmpl = kPredictionTemplates[rng.below(kPredictionTemplates.size())];
        c.bundles.push_back(QueryBundle{
            caption_id('q', q),
            l2_normalize(EmbeddingVector(std::move(image))),
            fill(tmpl, join_list(kept)),
            join_commas(kept),
            std::move(gt_ids),
            gt_text,
        });
    }
}

}  // namespace

BaselineMetrics oracle_baseline(std::span<const QueryBundle> bundles, const CaptionIndex& index) {
    BaselineMetrics m;
    double ap_sum = 0.0;
    for (const auto& b : bundles) {
        const std::size_t k = b.gt_sparse_text ? derive_k(*b.gt_sparse_text) : b.gt_caption_ids.size();
        const auto ranked = search_topk_naive(b.image, index, std::max<std::size_t>(5, k));
        m.recall_at_1 += recall_at_k(ranked, b.gt_caption_ids, 1);
        m.recall_at_5 += recall_at_k(ranked, b.gt_caption_ids, 5);
        ap_sum += average_precision(ranked, b.gt_caption_ids, k);
    }
    const auto n = static_cast<double>(bundles.size());
    m.recall_at_1 /= n;
    m.recall_at_5 /= n;
    if (index.kind() == CaptionKind::sparse) {
        m.mean_ap = ap_sum / n;
    }
    return m;
}

SyntheticCorpus generate_corpus(const SyntheticParams& params) {
    SyntheticCorpus c;
    c.params = params.resolved();
    c.params.validate();
    c.encoder.kind = EncoderKind::synthetic;
    c.encoder.dim = c.params.dim;
    c.encoder.seed = c.params.seed;

    Rng rng(c.params.seed);
    if (c.params.task == CorpusTask::dense) {
        generate_dense(c, rng);
    } else {
        generate_sparse(c, rng);
    }
    // Images are stored as f32; quantize now so in-memory and on-disk corpora evaluate identically.
    for (auto& b : c.bundles) {
        b.image = l2_normalize(EmbeddingVector::from_floats(b.image.to_floats()));
    }
    const SyntheticEncoder encoder(c.encoder);
    const auto index = build_index(c.captions, encoder);
    c.baseline = oracle_baseline(c.bundles, index);
    return c;
}

std::string format_manifest(const SyntheticCorpus& c) {
    using ojson = nlohmann::ordered_json;
    const auto& p = c.params;
    ojson j;
    j["task"] = to_string(p.task);
    j["seed"] = p.seed;
    j["params"] = {
        {"dim", p.dim},
        {"vocab_size", p.vocab_size},
        {"num_captions", p.num_captions},
        {"num_queries", p.num_queries},
        {"items_min", p.items_min},
        {"items_max", p.items_max},
        {"noise_sigma", p.noise_sigma},
        {"dropout", p.dropout},
        {"distractors", p.distractors},
        {"distractor_weight", p.distractor_weight},
    };
    j["encoder"] = {
        {"kind", to_string(c.encoder.kind)},
        {"dim", c.encoder.dim},
        {"seed", c.encoder.seed},
        {"fingerprint", c.encoder.fingerprint()},
    };
    j["files"] = {
        {"captions", "captions.jsonl"},
        {"index", "index.f4i"},
        {"bundles", "bundles.jsonl"},
        {"images", "images.f4e"},
    };
    ojson baseline = {
        {"recall_at_1", c.baseline.recall_at_1},
        {"recall_at_5", c.baseline.recall_at_5},
    };
    baseline["mean_ap"] = c.baseline.mean_ap ? ojson(*c.baseline.mean_ap) : ojson(nullptr);
    j["baseline"] = std::move(baseline);
    return j.dump(2) + "\n";
}

void write_corpus(const SyntheticCorpus& c, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
    }
    std::string captions;
    for (const auto& cap : c.captions) {
        nlohmann::ordered_json j;
        j["id"] = cap.id;
        j["text"] = cap.text;
        j["kind"] = to_string(cap.kind);
        captions += j.dump() + "\n";
    }
    io::write_file(out_dir / "captions.jsonl", captions);
    io::write_file(out_dir / "bundles.jsonl", format_bundles_jsonl(c.bundles));
    write_embedding_file(bundle_image_records(c.bundles), out_dir / "images.f4e");
    save_index(build_index(c.captions, SyntheticEncoder(c.encoder)), out_dir / "index.f4i");
    io::write_file(out_dir / "manifest.json", format_manifest(c));
}

}  // namespace f4its
