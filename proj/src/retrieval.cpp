#include "f4its/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "f4its/error.hpp"

namespace f4its {

std::string_view to_string(RankStage stage) noexcept {
    return stage == RankStage::initial ? "initial" : "reranked";
}

std::string_view to_string(TextSource source) noexcept {
    return source == TextSource::dense ? "dense" : "sparse";
}

TextSource parse_text_source(std::string_view name) {
    if (name == "dense") return TextSource::dense;
    if (name == "sparse") return TextSource::sparse;
    throw Error(ErrorCode::InvalidArgument, "unknown text source '" + std::string(name) + "'");
}

const std::string& QueryBundle::prediction(TextSource source) const {
    const auto& text = source == TextSource::dense ? dense_text : sparse_text;
    if (!text || text->empty()) {
        throw Error(ErrorCode::MissingPredictionText,
                    "bundle '" + image_id + "' has no " + std::string(to_string(source)) + " prediction text");
    }
    return *text;
}

namespace {

constexpr std::size_t kRowsPerWorker = 8192;

struct Scored {
    double score;
    std::size_t row;
};

double clamp_score(double s) {
    return std::clamp(s, -1.0, 1.0);
}

void check_dim(const EmbeddingVector& query, const CaptionIndex& index) {
    if (query.dim() != index.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query.dim()) + " vs index dim " +
                                                      std::to_string(index.dim()));
    }
}

double checked_norm(const EmbeddingVector& v) {
    const double n = v.norm();
    if (n <= kZeroNorm) {
        throw Error(ErrorCode::ZeroVector, "query is the zero vector");
    }
    return n;
}

unsigned resolve_workers(unsigned requested, std::size_t rows) {
    if (requested != 0) {
        return requested;
    }
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::clamp<std::size_t>(rows / kRowsPerWorker, 1, hw));
}

RankedList to_ranked_list(const CaptionIndex& index, std::vector<Scored> picked, std::size_t k) {
    RankedList out;
    out.k = k;
    out.entries.reserve(picked.size());
    for (const auto& s : picked) {
        out.entries.push_back({index.caption(s.row).id, s.score});
    }
    return out;
}

/// Partitioned exact top-k: each worker keeps a bounded heap over a contiguous
/// row range, the heaps are merged and sorted with the global tie rule.
template <typename ScoreFn>
RankedList scan_topk(const CaptionIndex& index, std::size_t k, unsigned workers, const ScoreFn& score_row) {
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    const std::size_t n = index.size();
    const std::size_t keep = std::min(k, n);
    auto before = [&](const Scored& a, const Scored& b) {
        return ranks_before(a.score, index.caption(a.row).id, b.score, index.caption(b.row).id);
    };

    auto scan_range = [&](std::size_t begin, std::size_t end) {
        // Max-heap under `before`: the front is the weakest kept candidate.
        std::vector<Scored> heap;
        heap.reserve(keep + 1);
        for (std::size_t r = begin; r < end; ++r) {
            Scored s{score_row(r), r};
            if (heap.size() < keep) {
                heap.push_back(s);
                std::push_heap(heap.begin(), heap.end(), before);
            } else if (before(s, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), before);
                heap.back() = s;
                std::push_heap(heap.begin(), heap.end(), before);
            }
        }
        return heap;
    };

    const unsigned w = std::min<std::size_t>(resolve_workers(workers, n), n);
    std::vector<std::vector<Scored>> partial(w);
    if (w == 1) {
        partial[0] = scan_range(0, n);
    } else {
        std::vector<std::exception_ptr> errors(w);
        {
            std::vector<std::jthread> threads;
            threads.reserve(w);
            const std::size_t chunk = (n + w - 1) / w;
            for (unsigned t = 0; t < w; ++t) {
                const std::size_t begin = std::min(n, t * chunk);
                const std::size_t end = std::min(n, begin + chunk);
                threads.emplace_back([&, t, begin, end] {
                    try {
                        partial[t] = scan_range(begin, end);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    std::vector<Scored> merged;
    merged.reserve(keep * w);
    for (auto& p : partial) {
        merged.insert(merged.end(), p.begin(), p.end());
    }
    std::sort(merged.begin(), merged.end(), before);
    merged.resize(std::min(keep, merged.size()));
    return to_ranked_list(index, std::move(merged), k);
}

}  // namespace

RankedList search_topk(const EmbeddingVector& query, const CaptionIndex& index, std::size_t k,
                       SearchOptions options) {
    check_dim(query, index);
    const double qn = checked_norm(query);
    const auto q = query.values();
    return scan_topk(index, k, options.workers, [&](std::size_t r) {
        return clamp_score(dot(q, index.row(r)) / (qn * index.row_norm(r)));
    });
}

RankedList search_topk_naive(const EmbeddingVector& query, const CaptionIndex& index, std::size_t k) {
    check_dim(query, index);
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    const double qn = checked_norm(query);
    std::vector<RankedEntry> all;
    all.reserve(index.size());
    for (std::size_t r = 0; r < index.size(); ++r) {
        all.push_back({index.caption(r).id, clamp_score(dot(query.values(), index.row(r)) / (qn * index.row_norm(r)))});
    }
    std::sort(all.begin(), all.end(), [](const RankedEntry& a, const RankedEntry& b) {
        return ranks_before(a.score, a.caption_id, b.score, b.caption_id);
    });
    all.resize(std::min(k, all.size()));
    return RankedList{std::move(all), k, RankStage::initial};
}

EmbeddingVector fused_query(const QueryBundle& bundle, const FusionWeights& w, TextSource source,
                            const TextEncoder& encoder) {
    if (w.text() == 0.0) {
        return bundle.image;
    }
    const auto text = encoder.encode_one(bundle.prediction(source));
    return fuse(bundle.image, text, w);
}

RankedList search_fused(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w,
                        TextSource source, const TextEncoder& encoder, std::size_t k, SearchOptions options) {
    return search_topk(fused_query(bundle, w, source, encoder), index, k, options);
}

RankedList search_top1_fused(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w,
                             TextSource source, const TextEncoder& encoder) {
    return search_fused(bundle, index, w, source, encoder, 1);
}

RankedList search_bidirectional(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w_query,
                                const FusionWeights& w_index, TextSource source, const TextEncoder& encoder,
                                std::size_t k, SearchOptions options) {
    const auto query = fused_query(bundle, w_query, source, encoder);
    check_dim(query, index);
    check_dim(bundle.image, index);
    const double qn = checked_norm(query);
    const double en = checked_norm(bundle.image);
    const auto q = query.values();
    const auto e = bundle.image.values();
    const double a = w_index.image();
    const double b = w_index.text();

    if (a == 0.0) {
        // Candidates are the stored rows: same expression as uni-directional search.
        return scan_topk(index, k, options.workers, [&](std::size_t r) {
            return clamp_score(dot(q, index.row(r)) / (qn * index.row_norm(r)));
        });
    }
    const double qe = dot(q, e) / (qn * en);
    if (b == 0.0) {
        // Every candidate collapses onto the image embedding.
        return scan_topk(index, k, options.workers, [&](std::size_t) { return clamp_score(qe); });
    }
    return scan_topk(index, k, options.workers, [&](std::size_t r) {
        const auto row = index.row(r);
        const double rn = index.row_norm(r);
        const double qc = dot(q, row) / (qn * rn);
        const double ec = dot(e, row) / (en * rn);
        const double norm_sq = a * a + b * b + 2.0 * a * b * ec;
        if (norm_sq <= kZeroNorm * kZeroNorm) {
            throw Error(ErrorCode::ZeroVector, "fused candidate '" + index.caption(r).id + "' is the zero vector");
        }
        return clamp_score((a * qe + b * qc) / std::sqrt(norm_sq));
    });
}

}  // namespace f4its
