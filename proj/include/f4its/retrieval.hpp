#pragma once

/** \file retrieval.hpp
 *  \brief Exact cosine retrieval over a CaptionIndex.
 *
 * Results are ordered by score descending with ties broken by ascending
 * caption id. Scores are computed in double precision over the float index
 * rows and are identical between the naive reference scan and the parallel
 * scan, for any worker count.
 */

#include <optional>
#include <string>
#include <vector>

#include "f4its/caption_index.hpp"
#include "f4its/embedding.hpp"
#include "f4its/encoder.hpp"

namespace f4its {

enum class RankStage { initial, reranked };
enum class TextSource { dense, sparse };

std::string_view to_string(RankStage stage) noexcept;
std::string_view to_string(TextSource source) noexcept;
TextSource parse_text_source(std::string_view name);

struct RankedEntry {
    std::string caption_id;
    double score = 0.0;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedList {
    std::vector<RankedEntry> entries;
    std::size_t k = 1;
    RankStage stage = RankStage::initial;

    friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Strict ordering used everywhere a ranking is produced.
inline bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
    if (score_a != score_b) {
        return score_a > score_b;
    }
    return id_a < id_b;
}

struct QueryBundle {
    std::string image_id;
    EmbeddingVector image;
    std::optional<std::string> dense_text;
    std::optional<std::string> sparse_text;
    std::vector<std::string> gt_caption_ids;
    /// Ground-truth item list for the sparse task; defines the per-image k when present.
    std::optional<std::string> gt_sparse_text;

    const std::string& prediction(TextSource source) const;
};

struct SearchOptions {
    /// 0 picks a count from the hardware and the index size.
    unsigned workers = 0;
};

RankedList search_topk(const EmbeddingVector& query, const CaptionIndex& index, std::size_t k,
                       SearchOptions options = {});

/// Reference oracle: scores every row sequentially, full sort, truncate.
RankedList search_topk_naive(const EmbeddingVector& query, const CaptionIndex& index, std::size_t k);

/// Uni-directional fused query: fuse(image, TE(prediction text), w).
EmbeddingVector fused_query(const QueryBundle& bundle, const FusionWeights& w, TextSource source,
                            const TextEncoder& encoder);

RankedList search_fused(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w,
                        TextSource source, const TextEncoder& encoder, std::size_t k, SearchOptions options = {});

RankedList search_top1_fused(const QueryBundle& bundle, const CaptionIndex& index,
                             const FusionWeights& w, TextSource source, const TextEncoder& encoder);

/** \brief Bi-directional search.
 *
 * The query is fused with `w_query`; every candidate row is scored against
 * normalize(w_index.image * image + w_index.text * row), evaluated on the fly
 * without touching the stored index.
 */
RankedList search_bidirectional(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w_query,
                                const FusionWeights& w_index, TextSource source, const TextEncoder& encoder,
                                std::size_t k = 1, SearchOptions options = {});

}  // namespace f4its
