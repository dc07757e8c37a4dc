#pragma once

/** \file reranker.hpp
 *  \brief Item-level max-similarity re-ranking of an initial candidate pool.
 *
 * A predicted sparse caption ("chicken, rice, curry leaves") is split into
 * item phrases. Each candidate caption is then re-scored by the largest cosine
 * similarity between its stored embedding and any item embedding, and the
 * pool is re-sorted by that score.
 */

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "f4its/caption_index.hpp"
#include "f4its/encoder.hpp"
#include "f4its/retrieval.hpp"

namespace f4its {

struct ParsedItems {
    std::vector<std::string> phrases;
    std::string source_text;
};

/// Comma split, trim, lowercase, drop empties, keep first occurrence of duplicates.
ParsedItems parse_items(std::string_view sparse_text);

struct RerankOptions {
    /// Weight kept on the incoming candidate score; 0 replaces it outright.
    double blend = 0.0;
};

/// Initial pool size when none is given: max(50, 5k).
std::size_t default_pool_size(std::size_t k) noexcept;

RankedList rerank(const RankedList& candidates, const ParsedItems& items, const CaptionIndex& index,
                  const TextEncoder& encoder, RerankOptions options = {});

/// Same as above with item embeddings already computed (one per phrase).
RankedList rerank(const RankedList& candidates, std::span<const EmbeddingVector> item_embeddings,
                  const CaptionIndex& index, RerankOptions options = {});

/** \brief Fused top-N retrieval with the bundle's sparse prediction, rerank, keep k.
 *
 * `pool` of 0 means default_pool_size(k).
 */
RankedList retrieve_and_rerank(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w,
                               std::size_t pool, std::size_t k, const TextEncoder& encoder,
                               SearchOptions options = {}, RerankOptions rerank_options = {});

}  // namespace f4its
