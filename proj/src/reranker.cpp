#include "f4its/reranker.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <unordered_set>

#include "f4its/error.hpp"

namespace f4its {

ParsedItems parse_items(std::string_view sparse_text) {
    ParsedItems out;
    out.source_text = std::string(sparse_text);
    std::unordered_set<std::string> seen;
    std::size_t start = 0;
    while (start <= sparse_text.size()) {
        const auto comma = sparse_text.find(',', start);
        const auto end = comma == std::string_view::npos ? sparse_text.size() : comma;
        auto piece = sparse_text.substr(start, end - start);
        while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.front()))) piece.remove_prefix(1);
        while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.back()))) piece.remove_suffix(1);
        if (!piece.empty()) {
            std::string phrase(piece);
            for (char& c : phrase) {
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            }
            if (seen.insert(phrase).second) {
                out.phrases.push_back(std::move(phrase));
            }
        }
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    if (out.phrases.empty()) {
        throw Error(ErrorCode::NoItems, "no item phrases in '" + out.source_text + "'");
    }
    return out;
}

std::size_t default_pool_size(std::size_t k) noexcept {
    return std::max<std::size_t>(50, 5 * k);
}

RankedList rerank(const RankedList& candidates, std::span<const EmbeddingVector> item_embeddings,
                  const CaptionIndex& index, RerankOptions options) {
    if (item_embeddings.empty()) {
        throw Error(ErrorCode::NoItems, "rerank needs at least one item embedding");
    }
    if (!(options.blend >= 0.0 && options.blend <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "rerank blend must lie in [0,1]");
    }
    for (const auto& item : item_embeddings) {
        if (item.dim() != index.dim()) {
            throw Error(ErrorCode::DimensionMismatch, "item embedding dim differs from index dim");
        }
    }

    RankedList out;
    out.k = candidates.k;
    out.stage = RankStage::reranked;
    out.entries.reserve(candidates.entries.size());
    for (const auto& cand : candidates.entries) {
        const auto row = index.find(cand.caption_id);
        if (!row) {
            throw Error(ErrorCode::UnknownCandidateId, "candidate '" + cand.caption_id + "' not in index");
        }
        const auto stored = index.row(*row);
        const double rn = index.row_norm(*row);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& item : item_embeddings) {
            best = std::max(best, dot(item.values(), stored) / (item.norm() * rn));
        }
        best = std::clamp(best, -1.0, 1.0);
        const double score = options.blend == 0.0 ? best : (1.0 - options.blend) * best + options.blend * cand.score;
        out.entries.push_back({cand.caption_id, score});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        return ranks_before(a.score, a.caption_id, b.score, b.caption_id);
    });
    return out;
}

RankedList rerank(const RankedList& candidates, const ParsedItems& items, const CaptionIndex& index,
                  const TextEncoder& encoder, RerankOptions options) {
    if (items.phrases.empty()) {
        throw Error(ErrorCode::NoItems, "no item phrases to rerank with");
    }
    // Phrases are unique after parsing, so this is one encoding per distinct item.
    const auto embeddings = encoder.encode(items.phrases);
    return rerank(candidates, embeddings, index, options);
}

RankedList retrieve_and_rerank(const QueryBundle& bundle, const CaptionIndex& index, const FusionWeights& w,
                               std::size_t pool, std::size_t k, const TextEncoder& encoder, SearchOptions options,
                               RerankOptions rerank_options) {
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    const std::size_t n = pool == 0 ? default_pool_size(k) : pool;
    if (n < k) {
        throw Error(ErrorCode::ConfigConflict,
                    "candidate pool N=" + std::to_string(n) + " is smaller than k=" + std::to_string(k));
    }
    const auto items = parse_items(bundle.prediction(TextSource::sparse));
    const auto initial = search_fused(bundle, index, w, TextSource::sparse, encoder, n, options);
    auto out = rerank(initial, items, index, encoder, rerank_options);
    if (out.entries.size() > k) {
        out.entries.resize(k);
    }
    out.k = k;
    return out;
}

}  // namespace f4its
