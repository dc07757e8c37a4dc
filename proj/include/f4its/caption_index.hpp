#pragma once

/** \file caption_index.hpp
 *  \brief Immutable caption corpus with one unit-norm embedding row per caption.
 *
 * F4I layout (little-endian, no padding):
 *   "F4IX" | version u16 = 1 | kind u8 (0 dense, 1 sparse) | dim u32 | count u64 |
 *   count x ( id_len u32 | id | text_len u32 | text ) |
 *   count x dim f32 |
 *   fingerprint_len u32 | fingerprint
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "f4its/embedding_file.hpp"
#include "f4its/encoder.hpp"

namespace f4its {

enum class CaptionKind : std::uint8_t { dense = 0, sparse = 1 };

std::string_view to_string(CaptionKind kind) noexcept;
CaptionKind parse_caption_kind(std::string_view name);

struct Caption {
    std::string id;
    std::string text;
    CaptionKind kind = CaptionKind::dense;

    friend bool operator==(const Caption&, const Caption&) = default;
};

class CaptionIndex {
public:
    /// Validates ids, kinds, row count and row norms. `matrix` is row-major count x dim.
    CaptionIndex(std::vector<Caption> captions, std::vector<float> matrix, std::size_t dim, CaptionKind kind,
                 std::string encoder_fingerprint);

    std::size_t size() const noexcept { return captions_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    CaptionKind kind() const noexcept { return kind_; }
    const std::string& encoder_fingerprint() const noexcept { return fingerprint_; }

    const std::vector<Caption>& captions() const noexcept { return captions_; }
    const Caption& caption(std::size_t row) const { return captions_.at(row); }
    std::span<const float> row(std::size_t i) const noexcept { return {matrix_.data() + i * dim_, dim_}; }
    /// L2 norm of row i, computed once at construction.
    double row_norm(std::size_t i) const noexcept { return norms_[i]; }
    std::span<const float> matrix() const noexcept { return matrix_; }

    std::optional<std::size_t> find(std::string_view id) const;
    EmbeddingVector embedding(std::size_t row) const;

private:
    std::vector<Caption> captions_;
    std::vector<float> matrix_;
    std::vector<double> norms_;
    std::size_t dim_;
    CaptionKind kind_;
    std::string fingerprint_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Encodes every caption text with `encoder`; rows are the normalized embeddings.
CaptionIndex build_index(std::vector<Caption> captions, const TextEncoder& encoder);

/// Builds from precomputed embeddings keyed by caption id (the "file" encoder path).
CaptionIndex build_index(std::vector<Caption> captions, const std::vector<EmbeddingRecord>& embeddings,
                         std::string encoder_fingerprint);

std::string encode_index(const CaptionIndex& index);
CaptionIndex decode_index(std::string_view bytes);
void save_index(const CaptionIndex& index, const std::filesystem::path& path);
CaptionIndex load_index(const std::filesystem::path& path);

/// JSONL, one {"id", "text", "kind"} object per line; blank lines are skipped.
std::vector<Caption> ingest_captions(const std::filesystem::path& path);
std::vector<Caption> parse_captions_jsonl(std::string_view content);

}  // namespace f4its
