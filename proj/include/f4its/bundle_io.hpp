#pragma once

/** \file bundle_io.hpp
 *  \brief Query bundle files.
 *
 * Bundles are stored as JSONL, one object per line:
 *   {"image_id": str, "gt_ids": [str, ...], "dense_text": str?, "sparse_text": str?, "gt_sparse_text": str?}
 * with the image embeddings in a companion F4E file keyed by image_id.
 */

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "f4its/embedding_file.hpp"
#include "f4its/retrieval.hpp"

namespace f4its {

std::string format_bundles_jsonl(std::span<const QueryBundle> bundles);
std::vector<EmbeddingRecord> bundle_image_records(std::span<const QueryBundle> bundles);

std::vector<QueryBundle> parse_bundles(std::string_view jsonl, const std::vector<EmbeddingRecord>& images);
std::vector<QueryBundle> load_bundles(const std::filesystem::path& jsonl, const std::filesystem::path& images);

}  // namespace f4its
