#pragma once

/** \file embedding_file.hpp
 *  \brief F4E binary embedding batches.
 *
 * Layout (little-endian, no padding):
 *   "F4EM" | version u16 = 1 | dim u32 | count u64 |
 *   count x ( id_len u16 | id bytes (UTF-8) | dim x f32 )
 */

#include <filesystem>
#include <string>
#include <vector>

#include "f4its/embedding.hpp"

namespace f4its {

struct EmbeddingRecord {
    std::string id;
    EmbeddingVector vector;
};

/// Serializes records to F4E bytes. An empty list yields a header with dim 0, count 0.
std::string encode_embedding_file(const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> decode_embedding_file(std::string_view bytes);

void write_embedding_file(const std::vector<EmbeddingRecord>& records, const std::filesystem::path& path);

/// Records in file order, each L2-normalized on load.
std::vector<EmbeddingRecord> load_embedding_file(const std::filesystem::path& path);

}  // namespace f4its
