#pragma once

/** \file remote_encoder.hpp
 *  \brief Batch client for an HTTP embedding service.
 *
 * Wire protocol: POST {endpoint}/embed with {"texts": [...]} and expect
 * {"dim": int, "vectors": [[...], ...]} with one vector per text. Any non-200
 * status is a RemoteError; 429 and 5xx responses and connection failures are
 * retried with exponential backoff up to `max_attempts` times.
 */

#include <span>
#include <string>
#include <vector>

#include "f4its/encoder.hpp"

namespace f4its {

/// Maximum accepted size of a single input text in bytes.
inline constexpr std::size_t kMaxRemoteTextBytes = 8192;

class RemoteEncoder final : public TextEncoder {
public:
    explicit RemoteEncoder(EncoderSpec spec);

    std::vector<EmbeddingVector> encode(std::span<const std::string> texts) const override;
    std::size_t dim() const noexcept override { return spec_.dim; }
    std::string fingerprint() const override { return spec_.fingerprint(); }

private:
    std::vector<EmbeddingVector> encode_batch(std::span<const std::string> texts) const;

    EncoderSpec spec_;
    std::string base_url_;
    std::string path_prefix_;
};

std::vector<EmbeddingVector> encode_remote(std::span<const std::string> texts, const EncoderSpec& spec);

}  // namespace f4its
