#pragma once

/** \file encoder.hpp
 *  \brief Sources of image and text embeddings.
 *
 * Three interchangeable text encoders sit behind TextEncoder:
 *  - SyntheticEncoder: seeded random-projection bag of tokens, for offline runs;
 *  - FileEncoder: lookup into a precomputed F4E file keyed by text;
 *  - RemoteEncoder: HTTP client for an embedding service (see remote_encoder.hpp).
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "f4its/embedding.hpp"
#include "f4its/embedding_file.hpp"

namespace f4its {

enum class EncoderKind { file, synthetic, remote };

std::string_view to_string(EncoderKind kind) noexcept;
EncoderKind parse_encoder_kind(std::string_view name);

/// Environment variable consulted when a remote spec has no endpoint.
inline constexpr const char* kEndpointEnvVar = "F4_ENCODER_ENDPOINT";

struct EncoderSpec {
    EncoderKind kind = EncoderKind::synthetic;
    std::size_t dim = 64;
    std::uint64_t seed = 0;          // synthetic
    std::string endpoint;            // remote
    std::filesystem::path path;      // file
    std::string bearer_token;        // remote, optional
    std::size_t batch_size = 32;     // remote
    std::size_t max_in_flight = 1;   // remote, concurrent batch requests
    int max_attempts = 3;            // remote
    std::chrono::milliseconds initial_backoff{200};
    std::chrono::milliseconds timeout{10000};

    /// Throws InvalidArgument when dim < 8 or a remote spec lacks an endpoint.
    void validate() const;
    /// Identity of the embedding source, e.g. "synthetic:dim=64:seed=7".
    std::string fingerprint() const;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;

    /// One normalized vector per input, in input order.
    virtual std::vector<EmbeddingVector> encode(std::span<const std::string> texts) const = 0;
    virtual std::size_t dim() const noexcept = 0;
    virtual std::string fingerprint() const = 0;

    EmbeddingVector encode_one(const std::string& text) const;
};

/// Builds the encoder for `spec`; a remote spec with an empty endpoint falls back to F4_ENCODER_ENDPOINT.
std::unique_ptr<TextEncoder> make_encoder(EncoderSpec spec);

/// Lowercase, split on commas and whitespace, strip ASCII punctuation, drop empties.
std::vector<std::string> tokenize(std::string_view text);

/// Unit vector for a single token; a pure function of (token, seed, dim).
EmbeddingVector token_vector(std::string_view token, std::uint64_t seed, std::size_t dim);

EmbeddingVector encode_text_synthetic(std::string_view text, const EncoderSpec& spec);

/// Models an image as a noisy view of its ground-truth caption:
/// normalize(encode_text_synthetic(caption) + sigma * g), g ~ N(0, I) seeded by noise_seed.
EmbeddingVector encode_image_synthetic(std::string_view gt_caption, double noise_sigma, const EncoderSpec& spec,
                                       std::uint64_t noise_seed);

/// Seeded standard-normal vector; shares the generator used by the synthetic encoder.
std::vector<double> gaussian_vector(std::uint64_t seed, std::size_t dim);

class SyntheticEncoder final : public TextEncoder {
public:
    explicit SyntheticEncoder(EncoderSpec spec);

    std::vector<EmbeddingVector> encode(std::span<const std::string> texts) const override;
    std::size_t dim() const noexcept override { return spec_.dim; }
    std::string fingerprint() const override { return spec_.fingerprint(); }

private:
    EncoderSpec spec_;
};

/// Looks texts up in a precomputed F4E file whose record ids are the texts.
class FileEncoder final : public TextEncoder {
public:
    explicit FileEncoder(EncoderSpec spec);
    FileEncoder(std::vector<EmbeddingRecord> records, std::string fingerprint);

    std::vector<EmbeddingVector> encode(std::span<const std::string> texts) const override;
    std::size_t dim() const noexcept override { return dim_; }
    std::string fingerprint() const override { return fingerprint_; }

private:
    std::unordered_map<std::string, EmbeddingVector> table_;
    std::size_t dim_ = 0;
    std::string fingerprint_;
};

}  // namespace f4its
