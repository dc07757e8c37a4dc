#include "f4its/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "f4its/error.hpp"
#include "f4its/remote_encoder.hpp"

namespace f4its {

std::string_view to_string(EncoderKind kind) noexcept {
    switch (kind) {
        case EncoderKind::file: return "file";
        case EncoderKind::synthetic: return "synthetic";
        case EncoderKind::remote: return "remote";
    }
    return "unknown";
}

EncoderKind parse_encoder_kind(std::string_view name) {
    if (name == "file") return EncoderKind::file;
    if (name == "synthetic") return EncoderKind::synthetic;
    if (name == "remote") return EncoderKind::remote;
    throw Error(ErrorCode::InvalidArgument, "unknown encoder kind '" + std::string(name) + "'");
}

void EncoderSpec::validate() const {
    if (dim < 8) {
        throw Error(ErrorCode::InvalidArgument, "encoder dim must be >= 8, got " + std::to_string(dim));
    }
    if (kind == EncoderKind::remote && endpoint.empty()) {
        throw Error(ErrorCode::InvalidArgument, "remote encoder requires an endpoint");
    }
    if (kind == EncoderKind::remote && (batch_size == 0 || max_attempts < 1 || max_in_flight == 0)) {
        throw Error(ErrorCode::InvalidArgument, "remote encoder needs batch_size, max_attempts, max_in_flight >= 1");
    }
}

std::string EncoderSpec::fingerprint() const {
    const std::string d = ":dim=" + std::to_string(dim);
    switch (kind) {
        case EncoderKind::synthetic: return "synthetic" + d + ":seed=" + std::to_string(seed);
        case EncoderKind::remote: return "remote" + d + ":endpoint=" + endpoint;
        case EncoderKind::file: return "file" + d + ":path=" + path.string();
    }
    return "unknown";
}

EmbeddingVector TextEncoder::encode_one(const std::string& text) const {
    auto out = encode(std::span<const std::string>(&text, 1));
    return std::move(out.front());
}

std::unique_ptr<TextEncoder> make_encoder(EncoderSpec spec) {
    if (spec.kind == EncoderKind::remote && spec.endpoint.empty()) {
        if (const char* env = std::getenv(kEndpointEnvVar); env != nullptr) {
            spec.endpoint = env;
        }
    }
    switch (spec.kind) {
        case EncoderKind::synthetic: return std::make_unique<SyntheticEncoder>(std::move(spec));
        case EncoderKind::file: return std::make_unique<FileEncoder>(std::move(spec));
        case EncoderKind::remote: return std::make_unique<RemoteEncoder>(std::move(spec));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown encoder kind");
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (ch == ',' || std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            continue;
        } else {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        }
    }
    flush();
    return tokens;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Box-Muller over mt19937_64 bits. std::normal_distribution is not specified
// bit-for-bit across standard libraries, this is.
void fill_gaussian(std::mt19937_64& rng, std::span<double> out) {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    for (std::size_t i = 0; i < out.size(); i += 2) {
        const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;  // (0, 1]
        const double u2 = static_cast<double>(rng() >> 11) * kScale;          // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(theta);
        if (i + 1 < out.size()) {
            out[i + 1] = r * std::sin(theta);
        }
    }
}

void check_synthetic(const EncoderSpec& spec) {
    if (spec.kind != EncoderKind::synthetic) {
        throw Error(ErrorCode::InvalidArgument, "encoder spec is not synthetic");
    }
    spec.validate();
}

}  // namespace

std::vector<double> gaussian_vector(std::uint64_t seed, std::size_t dim) {
    std::mt19937_64 rng(splitmix64(seed));
    std::vector<double> out(dim);
    fill_gaussian(rng, out);
    return out;
}

EmbeddingVector token_vector(std::string_view token, std::uint64_t seed, std::size_t dim) {
    std::mt19937_64 rng(splitmix64(fnv1a(token) ^ splitmix64(seed)));
    std::vector<double> v(dim);
    fill_gaussian(rng, v);
    return l2_normalize(EmbeddingVector(std::move(v)));
}

EmbeddingVector encode_text_synthetic(std::string_view text, const EncoderSpec& spec) {
    check_synthetic(spec);
    auto tokens = tokenize(text);
    if (tokens.empty()) {
        throw Error(ErrorCode::EmptyText, "no tokens in text '" + std::string(text) + "'");
    }
    // Sorted so that any permutation of the same token multiset sums identically.
    std::sort(tokens.begin(), tokens.end());

    std::vector<double> sum(spec.dim, 0.0);
    std::string_view previous;
    std::vector<double> tv;
    for (const auto& tok : tokens) {
        if (tok != previous) {
            auto v = token_vector(tok, spec.seed, spec.dim);
            tv.assign(v.values().begin(), v.values().end());
            previous = tok;
        }
        for (std::size_t i = 0; i < spec.dim; ++i) {
            sum[i] += tv[i];
        }
    }
    return l2_normalize(EmbeddingVector(std::move(sum)));
}

EmbeddingVector encode_image_synthetic(std::string_view gt_caption, double noise_sigma, const EncoderSpec& spec,
                                       std::uint64_t noise_seed) {
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw Error(ErrorCode::InvalidArgument, "noise sigma must be finite and >= 0");
    }
    auto clean = encode_text_synthetic(gt_caption, spec);
    if (noise_sigma == 0.0) {
        return clean;
    }
    const auto noise = gaussian_vector(noise_seed, spec.dim);
    std::vector<double> out(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i) {
        out[i] = clean[i] + noise_sigma * noise[i];
    }
    return l2_normalize(EmbeddingVector(std::move(out)));
}

SyntheticEncoder::SyntheticEncoder(EncoderSpec spec) : spec_(std::move(spec)) {
    check_synthetic(spec_);
}

std::vector<EmbeddingVector> SyntheticEncoder::encode(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(encode_text_synthetic(t, spec_));
    }
    return out;
}

FileEncoder::FileEncoder(EncoderSpec spec)
    : FileEncoder(load_embedding_file(spec.path), spec.fingerprint()) {
    if (dim_ != 0 && dim_ != spec.dim) {
        throw Error(ErrorCode::DimMismatch, "embedding file has dim " + std::to_string(dim_) + ", spec says " +
                                                std::to_string(spec.dim));
    }
}

FileEncoder::FileEncoder(std::vector<EmbeddingRecord> records, std::string fingerprint)
    : fingerprint_(std::move(fingerprint)) {
    for (auto& r : records) {
        dim_ = r.vector.dim();
        table_.emplace(std::move(r.id), std::move(r.vector));
    }
}

std::vector<EmbeddingVector> FileEncoder::encode(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(t);
        if (it == table_.end()) {
            throw Error(ErrorCode::UnknownId, "no precomputed embedding for text '" + t + "'");
        }
        out.push_back(it->second);
    }
    return out;
}

}  // namespace f4its
