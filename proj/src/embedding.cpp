#include "f4its/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "f4its/error.hpp"

namespace f4its {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::InvalidWeights: return "InvalidWeights";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::TextTooLong: return "TextTooLong";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionUnsupported: return "VersionUnsupported";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MixedDims: return "MixedDims";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::ServiceUnreachable: return "ServiceUnreachable";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::RemoteError: return "RemoteError";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::MixedKinds: return "MixedKinds";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::UnknownKind: return "UnknownKind";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::MissingPredictionText: return "MissingPredictionText";
        case ErrorCode::UnknownCandidateId: return "UnknownCandidateId";
        case ErrorCode::NoItems: return "NoItems";
        case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
        case ErrorCode::UnknownGroundTruth: return "UnknownGroundTruth";
        case ErrorCode::ConfigConflict: return "ConfigConflict";
    }
    return "Unknown";
}

EmbeddingVector::EmbeddingVector(std::vector<double> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
    if (values_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
    }
    for (double x : values_) {
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::NonFinite, "embedding contains NaN or Inf");
        }
    }
    if (normalized_ && std::abs(norm() - 1.0) > kUnitTolerance) {
        throw Error(ErrorCode::NotNormalized, "vector flagged normalized has norm " + std::to_string(norm()));
    }
}

EmbeddingVector EmbeddingVector::from_floats(std::span<const float> values, bool normalized) {
    return EmbeddingVector(std::vector<double>(values.begin(), values.end()), normalized);
}

double EmbeddingVector::norm() const noexcept {
    return std::sqrt(dot(values_, values_));
}

std::vector<float> EmbeddingVector::to_floats() const {
    return {values_.begin(), values_.end()};
}

FusionWeights::FusionWeights(double image, double text) : image_(image), text_(text) {
    if (!(image >= 0.0 && image <= 1.0 && text >= 0.0 && text <= 1.0)) {
        throw Error(ErrorCode::InvalidWeights, "fusion weights must lie in [0,1]");
    }
    if (std::abs(image + text - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidWeights, "fusion weights must sum to 1");
    }
}

FusionWeights FusionWeights::from_text_weight(double text) {
    return {1.0 - text, text};
}

namespace {

// Four independent accumulators; the summation order is fixed, so every caller
// sees bitwise-identical results for identical inputs.
template <typename A, typename B>
double dot_impl(const A* a, const B* b, std::size_t n) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    }
    for (; i < n; ++i) {
        s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return (s0 + s1) + (s2 + s3);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return dot_impl(a.data(), b.data(), std::min(a.size(), b.size()));
}

double dot(std::span<const double> a, std::span<const float> b) noexcept {
    return dot_impl(a.data(), b.data(), std::min(a.size(), b.size()));
}

double squared_norm(std::span<const float> v) noexcept {
    return dot_impl(v.data(), v.data(), v.size());
}

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    const double n = v.norm();
    if (n <= kZeroNorm) {
        throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    }
    std::vector<double> out(v.values().begin(), v.values().end());
    for (double& x : out) {
        x /= n;
    }
    return EmbeddingVector(std::move(out), true);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of dim " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
    const double ab = dot(a.values(), b.values());
    if (a.normalized() && b.normalized()) {
        return ab;
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (na <= kZeroNorm || nb <= kZeroNorm) {
        throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    }
    return ab / (na * nb);
}

EmbeddingVector fuse(const EmbeddingVector& image, const EmbeddingVector& text,
                     const FusionWeights& w, bool renormalize) {
    if (image.dim() != text.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "fuse of dim " + std::to_string(image.dim()) + " vs " + std::to_string(text.dim()));
    }
    if (!image.normalized() || !text.normalized()) {
        throw Error(ErrorCode::NotNormalized, "fusion inputs must be L2-normalized");
    }
    if (w.text() == 0.0) {
        return image;
    }
    if (w.image() == 0.0) {
        return text;
    }
    std::vector<double> out(image.dim());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = w.image() * image[i] + w.text() * text[i];
    }
    EmbeddingVector fused(std::move(out));
    if (fused.norm() <= kZeroNorm) {
        throw Error(ErrorCode::ZeroVector, "fused embedding is the zero vector");
    }
    return renormalize ? l2_normalize(fused) : fused;
}

}  // namespace f4its
