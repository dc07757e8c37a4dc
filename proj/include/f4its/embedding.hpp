#pragma once

/** \file embedding.hpp
 *  \brief Embedding vectors, fusion weights and the similarity kernels.
 *
 * Everything here is a pure function of its inputs. Dot products always
 * accumulate in double precision, including when one side is a float row
 * taken from an index.
 */

#include <cstddef>
#include <span>
#include <vector>

namespace f4its {

/// Normalization tolerance: a vector flagged as normalized has |norm - 1| <= this.
inline constexpr double kUnitTolerance = 1e-6;
/// Norms at or below this are treated as zero.
inline constexpr double kZeroNorm = 1e-12;

/** \brief Fixed-dimension real vector with a unit-norm flag.
 *
 * Construction validates that every entry is finite, dim >= 1 and, when
 * `normalized` is requested, that the L2 norm is within kUnitTolerance of 1.
 */
class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values, bool normalized = false);

    static EmbeddingVector from_floats(std::span<const float> values, bool normalized = false);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    bool normalized() const noexcept { return normalized_; }
    double norm() const noexcept;

    std::vector<float> to_floats() const;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<double> values_;
    bool normalized_ = false;
};

/** \brief Complementary image/text weights for the weighted-sum fusion.
 *
 * Both weights lie in [0,1] and sum to 1 within 1e-9.
 */
class FusionWeights {
public:
    FusionWeights(double image, double text);

    /// (1 - text, text).
    static FusionWeights from_text_weight(double text);
    /// Query-side default, image 0.7 / text 0.3.
    static FusionWeights query_default() { return {0.7, 0.3}; }
    /// Index-side default for bi-directional scoring, image 0.3 / text 0.7.
    static FusionWeights index_default() { return {0.3, 0.7}; }
    /// Regime for noisy predicted text, image 0.95 / text 0.05.
    static FusionWeights noisy_text() { return {0.95, 0.05}; }
    /// Image only; fusion degenerates to the unfused query.
    static FusionWeights image_only() { return {1.0, 0.0}; }

    double image() const noexcept { return image_; }
    double text() const noexcept { return text_; }

    friend bool operator==(const FusionWeights&, const FusionWeights&) = default;

private:
    double image_;
    double text_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double dot(std::span<const double> a, std::span<const float> b) noexcept;
double squared_norm(std::span<const float> v) noexcept;

EmbeddingVector l2_normalize(const EmbeddingVector& v);

/// (a.b)/(|a||b|); a plain dot product when both inputs are flagged normalized.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/** \brief Weighted-sum fusion `w.image * image + w.text * text`.
 *
 * Both inputs must be flagged normalized. A zero weight returns the other
 * input unchanged, so w=(1,0) reproduces the image embedding bit for bit.
 */
EmbeddingVector fuse(const EmbeddingVector& image, const EmbeddingVector& text,
                     const FusionWeights& w, bool renormalize = true);

}  // namespace f4its
