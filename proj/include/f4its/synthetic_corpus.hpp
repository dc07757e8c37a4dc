#pragma once

/** \file synthetic_corpus.hpp
 *  \brief Seeded desk-scale corpora for offline evaluation.
 *
 * Dense task: one templated dish description per caption; each query image is
 * a noisy synthetic view of its caption and carries predicted dense/sparse
 * texts that miss a `dropout` fraction of the items.
 *
 * Sparse task: one ingredient phrase per caption; each query image mixes its
 * ground-truth ingredients with a few token-disjoint distractor ingredients,
 * so the distractors dominate image similarity while item-level matching
 * still separates them.
 *
 * Every corpus ships a manifest with baseline (image-only) metrics computed by
 * the naive reference scan at generation time.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "f4its/caption_index.hpp"
#include "f4its/encoder.hpp"
#include "f4its/retrieval.hpp"

namespace f4its {

enum class CorpusTask { dense, sparse };

std::string_view to_string(CorpusTask task) noexcept;
CorpusTask parse_corpus_task(std::string_view name);

struct SyntheticParams {
    CorpusTask task = CorpusTask::dense;
    std::size_t vocab_size = 0;     // 0: task default
    std::size_t num_captions = 0;   // 0: task default
    std::size_t num_queries = 0;    // 0: task default
    std::size_t items_min = 3;
    std::size_t items_max = 6;
    double noise_sigma = -1.0;      // < 0: task default
    double dropout = -1.0;          // < 0: task default
    std::uint64_t seed = 42;
    std::size_t dim = 64;
    std::size_t distractors = 3;    // sparse task
    double distractor_weight = 0.8; // sparse task

    /// Fills task defaults for zero/negative fields.
    SyntheticParams resolved() const;
    /// Throws InvalidArgument on inconsistent or degenerate settings (e.g. dropout >= 1).
    void validate() const;
};

struct BaselineMetrics {
    double recall_at_1 = 0.0;
    double recall_at_5 = 0.0;
    std::optional<double> mean_ap;
};

struct SyntheticCorpus {
    SyntheticParams params;
    EncoderSpec encoder;
    std::vector<Caption> captions;
    std::vector<QueryBundle> bundles;
    BaselineMetrics baseline;
};

SyntheticCorpus generate_corpus(const SyntheticParams& params);

/// Image-only metrics from the naive reference scan.
BaselineMetrics oracle_baseline(std::span<const QueryBundle> bundles, const CaptionIndex& index);

std::string format_manifest(const SyntheticCorpus& corpus);

/// Writes captions.jsonl, images.f4e, bundles.jsonl, index.f4i and manifest.json into `out_dir`.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir);

}  // namespace f4its
