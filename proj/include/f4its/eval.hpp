#pragma once

/** \file eval.hpp
 *  \brief Retrieval evaluation: Recall@k, variable-k mAP, corpus runs, weight sweeps.
 *
 * For the sparse (item) task each query's k is the number of items in its
 * ground-truth sparse caption; AP is truncated at k and divided by the number
 * of ground-truth ids, so stage-one misses lower the score.
 */

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "f4its/caption_index.hpp"
#include "f4its/encoder.hpp"
#include "f4its/retrieval.hpp"

namespace f4its {

/// 1 if any ground-truth id is among the first k entries, else 0.
int recall_at_k(const RankedList& ranked, std::span<const std::string> gt_ids, std::size_t k);

/// Truncated AP: (1/|gt|) * sum over hit ranks r <= k of hits_so_far / r.
double average_precision(const RankedList& ranked, std::span<const std::string> gt_ids, std::size_t k);

/// Number of item phrases in a ground-truth sparse caption.
std::size_t derive_k(std::string_view gt_sparse_caption);

struct EvalConfig {
    FusionWeights weights = FusionWeights::query_default();
    FusionWeights index_weights = FusionWeights::index_default();
    TextSource text_source = TextSource::dense;
    bool bidirectional = false;
    bool rerank = false;
    /// Rerank candidate pool; 0 means max(50, 5 * depth).
    std::size_t pool = 0;
    double rerank_blend = 0.0;
    /// Bundles evaluated concurrently. Reports do not depend on this.
    unsigned workers = 1;

    /// Image-only retrieval: w = (1, 0), no bi-directional scoring, no rerank.
    static EvalConfig baseline();
};

struct QueryResult {
    std::string image_id;
    std::size_t k = 1;
    /// 1-based rank of the best-placed ground-truth id within the evaluated list, 0 when absent.
    std::size_t gt_rank = 0;
    std::optional<double> ap;
    int hit_at_1 = 0;
    int hit_at_5 = 0;
};

struct EvalReport {
    std::string corpus_name;
    EvalConfig config;
    std::string encoder_fingerprint;
    std::string index_fingerprint;
    double recall_at_1 = 0.0;
    double recall_at_5 = 0.0;
    /// Present for sparse-index evaluations only.
    std::optional<double> mean_ap;
    std::vector<QueryResult> per_query;
    std::vector<std::string> warnings;
};

/// Runs the configured pipeline for one bundle and returns `depth` entries
/// (fewer when the index is smaller).
RankedList run_query(const QueryBundle& bundle, const CaptionIndex& index, const TextEncoder& encoder,
                     const EvalConfig& config, std::size_t depth);

EvalReport evaluate_corpus(std::span<const QueryBundle> bundles, const CaptionIndex& index,
                           const TextEncoder& encoder, const EvalConfig& config,
                           std::string corpus_name = "corpus");

enum class ReportFormat { json, csv };
ReportFormat parse_report_format(std::string_view name);

std::string format_report(const EvalReport& report, ReportFormat format);
void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);
/// One-line table-row style summary, e.g. "corpus | R@1 0.4120 | R@5 0.7350".
std::string summary_line(const EvalReport& report);

enum class SweepMetric { recall_at_1, recall_at_5, mean_ap };
std::string_view to_string(SweepMetric metric) noexcept;
SweepMetric parse_sweep_metric(std::string_view name);

struct SweepResult {
    std::vector<double> grid;
    std::vector<double> values;
    std::string metric_name;

    /// Grid point with the highest value; the first one on ties.
    double peak() const;
};

/// Evaluates `config` with weights (1 - g, g) for every g in `grid`.
SweepResult sweep_fusion_weight(std::span<const QueryBundle> bundles, const CaptionIndex& index,
                                const TextEncoder& encoder, std::span<const double> grid, EvalConfig config,
                                SweepMetric metric = SweepMetric::recall_at_1);

/// "w_text,metric" header then one row per grid point.
std::string format_sweep_csv(const SweepResult& sweep);

/// Evenly spaced grid 0, step, 2*step, ... up to 1 inclusive.
std::vector<double> grid_from_step(double step);

}  // namespace f4its
