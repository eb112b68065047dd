#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sepsis/models.hpp"
#include "sepsis/sepsis3.hpp"

namespace sepsis {

enum class ThresholdTie { ge, gt };

std::string_view to_string(ThresholdTie t);
ThresholdTie threshold_tie_from_string(std::string_view s);

enum class ThresholdMode {
    trimmed_grid, // n evenly spaced thresholds over the trimmed score range
    exact,        // every distinct hourly score
};

struct EvalConfig {
    double trim_fraction = 0.005;
    int n_thresholds = 100;
    double target_recall = 0.80;
    double target_prevalence = 0.17;
    int n_subsamplings = 10;
    std::uint64_t seed = 0;
    ThresholdTie tie = ThresholdTie::ge;
    ThresholdMode mode = ThresholdMode::trimmed_grid;

    /// Throws InfeasibleError for out-of-range fields.
    void validate() const;
    nlohmann::json to_json() const;
    static EvalConfig from_json(const nlohmann::json& j, EvalConfig base);
    static EvalConfig from_json(const nlohmann::json& j) { return from_json(j, EvalConfig()); }
};

/// Percentile q in [0, 1] of sorted data, interpolating linearly between
/// the order statistics at positions q * (n - 1).
double percentile_sorted(std::span<const double> sorted, double q);

struct ThresholdGrid {
    std::vector<double> thresholds; // ascending
    double lo = 0.0;
    double hi = 0.0;
    bool degenerate = false;
};

/// Evenly spaced thresholds over [p(trim), p(1 - trim)] of the pooled scores.
ThresholdGrid threshold_grid(std::span<const double> scores, const EvalConfig& cfg = {});

/// A stay's score stream restricted to the hours it exposes for evaluation.
struct EvalStay {
    std::string stay_id;
    bool is_case = false;
    std::optional<double> onset;
    std::vector<double> scores;
};

/// Pairs streams with annotations by stay id and cuts case streams after
/// onset + 24 h. Throws std::invalid_argument for unmatched ids.
std::vector<EvalStay> make_eval_stays(std::span<const ScoreStream> streams,
                                      std::span<const SepsisAnnotation> annotations);

struct EncounterOutcome {
    std::string stay_id;
    bool is_case = false;
    std::optional<double> alarm_time;
    std::optional<double> onset;
};

struct Confusion {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;

    double recall() const;
    double fpr() const;
    /// NaN when nothing alarmed.
    double precision() const;
};

struct SweepResult {
    std::vector<EncounterOutcome> outcomes;
    Confusion confusion;
    /// Median of onset - alarm over true positives, NaN when there are none.
    double median_earliness = 0.0;
};

SweepResult encounter_sweep(std::span<const EvalStay> stays, double threshold, ThresholdTie tie = ThresholdTie::ge);

struct ThresholdMetrics {
    double threshold = 0.0;
    Confusion confusion;
    double recall = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
    double median_earliness = 0.0;
};

/// Sweeps every threshold without materializing per-stay outcomes.
std::vector<ThresholdMetrics> sweep_thresholds(std::span<const EvalStay> stays, std::span<const double> thresholds,
                                               ThresholdTie tie = ThresholdTie::ge);

struct RocCurve {
    std::vector<std::pair<double, double>> points; // (fpr, tpr), sorted, with anchors
    double auroc = 0.0;
};

/// Throws std::invalid_argument when there are no cases or no controls.
RocCurve roc_auroc(std::span<const ThresholdMetrics> metrics);

struct FixedRecall {
    bool attained = false;
    double threshold = 0.0;
    double precision = 0.0;
    double median_earliness = 0.0;
};

FixedRecall at_fixed_recall(std::span<const ThresholdMetrics> metrics, double target_recall = 0.80);

struct EvalReport {
    std::size_t n_cases = 0;
    std::size_t n_controls = 0;
    bool degenerate_grid = false;
    std::vector<ThresholdMetrics> metrics;
    RocCurve roc;
    FixedRecall at_recall;
    double target_recall = 0.80;
    // Prevalence-harmonized summary (means over subsamples).
    std::size_t n_subsamples = 0;
    double coverage = 1.0;
    bool harmonization_flagged = false;
    double mean_auroc = 0.0;
    double mean_precision = 0.0;
    double mean_earliness = 0.0;
    std::size_t recall_attained_in = 0;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    std::string roc_csv() const;
    std::string metrics_csv() const;
};

/// Full-cohort evaluation without subsampling.
EvalReport evaluate(std::span<const EvalStay> stays, const EvalConfig& cfg = {});

struct Harmonization {
    std::vector<std::vector<std::size_t>> subsamples; // indices into the cohort
    double coverage = 1.0;
    bool flagged = false; // target unreachable, cohort used as-is
    bool subsampled_cases = false;
};

Harmonization harmonize_prevalence(std::span<const std::uint8_t> is_case, double target = 0.17, int reps = 10,
                                   std::uint64_t seed = 0);

/// Full-cohort curve plus means over prevalence-harmonized subsamples.
EvalReport evaluate_harmonized(std::span<const EvalStay> stays, const EvalConfig& cfg = {});

struct SplitRepetition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

struct DatasetSplit {
    std::vector<std::size_t> test;
    std::vector<SplitRepetition> repetitions;
};

/// Stratified by case status: 10 % test (fixed), then per repetition 10 %
/// validation and the rest train. Throws InfeasibleError if a stratum would
/// leave a split without members of that class.
DatasetSplit split_dataset(std::span<const std::uint8_t> is_case, std::uint64_t seed, int repetitions = 5,
                           double test_fraction = 0.1, double validation_fraction = 0.1);

std::string roc_svg(const EvalReport& report, std::string_view title = "ROC");
std::string precision_earliness_svg(const EvalReport& report, std::string_view title = "Precision vs earliness");

} // namespace sepsis
