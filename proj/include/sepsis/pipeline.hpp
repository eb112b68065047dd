#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sepsis/cohort_filter.hpp"
#include "sepsis/evaluation.hpp"
#include "sepsis/features.hpp"
#include "sepsis/ingest.hpp"
#include "sepsis/models.hpp"
#include "sepsis/scores.hpp"
#include "sepsis/sepsis3.hpp"
#include "sepsis/synth.hpp"

namespace sepsis {

struct PipelineConfig {
    // paths (empty = not given / shipped default)
    std::string events;
    std::string statics;
    std::string treatments;
    std::string catalog;
    std::string score_definitions;
    std::string output_dir = "sepsis-out";

    bool include_pre_icu = false;
    SiDefinition si_definition = SiDefinition::fluid_abx;
    MultiAbxParams multi_abx;
    FeatureSet feature_set = FeatureSet::compact;
    bool include_static = true;
    bool normalize_pool = false;

    FilterRules filter;
    double min_site_prevalence = 0.15;

    std::vector<double> lambda_grid = default_lambda_grid();
    std::uint64_t split_seed = 0;
    int repetitions = 5;
    LassoOptions lasso;
    EvalConfig eval;
    SynthConfig synth;
    bool plots = false;

    /// Unknown keys are rejected with SchemaError.
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    CatalogPtr load_catalog() const;
    ScoreDefinitionsPtr load_score_definitions() const;
};

struct IngestSummary {
    std::size_t events = 0;
    std::size_t rejected_unit = 0;
    std::size_t rejected_plausibility = 0;
    std::size_t unknown_stay = 0;
    std::size_t dropped_pre_icu = 0;
    std::size_t dropped_after_discharge = 0;

    nlohmann::json to_json() const;
};

/// Canonicalizes, filters and resamples every stay in `statics`. The
/// returned grids are pre-carry.
std::vector<HourlyStay> ingest_cohort(std::span<const RawEvent> events, std::span<const StayStatic> statics,
                                      CatalogPtr catalog, const ResampleOptions& options,
                                      IngestSummary* summary = nullptr);

/// Matches logs to stays by id; stays without a log get an empty one.
std::vector<TreatmentLog> align_treatments(std::span<const StayStatic> statics, std::span<const TreatmentLog> logs);

struct StayRecord {
    HourlyStay grid; // carried forward
    TreatmentLog treatments;
    SofaHourly sofa;
    SepsisAnnotation annotation;
    std::optional<Exclusion> exclusion;
    bool retained = false;
};

struct PreparedCohort {
    CatalogPtr catalog;
    ScoreDefinitionsPtr definitions;
    std::vector<StayRecord> stays;
    StudyFlowReport flow;
    std::vector<StayVerdict> verdicts;
    IngestSummary ingest;

    std::vector<std::size_t> retained() const;
};

/// Ingest -> SOFA -> labels -> exclusion cascade.
PreparedCohort prepare_cohort(std::span<const RawEvent> events, std::span<const StayStatic> statics,
                              std::span<const TreatmentLog> treatments, const PipelineConfig& cfg);

/// Features for the given stays (indices into cohort.stays).
std::vector<FeatureMatrix> build_features(const PreparedCohort& cohort, std::span<const std::size_t> indices,
                                          const FeatureSpec& spec);

struct LambdaPoint {
    double lambda = 0.0;
    double validation_auroc = 0.0;
    std::size_t nonzero = 0;
};

struct TrainResult {
    double lambda = 0.0;
    std::vector<LambdaPoint> path;
    std::vector<LinearModel> models; // one per repetition
};

/// `features[i]` / `annotations[i]` describe stay i of the split's index
/// space. Lambda is chosen on repetition 0's validation split, then every
/// repetition is fitted at that lambda.
TrainResult train_repetitions(std::span<const FeatureMatrix> features, std::span<const SepsisAnnotation> annotations,
                              const DatasetSplit& split, const PipelineConfig& cfg);

struct RunAllResult {
    PreparedCohort cohort;
    std::vector<std::size_t> retained;
    DatasetSplit split;
    TrainResult training;
    /// Test-set evaluation of each repetition's model.
    std::vector<EvalReport> repetition_reports;
    /// Test streams of repetition 0's model.
    std::vector<ScoreStream> test_streams;
    std::vector<SepsisAnnotation> test_annotations;
    std::map<std::string, EvalReport> baselines;
    double mean_auroc = 0.0;
    double mean_precision = 0.0;
    double mean_earliness = 0.0;
    double seconds = 0.0;

    nlohmann::json summary() const;
};

RunAllResult run_all(std::span<const RawEvent> events, std::span<const StayStatic> statics,
                     std::span<const TreatmentLog> treatments, const PipelineConfig& cfg);

/// synth -> run_all.
RunAllResult run_all_synthetic(const PipelineConfig& cfg);

} // namespace sepsis
