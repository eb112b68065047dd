#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sepsis/stay.hpp"

namespace sepsis {

enum class CompareOp { lt, le, gt, ge };

std::string_view to_string(CompareOp op);
CompareOp compare_op_from_string(std::string_view s);

struct ScoreRule {
    std::string input;
    CompareOp op = CompareOp::lt;
    double value = 0.0;
    int points = 0;
    /// Flag inputs (e.g. "ventilated") that must be > 0 for the rule to fire.
    std::vector<std::string> requires_flags;
    /// Kept in the lab/vital-only variant of the score.
    bool partial = true;

    bool matches(double x) const;
};

/// A component scores the maximum points over its matching rules.
struct ScoreComponent {
    std::string name;
    std::vector<ScoreRule> rules;
};

struct ScoreDefinition {
    std::string id;
    std::string description;
    int min = 0;
    int max = 0;
    std::vector<ScoreComponent> components;
};

class ScoreDefinitions {
public:
    static std::shared_ptr<const ScoreDefinitions> from_json(const nlohmann::json& doc);
    static std::shared_ptr<const ScoreDefinitions> load(const std::filesystem::path& path);
    static std::shared_ptr<const ScoreDefinitions> default_definitions();

    const std::string& version() const { return version_; }
    const std::vector<ScoreDefinition>& scores() const { return scores_; }
    const ScoreDefinition* find(std::string_view id) const;
    /// Throws std::invalid_argument for unknown ids.
    const ScoreDefinition& at(std::string_view id) const;

private:
    std::string version_;
    std::vector<ScoreDefinition> scores_;
};

using ScoreDefinitionsPtr = std::shared_ptr<const ScoreDefinitions>;

/// Inputs computed from more than one grid variable or from treatments.
namespace derived_input {
inline constexpr std::string_view pf_ratio = "pf_ratio";
inline constexpr std::string_view gcs = "gcs";
inline constexpr std::string_view urine_24h = "urine_24h";
inline constexpr std::string_view norepi_rate = "norepi_rate";
inline constexpr std::string_view epi_rate = "epi_rate";
inline constexpr std::string_view dopa_rate = "dopa_rate";
inline constexpr std::string_view dobu_rate = "dobu_rate";
inline constexpr std::string_view ventilated = "ventilated";
} // namespace derived_input

inline constexpr long kUrineMinHour = 12;
inline constexpr long kUrineWindowHours = 24;

/// Hourly values of every score input for one stay.
///
/// Grid variables are read from the carried-forward grid. Treatment-derived
/// inputs (vasopressor rates, ventilation, sedation forcing of the GCS) are
/// only available when `use_treatments` is set; otherwise they are missing.
class ScoreInputs {
public:
    ScoreInputs(const HourlyStay& filled, const TreatmentLog* treatments);

    long n_hours() const { return n_hours_; }
    bool use_treatments() const { return treatments_ != nullptr; }
    /// NaN when the input is unavailable at that hour.
    double get(std::string_view input, long hour) const;

    double gcs(long hour) const;
    double urine_24h(long hour) const;
    double pf_ratio(long hour) const;
    bool sedated(long hour) const;

private:
    const HourlyStay& stay_;
    const TreatmentLog* treatments_;
    long n_hours_;
    std::vector<double> urine_prefix_;      // running sum of raw hourly urine
    std::vector<int> urine_obs_prefix_;     // running count of hours with urine
};

/// Per-hour component values (rows = components in definition order).
std::vector<std::vector<int>> score_components(const ScoreDefinition& def, const ScoreInputs& inputs,
                                               bool partial);

enum class SofaComponent { respiratory, coagulation, liver, cardiovascular, cns, renal };
inline constexpr std::array<std::string_view, 6> kSofaComponentNames = {
    "respiratory", "coagulation", "liver", "cardiovascular", "cns", "renal"};

struct SofaHourly {
    std::vector<int> total;
    std::array<std::vector<int>, 6> components;

    long n_hours() const { return static_cast<long>(total.size()); }
    const std::vector<int>& component(SofaComponent c) const {
        return components[static_cast<std::size_t>(c)];
    }
};

struct ScoreSeries {
    std::string score_id;
    std::vector<int> values;
};

/// `filled` must be the carried-forward grid.
SofaHourly sofa_hourly(const HourlyStay& filled, const TreatmentLog& treatments,
                       const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());

ScoreSeries score_hourly(std::string_view score_id, const HourlyStay& filled, const TreatmentLog& treatments,
                         const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());
ScoreSeries sirs_hourly(const HourlyStay& filled, const TreatmentLog& treatments,
                        const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());
ScoreSeries qsofa_hourly(const HourlyStay& filled, const TreatmentLog& treatments,
                         const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());
ScoreSeries mews_hourly(const HourlyStay& filled, const TreatmentLog& treatments,
                        const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());
ScoreSeries news_hourly(const HourlyStay& filled, const TreatmentLog& treatments,
                        const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());

/// Baseline scores reported as clinical comparators.
inline constexpr std::array<std::string_view, 5> kBaselineScoreIds = {"sofa", "sirs", "qsofa", "mews", "news"};
/// Lab/vital-only variants used as model features, in feature order.
inline constexpr std::array<std::string_view, 5> kPartialScoreIds = {
    "sofa-partial", "sirs-partial", "mews-partial", "news-partial", "qsofa-partial"};

/// Accepts "sofa" or "sofa-partial". Treatment-dependent rules are dropped
/// and treatments are never consulted. Throws std::invalid_argument for ids
/// without a partial definition.
ScoreSeries partial_score_hourly(std::string_view score_id, const HourlyStay& filled,
                                 const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());

std::vector<ScoreSeries> partial_scores(const HourlyStay& filled,
                                        const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());
std::vector<ScoreSeries> baseline_scores(const HourlyStay& filled, const TreatmentLog& treatments,
                                         const ScoreDefinitions& defs = *ScoreDefinitions::default_definitions());

} // namespace sepsis
