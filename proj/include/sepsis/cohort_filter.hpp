#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sepsis/sepsis3.hpp"
#include "sepsis/stay.hpp"

namespace sepsis {

enum class ExclusionReason {
    non_adult,
    short_stay,
    sparse_measurements,
    long_gap,
    onset_outside_icu,
    onset_too_early,
    onset_too_late,
    low_prevalence_site,
};

inline constexpr std::array kAllExclusionReasons = {
    ExclusionReason::non_adult,         ExclusionReason::short_stay,
    ExclusionReason::sparse_measurements, ExclusionReason::long_gap,
    ExclusionReason::onset_outside_icu, ExclusionReason::onset_too_early,
    ExclusionReason::onset_too_late,    ExclusionReason::low_prevalence_site,
};

std::string_view to_string(ExclusionReason r);
ExclusionReason exclusion_reason_from_string(std::string_view s);

struct Exclusion {
    ExclusionReason reason;
    double quantity = 0.0; // age, LOS, measured hours, gap length or onset
};

struct FilterRules {
    double min_age = 14.0;
    double min_los_hours = 6.0;
    int min_measured_hours = 4;
    int max_gap_hours = 12;
    double min_onset = 4.0;
    double max_onset = 168.0;
};

/// Number of distinct hours with at least one raw measurement of any series.
int measured_hours(const HourlyStay& stay);
/// Longest run of consecutive hours without any raw measurement.
int longest_gap(const HourlyStay& stay);

/// First matching rule in order: non-adult, short stay, sparse, long gap,
/// onset outside the stay, onset too early / too late. nullopt = pass.
std::optional<Exclusion> filter_stay(const HourlyStay& stay, const SepsisAnnotation& annotation,
                                     const FilterRules& rules = {});

struct SiteMember {
    std::string site_id;
    bool retained = true; // survived the per-stay rules
    bool is_case = false;
};

struct SitePrevalence {
    std::string site_id;
    std::size_t stays = 0;
    std::size_t cases = 0;
    double prevalence = 0.0;
    bool kept = true;
};

struct SiteFilterResult {
    bool applied = false; // false for single-site cohorts
    std::vector<std::string> kept;
    std::vector<std::string> dropped;
    std::vector<std::string> empty_sites; // declared but no retained stays
    std::vector<SitePrevalence> table;
};

/// Drops sites whose prevalence among retained stays is < min_prevalence.
/// Only applies when more than one site is declared.
SiteFilterResult filter_sites(std::span<const SiteMember> members, double min_prevalence = 0.15);

struct StudyFlowReport {
    std::size_t input = 0;
    std::size_t retained = 0;
    std::size_t retained_cases = 0;
    std::map<ExclusionReason, std::size_t> excluded;
    SiteFilterResult sites;

    bool reconciles() const;
    nlohmann::json to_json() const;
    std::string to_table() const;
};

struct StayVerdict {
    std::string stay_id;
    std::string site_id;
    bool is_case = false;
    std::optional<Exclusion> exclusion;
};

/// Applies the per-stay rules, then the site rule, and assembles the report.
/// `stays` and `annotations` are parallel.
StudyFlowReport run_exclusion_cascade(std::span<const HourlyStay> stays,
                                      std::span<const SepsisAnnotation> annotations,
                                      std::vector<StayVerdict>& verdicts,
                                      const FilterRules& rules = {}, double min_site_prevalence = 0.15);

} // namespace sepsis
