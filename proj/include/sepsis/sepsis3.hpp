#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sepsis/stay.hpp"

namespace sepsis {

struct SofaHourly;

enum class SiDefinition { fluid_abx, multi_abx };

std::string_view to_string(SiDefinition d);
SiDefinition si_definition_from_string(std::string_view s);

inline constexpr double kSiWindowBefore = 48.0;
inline constexpr double kSiWindowAfter = 24.0;
/// Antibiotics first: sampling must follow within this many hours.
inline constexpr double kAbxToSamplingMax = 24.0;
/// Sampling first: antibiotics must follow within this many hours.
inline constexpr double kSamplingToAbxMax = 72.0;

struct SiWindow {
    double si_time = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    SiDefinition definition = SiDefinition::fluid_abx;

    static SiWindow at(double si_time, SiDefinition definition) {
        return {si_time, si_time - kSiWindowBefore, si_time + kSiWindowAfter, definition};
    }
    bool contains(double t) const { return window_start <= t && t <= window_end; }
};

/// Suspected infection from antibiotic / body-fluid sampling co-occurrence.
std::vector<SiWindow> detect_si_fluid_abx(const TreatmentLog& treatments);

struct MultiAbxParams {
    int min_administrations = 2;
    double max_span = 24.0;
};

/// Suspected infection from repeated antibiotic administrations.
std::vector<SiWindow> detect_si_multi_abx(const TreatmentLog& treatments,
                                          const MultiAbxParams& params = {});

std::vector<SiWindow> detect_si(const TreatmentLog& treatments, SiDefinition definition,
                                const MultiAbxParams& params = {});

/// Collapses SI times whose windows overlap (transitively) into the earliest
/// time of each group. Input need not be sorted.
std::vector<SiWindow> merge_si_times(std::vector<double> si_times, SiDefinition definition);

inline constexpr int kSofaIncrease = 2;
inline constexpr long kSofaBaselineHours = 24;

/// Earliest hour inside any SI window whose SOFA total exceeds the minimum of
/// the trailing 24 h (inclusive, clipped at admission) by at least 2.
std::optional<double> detect_onset(const SofaHourly& sofa, std::span<const SiWindow> windows);
std::optional<double> detect_onset(std::span<const int> sofa_total, std::span<const SiWindow> windows);

inline constexpr double kLabelLead = 6.0;
inline constexpr double kLabelTrail = 24.0;

struct SepsisAnnotation {
    std::string stay_id;
    long n_hours = 0;
    std::vector<SiWindow> si_windows;
    std::optional<double> onset;
    std::vector<std::uint8_t> labels;
    /// onset + 24 for cases; hours beyond it are neither trained on nor evaluated.
    std::optional<double> truncate_after;

    bool is_case() const { return onset.has_value(); }
    bool excluded(long hour) const { return truncate_after && static_cast<double>(hour) > *truncate_after; }
    /// Number of leading hours that are used for training and evaluation.
    long exposed_hours() const;
};

/// Per-hour labels: 1 on ceil(onset-6) <= t <= floor(onset+24), clipped to
/// the grid. Throws std::invalid_argument when the onset is outside the grid.
SepsisAnnotation build_labels(std::string stay_id, long n_hours, std::optional<double> onset,
                              std::vector<SiWindow> windows = {});
SepsisAnnotation build_labels(const HourlyStay& stay, std::optional<double> onset,
                              std::vector<SiWindow> windows = {});

/// |a ∩ b| / |a ∪ b|, 1 when both are empty.
double jaccard_si(const std::set<std::string>& a, const std::set<std::string>& b);

} // namespace sepsis
