#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepsis/catalog.hpp"

namespace sepsis {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double x) { return std::isnan(x); }

/// One timestamped measurement. Times are hours relative to ICU admission.
struct RawEvent {
    std::string stay_id;
    std::string variable;
    double time = 0.0;
    double value = 0.0;
    std::string unit;
};

enum class Sex { female, male, unknown };

std::string_view to_string(Sex s);
Sex sex_from_string(std::string_view s);

struct StayStatic {
    std::string stay_id;
    double age = kMissing;
    Sex sex = Sex::unknown;
    double height = kMissing;
    double weight = kMissing;
    double icu_los_hours = 0.0;
    std::string site_id;
};

enum class Vasopressor { norepinephrine, epinephrine, dopamine, dobutamine };

std::string_view to_string(Vasopressor v);
Vasopressor vasopressor_from_string(std::string_view s);

struct Interval {
    double start = 0.0;
    double end = 0.0;

    /// Whether the interval touches hour bucket [hour, hour + 1).
    bool active_in_hour(long hour) const {
        const double lo = static_cast<double>(hour);
        if (start == end) return start >= lo && start < lo + 1.0;
        return start < lo + 1.0 && end > lo;
    }
};

struct VasopressorInfusion {
    Vasopressor agent = Vasopressor::norepinephrine;
    Interval span;
    double rate = 0.0; // ug/kg/min
};

struct TreatmentLog {
    std::string stay_id;
    std::vector<double> antibiotics;
    std::vector<double> fluid_samplings;
    std::vector<VasopressorInfusion> vasopressors;
    std::vector<Interval> ventilation;
    std::vector<Interval> sedation;

    /// Throws SchemaError if any interval has start > end or a time is non-finite.
    void validate() const;
    /// Adds `dt` to every time.
    TreatmentLog shifted(double dt) const;
};

/// Hourly grid of one stay. Hour t covers [t, t+1).
///
/// `values[v][t]` is the canonical-unit value (NaN when absent) and
/// `counts[v][t]` the number of raw measurements that fell into the bucket.
/// Before carry-forward, counts == 0 exactly where the value is absent.
/// `seed[v]` holds the last pre-admission observation when pre-ICU data are
/// folded in; it only feeds carry-forward.
struct HourlyStay {
    std::string stay_id;
    StayStatic statics;
    long n_hours = 0;
    CatalogPtr catalog;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<int>> counts;
    std::vector<double> seed;

    std::span<const double> series(std::string_view id) const;
    std::span<const int> series_counts(std::string_view id) const;
    double value(std::string_view id, long hour) const { return series(id)[static_cast<std::size_t>(hour)]; }

    /// Empty grid sized for `statics.icu_los_hours`.
    static HourlyStay empty(CatalogPtr catalog, StayStatic statics);
};

} // namespace sepsis
