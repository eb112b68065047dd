#include "sepsis/stay.hpp"

#include <cmath>

#include "sepsis/error.hpp"

namespace sepsis {

std::string_view to_string(Sex s) {
    switch (s) {
    case Sex::female: return "female";
    case Sex::male: return "male";
    case Sex::unknown: return "unknown";
    }
    return "unknown";
}

Sex sex_from_string(std::string_view s) {
    if (s == "female" || s == "f" || s == "F") return Sex::female;
    if (s == "male" || s == "m" || s == "M") return Sex::male;
    if (s.empty() || s == "unknown" || s == "other") return Sex::unknown;
    throw SchemaError("unknown sex '" + std::string(s) + "'");
}

std::string_view to_string(Vasopressor v) {
    switch (v) {
    case Vasopressor::norepinephrine: return "norepinephrine";
    case Vasopressor::epinephrine: return "epinephrine";
    case Vasopressor::dopamine: return "dopamine";
    case Vasopressor::dobutamine: return "dobutamine";
    }
    return "?";
}

Vasopressor vasopressor_from_string(std::string_view s) {
    if (s == "norepinephrine") return Vasopressor::norepinephrine;
    if (s == "epinephrine") return Vasopressor::epinephrine;
    if (s == "dopamine") return Vasopressor::dopamine;
    if (s == "dobutamine") return Vasopressor::dobutamine;
    throw SchemaError("unknown vasopressor agent '" + std::string(s) + "'");
}

void TreatmentLog::validate() const {
    auto check_time = [&](double t) {
        if (!std::isfinite(t)) throw SchemaError("treatments for " + stay_id + ": non-finite time");
    };
    auto check_interval = [&](const Interval& iv) {
        check_time(iv.start);
        check_time(iv.end);
        if (iv.start > iv.end) throw SchemaError("treatments for " + stay_id + ": interval start after end");
    };
    for (double t : antibiotics) check_time(t);
    for (double t : fluid_samplings) check_time(t);
    for (const auto& v : vasopressors) {
        check_interval(v.span);
        if (!std::isfinite(v.rate) || v.rate < 0)
            throw SchemaError("treatments for " + stay_id + ": invalid vasopressor rate");
    }
    for (const auto& iv : ventilation) check_interval(iv);
    for (const auto& iv : sedation) check_interval(iv);
}

TreatmentLog TreatmentLog::shifted(double dt) const {
    TreatmentLog out = *this;
    for (double& t : out.antibiotics) t += dt;
    for (double& t : out.fluid_samplings) t += dt;
    for (auto& v : out.vasopressors) {
        v.span.start += dt;
        v.span.end += dt;
    }
    for (auto& iv : out.ventilation) {
        iv.start += dt;
        iv.end += dt;
    }
    for (auto& iv : out.sedation) {
        iv.start += dt;
        iv.end += dt;
    }
    return out;
}

std::span<const double> HourlyStay::series(std::string_view id) const {
    return values[catalog->require_series(id)];
}

std::span<const int> HourlyStay::series_counts(std::string_view id) const {
    return counts[catalog->require_series(id)];
}

HourlyStay HourlyStay::empty(CatalogPtr catalog, StayStatic statics) {
    if (!(statics.icu_los_hours > 0))
        throw SchemaError("stay " + statics.stay_id + ": icu_los_hours must be > 0");
    HourlyStay s;
    s.stay_id = statics.stay_id;
    s.n_hours = static_cast<long>(std::ceil(statics.icu_los_hours));
    const std::size_t nv = catalog->series_count();
    s.values.assign(nv, std::vector<double>(static_cast<std::size_t>(s.n_hours), kMissing));
    s.counts.assign(nv, std::vector<int>(static_cast<std::size_t>(s.n_hours), 0));
    s.seed.assign(nv, kMissing);
    s.catalog = std::move(catalog);
    s.statics = std::move(statics);
    return s;
}

} // namespace sepsis
