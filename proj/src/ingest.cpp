#include "sepsis/ingest.hpp"

#include <algorithm>
#include <cmath>

#include "sepsis/error.hpp"

namespace sepsis {

RawEvent convert_to_canonical(const RawEvent& event, const VariableCatalog& catalog) {
    const VariableInfo& info = catalog.at(event.variable);
    RawEvent out = event;
    if (event.unit.empty() || event.unit == info.canonical_unit) {
        out.unit = info.canonical_unit;
        return out;
    }
    for (const auto& c : info.conversions) {
        if (c.unit == event.unit) {
            out.value = c.a * event.value + c.b;
            out.unit = info.canonical_unit;
            return out;
        }
    }
    throw SchemaError("unknown unit '" + event.unit + "' for variable '" + event.variable + "'");
}

FilterResult canonicalize(std::span<const RawEvent> events, const VariableCatalog& catalog) {
    FilterResult r;
    r.kept.reserve(events.size());
    for (const auto& e : events) {
        if (!std::isfinite(e.time) || !std::isfinite(e.value)) {
            r.rejected.push_back({e, "non-finite time or value"});
            continue;
        }
        if (!catalog.find(e.variable)) {
            r.rejected.push_back({e, "unknown variable"});
            continue;
        }
        try {
            r.kept.push_back(convert_to_canonical(e, catalog));
        } catch (const SchemaError&) {
            r.rejected.push_back({e, "unknown unit '" + e.unit + "'"});
        }
    }
    return r;
}

FilterResult plausibility_filter(std::span<const RawEvent> events, const VariableCatalog& catalog) {
    FilterResult r;
    r.kept.reserve(events.size());
    for (const auto& e : events) {
        const VariableInfo* info = catalog.find(e.variable);
        if (!info) {
            r.rejected.push_back({e, "unknown variable"});
        } else if (!(e.value >= info->plausible_min)) {
            r.rejected.push_back({e, "below plausible_min " + std::to_string(info->plausible_min)});
        } else if (!(e.value <= info->plausible_max)) {
            r.rejected.push_back({e, "above plausible_max " + std::to_string(info->plausible_max)});
        } else {
            r.kept.push_back(e);
        }
    }
    return r;
}

double median_inplace(std::span<double> values) {
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return lower + (upper - lower) / 2.0;
}

HourlyStay resample_hourly(std::span<const RawEvent> events, const StayStatic& statics, CatalogPtr catalog,
                           const ResampleOptions& options, ResampleReport* report) {
    HourlyStay stay = HourlyStay::empty(catalog, statics);
    ResampleReport rep;
    const std::size_t nv = catalog->series_count();
    const auto n = static_cast<std::size_t>(stay.n_hours);
    std::vector<std::vector<double>> bucket(nv * n);
    std::vector<double> pre_time(nv, -INFINITY);
    std::vector<std::vector<double>> pre_values(nv);

    for (const auto& e : events) {
        if (e.stay_id != statics.stay_id)
            throw SchemaError("resample: event for stay '" + e.stay_id + "' passed with stay '" + statics.stay_id +
                              "'");
        auto vi = catalog->series_index(e.variable);
        if (!vi) {
            ++rep.dropped_non_series;
            continue;
        }
        if (e.time < 0.0) {
            ++rep.dropped_pre_icu;
            if (options.include_pre_icu) {
                if (e.time > pre_time[*vi]) {
                    pre_time[*vi] = e.time;
                    pre_values[*vi].clear();
                }
                if (e.time == pre_time[*vi]) pre_values[*vi].push_back(e.value);
            }
            continue;
        }
        const auto hour = static_cast<std::size_t>(std::floor(e.time));
        if (hour >= n) {
            ++rep.dropped_after_discharge;
            continue;
        }
        bucket[*vi * n + hour].push_back(e.value);
        ++rep.used;
    }
    for (std::size_t v = 0; v < nv; ++v) {
        if (!pre_values[v].empty()) stay.seed[v] = median_inplace(pre_values[v]);
        for (std::size_t t = 0; t < n; ++t) {
            auto& b = bucket[v * n + t];
            if (b.empty()) continue;
            stay.counts[v][t] = static_cast<int>(b.size());
            stay.values[v][t] = median_inplace(b);
        }
    }
    if (report) *report = rep;
    return stay;
}

HourlyStay carry_forward(HourlyStay stay) {
    for (std::size_t v = 0; v < stay.values.size(); ++v) {
        double last = stay.seed.empty() ? kMissing : stay.seed[v];
        for (double& x : stay.values[v]) {
            if (is_missing(x))
                x = last;
            else
                last = x;
        }
    }
    return stay;
}

} // namespace sepsis
