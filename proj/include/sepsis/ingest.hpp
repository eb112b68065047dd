#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sepsis/catalog.hpp"
#include "sepsis/stay.hpp"

namespace sepsis {

struct RejectedEvent {
    RawEvent event;
    std::string reason;
};

struct FilterResult {
    std::vector<RawEvent> kept;
    std::vector<RejectedEvent> rejected;
};

/// Converts `event` into its variable's canonical unit. An empty unit is read
/// as already canonical. Throws SchemaError naming the unit when the catalog
/// lists no conversion for it.
RawEvent convert_to_canonical(const RawEvent& event, const VariableCatalog& catalog);

/// Batch form of convert_to_canonical: unknown variables, unknown units and
/// non-finite times/values end up in `rejected` instead of throwing.
FilterResult canonicalize(std::span<const RawEvent> events, const VariableCatalog& catalog);

/// Keeps events with plausible_min <= value <= plausible_max. Never throws.
FilterResult plausibility_filter(std::span<const RawEvent> events, const VariableCatalog& catalog);

struct ResampleOptions {
    bool include_pre_icu = false;
};

struct ResampleReport {
    std::size_t used = 0;
    std::size_t dropped_pre_icu = 0;
    std::size_t dropped_after_discharge = 0;
    std::size_t dropped_non_series = 0;
};

/// Hourly median per variable over [t, t+1). Events before admission either
/// seed carry-forward (include_pre_icu) or are dropped; events at or after
/// hour n_hours are dropped. All events must belong to `statics.stay_id`.
HourlyStay resample_hourly(std::span<const RawEvent> events, const StayStatic& statics,
                           CatalogPtr catalog, const ResampleOptions& options = {},
                           ResampleReport* report = nullptr);

/// Last observation carried forward without expiry. Counts are untouched, so
/// `counts[v][t] == 0` still marks hours that had no raw measurement.
HourlyStay carry_forward(HourlyStay stay);

/// Median of a non-empty range (mean of the middle pair for even sizes).
/// Reorders `values`.
double median_inplace(std::span<double> values);

} // namespace sepsis
