#include "sepsis/sepsis3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sepsis/error.hpp"
#include "sepsis/scores.hpp"

namespace sepsis {

std::string_view to_string(SiDefinition d) {
    return d == SiDefinition::fluid_abx ? "fluid-abx" : "multi-abx";
}

SiDefinition si_definition_from_string(std::string_view s) {
    if (s == "fluid-abx" || s == "fluid_abx") return SiDefinition::fluid_abx;
    if (s == "multi-abx" || s == "multi_abx") return SiDefinition::multi_abx;
    throw SchemaError("unknown SI definition '" + std::string(s) + "'");
}

std::vector<SiWindow> merge_si_times(std::vector<double> si_times, SiDefinition definition) {
    std::sort(si_times.begin(), si_times.end());
    std::vector<SiWindow> out;
    // Windows [s-48, s+24] of sorted times overlap iff consecutive times are
    // at most 72 h apart.
    double group_end = -INFINITY;
    for (double s : si_times) {
        const SiWindow w = SiWindow::at(s, definition);
        if (w.window_start > group_end) out.push_back(w);
        group_end = std::max(group_end, w.window_end);
    }
    return out;
}

std::vector<SiWindow> detect_si_fluid_abx(const TreatmentLog& treatments) {
    std::vector<double> abx = treatments.antibiotics;
    std::vector<double> samp = treatments.fluid_samplings;
    std::sort(abx.begin(), abx.end());
    std::sort(samp.begin(), samp.end());
    std::vector<double> si;
    for (double a : abx) {
        // sampling in [a, a + 24] -> SI at a
        auto lo = std::lower_bound(samp.begin(), samp.end(), a);
        if (lo != samp.end() && *lo - a <= kAbxToSamplingMax) si.push_back(a);
    }
    for (double s : samp) {
        // antibiotics in [s, s + 72] -> SI at s
        auto lo = std::lower_bound(abx.begin(), abx.end(), s);
        if (lo != abx.end() && *lo - s <= kSamplingToAbxMax) si.push_back(s);
    }
    return merge_si_times(std::move(si), SiDefinition::fluid_abx);
}

std::vector<SiWindow> detect_si_multi_abx(const TreatmentLog& treatments, const MultiAbxParams& params) {
    std::vector<double> abx = treatments.antibiotics;
    std::sort(abx.begin(), abx.end());
    abx.erase(std::unique(abx.begin(), abx.end()), abx.end());
    std::vector<double> si;
    const auto k = static_cast<std::size_t>(std::max(1, params.min_administrations));
    for (std::size_t i = 0; i + k - 1 < abx.size(); ++i) {
        if (abx[i + k - 1] - abx[i] <= params.max_span) si.push_back(abx[i]);
    }
    return merge_si_times(std::move(si), SiDefinition::multi_abx);
}

std::vector<SiWindow> detect_si(const TreatmentLog& treatments, SiDefinition definition,
                                const MultiAbxParams& params) {
    return definition == SiDefinition::fluid_abx ? detect_si_fluid_abx(treatments)
                                                 : detect_si_multi_abx(treatments, params);
}

std::optional<double> detect_onset(std::span<const int> total, std::span<const SiWindow> windows) {
    const auto n = static_cast<long>(total.size());
    // Sliding minimum over [t-24, t] with a monotone deque.
    std::vector<long> dq;
    std::size_t head = 0;
    for (long t = 0; t < n; ++t) {
        while (dq.size() > head && total[static_cast<std::size_t>(dq.back())] >= total[static_cast<std::size_t>(t)])
            dq.pop_back();
        dq.push_back(t);
        while (dq[head] < t - kSofaBaselineHours) ++head;
        const int baseline = total[static_cast<std::size_t>(dq[head])];
        if (total[static_cast<std::size_t>(t)] - baseline < kSofaIncrease) continue;
        const double th = static_cast<double>(t);
        for (const auto& w : windows)
            if (w.contains(th)) return th;
    }
    return std::nullopt;
}

std::optional<double> detect_onset(const SofaHourly& sofa, std::span<const SiWindow> windows) {
    return detect_onset(std::span<const int>(sofa.total), windows);
}

long SepsisAnnotation::exposed_hours() const {
    if (!truncate_after) return n_hours;
    return std::min(n_hours, static_cast<long>(std::floor(*truncate_after)) + 1);
}

SepsisAnnotation build_labels(std::string stay_id, long n_hours, std::optional<double> onset,
                              std::vector<SiWindow> windows) {
    SepsisAnnotation a;
    a.stay_id = std::move(stay_id);
    a.n_hours = n_hours;
    a.si_windows = std::move(windows);
    a.labels.assign(static_cast<std::size_t>(std::max(0L, n_hours)), 0);
    if (!onset) return a;
    const double o = *onset;
    if (!std::isfinite(o) || o < 0.0 || o >= static_cast<double>(n_hours))
        throw std::invalid_argument("onset " + std::to_string(o) + " outside the grid of stay " + a.stay_id);
    a.onset = o;
    a.truncate_after = o + kLabelTrail;
    const long lo = std::max(0L, static_cast<long>(std::ceil(o - kLabelLead)));
    const long hi = std::min(n_hours - 1, static_cast<long>(std::floor(o + kLabelTrail)));
    for (long t = lo; t <= hi; ++t) a.labels[static_cast<std::size_t>(t)] = 1;
    return a;
}

SepsisAnnotation build_labels(const HourlyStay& stay, std::optional<double> onset, std::vector<SiWindow> windows) {
    return build_labels(stay.stay_id, stay.n_hours, onset, std::move(windows));
}

double jaccard_si(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace sepsis
