#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "sepsis/catalog.hpp"
#include "sepsis/ingest.hpp"
#include "sepsis/stay.hpp"

namespace testing {

inline sepsis::StayStatic statics(const std::string& id, double los, double age = 60.0, std::string site = "a") {
    sepsis::StayStatic s;
    s.stay_id = id;
    s.age = age;
    s.sex = sepsis::Sex::female;
    s.icu_los_hours = los;
    s.site_id = std::move(site);
    return s;
}

/// Hour-level grid: {variable, {{hour, value}, ...}} marks one raw
/// measurement per listed hour.
using Series = std::pair<std::string, std::vector<std::pair<long, double>>>;

inline sepsis::HourlyStay grid(const std::string& id, double los, std::initializer_list<Series> series,
                               double age = 60.0) {
    auto cat = sepsis::VariableCatalog::default_catalog();
    auto s = sepsis::HourlyStay::empty(cat, statics(id, los, age));
    for (const auto& [var, points] : series) {
        const auto v = cat->require_series(var);
        for (auto [t, x] : points) {
            s.values[v][static_cast<std::size_t>(t)] = x;
            s.counts[v][static_cast<std::size_t>(t)] = 1;
        }
    }
    return s;
}

/// Same value of `var` measured at every hour.
inline void fill(sepsis::HourlyStay& s, const std::string& var, double x) {
    const auto v = s.catalog->require_series(var);
    for (long t = 0; t < s.n_hours; ++t) {
        s.values[v][static_cast<std::size_t>(t)] = x;
        s.counts[v][static_cast<std::size_t>(t)] = 1;
    }
}

inline void set(sepsis::HourlyStay& s, const std::string& var, long t, double x) {
    const auto v = s.catalog->require_series(var);
    s.values[v][static_cast<std::size_t>(t)] = x;
    s.counts[v][static_cast<std::size_t>(t)] = 1;
}

inline sepsis::RawEvent event(const std::string& stay, const std::string& var, double t, double x,
                              const std::string& unit = "") {
    return sepsis::RawEvent{stay, var, t, x, unit};
}

/// Element-wise equality with NaN == NaN.
inline bool same(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            const double x = a[i][j], y = b[i][j];
            if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
        }
    }
    return true;
}

} // namespace testing
