#include <cmath>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "sepsis/error.hpp"
#include "sepsis/rng.hpp"
#include "sepsis/sepsis3.hpp"

using namespace sepsis;

namespace {

std::vector<double> times(const std::vector<SiWindow>& w) {
    std::vector<double> out;
    for (const auto& x : w) out.push_back(x.si_time);
    return out;
}

TreatmentLog log_with(std::vector<double> abx, std::vector<double> samp) {
    TreatmentLog t;
    t.stay_id = "s";
    t.antibiotics = std::move(abx);
    t.fluid_samplings = std::move(samp);
    return t;
}

} // namespace

TEST_CASE("fluid-abx SI matches brute-force pairing") {
    Rng rng(77);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> abx, samp;
        const int na = static_cast<int>(rng.below(5)), ns = static_cast<int>(rng.below(5));
        for (int i = 0; i < na; ++i) abx.push_back(std::round(rng.uniform(-50, 300)));
        for (int i = 0; i < ns; ++i) samp.push_back(std::round(rng.uniform(-50, 300)));
        const auto got = detect_si_fluid_abx(log_with(abx, samp));
        CHECK(times(got) == oracle::si_fluid_abx(abx, samp));
        for (const auto& w : got) {
            CHECK(w.window_start == w.si_time - 48.0);
            CHECK(w.window_end == w.si_time + 24.0);
        }
        for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].window_start > got[i - 1].window_end);
    }
}

TEST_CASE("fluid-abx boundaries are inclusive") {
    CHECK(times(detect_si_fluid_abx(log_with({10}, {34}))) == std::vector<double>{10});
    CHECK(detect_si_fluid_abx(log_with({10}, {34.001})).empty());
    CHECK(times(detect_si_fluid_abx(log_with({82}, {10}))) == std::vector<double>{10});
    CHECK(detect_si_fluid_abx(log_with({82.001}, {10})).empty());
    CHECK(times(detect_si_fluid_abx(log_with({5}, {5}))) == std::vector<double>{5});
    CHECK(detect_si_fluid_abx(log_with({}, {1, 2})).empty());
}

TEST_CASE("SI times merge when windows overlap") {
    CHECK(times(merge_si_times({100, 10, 82}, SiDefinition::fluid_abx)) == std::vector<double>{10});
    CHECK(times(merge_si_times({10, 82.5}, SiDefinition::fluid_abx)) == std::vector<double>{10, 82.5});
}

TEST_CASE("multi-abx SI") {
    CHECK(times(detect_si_multi_abx(log_with({3, 20}, {}))) == std::vector<double>{3});
    CHECK(detect_si_multi_abx(log_with({3, 27.5}, {})).empty());
    CHECK(detect_si_multi_abx(log_with({3, 3}, {})).empty()); // same time counts once
    MultiAbxParams three{3, 24};
    CHECK(detect_si_multi_abx(log_with({0, 10}, {}), three).empty());
    CHECK(times(detect_si_multi_abx(log_with({0, 10, 24}, {}), three)) == std::vector<double>{0});
    CHECK(detect_si(log_with({0, 10}, {}), SiDefinition::multi_abx).front().definition == SiDefinition::multi_abx);
    CHECK(si_definition_from_string("multi-abx") == SiDefinition::multi_abx);
    CHECK_THROWS_AS(si_definition_from_string("cultures"), SchemaError);
}

TEST_CASE("onset matches brute force") {
    Rng rng(5);
    for (int trial = 0; trial < 3000; ++trial) {
        const long n = 1 + static_cast<long>(rng.below(120));
        std::vector<int> sofa(static_cast<std::size_t>(n));
        int level = static_cast<int>(rng.below(4));
        for (auto& v : sofa) {
            if (rng.bernoulli(0.1)) level = std::clamp(level + static_cast<int>(rng.between(-2, 3)), 0, 24);
            v = level;
        }
        std::vector<double> si;
        for (int k = static_cast<int>(rng.below(3)); k > 0; --k) si.push_back(std::round(rng.uniform(-30, 150) * 2) / 2);
        const auto windows = merge_si_times(si, SiDefinition::fluid_abx);
        const auto got = detect_onset(std::span<const int>(sofa), windows);
        const auto want = oracle::onset(sofa, times(windows));
        REQUIRE(got.has_value() == want.has_value());
        if (got) CHECK(*got == static_cast<double>(*want));
    }
}

TEST_CASE("onset needs an increase of two against the trailing day") {
    const auto w = merge_si_times({30}, SiDefinition::fluid_abx);
    std::vector<int> sofa(60, 1);
    sofa[40] = 2;
    CHECK_FALSE(detect_onset(std::span<const int>(sofa), w));
    sofa[41] = 3;
    CHECK(detect_onset(std::span<const int>(sofa), w) == 41.0);
    // Outside the window [-18, 54] nothing counts.
    std::vector<int> late(60, 0);
    late[55] = 5;
    CHECK_FALSE(detect_onset(std::span<const int>(late), w));
    // A low value more than 24 h back is no longer the baseline.
    std::vector<int> slow(60, 4);
    slow[0] = 0;
    CHECK(detect_onset(std::span<const int>(slow), w) == 1.0);
    slow[0] = 4;
    slow[5] = 0;
    for (long t = 6; t < 60; ++t) slow[t] = 2;
    CHECK(detect_onset(std::span<const int>(slow), w) == 6.0);
}

TEST_CASE("onset is translation equivariant") {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<int> sofa(80);
        for (auto& v : sofa) v = static_cast<int>(rng.below(6));
        const double si = std::round(rng.uniform(0, 60));
        const long shift = static_cast<long>(rng.below(20));
        std::vector<int> shifted(static_cast<std::size_t>(shift), 0);
        // Pad with a high baseline so the padding never creates an increase.
        for (auto& v : shifted) v = 24;
        shifted.insert(shifted.end(), sofa.begin(), sofa.end());
        const auto a = detect_onset(std::span<const int>(sofa), merge_si_times({si}, SiDefinition::fluid_abx));
        const auto b = detect_onset(std::span<const int>(shifted),
                                    merge_si_times({si + static_cast<double>(shift)}, SiDefinition::fluid_abx));
        if (a && *a >= 24) {
            REQUIRE(b);
            CHECK(*b == *a + static_cast<double>(shift));
        }
    }
}

TEST_CASE("labels cover six hours before to a day after onset") {
    auto a = build_labels("s", 60, 10.0);
    for (long t = 0; t < 60; ++t) CHECK(a.labels[t] == ((t >= 4 && t <= 34) ? 1 : 0));
    CHECK(a.truncate_after == 34.0);
    CHECK(a.exposed_hours() == 35);
    CHECK(a.excluded(35));
    CHECK_FALSE(a.excluded(34));

    auto frac = build_labels("s", 60, 10.5);
    CHECK(frac.labels[4] == 0);
    CHECK(frac.labels[5] == 1);
    CHECK(frac.labels[34] == 1);
    CHECK(frac.labels[35] == 0);

    auto clipped = build_labels("s", 12, 2.0);
    for (long t = 0; t < 12; ++t) CHECK(clipped.labels[t] == 1);
    CHECK(clipped.exposed_hours() == 12);

    auto control = build_labels("s", 12, std::nullopt);
    CHECK_FALSE(control.is_case());
    CHECK(control.exposed_hours() == 12);
    for (auto v : control.labels) CHECK(v == 0);

    CHECK_THROWS_AS(build_labels("s", 12, 12.0), std::invalid_argument);
    CHECK_THROWS_AS(build_labels("s", 12, -1.0), std::invalid_argument);
}

TEST_CASE("jaccard of stay sets") {
    CHECK(jaccard_si({}, {}) == 1.0);
    CHECK(jaccard_si({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3.0));
    CHECK(jaccard_si({"a"}, {}) == 0.0);
}
