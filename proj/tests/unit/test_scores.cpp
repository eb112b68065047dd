#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles/oracles.hpp"
#include "sepsis/rng.hpp"
#include "sepsis/scores.hpp"

using namespace sepsis;

namespace {

double draw(Rng& rng, double lo, double hi, double p_missing = 0.3) {
    if (rng.bernoulli(p_missing)) return kMissing;
    // Round to a coarse grid so that table boundaries are hit regularly.
    return std::round(rng.uniform(lo, hi) * 10.0) / 10.0;
}

void put(HourlyStay& s, const char* var, long t, double x) {
    if (!is_missing(x)) testing::set(s, var, t, x);
}

double window_urine(const HourlyStay& s, long t) {
    if (t < 12) return oracle::kNone;
    double sum = 0.0;
    int seen = 0;
    const long lo = std::max(0L, t - 23);
    for (long u = lo; u <= t; ++u)
        if (s.series_counts("urine")[u] > 0) sum += s.value("urine", u), ++seen;
    if (seen == 0) return oracle::kNone;
    return sum * 24.0 / static_cast<double>(t - lo + 1);
}

bool any_active(const std::vector<Interval>& ivs, long t) {
    for (const auto& iv : ivs)
        if (iv.active_in_hour(t)) return true;
    return false;
}

double rate(const TreatmentLog& log, Vasopressor agent, long t) {
    double r = 0.0;
    for (const auto& v : log.vasopressors)
        if (v.agent == agent && v.span.active_in_hour(t)) r = std::max(r, v.rate);
    return r;
}

} // namespace

TEST_CASE("SOFA agrees with the table on random stays") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const long n = 30;
        auto s = testing::grid("s", n, {});
        for (long t = 0; t < n; ++t) {
            put(s, "po2", t, draw(rng, 40, 500));
            put(s, "fio2", t, draw(rng, 21, 100));
            put(s, "plt", t, draw(rng, 5, 300));
            put(s, "bili", t, draw(rng, 0.2, 15));
            put(s, "map", t, draw(rng, 40, 110));
            put(s, "crea", t, draw(rng, 0.3, 7));
            put(s, "urine", t, draw(rng, 0, 60, 0.5));
            if (rng.bernoulli(0.5)) {
                put(s, "tgcs", t, std::round(rng.uniform(3, 15)));
            } else if (rng.bernoulli(0.7)) {
                put(s, "egcs", t, std::round(rng.uniform(1, 4)));
                put(s, "mgcs", t, std::round(rng.uniform(1, 6)));
                put(s, "vgcs", t, std::round(rng.uniform(1, 5)));
            }
        }
        TreatmentLog log;
        log.stay_id = "s";
        const auto start = [&] { return std::round(rng.uniform(0, n) * 2.0) / 2.0; };
        for (int k = 0; k < 2; ++k) {
            double a = start(), b = start();
            if (a > b) std::swap(a, b);
            if (rng.bernoulli(0.5)) log.ventilation.push_back({a, b});
        }
        if (rng.bernoulli(0.3)) {
            double a = start(), b = start();
            if (a > b) std::swap(a, b);
            log.sedation.push_back({a, b});
        }
        for (int k = 0; k < 2; ++k)
            if (rng.bernoulli(0.5)) {
                double a = start(), b = start();
                if (a > b) std::swap(a, b);
                const auto agent = static_cast<Vasopressor>(rng.below(4));
                const double r = agent == Vasopressor::dopamine || agent == Vasopressor::dobutamine
                                     ? std::round(rng.uniform(0, 20))
                                     : std::round(rng.uniform(0, 0.3) * 100) / 100;
                log.vasopressors.push_back({agent, {a, b}, r});
            }

        const auto sofa = sofa_hourly(s, log);
        for (long t = 0; t < n; ++t) {
            oracle::SofaHour h;
            h.pao2 = s.value("po2", t);
            h.fio2_percent = s.value("fio2", t);
            h.ventilated = any_active(log.ventilation, t);
            h.platelets = s.value("plt", t);
            h.bilirubin = s.value("bili", t);
            h.map = s.value("map", t);
            h.dopamine = rate(log, Vasopressor::dopamine, t);
            h.dobutamine = rate(log, Vasopressor::dobutamine, t);
            h.epinephrine = rate(log, Vasopressor::epinephrine, t);
            h.norepinephrine = rate(log, Vasopressor::norepinephrine, t);
            const double tg = s.value("tgcs", t);
            const double e = s.value("egcs", t), m = s.value("mgcs", t), v = s.value("vgcs", t);
            h.gcs = !std::isnan(tg) ? tg : (std::isnan(e) || std::isnan(m) || std::isnan(v)) ? oracle::kNone : e + m + v;
            h.sedated = any_active(log.sedation, t);
            h.creatinine = s.value("crea", t);
            h.urine_24h = window_urine(s, t);
            const auto want = oracle::sofa_table(h);
            const auto ut = static_cast<std::size_t>(t);
            REQUIRE(sofa.total[ut] == want.total());
            CHECK(sofa.component(SofaComponent::respiratory)[ut] == want.respiratory);
            CHECK(sofa.component(SofaComponent::coagulation)[ut] == want.coagulation);
            CHECK(sofa.component(SofaComponent::liver)[ut] == want.liver);
            CHECK(sofa.component(SofaComponent::cardiovascular)[ut] == want.cardiovascular);
            CHECK(sofa.component(SofaComponent::cns)[ut] == want.cns);
            CHECK(sofa.component(SofaComponent::renal)[ut] == want.renal);
            CHECK(sofa.total[ut] >= 0);
            CHECK(sofa.total[ut] <= 24);
        }
    }
}

TEST_CASE("SOFA table boundaries") {
    auto one = [](const char* var, double x) {
        auto s = testing::grid("s", 1, {{var, {{0, x}}}});
        return sofa_hourly(s, TreatmentLog{}).total[0];
    };
    CHECK(one("plt", 150) == 0);
    CHECK(one("plt", 149.9) == 1);
    CHECK(one("plt", 20) == 3);
    CHECK(one("plt", 19.9) == 4);
    CHECK(one("bili", 1.19) == 0);
    CHECK(one("bili", 1.2) == 1);
    CHECK(one("bili", 12.0) == 4);
    CHECK(one("crea", 5.0) == 4);
    CHECK(one("crea", 4.99) == 3);
    CHECK(one("map", 70) == 0);
    CHECK(one("map", 69.9) == 1);
    CHECK(one("tgcs", 15) == 0);
    CHECK(one("tgcs", 14) == 1);
    CHECK(one("tgcs", 6) == 3);
    CHECK(one("tgcs", 5) == 4);

    auto pf = [](double po2, double fio2, bool vent) {
        auto s = testing::grid("s", 1, {{"po2", {{0, po2}}}, {"fio2", {{0, fio2}}}});
        TreatmentLog log;
        if (vent) log.ventilation.push_back({0, 1});
        return sofa_hourly(s, log).component(SofaComponent::respiratory)[0];
    };
    CHECK(pf(80, 20, false) == 0);  // 400
    CHECK(pf(79.9, 20, false) == 1);
    CHECK(pf(90, 100, false) == 2); // capped at 2 without ventilation
    CHECK(pf(90, 100, true) == 4);
    CHECK(pf(150, 100, true) == 3);
}

TEST_CASE("sedation forces a normal GCS") {
    auto s = testing::grid("s", 3, {{"tgcs", {{0, 3}, {1, 3}, {2, 3}}}});
    TreatmentLog log;
    log.sedation.push_back({1.0, 1.5});
    const auto sofa = sofa_hourly(s, log);
    CHECK(sofa.component(SofaComponent::cns) == std::vector<int>{4, 0, 4});
    // A zero-length interval marks the hour that contains it.
    log.sedation = {{2.0, 2.0}};
    CHECK(sofa_hourly(s, log).component(SofaComponent::cns) == std::vector<int>{4, 4, 0});
}

TEST_CASE("GCS from components when the total is absent") {
    auto s = testing::grid("s", 2, {{"egcs", {{0, 2}, {1, 2}}}, {"mgcs", {{0, 4}, {1, 4}}}, {"vgcs", {{0, 2}}}});
    const auto sofa = sofa_hourly(s, TreatmentLog{});
    CHECK(sofa.component(SofaComponent::cns)[0] == 3); // 8
    CHECK(sofa.component(SofaComponent::cns)[1] == 0); // incomplete
}

TEST_CASE("urine output is not scored before hour 12") {
    auto s = testing::grid("s", 14, {});
    for (long t = 0; t < 14; ++t) testing::set(s, "urine", t, 5.0);
    const ScoreInputs in(s, nullptr);
    CHECK(std::isnan(in.urine_24h(11)));
    // 13 observed hours of 5 mL scaled to a day: 65 * 24 / 13
    CHECK(in.urine_24h(12) == doctest::Approx(120.0));
    const auto sofa = sofa_hourly(s, TreatmentLog{});
    CHECK(sofa.component(SofaComponent::renal)[11] == 0);
    CHECK(sofa.component(SofaComponent::renal)[12] == 4);
}

TEST_CASE("vasopressor tiers") {
    auto s = testing::grid("s", 1, {{"map", {{0, 80}}}});
    auto cv = [&](Vasopressor a, double r) {
        TreatmentLog log;
        log.vasopressors.push_back({a, {0, 1}, r});
        return sofa_hourly(s, log).component(SofaComponent::cardiovascular)[0];
    };
    CHECK(cv(Vasopressor::dopamine, 5) == 2);
    CHECK(cv(Vasopressor::dopamine, 5.1) == 3);
    CHECK(cv(Vasopressor::dopamine, 15.1) == 4);
    CHECK(cv(Vasopressor::dobutamine, 20) == 2);
    CHECK(cv(Vasopressor::norepinephrine, 0.1) == 3);
    CHECK(cv(Vasopressor::norepinephrine, 0.11) == 4);
    CHECK(cv(Vasopressor::epinephrine, 0.05) == 3);
}

TEST_CASE("SIRS, qSOFA, MEWS and NEWS worked examples") {
    auto s = testing::grid("s", 2, {{"temp", {{0, 38.6}, {1, 37}}},
                                    {"hr", {{0, 120}, {1, 80}}},
                                    {"resp", {{0, 24}, {1, 16}}},
                                    {"wbc", {{0, 3.5}, {1, 8}}},
                                    {"sbp", {{0, 95}, {1, 130}}},
                                    {"o2sat", {{0, 92}, {1, 98}}},
                                    {"fio2", {{0, 40}, {1, 21}}},
                                    {"tgcs", {{0, 13}, {1, 15}}}});
    const TreatmentLog log;
    CHECK(sirs_hourly(s, log).values == std::vector<int>{4, 0});
    CHECK(qsofa_hourly(s, log).values == std::vector<int>{3, 0});
    // sbp 1 + hr 2 + resp 2 + temp 2 + avpu 1
    CHECK(mews_hourly(s, log).values == std::vector<int>{8, 1});
    // resp 2 + sat 2 + oxygen 2 + temp 1 + sbp 2 + hr 2 + consciousness 3
    CHECK(news_hourly(s, log).values == std::vector<int>{14, 0});
}

TEST_CASE("partial scores ignore treatment-dependent rules") {
    auto s = testing::grid("s", 1, {{"po2", {{0, 60}}}, {"fio2", {{0, 100}}}, {"map", {{0, 60}}}, {"tgcs", {{0, 3}}}});
    TreatmentLog log;
    log.ventilation.push_back({0, 1});
    log.vasopressors.push_back({Vasopressor::norepinephrine, {0, 1}, 0.5});
    CHECK(sofa_hourly(s, log).total[0] == 4 + 4 + 4);
    CHECK(partial_score_hourly("sofa", s).values[0] == 2 + 1);
    CHECK(partial_score_hourly("sofa-partial", s).values[0] == 3);
    CHECK(partial_score_hourly("qsofa", s).values[0] == 0);
    const auto all = partial_scores(s);
    REQUIRE(all.size() == kPartialScoreIds.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].score_id == kPartialScoreIds[i]);
    CHECK_THROWS_AS(partial_score_hourly("apache", s), std::invalid_argument);
}

TEST_CASE("missing inputs contribute nothing") {
    auto s = testing::grid("s", 5, {});
    for (const auto& sc : baseline_scores(s, TreatmentLog{}))
        for (int v : sc.values) CHECK(v == 0);
}

TEST_CASE("score definitions validate rule structure") {
    nlohmann::json bad = {{"definitions_version", "x"},
                          {"scores", {{{"id", "s"}, {"min", 0}, {"max", 1},
                                       {"components", {{{"name", "c"}, {"rules", {{{"input", "hr"}, {"op", "approx"}, {"value", 1}, {"points", 1}}}}}}}}}}};
    CHECK_THROWS(ScoreDefinitions::from_json(bad));
    CHECK_THROWS_AS(ScoreDefinitions::default_definitions()->at("apache"), std::invalid_argument);
}
