#include <algorithm>
#include <set>

#include "doctest.h"
#include "sepsis/error.hpp"
#include "sepsis/pipeline.hpp"
#include "sepsis/synth.hpp"

using namespace sepsis;

namespace {

PreparedCohort prepare(const SynthCohort& c, const PipelineConfig& cfg = {}) {
    return prepare_cohort(c.events, c.statics, c.treatments, cfg);
}

} // namespace

TEST_CASE("generation is determined by the seed") {
    SynthConfig cfg;
    cfg.n_stays = 30;
    cfg.seed = 7;
    const auto a = generate(cfg), b = generate(cfg);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].stay_id == b.events[i].stay_id);
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].value == b.events[i].value);
    }
    cfg.seed = 8;
    const auto c = generate(cfg);
    CHECK((c.events.size() != a.events.size() || c.events[0].value != a.events[0].value));
}

TEST_CASE("a single planted onset is recovered exactly") {
    SynthConfig cfg;
    cfg.n_stays = 1;
    cfg.case_fraction = 1.0;
    cfg.onset_min = cfg.onset_max = 30;
    cfg.seed = 3;
    const auto c = generate(cfg);
    REQUIRE(c.truth.size() == 1);
    CHECK(c.truth[0].onset == 30.0);
    const auto p = prepare(c);
    CHECK(p.stays[0].annotation.onset == 30.0);
    CHECK(p.stays[0].retained);
}

TEST_CASE("controls-only cohorts have no onsets") {
    SynthConfig cfg;
    cfg.n_stays = 40;
    cfg.case_fraction = 0.0;
    cfg.seed = 11;
    const auto c = generate(cfg);
    for (const auto& t : c.truth) CHECK_FALSE(t.onset);
    for (const auto& s : prepare(c).stays) CHECK_FALSE(s.annotation.is_case());
}

TEST_CASE("planted onsets and exclusion reasons survive the pipeline") {
    SynthConfig cfg;
    cfg.n_stays = 120;
    cfg.case_fraction = 0.3;
    cfg.exclusion_fraction = 0.2;
    cfg.site_count = 2;
    cfg.seed = 19;
    const auto c = generate(cfg);
    const auto p = prepare(c);
    REQUIRE(p.stays.size() == c.truth.size());
    std::size_t specimens = 0;
    for (std::size_t i = 0; i < c.truth.size(); ++i) {
        const auto& t = c.truth[i];
        const auto& s = p.stays[i];
        CHECK(s.grid.stay_id == t.stay_id);
        if (t.exclusion) {
            ++specimens;
            REQUIRE(s.exclusion);
            CHECK(s.exclusion->reason == *t.exclusion);
            continue;
        }
        CHECK(s.annotation.onset == t.onset);
        if (t.onset) {
            CHECK(*t.onset >= 4.0);
            CHECK(*t.onset <= 168.0);
        }
    }
    CHECK(specimens > 0);
    CHECK(p.flow.reconciles());
}

TEST_CASE("every plantable exclusion can be produced") {
    const auto reasons = plantable_exclusions();
    CHECK(std::find(reasons.begin(), reasons.end(), ExclusionReason::onset_outside_icu) == reasons.end());
    SynthConfig cfg;
    cfg.n_stays = 60;
    cfg.exclusion_fraction = 0.5;
    cfg.seed = 2;
    const auto c = generate(cfg);
    std::set<ExclusionReason> seen;
    for (const auto& t : c.truth)
        if (t.exclusion) seen.insert(*t.exclusion);
    for (auto r : reasons) CHECK(seen.count(r) == 1);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.case_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InfeasibleError);
    cfg = SynthConfig{};
    cfg.onset_max = 200;
    cfg.los_max = 50;
    CHECK_THROWS_AS(cfg.validate(), InfeasibleError);
    cfg = SynthConfig{};
    cfg.measurement_rates = {{"hr", 0.0}};
    CHECK_THROWS_AS(cfg.validate(), InfeasibleError);
    const auto j = SynthConfig{}.to_json();
    const auto back = SynthConfig::from_json(j);
    CHECK(back.n_stays == SynthConfig{}.n_stays);
    CHECK_THROWS_AS(SynthConfig::from_json({{"n_stay", 3}}), SchemaError);
}
