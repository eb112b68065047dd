#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sepsis/error.hpp"
#include "sepsis/io.hpp"
#include "sepsis/pipeline.hpp"
#include "sepsis/synth.hpp"

using namespace sepsis;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("sepsis_io_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

bool same_value(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool testing_same(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t j = 0; j < a[i].size(); ++j)
            if (!same_value(a[i][j], b[i][j])) return false;
    }
    return true;
}

SynthCohort small_cohort() {
    SynthConfig cfg;
    cfg.n_stays = 25;
    cfg.case_fraction = 0.4;
    cfg.seed = 5;
    return generate(cfg);
}

} // namespace

TEST_CASE("raw inputs round-trip") {
    TempDir dir;
    const auto c = small_cohort();
    io::write_events(dir.path / "events.csv", c.events);
    io::write_statics(dir.path / "static.csv", c.statics);
    io::write_treatments(dir.path / "treatments.csv", c.treatments);
    io::write_ground_truth(dir.path / "gt.csv", c.truth);

    const auto ev = io::read_events(dir.path / "events.csv");
    REQUIRE(ev.size() == c.events.size());
    for (std::size_t i = 0; i < ev.size(); ++i) {
        CHECK(ev[i].time == c.events[i].time);
        CHECK(ev[i].value == c.events[i].value);
        CHECK(ev[i].unit == c.events[i].unit);
    }
    const auto st = io::read_statics(dir.path / "static.csv");
    REQUIRE(st.size() == c.statics.size());
    CHECK(st[3].icu_los_hours == c.statics[3].icu_los_hours);
    CHECK(same_value(st[3].weight, c.statics[3].weight));
    const auto tr = io::read_treatments(dir.path / "treatments.csv");
    std::size_t with_abx = 0;
    for (const auto& t : c.treatments) with_abx += !t.antibiotics.empty() || !t.fluid_samplings.empty() ||
                                                   !t.vasopressors.empty() || !t.ventilation.empty() ||
                                                   !t.sedation.empty();
    CHECK(tr.size() == with_abx);
    for (const auto& t : tr) {
        auto it = std::find_if(c.treatments.begin(), c.treatments.end(),
                               [&](const TreatmentLog& x) { return x.stay_id == t.stay_id; });
        REQUIRE(it != c.treatments.end());
        CHECK(t.antibiotics == it->antibiotics);
        CHECK(t.fluid_samplings == it->fluid_samplings);
        CHECK(t.vasopressors.size() == it->vasopressors.size());
    }
    const auto gt = io::read_ground_truth(dir.path / "gt.csv");
    REQUIRE(gt.size() == c.truth.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        CHECK(gt[i].onset == c.truth[i].onset);
        CHECK(gt[i].si_times == c.truth[i].si_times);
    }
}

TEST_CASE("derived artifacts round-trip") {
    TempDir dir;
    const auto c = small_cohort();
    PipelineConfig cfg;
    auto raw = ingest_cohort(c.events, c.statics, VariableCatalog::default_catalog(), {});
    io::write_hourly(dir.path / "hourly.csv", raw);
    const auto back = io::read_hourly(dir.path / "hourly.csv", c.statics, VariableCatalog::default_catalog());
    REQUIRE(back.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(back[i].counts == raw[i].counts);
        CHECK(testing_same(back[i].values, raw[i].values));
    }

    const auto p = prepare_cohort(c.events, c.statics, c.treatments, cfg);
    std::vector<SepsisAnnotation> anns;
    for (const auto& s : p.stays) anns.push_back(s.annotation);
    io::write_annotations(dir.path / "ann.csv", dir.path / "labels.csv", anns);
    const auto anns2 = io::read_annotations(dir.path / "ann.csv", dir.path / "labels.csv");
    REQUIRE(anns2.size() == anns.size());
    for (std::size_t i = 0; i < anns.size(); ++i) {
        CHECK(anns2[i].onset == anns[i].onset);
        CHECK(anns2[i].labels == anns[i].labels);
        CHECK(anns2[i].si_windows.size() == anns[i].si_windows.size());
    }

    std::vector<io::ScoreTable> tables;
    for (const auto& s : p.stays) tables.push_back({s.grid.stay_id, baseline_scores(s.grid, s.treatments)});
    io::write_scores(dir.path / "scores.csv", tables);
    const auto tables2 = io::read_scores(dir.path / "scores.csv");
    REQUIRE(tables2.size() == tables.size());
    CHECK(tables2[4].series.size() == tables[4].series.size());
    CHECK(tables2[4].series[1].values == tables[4].series[1].values);

    const auto spec = FeatureSpec::make(FeatureSet::extended, *p.catalog);
    std::vector<std::size_t> idx{0, 1, 2};
    const auto feats = build_features(p, idx, spec);
    io::write_features(dir.path / "features.csv", feats);
    const auto feats2 = io::read_features(dir.path / "features.csv");
    REQUIRE(feats2.size() == 3);
    CHECK(feats2[1].spec_id == spec.id());
    CHECK(feats2[1].eligible == feats[1].eligible);
    CHECK(testing_same({feats2[1].values.data}, {feats[1].values.data}));

    std::vector<ScoreStream> streams{{"a", {0.1, -2.5}}, {"b", {}}};
    io::write_streams(dir.path / "streams.csv", streams);
    const auto streams2 = io::read_streams(dir.path / "streams.csv");
    CHECK(streams2[0].scores == streams[0].scores);

    io::write_verdicts(dir.path / "verdicts.csv", p.verdicts);
    const auto v2 = io::read_verdicts(dir.path / "verdicts.csv");
    REQUIRE(v2.size() == p.verdicts.size());
    for (std::size_t i = 0; i < v2.size(); ++i) CHECK(v2[i].exclusion.has_value() == p.verdicts[i].exclusion.has_value());
}

TEST_CASE("malformed inputs raise schema errors with coordinates") {
    TempDir dir;
    {
        std::ofstream o(dir.path / "events.csv");
        o << "stay_id,variable,time_hours,value,unit\ns1,hr,0.5,80,bpm\ns1,hr,oops,80,bpm\n";
    }
    try {
        io::read_events(dir.path / "events.csv");
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.row() == 3);
        CHECK(e.column() == 3);
    }
    {
        std::ofstream o(dir.path / "bad_header.csv");
        o << "stay,variable,time,value,unit\n";
    }
    CHECK_THROWS_AS(io::read_events(dir.path / "bad_header.csv"), SchemaError);
    CHECK_THROWS_AS(io::read_events(dir.path / "missing.csv"), SchemaError);
    {
        std::ofstream o(dir.path / "bad.json");
        o << "{not json";
    }
    CHECK_THROWS_AS(io::read_json(dir.path / "bad.json"), SchemaError);
}
