#include "doctest.h"
#include "sepsis/error.hpp"
#include "sepsis/pipeline.hpp"
#include "sepsis/synth.hpp"

using namespace sepsis;

TEST_CASE("pipeline config parsing") {
    const auto d = PipelineConfig::from_json(nlohmann::json::object());
    CHECK(d.lambda_grid.size() == 13);
    CHECK(d.repetitions == 5);
    CHECK(d.si_definition == SiDefinition::fluid_abx);

    const auto c = PipelineConfig::from_json({{"si_definition", "multi-abx"},
                                              {"feature_set", "extended"},
                                              {"threshold_tie", "gt"},
                                              {"lambda_grid", {0.1, 0.01}},
                                              {"filter", {{"min_onset", 2}}},
                                              {"eval", {{"target_recall", 0.9}}},
                                              {"synth", {{"n_stays", 10}}}});
    CHECK(c.si_definition == SiDefinition::multi_abx);
    CHECK(c.feature_set == FeatureSet::extended);
    CHECK(c.eval.tie == ThresholdTie::gt);
    CHECK(c.lambda_grid == std::vector<double>{0.1, 0.01});
    CHECK(c.filter.min_onset == 2);
    CHECK(c.filter.max_onset == 168);
    CHECK(c.eval.target_recall == 0.9);
    CHECK(c.synth.n_stays == 10);

    const auto round = PipelineConfig::from_json(c.to_json());
    CHECK(round.to_json() == c.to_json());

    CHECK_THROWS_AS(PipelineConfig::from_json({{"lamda_grid", {0.1}}}), SchemaError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"filter", {{"min_agee", 3}}}}), SchemaError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"si_definition", "cultures"}}), SchemaError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"lambda_grid", nlohmann::json::array()}}), InfeasibleError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"lambda_grid", {-1.0}}}), InfeasibleError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"repetitions", 0}}), InfeasibleError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"repetitions", "five"}}), SchemaError);
}

TEST_CASE("ingest summary counts rejections") {
    std::vector<StayStatic> statics(1);
    statics[0].stay_id = "s";
    statics[0].age = 50;
    statics[0].icu_los_hours = 10;
    std::vector<RawEvent> events{{"s", "hr", 1, 80, "bpm"},     {"s", "hr", 1, 900, "bpm"},
                                 {"s", "hr", 2, 80, "parsecs"}, {"ghost", "hr", 1, 80, "bpm"},
                                 {"s", "hr", -3, 80, "bpm"},    {"s", "hr", 12, 80, "bpm"}};
    IngestSummary sum;
    const auto grids = ingest_cohort(events, statics, VariableCatalog::default_catalog(), {}, &sum);
    REQUIRE(grids.size() == 1);
    CHECK(sum.events == 6);
    CHECK(sum.rejected_plausibility == 1);
    CHECK(sum.rejected_unit == 1);
    CHECK(sum.unknown_stay == 1);
    CHECK(sum.dropped_pre_icu == 1);
    CHECK(sum.dropped_after_discharge == 1);
    CHECK(grids[0].value("hr", 1) == 80);
}

TEST_CASE("treatment alignment gives every stay a log") {
    std::vector<StayStatic> statics(2);
    statics[0].stay_id = "a";
    statics[1].stay_id = "b";
    std::vector<TreatmentLog> logs(1);
    logs[0].stay_id = "b";
    logs[0].antibiotics = {3};
    const auto aligned = align_treatments(statics, logs);
    REQUIRE(aligned.size() == 2);
    CHECK(aligned[0].stay_id == "a");
    CHECK(aligned[0].antibiotics.empty());
    CHECK(aligned[1].antibiotics == std::vector<double>{3});
}

TEST_CASE("small synthetic run learns the planted signal") {
    PipelineConfig cfg;
    cfg.synth.n_stays = 400;
    cfg.synth.seed = 21;
    cfg.synth.signal_strength = 2.0;
    cfg.lambda_grid = {0.01, 0.001};
    cfg.repetitions = 2;
    cfg.split_seed = 3;
    const auto r = run_all_synthetic(cfg);
    CHECK(r.training.models.size() == 2);
    CHECK(r.training.path.size() == 2);
    CHECK(r.repetition_reports.size() == 2);
    CHECK(r.mean_auroc > 0.9);
    CHECK(r.baselines.size() == kBaselineScoreIds.size());
    const auto s = r.summary();
    CHECK(s.at("retained").get<std::size_t>() == r.retained.size());
    CHECK(s.at("mean_auroc").get<double>() == r.mean_auroc);
    // Repetition models are fitted on different training splits.
    CHECK(r.training.models[0].weights != r.training.models[1].weights);
    const auto again = run_all_synthetic(cfg);
    CHECK(again.mean_auroc == r.mean_auroc);
    CHECK(again.training.models[1].weights == r.training.models[1].weights);
}
