// sepsis-ews: file-based pipeline driver.
//
// Every subcommand reads and writes artifacts inside the output directory
// (config `output_dir`, overridden by $SEPSIS_EWS_OUTPUT_DIR, overridden by
// --output-dir). Failures print one JSON object on stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sepsis/error.hpp"
#include "sepsis/io.hpp"
#include "sepsis/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sepsis;

namespace {

constexpr const char* kOutputEnv = "SEPSIS_EWS_OUTPUT_DIR";

struct Globals {
    std::string config_path;
    std::string output_dir;
    PipelineConfig cfg;
    fs::path out;
};

void resolve(Globals& g) {
    if (!g.config_path.empty()) g.cfg = PipelineConfig::load(g.config_path);
    if (const char* env = std::getenv(kOutputEnv); env && *env) g.cfg.output_dir = env;
    if (!g.output_dir.empty()) g.cfg.output_dir = g.output_dir;
    g.out = g.cfg.output_dir;
    fs::create_directories(g.out);
}

fs::path input_path(const std::string& given, const fs::path& fallback) {
    const fs::path p = given.empty() ? fallback : fs::path(given);
    if (!fs::exists(p)) throw SchemaError(p.string() + ": input file does not exist");
    return p;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<StayStatic> load_statics(const Globals& g) {
    return io::read_statics(input_path(g.cfg.statics, g.out / "static.csv"));
}

std::vector<TreatmentLog> load_treatments(const Globals& g, std::span<const StayStatic> statics) {
    return align_treatments(statics, io::read_treatments(input_path(g.cfg.treatments, g.out / "treatments.csv")));
}

std::vector<HourlyStay> load_hourly(const Globals& g, std::span<const StayStatic> statics, CatalogPtr catalog) {
    return io::read_hourly(input_path("", g.out / "hourly.csv"), statics, std::move(catalog));
}

std::vector<SepsisAnnotation> load_annotations(const Globals& g) {
    return io::read_annotations(input_path("", g.out / "annotations.csv"), input_path("", g.out / "labels.csv"));
}

template <class T>
std::unordered_map<std::string, const T*> by_id(const std::vector<T>& items) {
    std::unordered_map<std::string, const T*> m;
    for (const auto& x : items) m[x.stay_id] = &x;
    return m;
}

template <class M>
auto lookup(const M& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw SchemaError("stay '" + id + "' missing from " + std::string(what));
    return it->second;
}

json split_to_json(const DatasetSplit& s, std::span<const std::string> ids, std::uint64_t seed) {
    auto names = [&](const std::vector<std::size_t>& idx) {
        json a = json::array();
        for (auto i : idx) a.push_back(ids[i]);
        return a;
    };
    json reps = json::array();
    for (const auto& r : s.repetitions) reps.push_back({{"train", names(r.train)}, {"validation", names(r.validation)}});
    return {{"seed", seed}, {"test", names(s.test)}, {"repetitions", reps}};
}

// ----- subcommands ----------------------------------------------------------

void cmd_synth(Globals& g) {
    g.cfg.synth.validate();
    const SynthCohort c = generate(g.cfg.synth);
    io::write_events(g.out / "events.csv", c.events);
    io::write_statics(g.out / "static.csv", c.statics);
    io::write_treatments(g.out / "treatments.csv", c.treatments);
    io::write_ground_truth(g.out / "ground_truth.csv", c.truth);
    io::write_json(g.out / "synth_config.json", g.cfg.synth.to_json());
    print({{"stays", c.statics.size()}, {"events", c.events.size()}});
}

void cmd_ingest(Globals& g) {
    const auto catalog = g.cfg.load_catalog();
    const auto events = io::read_events(input_path(g.cfg.events, g.out / "events.csv"));
    const auto statics = load_statics(g);
    IngestSummary summary;
    const auto grids = ingest_cohort(events, statics, catalog, ResampleOptions{g.cfg.include_pre_icu}, &summary);
    io::write_hourly(g.out / "hourly.csv", grids);
    io::write_json(g.out / "ingest_summary.json", summary.to_json());
    print(summary.to_json());
}

void cmd_score(Globals& g) {
    const auto catalog = g.cfg.load_catalog();
    const auto defs = g.cfg.load_score_definitions();
    const auto statics = load_statics(g);
    const auto logs = load_treatments(g, statics);
    const auto grids = load_hourly(g, statics, catalog);
    std::vector<io::ScoreTable> tables;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        const HourlyStay filled = carry_forward(grids[i]);
        io::ScoreTable t{filled.stay_id, {}};
        const SofaHourly sofa = sofa_hourly(filled, logs[i], *defs);
        t.series.push_back({"sofa", sofa.total});
        for (std::size_t k = 0; k < kSofaComponentNames.size(); ++k)
            t.series.push_back({"sofa_" + std::string(kSofaComponentNames[k]), sofa.components[k]});
        for (auto id : kBaselineScoreIds)
            if (id != "sofa") t.series.push_back(score_hourly(id, filled, logs[i], *defs));
        for (auto& s : partial_scores(filled, *defs)) t.series.push_back(std::move(s));
        tables.push_back(std::move(t));
    }
    io::write_scores(g.out / "scores.csv", tables);
    print({{"stays", tables.size()}});
}

void cmd_label(Globals& g) {
    const auto statics = load_statics(g);
    const auto logs = load_treatments(g, statics);
    const auto tables = io::read_scores(input_path("", g.out / "scores.csv"));
    const auto scores = by_id(tables);
    std::vector<SepsisAnnotation> annotations;
    std::size_t cases = 0;
    for (std::size_t i = 0; i < statics.size(); ++i) {
        const io::ScoreTable* t = lookup(scores, statics[i].stay_id, "scores.csv");
        const ScoreSeries* sofa = nullptr;
        for (const auto& s : t->series)
            if (s.score_id == "sofa") sofa = &s;
        if (!sofa) throw SchemaError("scores.csv: stay '" + statics[i].stay_id + "' has no sofa series");
        auto windows = detect_si(logs[i], g.cfg.si_definition, g.cfg.multi_abx);
        const auto onset = detect_onset(std::span<const int>(sofa->values), windows);
        annotations.push_back(build_labels(statics[i].stay_id, static_cast<long>(sofa->values.size()), onset,
                                           std::move(windows)));
        cases += onset ? 1 : 0;
    }
    io::write_annotations(g.out / "annotations.csv", g.out / "labels.csv", annotations);
    print({{"stays", annotations.size()}, {"cases", cases}});
}

void cmd_filter(Globals& g) {
    const auto catalog = g.cfg.load_catalog();
    const auto statics = load_statics(g);
    const auto grids = load_hourly(g, statics, catalog);
    const auto all = load_annotations(g);
    const auto ann = by_id(all);
    std::vector<SepsisAnnotation> annotations;
    for (const auto& s : statics) annotations.push_back(*lookup(ann, s.stay_id, "annotations.csv"));
    std::vector<StayVerdict> verdicts;
    const StudyFlowReport flow =
        run_exclusion_cascade(grids, annotations, verdicts, g.cfg.filter, g.cfg.min_site_prevalence);
    io::write_verdicts(g.out / "verdicts.csv", verdicts);
    io::write_json(g.out / "study_flow.json", flow.to_json());
    io::write_text(g.out / "study_flow.txt", flow.to_table());
    std::cout << flow.to_table();
}

void cmd_featurize(Globals& g) {
    const auto catalog = g.cfg.load_catalog();
    const auto statics = load_statics(g);
    const auto grids = load_hourly(g, statics, catalog);
    const auto tables = io::read_scores(input_path("", g.out / "scores.csv"));
    const auto scores = by_id(tables);
    const auto all = load_annotations(g);
    const auto ann = by_id(all);
    const auto verdicts = io::read_verdicts(input_path("", g.out / "verdicts.csv"));
    const auto verdict = by_id(verdicts);
    const FeatureSpec spec = FeatureSpec::make(g.cfg.feature_set, *catalog, g.cfg.include_static);
    std::vector<FeatureMatrix> out;
    for (const auto& grid : grids) {
        if (lookup(verdict, grid.stay_id, "verdicts.csv")->exclusion) continue;
        const auto* t = lookup(scores, grid.stay_id, "scores.csv");
        out.push_back(extract(carry_forward(grid), t->series, spec, lookup(ann, grid.stay_id, "annotations.csv")));
    }
    io::write_features(g.out / "features.csv", out);
    print({{"stays", out.size()}, {"spec", spec.id()}, {"columns", spec.size()}});
}

void cmd_train(Globals& g) {
    const auto features = io::read_features(input_path("", g.out / "features.csv"));
    const auto all = load_annotations(g);
    const auto ann = by_id(all);
    std::vector<SepsisAnnotation> annotations;
    std::vector<std::uint8_t> is_case;
    std::vector<std::string> ids;
    for (const auto& f : features) {
        annotations.push_back(*lookup(ann, f.stay_id, "annotations.csv"));
        is_case.push_back(annotations.back().is_case() ? 1 : 0);
        ids.push_back(f.stay_id);
    }
    const DatasetSplit split = split_dataset(is_case, g.cfg.split_seed, g.cfg.repetitions);
    const TrainResult r = train_repetitions(features, annotations, split, g.cfg);
    io::write_json(g.out / "split.json", split_to_json(split, ids, g.cfg.split_seed));
    json path = json::array();
    for (const auto& p : r.path)
        path.push_back({{"lambda", p.lambda}, {"validation_auroc", p.validation_auroc}, {"nonzero", p.nonzero}});
    io::write_json(g.out / "lambda_path.json", {{"selected", r.lambda}, {"path", path}});
    for (std::size_t k = 0; k < r.models.size(); ++k)
        r.models[k].save(g.out / ("model_rep" + std::to_string(k) + ".json"));
    print({{"lambda", r.lambda}, {"models", r.models.size()}});
}

void cmd_predict(Globals& g, const std::string& model_path, const std::string& subset, const std::string& output) {
    const LinearModel model = LinearModel::load(input_path(model_path, g.out / "model_rep0.json"));
    const auto features = io::read_features(input_path("", g.out / "features.csv"));
    std::set<std::string> keep;
    if (subset == "test") {
        const json split = io::read_json(input_path("", g.out / "split.json"));
        for (const auto& id : split.at("test")) keep.insert(id.get<std::string>());
    }
    std::vector<ScoreStream> streams;
    for (const auto& f : features)
        if (subset == "all" || keep.count(f.stay_id)) streams.push_back(predict_stream(model, f));
    const fs::path dest = output.empty() ? g.out / "streams.csv" : fs::path(output);
    io::write_streams(dest, streams);
    print({{"stays", streams.size()}, {"output", dest.string()}});
}

void cmd_pool(Globals& g, const std::vector<std::string>& inputs, const std::string& output) {
    if (inputs.empty()) throw InfeasibleError("pool: no input stream files");
    std::vector<std::vector<ScoreStream>> per_model;
    for (const auto& p : inputs) per_model.push_back(io::read_streams(input_path(p, p)));
    const auto pooled = max_pool(per_model, g.cfg.normalize_pool);
    const fs::path dest = output.empty() ? g.out / "pooled_streams.csv" : fs::path(output);
    io::write_streams(dest, pooled);
    print({{"stays", pooled.size()}, {"models", inputs.size()}, {"output", dest.string()}});
}

void cmd_evaluate(Globals& g, const std::string& streams_path, const std::string& output) {
    const auto streams = io::read_streams(input_path(streams_path, g.out / "streams.csv"));
    const auto annotations = load_annotations(g);
    const auto ann = by_id(annotations);
    std::vector<SepsisAnnotation> matched;
    for (const auto& s : streams) matched.push_back(*lookup(ann, s.stay_id, "annotations.csv"));
    const auto stays = make_eval_stays(streams, matched);
    const EvalReport rep = evaluate_harmonized(stays, g.cfg.eval);
    const fs::path dest = output.empty() ? g.out / "eval_report.json" : fs::path(output);
    io::write_json(dest, rep.to_json());
    io::write_text(dest.parent_path() / "roc.csv", rep.roc_csv());
    io::write_text(dest.parent_path() / "metrics.csv", rep.metrics_csv());
    print({{"auroc", rep.roc.auroc},
           {"harmonized_auroc", rep.mean_auroc},
           {"precision_at_recall", rep.at_recall.attained ? json(rep.at_recall.precision) : json(nullptr)}});
}

std::string report_table(const EvalReport& r) {
    auto fmt = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", x);
        return std::string(std::isfinite(x) ? buf : "n/a");
    };
    std::string s;
    s += "cases                 " + std::to_string(r.n_cases) + "\n";
    s += "controls              " + std::to_string(r.n_controls) + "\n";
    s += "AUROC                 " + fmt(r.roc.auroc) + "\n";
    s += "recall target         " + fmt(r.target_recall) + "\n";
    s += "threshold             " + (r.at_recall.attained ? fmt(r.at_recall.threshold) : "n/a") + "\n";
    s += "precision             " + (r.at_recall.attained ? fmt(r.at_recall.precision) : "n/a") + "\n";
    s += "median earliness (h)  " + (r.at_recall.attained ? fmt(r.at_recall.median_earliness) : "n/a") + "\n";
    s += "harmonized subsamples " + std::to_string(r.n_subsamples) + (r.harmonization_flagged ? " (flagged)" : "") +
         "\n";
    s += "case coverage         " + fmt(r.coverage) + "\n";
    s += "harmonized AUROC      " + fmt(r.mean_auroc) + "\n";
    s += "harmonized precision  " + fmt(r.mean_precision) + "\n";
    s += "harmonized earliness  " + fmt(r.mean_earliness) + "\n";
    return s;
}

void cmd_report(Globals& g, const std::string& report_path, bool plots) {
    const fs::path src = input_path(report_path, g.out / "eval_report.json");
    const EvalReport rep = EvalReport::from_json(io::read_json(src));
    const std::string table = report_table(rep);
    io::write_text(g.out / "report.txt", table);
    if (plots || g.cfg.plots) {
        io::write_text(g.out / "roc.svg", roc_svg(rep));
        io::write_text(g.out / "precision_earliness.svg", precision_earliness_svg(rep));
    }
    std::cout << table;
}

void cmd_run_all(Globals& g) {
    RunAllResult r;
    if (g.cfg.events.empty()) {
        g.cfg.synth.validate();
        const SynthCohort c = generate(g.cfg.synth);
        io::write_events(g.out / "events.csv", c.events);
        io::write_statics(g.out / "static.csv", c.statics);
        io::write_treatments(g.out / "treatments.csv", c.treatments);
        io::write_ground_truth(g.out / "ground_truth.csv", c.truth);
        r = run_all(c.events, c.statics, c.treatments, g.cfg);
    } else {
        const auto events = io::read_events(input_path(g.cfg.events, ""));
        const auto statics = io::read_statics(input_path(g.cfg.statics, ""));
        const auto logs = io::read_treatments(input_path(g.cfg.treatments, ""));
        r = run_all(events, statics, logs, g.cfg);
    }
    std::vector<SepsisAnnotation> annotations;
    std::vector<FeatureMatrix> none;
    for (const auto& s : r.cohort.stays) annotations.push_back(s.annotation);
    io::write_annotations(g.out / "annotations.csv", g.out / "labels.csv", annotations);
    io::write_verdicts(g.out / "verdicts.csv", r.cohort.verdicts);
    io::write_json(g.out / "study_flow.json", r.cohort.flow.to_json());
    io::write_text(g.out / "study_flow.txt", r.cohort.flow.to_table());
    std::vector<std::string> ids;
    for (auto i : r.retained) ids.push_back(r.cohort.stays[i].grid.stay_id);
    io::write_json(g.out / "split.json", split_to_json(r.split, ids, g.cfg.split_seed));
    for (std::size_t k = 0; k < r.training.models.size(); ++k)
        r.training.models[k].save(g.out / ("model_rep" + std::to_string(k) + ".json"));
    io::write_streams(g.out / "streams.csv", r.test_streams);
    const EvalReport& rep0 = r.repetition_reports.at(0);
    io::write_json(g.out / "eval_report.json", rep0.to_json());
    io::write_text(g.out / "roc.csv", rep0.roc_csv());
    io::write_text(g.out / "metrics.csv", rep0.metrics_csv());
    io::write_text(g.out / "report.txt", report_table(rep0));
    for (const auto& [id, rep] : r.baselines) io::write_json(g.out / ("baseline_" + id + ".json"), rep.to_json());
    if (g.cfg.plots) {
        io::write_text(g.out / "roc.svg", roc_svg(rep0));
        io::write_text(g.out / "precision_earliness.svg", precision_earliness_svg(rep0));
    }
    const json summary = r.summary();
    io::write_json(g.out / "summary.json", summary);
    print(summary);
}

int fail(const char* kind, int code, const std::string& message, const SchemaError* schema = nullptr) {
    json err{{"kind", kind}, {"exit_code", code}, {"message", message}};
    if (schema && !schema->source().empty()) {
        err["source"] = schema->source();
        err["row"] = schema->row();
        err["column"] = schema->column();
    }
    std::cerr << json{{"error", err}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sepsis early-warning pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("-c,--config", g.config_path, "JSON config file");
    app.add_option("-o,--output-dir", g.output_dir, "Output directory (overrides config and $SEPSIS_EWS_OUTPUT_DIR)");

    // Flag overrides are applied after the config file has been read.
    std::optional<std::uint64_t> seed, split_seed;
    std::optional<std::size_t> n_stays;
    std::optional<double> case_fraction, signal;
    std::optional<int> sites;
    std::string si_def, feature_set, tie, events, statics, treatments, catalog, score_defs;
    bool pre_icu = false, normalize_pool = false, plots = false;
    std::vector<double> lambdas;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--events", events, "Events CSV");
        sub->add_option("--static", statics, "Static CSV");
        sub->add_option("--treatments", treatments, "Treatments CSV");
        sub->add_option("--catalog", catalog, "Variable catalog JSON");
        sub->add_option("--score-definitions", score_defs, "Score definitions JSON");
        sub->add_flag("--include-pre-icu", pre_icu, "Seed carry-forward with pre-admission values");
        sub->add_option("--si-definition", si_def, "fluid-abx or multi-abx");
        sub->add_option("--feature-set", feature_set, "compact or extended");
        sub->add_option("--threshold-tie", tie, "ge or gt");
        sub->add_option("--lambda", lambdas, "Lambda grid");
        sub->add_option("--split-seed", split_seed, "Split seed");
        sub->add_flag("--normalize-pool", normalize_pool, "z-score each model before pooling");
    };
    auto add_synth = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Synthetic cohort seed");
        sub->add_option("--n-stays", n_stays, "Number of stays");
        sub->add_option("--case-fraction", case_fraction, "Fraction of cases");
        sub->add_option("--signal-strength", signal, "Pre-onset drift scale");
        sub->add_option("--site-count", sites, "Number of sites");
    };

    std::string model_path, subset = "all", output, streams_path, report_path;
    std::vector<std::string> pool_inputs;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
    add_synth(synth);
    auto* ingest = app.add_subcommand("ingest", "Canonicalize and resample events to hourly grids");
    auto* score = app.add_subcommand("score", "Hourly clinical scores");
    auto* label = app.add_subcommand("label", "Suspected infection, onset and hourly labels");
    auto* filter = app.add_subcommand("filter", "Exclusion cascade and study flow");
    auto* featurize = app.add_subcommand("featurize", "Feature matrices for retained stays");
    auto* train = app.add_subcommand("train", "LASSO logistic regression over repeated splits");
    auto* predict = app.add_subcommand("predict", "Hourly prediction streams");
    predict->add_option("--model", model_path, "Model JSON");
    predict->add_option("--subset", subset, "all or test")->check(CLI::IsMember({"all", "test"}));
    predict->add_option("--output", output, "Streams CSV");
    auto* pool = app.add_subcommand("pool", "Elementwise maximum over prediction streams");
    pool->add_option("inputs", pool_inputs, "Stream CSVs")->required();
    pool->add_option("--output", output, "Pooled streams CSV");
    auto* evaluate = app.add_subcommand("evaluate", "Encounter-level evaluation");
    evaluate->add_option("--streams", streams_path, "Streams CSV");
    evaluate->add_option("--output", output, "Report JSON");
    auto* report = app.add_subcommand("report", "Tables and plots from an evaluation report");
    report->add_option("--report", report_path, "Report JSON");
    report->add_flag("--plots", plots, "Write SVG plots");
    auto* run_all_cmd = app.add_subcommand("run-all", "synth (or given files) through evaluation");
    add_synth(run_all_cmd);
    run_all_cmd->add_flag("--plots", plots, "Write SVG plots");
    for (auto* sub : {synth, ingest, score, label, filter, featurize, train, predict, pool, evaluate, report,
                      run_all_cmd})
        add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", 2, e.what());
    }

    try {
        resolve(g);
        auto& c = g.cfg;
        if (!events.empty()) c.events = events;
        if (!statics.empty()) c.statics = statics;
        if (!treatments.empty()) c.treatments = treatments;
        if (!catalog.empty()) c.catalog = catalog;
        if (!score_defs.empty()) c.score_definitions = score_defs;
        if (pre_icu) c.include_pre_icu = true;
        if (!si_def.empty()) c.si_definition = si_definition_from_string(si_def);
        if (!feature_set.empty()) c.feature_set = feature_set_from_string(feature_set);
        if (!tie.empty()) c.eval.tie = threshold_tie_from_string(tie);
        if (!lambdas.empty()) c.lambda_grid = lambdas;
        if (split_seed) c.split_seed = *split_seed;
        if (normalize_pool) c.normalize_pool = true;
        if (plots) c.plots = true;
        if (seed) c.synth.seed = *seed;
        if (n_stays) c.synth.n_stays = *n_stays;
        if (case_fraction) c.synth.case_fraction = *case_fraction;
        if (signal) c.synth.signal_strength = *signal;
        if (sites) c.synth.site_count = *sites;

        if (*synth) cmd_synth(g);
        else if (*ingest) cmd_ingest(g);
        else if (*score) cmd_score(g);
        else if (*label) cmd_label(g);
        else if (*filter) cmd_filter(g);
        else if (*featurize) cmd_featurize(g);
        else if (*train) cmd_train(g);
        else if (*predict) cmd_predict(g, model_path, subset, output);
        else if (*pool) cmd_pool(g, pool_inputs, output);
        else if (*evaluate) cmd_evaluate(g, streams_path, output);
        else if (*report) cmd_report(g, report_path, plots);
        else if (*run_all_cmd) cmd_run_all(g);
    } catch (const SchemaError& e) {
        return fail(e.kind(), e.exit_code(), e.what(), &e);
    } catch (const Error& e) {
        return fail(e.kind(), e.exit_code(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail("schema", 2, e.what());
    } catch (const std::invalid_argument& e) {
        return fail("infeasible", 3, e.what());
    } catch (const std::exception& e) {
        return fail("error", 1, e.what());
    }
    return 0;
}
