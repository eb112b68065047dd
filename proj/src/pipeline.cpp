#include "sepsis/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "sepsis/error.hpp"
#include "sepsis/io.hpp"

namespace sepsis {

using nlohmann::json;

namespace {

template <class T>
T get(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw SchemaError("config: bad value for '" + key + "': " + e.what());
    }
}

FilterRules filter_from_json(const json& j, FilterRules f) {
    for (const auto& [key, v] : j.items()) {
        if (key == "min_age") f.min_age = get<double>(v, key);
        else if (key == "min_los_hours") f.min_los_hours = get<double>(v, key);
        else if (key == "min_measured_hours") f.min_measured_hours = get<int>(v, key);
        else if (key == "max_gap_hours") f.max_gap_hours = get<int>(v, key);
        else if (key == "min_onset") f.min_onset = get<double>(v, key);
        else if (key == "max_onset") f.max_onset = get<double>(v, key);
        else throw SchemaError("config.filter: unknown key '" + key + "'");
    }
    return f;
}

LassoOptions lasso_from_json(const json& j, LassoOptions o) {
    for (const auto& [key, v] : j.items()) {
        if (key == "tolerance") o.tolerance = get<double>(v, key);
        else if (key == "patience") o.patience = get<int>(v, key);
        else if (key == "max_iterations") o.max_iterations = get<int>(v, key);
        else if (key == "accelerate") o.accelerate = get<bool>(v, key);
        else throw SchemaError("config.lasso: unknown key '" + key + "'");
    }
    return o;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : xs)
        if (std::isfinite(x)) s += x, ++n;
    return n ? s / static_cast<double>(n) : std::nan("");
}

template <class T>
std::vector<T> pick(std::span<const T> items, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

} // namespace

// ----- config ---------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("config: top level must be an object");
    PipelineConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "events") c.events = get<std::string>(v, key);
        else if (key == "statics") c.statics = get<std::string>(v, key);
        else if (key == "treatments") c.treatments = get<std::string>(v, key);
        else if (key == "catalog") c.catalog = get<std::string>(v, key);
        else if (key == "score_definitions") c.score_definitions = get<std::string>(v, key);
        else if (key == "output_dir") c.output_dir = get<std::string>(v, key);
        else if (key == "include_pre_icu") c.include_pre_icu = get<bool>(v, key);
        else if (key == "si_definition") c.si_definition = si_definition_from_string(get<std::string>(v, key));
        else if (key == "multi_abx") {
            for (const auto& [k2, v2] : v.items()) {
                if (k2 == "min_administrations") c.multi_abx.min_administrations = get<int>(v2, k2);
                else if (k2 == "max_span") c.multi_abx.max_span = get<double>(v2, k2);
                else throw SchemaError("config.multi_abx: unknown key '" + k2 + "'");
            }
        } else if (key == "feature_set") c.feature_set = feature_set_from_string(get<std::string>(v, key));
        else if (key == "include_static") c.include_static = get<bool>(v, key);
        else if (key == "normalize_pool") c.normalize_pool = get<bool>(v, key);
        else if (key == "threshold_tie") c.eval.tie = threshold_tie_from_string(get<std::string>(v, key));
        else if (key == "filter") c.filter = filter_from_json(v, c.filter);
        else if (key == "min_site_prevalence") c.min_site_prevalence = get<double>(v, key);
        else if (key == "lambda_grid") c.lambda_grid = get<std::vector<double>>(v, key);
        else if (key == "split_seed") c.split_seed = get<std::uint64_t>(v, key);
        else if (key == "repetitions") c.repetitions = get<int>(v, key);
        else if (key == "lasso") c.lasso = lasso_from_json(v, c.lasso);
        else if (key == "eval") c.eval = EvalConfig::from_json(v, c.eval);
        else if (key == "synth") c.synth = SynthConfig::from_json(v, c.synth);
        else if (key == "plots") c.plots = get<bool>(v, key);
        else throw SchemaError("config: unknown key '" + key + "'");
    }
    if (c.lambda_grid.empty()) throw InfeasibleError("config: lambda_grid is empty");
    for (double l : c.lambda_grid)
        if (!(l >= 0) || !std::isfinite(l)) throw InfeasibleError("config: lambda values must be finite and >= 0");
    if (c.repetitions < 1) throw InfeasibleError("config: repetitions must be >= 1");
    c.eval.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw SchemaError(path.string() + ": config file does not exist");
    return from_json(io::read_json(path));
}

json PipelineConfig::to_json() const {
    return json{{"events", events},
                {"statics", statics},
                {"treatments", treatments},
                {"catalog", catalog},
                {"score_definitions", score_definitions},
                {"output_dir", output_dir},
                {"include_pre_icu", include_pre_icu},
                {"si_definition", std::string(to_string(si_definition))},
                {"multi_abx", {{"min_administrations", multi_abx.min_administrations}, {"max_span", multi_abx.max_span}}},
                {"feature_set", std::string(to_string(feature_set))},
                {"include_static", include_static},
                {"normalize_pool", normalize_pool},
                {"filter",
                 {{"min_age", filter.min_age},
                  {"min_los_hours", filter.min_los_hours},
                  {"min_measured_hours", filter.min_measured_hours},
                  {"max_gap_hours", filter.max_gap_hours},
                  {"min_onset", filter.min_onset},
                  {"max_onset", filter.max_onset}}},
                {"min_site_prevalence", min_site_prevalence},
                {"lambda_grid", lambda_grid},
                {"split_seed", split_seed},
                {"repetitions", repetitions},
                {"lasso",
                 {{"tolerance", lasso.tolerance},
                  {"patience", lasso.patience},
                  {"max_iterations", lasso.max_iterations},
                  {"accelerate", lasso.accelerate}}},
                {"eval", eval.to_json()},
                {"synth", synth.to_json()},
                {"plots", plots}};
}

CatalogPtr PipelineConfig::load_catalog() const {
    return catalog.empty() ? VariableCatalog::default_catalog() : VariableCatalog::load(catalog);
}

ScoreDefinitionsPtr PipelineConfig::load_score_definitions() const {
    return score_definitions.empty() ? ScoreDefinitions::default_definitions()
                                     : ScoreDefinitions::load(score_definitions);
}

// ----- ingest ---------------------------------------------------------------

json IngestSummary::to_json() const {
    return json{{"events", events},
                {"rejected_unit", rejected_unit},
                {"rejected_plausibility", rejected_plausibility},
                {"unknown_stay", unknown_stay},
                {"dropped_pre_icu", dropped_pre_icu},
                {"dropped_after_discharge", dropped_after_discharge}};
}

std::vector<HourlyStay> ingest_cohort(std::span<const RawEvent> events, std::span<const StayStatic> statics,
                                      CatalogPtr catalog, const ResampleOptions& options, IngestSummary* summary) {
    IngestSummary s;
    s.events = events.size();
    FilterResult canon = canonicalize(events, *catalog);
    s.rejected_unit = canon.rejected.size();
    FilterResult plausible = plausibility_filter(canon.kept, *catalog);
    s.rejected_plausibility = plausible.rejected.size();

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < statics.size(); ++i) {
        if (!index.emplace(statics[i].stay_id, i).second)
            throw SchemaError("duplicate stay_id '" + statics[i].stay_id + "' in static data");
    }
    std::vector<std::vector<RawEvent>> per_stay(statics.size());
    for (auto& e : plausible.kept) {
        auto it = index.find(e.stay_id);
        if (it == index.end()) {
            ++s.unknown_stay;
            continue;
        }
        per_stay[it->second].push_back(std::move(e));
    }
    std::vector<HourlyStay> out;
    out.reserve(statics.size());
    for (std::size_t i = 0; i < statics.size(); ++i) {
        ResampleReport rep;
        out.push_back(resample_hourly(per_stay[i], statics[i], catalog, options, &rep));
        s.dropped_pre_icu += rep.dropped_pre_icu;
        s.dropped_after_discharge += rep.dropped_after_discharge;
    }
    if (summary) *summary = s;
    return out;
}

std::vector<TreatmentLog> align_treatments(std::span<const StayStatic> statics, std::span<const TreatmentLog> logs) {
    std::unordered_map<std::string, const TreatmentLog*> by_id;
    for (const auto& l : logs) by_id[l.stay_id] = &l;
    std::vector<TreatmentLog> out;
    out.reserve(statics.size());
    for (const auto& s : statics) {
        auto it = by_id.find(s.stay_id);
        if (it != by_id.end()) {
            out.push_back(*it->second);
            out.back().validate();
        } else {
            TreatmentLog empty;
            empty.stay_id = s.stay_id;
            out.push_back(std::move(empty));
        }
    }
    return out;
}

// ----- cohort ---------------------------------------------------------------

std::vector<std::size_t> PreparedCohort::retained() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < stays.size(); ++i)
        if (stays[i].retained) out.push_back(i);
    return out;
}

PreparedCohort prepare_cohort(std::span<const RawEvent> events, std::span<const StayStatic> statics,
                              std::span<const TreatmentLog> treatments, const PipelineConfig& cfg) {
    PreparedCohort c;
    c.catalog = cfg.load_catalog();
    c.definitions = cfg.load_score_definitions();
    auto grids = ingest_cohort(events, statics, c.catalog, ResampleOptions{cfg.include_pre_icu}, &c.ingest);
    auto logs = align_treatments(statics, treatments);

    c.stays.reserve(grids.size());
    std::vector<HourlyStay> raw_grids;
    std::vector<SepsisAnnotation> annotations;
    raw_grids.reserve(grids.size());
    for (std::size_t i = 0; i < grids.size(); ++i) {
        StayRecord r;
        r.grid = carry_forward(grids[i]);
        r.treatments = std::move(logs[i]);
        r.sofa = sofa_hourly(r.grid, r.treatments, *c.definitions);
        auto windows = detect_si(r.treatments, cfg.si_definition, cfg.multi_abx);
        const auto onset = detect_onset(r.sofa, windows);
        r.annotation = build_labels(r.grid, onset, std::move(windows));
        annotations.push_back(r.annotation);
        raw_grids.push_back(std::move(grids[i]));
        c.stays.push_back(std::move(r));
    }
    // the cascade inspects raw counts, which carry-forward leaves untouched
    c.flow = run_exclusion_cascade(raw_grids, annotations, c.verdicts, cfg.filter, cfg.min_site_prevalence);
    for (std::size_t i = 0; i < c.stays.size(); ++i) {
        c.stays[i].exclusion = c.verdicts[i].exclusion;
        c.stays[i].retained = !c.verdicts[i].exclusion.has_value();
    }
    return c;
}

std::vector<FeatureMatrix> build_features(const PreparedCohort& cohort, std::span<const std::size_t> indices,
                                          const FeatureSpec& spec) {
    std::vector<FeatureMatrix> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        const StayRecord& r = cohort.stays.at(i);
        const auto partial = partial_scores(r.grid, *cohort.definitions);
        out.push_back(extract(r.grid, partial, spec, &r.annotation));
    }
    return out;
}

// ----- training -------------------------------------------------------------

namespace {

struct Design {
    Matrix x;
    std::vector<double> y;
    std::vector<std::uint8_t> mask;
};

/// Normalized eligible rows of the given stays, stacked.
Design stack(std::span<const FeatureMatrix> features, std::span<const SepsisAnnotation> annotations,
             std::span<const std::size_t> idx, const Normalizer& norm) {
    std::size_t rows = 0;
    const std::size_t p = norm.columns.size();
    for (std::size_t i : idx)
        rows += static_cast<std::size_t>(std::count(features[i].eligible.begin(), features[i].eligible.end(), 1));
    Design d;
    d.x = Matrix(rows, p);
    d.y.reserve(rows);
    std::size_t r = 0;
    for (std::size_t i : idx) {
        const FeatureMatrix& m = features[i];
        const SepsisAnnotation& a = annotations[i];
        for (std::size_t t = 0; t < m.n_hours(); ++t) {
            if (!m.eligible[t]) continue;
            auto src = m.values.row(t);
            auto dst = d.x.row(r++);
            for (std::size_t c = 0; c < p; ++c) {
                const double v = is_missing(src[c]) ? norm.impute[c] : src[c];
                dst[c] = (v - norm.mean[c]) / norm.sd[c];
                if (!std::isfinite(dst[c])) throw NumericalError("non-finite feature in column " + norm.columns[c]);
            }
            d.y.push_back(t < a.labels.size() ? a.labels[t] : 0.0);
        }
    }
    d.mask.assign(rows, 1);
    return d;
}

Normalizer fit_on(std::span<const FeatureMatrix> features, std::span<const std::size_t> idx) {
    std::vector<const FeatureMatrix*> ptrs;
    for (std::size_t i : idx) ptrs.push_back(&features[i]);
    return fit_normalizer(std::span<const FeatureMatrix* const>(ptrs));
}

double validation_auroc(const LinearModel& model, std::span<const FeatureMatrix> features,
                        std::span<const SepsisAnnotation> annotations, std::span<const std::size_t> idx,
                        const EvalConfig& eval) {
    std::vector<ScoreStream> streams;
    std::vector<SepsisAnnotation> ann;
    for (std::size_t i : idx) {
        streams.push_back(predict_stream(model, features[i]));
        ann.push_back(annotations[i]);
    }
    const auto stays = make_eval_stays(streams, ann);
    return evaluate(stays, eval).roc.auroc;
}

LinearModel to_model(const LassoFit& fit, const Normalizer& norm, double lambda, double pos_weight,
                     std::uint64_t seed, int rep) {
    LinearModel m;
    m.spec_id = norm.spec_id;
    m.normalizer = norm;
    m.weights = fit.weights;
    m.intercept = fit.intercept;
    m.lambda = lambda;
    m.pos_weight = pos_weight;
    m.metadata.seed = seed;
    m.metadata.split_id = "rep" + std::to_string(rep);
    m.metadata.iterations = fit.iterations;
    m.metadata.final_objective = fit.objective;
    m.metadata.converged = fit.converged;
    return m;
}

} // namespace

TrainResult train_repetitions(std::span<const FeatureMatrix> features, std::span<const SepsisAnnotation> annotations,
                              const DatasetSplit& split, const PipelineConfig& cfg) {
    if (features.size() != annotations.size()) throw std::invalid_argument("features and annotations differ in size");
    if (split.repetitions.empty()) throw InfeasibleError("split has no repetitions");
    TrainResult result;

    std::vector<double> grid = cfg.lambda_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<LassoFit> rep0_fits;
    Normalizer rep0_norm;
    double rep0_pw = 1.0;
    {
        const auto& rep = split.repetitions[0];
        rep0_norm = fit_on(features, rep.train);
        Design d = stack(features, annotations, rep.train, rep0_norm);
        rep0_pw = default_pos_weight(d.y, d.mask);
        LogisticProblem prob(d.x, d.y, d.mask, rep0_pw);
        const LassoFit* warm = nullptr;
        double best = -1.0;
        for (double lambda : grid) {
            rep0_fits.push_back(fit_lasso(prob, lambda, cfg.lasso, warm));
            warm = &rep0_fits.back();
            const LinearModel m = to_model(*warm, rep0_norm, lambda, rep0_pw, cfg.split_seed, 0);
            LambdaPoint pt;
            pt.lambda = lambda;
            pt.validation_auroc = validation_auroc(m, features, annotations, rep.validation, cfg.eval);
            pt.nonzero = static_cast<std::size_t>(
                std::count_if(warm->weights.begin(), warm->weights.end(), [](double w) { return w != 0.0; }));
            result.path.push_back(pt);
            // ties go to the larger lambda (visited first)
            if (pt.validation_auroc > best) {
                best = pt.validation_auroc;
                result.lambda = lambda;
            }
        }
    }

    for (std::size_t r = 0; r < split.repetitions.size(); ++r) {
        const auto& rep = split.repetitions[r];
        if (r == 0) {
            const std::size_t k = static_cast<std::size_t>(
                std::find(grid.begin(), grid.end(), result.lambda) - grid.begin());
            LinearModel m = to_model(rep0_fits[k], rep0_norm, result.lambda, rep0_pw, cfg.split_seed, 0);
            m.metadata.validation_auroc = result.path[k].validation_auroc;
            result.models.push_back(std::move(m));
            continue;
        }
        Normalizer norm = fit_on(features, rep.train);
        Design d = stack(features, annotations, rep.train, norm);
        const double pw = default_pos_weight(d.y, d.mask);
        LogisticProblem prob(d.x, d.y, d.mask, pw);
        const LassoFit fit = fit_lasso(prob, result.lambda, cfg.lasso);
        LinearModel m = to_model(fit, norm, result.lambda, pw, cfg.split_seed, static_cast<int>(r));
        m.metadata.validation_auroc = validation_auroc(m, features, annotations, rep.validation, cfg.eval);
        result.models.push_back(std::move(m));
    }
    return result;
}

// ----- run-all --------------------------------------------------------------

json RunAllResult::summary() const {
    json reps = json::array();
    for (std::size_t r = 0; r < repetition_reports.size(); ++r) {
        const auto& rep = repetition_reports[r];
        reps.push_back({{"repetition", r},
                        {"auroc", rep.roc.auroc},
                        {"harmonized_auroc", rep.mean_auroc},
                        {"harmonized_precision", rep.mean_precision},
                        {"harmonized_earliness", rep.mean_earliness}});
    }
    json base = json::object();
    for (const auto& [id, rep] : baselines)
        base[id] = {{"auroc", rep.roc.auroc},
                    {"harmonized_auroc", rep.mean_auroc},
                    {"harmonized_precision", rep.mean_precision},
                    {"harmonized_earliness", rep.mean_earliness}};
    json path = json::array();
    for (const auto& p : training.path)
        path.push_back({{"lambda", p.lambda}, {"validation_auroc", p.validation_auroc}, {"nonzero", p.nonzero}});
    auto nan_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    return json{{"stays", cohort.stays.size()},
                {"retained", retained.size()},
                {"test_stays", split.test.size()},
                {"lambda", training.lambda},
                {"lambda_path", path},
                {"repetitions", reps},
                {"mean_auroc", nan_null(mean_auroc)},
                {"mean_precision_at_recall", nan_null(mean_precision)},
                {"mean_earliness_hours", nan_null(mean_earliness)},
                {"baselines", base},
                {"seconds", seconds}};
}

RunAllResult run_all(std::span<const RawEvent> events, std::span<const StayStatic> statics,
                     std::span<const TreatmentLog> treatments, const PipelineConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunAllResult out;
    out.cohort = prepare_cohort(events, statics, treatments, cfg);
    out.retained = out.cohort.retained();

    std::vector<SepsisAnnotation> annotations;
    std::vector<std::uint8_t> is_case;
    for (std::size_t i : out.retained) {
        annotations.push_back(out.cohort.stays[i].annotation);
        is_case.push_back(annotations.back().is_case() ? 1 : 0);
    }
    out.split = split_dataset(is_case, cfg.split_seed, cfg.repetitions);

    const FeatureSpec spec = FeatureSpec::make(cfg.feature_set, *out.cohort.catalog, cfg.include_static);
    const auto features = build_features(out.cohort, out.retained, spec);
    out.training = train_repetitions(features, annotations, out.split, cfg);

    out.test_annotations = pick<SepsisAnnotation>(annotations, out.split.test);
    std::vector<double> aurocs, precisions, earliness;
    for (std::size_t r = 0; r < out.training.models.size(); ++r) {
        std::vector<ScoreStream> streams;
        for (std::size_t i : out.split.test) streams.push_back(predict_stream(out.training.models[r], features[i]));
        const auto stays = make_eval_stays(streams, out.test_annotations);
        out.repetition_reports.push_back(evaluate_harmonized(stays, cfg.eval));
        aurocs.push_back(out.repetition_reports.back().roc.auroc);
        precisions.push_back(out.repetition_reports.back().mean_precision);
        earliness.push_back(out.repetition_reports.back().mean_earliness);
        if (r == 0) out.test_streams = std::move(streams);
    }
    out.mean_auroc = mean_of(aurocs);
    out.mean_precision = mean_of(precisions);
    out.mean_earliness = mean_of(earliness);

    for (std::string_view id : kBaselineScoreIds) {
        std::vector<ScoreStream> streams;
        for (std::size_t k : out.split.test) {
            const StayRecord& rec = out.cohort.stays[out.retained[k]];
            streams.push_back(score_as_model(score_hourly(id, rec.grid, rec.treatments, *out.cohort.definitions),
                                             rec.grid.stay_id));
        }
        const auto stays = make_eval_stays(streams, out.test_annotations);
        out.baselines.emplace(std::string(id), evaluate_harmonized(stays, cfg.eval));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

RunAllResult run_all_synthetic(const PipelineConfig& cfg) {
    const SynthCohort cohort = generate(cfg.synth);
    return run_all(cohort.events, cohort.statics, cohort.treatments, cfg);
}

} // namespace sepsis
