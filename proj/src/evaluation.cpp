#include "sepsis/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sepsis/csv.hpp"
#include "sepsis/error.hpp"
#include "sepsis/ingest.hpp"
#include "sepsis/rng.hpp"

namespace sepsis {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double num_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }
} // namespace

std::string_view to_string(ThresholdTie t) { return t == ThresholdTie::ge ? "ge" : "gt"; }

ThresholdTie threshold_tie_from_string(std::string_view s) {
    if (s == "ge") return ThresholdTie::ge;
    if (s == "gt") return ThresholdTie::gt;
    throw SchemaError("unknown threshold tie rule '" + std::string(s) + "'");
}

void EvalConfig::validate() const {
    if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) throw InfeasibleError("trim_fraction must be in [0, 0.5)");
    if (n_thresholds < 2) throw InfeasibleError("n_thresholds must be >= 2");
    if (!(target_recall > 0.0 && target_recall < 1.0)) throw InfeasibleError("target_recall must be in (0, 1)");
    if (!(target_prevalence > 0.0 && target_prevalence < 1.0))
        throw InfeasibleError("target_prevalence must be in (0, 1)");
    if (n_subsamplings < 1) throw InfeasibleError("n_subsamplings must be >= 1");
}

json EvalConfig::to_json() const {
    return {{"trim_fraction", trim_fraction},
            {"n_thresholds", n_thresholds},
            {"target_recall", target_recall},
            {"target_prevalence", target_prevalence},
            {"n_subsamplings", n_subsamplings},
            {"seed", seed},
            {"threshold_tie", to_string(tie)},
            {"threshold_mode", mode == ThresholdMode::exact ? "exact" : "trimmed-grid"}};
}

EvalConfig EvalConfig::from_json(const json& j, EvalConfig c) {
    for (const auto& [key, value] : j.items()) {
        if (key == "trim_fraction") c.trim_fraction = value.get<double>();
        else if (key == "n_thresholds") c.n_thresholds = value.get<int>();
        else if (key == "target_recall") c.target_recall = value.get<double>();
        else if (key == "target_prevalence") c.target_prevalence = value.get<double>();
        else if (key == "n_subsamplings") c.n_subsamplings = value.get<int>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "threshold_tie") c.tie = threshold_tie_from_string(value.get<std::string>());
        else if (key == "threshold_mode") {
            const auto m = value.get<std::string>();
            if (m == "exact") c.mode = ThresholdMode::exact;
            else if (m == "trimmed-grid") c.mode = ThresholdMode::trimmed_grid;
            else throw SchemaError("unknown threshold_mode '" + m + "'");
        } else
            throw SchemaError("eval config: unknown key '" + key + "'");
    }
    return c;
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ThresholdGrid threshold_grid(std::span<const double> scores, const EvalConfig& cfg) {
    cfg.validate();
    std::vector<double> s(scores.begin(), scores.end());
    s.erase(std::remove_if(s.begin(), s.end(), [](double x) { return std::isnan(x); }), s.end());
    if (s.empty()) throw std::invalid_argument("threshold_grid: no scores");
    std::sort(s.begin(), s.end());
    ThresholdGrid g;
    g.lo = percentile_sorted(s, cfg.trim_fraction);
    g.hi = percentile_sorted(s, 1.0 - cfg.trim_fraction);
    if (!(g.hi > g.lo)) {
        g.degenerate = true;
        g.thresholds = {g.lo};
        return g;
    }
    const int n = cfg.n_thresholds;
    g.thresholds.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.thresholds[static_cast<std::size_t>(i)] = g.lo + (g.hi - g.lo) * static_cast<double>(i) / (n - 1);
    g.thresholds.back() = g.hi;
    return g;
}

std::vector<EvalStay> make_eval_stays(std::span<const ScoreStream> streams,
                                      std::span<const SepsisAnnotation> annotations) {
    std::map<std::string_view, const SepsisAnnotation*> by_id;
    for (const auto& a : annotations) by_id[a.stay_id] = &a;
    std::vector<EvalStay> out;
    out.reserve(streams.size());
    for (const auto& s : streams) {
        auto it = by_id.find(s.stay_id);
        if (it == by_id.end()) throw std::invalid_argument("no annotation for stay " + s.stay_id);
        const SepsisAnnotation& a = *it->second;
        EvalStay e;
        e.stay_id = s.stay_id;
        e.is_case = a.is_case();
        e.onset = a.onset;
        const auto keep = std::min(s.scores.size(), static_cast<std::size_t>(std::max(0L, a.exposed_hours())));
        e.scores.assign(s.scores.begin(), s.scores.begin() + static_cast<std::ptrdiff_t>(keep));
        out.push_back(std::move(e));
    }
    return out;
}

double Confusion::recall() const { return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : kNaN; }
double Confusion::fpr() const { return fp + tn > 0 ? static_cast<double>(fp) / static_cast<double>(fp + tn) : kNaN; }
double Confusion::precision() const {
    return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : kNaN;
}

namespace {
std::optional<std::size_t> first_alarm(const std::vector<double>& s, double thr, ThresholdTie tie) {
    for (std::size_t t = 0; t < s.size(); ++t)
        if (tie == ThresholdTie::ge ? s[t] >= thr : s[t] > thr) return t;
    return std::nullopt;
}

double median_of(std::vector<double>& v) { return v.empty() ? kNaN : median_inplace(v); }
} // namespace

SweepResult encounter_sweep(std::span<const EvalStay> stays, double threshold, ThresholdTie tie) {
    SweepResult r;
    std::vector<double> earliness;
    for (const auto& s : stays) {
        EncounterOutcome o;
        o.stay_id = s.stay_id;
        o.is_case = s.is_case;
        o.onset = s.onset;
        if (auto t = first_alarm(s.scores, threshold, tie)) o.alarm_time = static_cast<double>(*t);
        if (s.is_case) {
            if (o.alarm_time) {
                ++r.confusion.tp;
                earliness.push_back(*s.onset - *o.alarm_time);
            } else {
                ++r.confusion.fn;
            }
        } else {
            (o.alarm_time ? r.confusion.fp : r.confusion.tn) += 1;
        }
        r.outcomes.push_back(std::move(o));
    }
    r.median_earliness = median_of(earliness);
    return r;
}

std::vector<ThresholdMetrics> sweep_thresholds(std::span<const EvalStay> stays, std::span<const double> thresholds,
                                               ThresholdTie tie) {
    // Running maxima let each stay's first alarm be found by binary search.
    std::vector<std::vector<double>> prefix(stays.size());
    for (std::size_t i = 0; i < stays.size(); ++i) {
        const auto& s = stays[i].scores;
        prefix[i].resize(s.size());
        double m = -INFINITY;
        for (std::size_t t = 0; t < s.size(); ++t) prefix[i][t] = m = std::max(m, s[t]);
    }
    std::vector<ThresholdMetrics> out;
    out.reserve(thresholds.size());
    std::vector<double> earliness;
    for (double thr : thresholds) {
        ThresholdMetrics m;
        m.threshold = thr;
        earliness.clear();
        for (std::size_t i = 0; i < stays.size(); ++i) {
            const auto& p = prefix[i];
            auto it = tie == ThresholdTie::ge ? std::lower_bound(p.begin(), p.end(), thr)
                                              : std::upper_bound(p.begin(), p.end(), thr);
            const bool alarm = it != p.end();
            if (stays[i].is_case) {
                if (alarm) {
                    ++m.confusion.tp;
                    earliness.push_back(*stays[i].onset - static_cast<double>(it - p.begin()));
                } else {
                    ++m.confusion.fn;
                }
            } else {
                (alarm ? m.confusion.fp : m.confusion.tn) += 1;
            }
        }
        m.recall = m.confusion.recall();
        m.fpr = m.confusion.fpr();
        m.precision = m.confusion.precision();
        m.median_earliness = median_of(earliness);
        out.push_back(m);
    }
    return out;
}

RocCurve roc_auroc(std::span<const ThresholdMetrics> metrics) {
    if (metrics.empty()) throw std::invalid_argument("roc_auroc: no thresholds");
    const auto& c = metrics.front().confusion;
    if (c.tp + c.fn == 0) throw std::invalid_argument("roc_auroc: no cases");
    if (c.fp + c.tn == 0) throw std::invalid_argument("roc_auroc: no controls");
    const long pos = c.tp + c.fn, neg = c.fp + c.tn;
    // Area in integer (fp, tp) counts, so equal curves give bit-equal AUROCs.
    std::vector<std::pair<long, long>> counts{{0, 0}, {neg, pos}};
    for (const auto& m : metrics) counts.emplace_back(m.confusion.fp, m.confusion.tp);
    std::sort(counts.begin(), counts.end());
    counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
    long long twice_area = 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
        twice_area += static_cast<long long>(counts[i].first - counts[i - 1].first) *
                      static_cast<long long>(counts[i - 1].second + counts[i].second);
    RocCurve r;
    for (const auto& [fp, tp] : counts)
        r.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos));
    r.auroc = static_cast<double>(twice_area) / static_cast<double>(2LL * neg * pos);
    return r;
}

FixedRecall at_fixed_recall(std::span<const ThresholdMetrics> metrics, double target) {
    FixedRecall f;
    // Highest threshold hitting the target exactly wins.
    for (auto it = metrics.rbegin(); it != metrics.rend(); ++it) {
        if (it->recall == target) {
            f.attained = true;
            f.threshold = it->threshold;
            f.precision = it->precision;
            f.median_earliness = it->median_earliness;
            return f;
        }
    }
    for (std::size_t i = 0; i + 1 < metrics.size(); ++i) {
        const auto& a = metrics[i];
        const auto& b = metrics[i + 1];
        const bool bracket = (a.recall > target && target > b.recall) || (a.recall < target && target < b.recall);
        if (!bracket) continue;
        const double w = (a.recall - target) / (a.recall - b.recall);
        f.attained = true;
        f.threshold = a.threshold + w * (b.threshold - a.threshold);
        f.precision = a.precision + w * (b.precision - a.precision);
        f.median_earliness = a.median_earliness + w * (b.median_earliness - a.median_earliness);
        return f;
    }
    f.precision = kNaN;
    f.median_earliness = kNaN;
    f.threshold = kNaN;
    return f;
}

EvalReport evaluate(std::span<const EvalStay> stays, const EvalConfig& cfg) {
    cfg.validate();
    EvalReport rep;
    rep.target_recall = cfg.target_recall;
    std::vector<double> pooled;
    for (const auto& s : stays) {
        (s.is_case ? rep.n_cases : rep.n_controls) += 1;
        if (s.is_case && !s.onset) throw std::invalid_argument("case stay " + s.stay_id + " has no onset");
        pooled.insert(pooled.end(), s.scores.begin(), s.scores.end());
    }
    if (rep.n_cases == 0 || rep.n_controls == 0) throw std::invalid_argument("evaluate: need cases and controls");
    std::vector<double> thresholds;
    if (pooled.empty()) {
        rep.degenerate_grid = true;
        thresholds = {0.0};
    } else if (cfg.mode == ThresholdMode::exact) {
        thresholds = pooled;
        std::sort(thresholds.begin(), thresholds.end());
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
        rep.degenerate_grid = thresholds.size() < 2;
    } else {
        auto g = threshold_grid(pooled, cfg);
        rep.degenerate_grid = g.degenerate;
        thresholds = std::move(g.thresholds);
    }
    rep.metrics = sweep_thresholds(stays, thresholds, cfg.tie);
    rep.roc = roc_auroc(rep.metrics);
    rep.at_recall = at_fixed_recall(rep.metrics, cfg.target_recall);
    rep.mean_auroc = rep.roc.auroc;
    rep.mean_precision = rep.at_recall.precision;
    rep.mean_earliness = rep.at_recall.median_earliness;
    rep.recall_attained_in = rep.at_recall.attained ? 1 : 0;
    rep.n_subsamples = 0;
    return rep;
}

Harmonization harmonize_prevalence(std::span<const std::uint8_t> is_case, double target, int reps,
                                   std::uint64_t seed) {
    std::vector<std::size_t> cases, controls;
    for (std::size_t i = 0; i < is_case.size(); ++i) (is_case[i] ? cases : controls).push_back(i);
    if (cases.empty() || controls.empty())
        throw std::invalid_argument("harmonize_prevalence: need at least one case and one control");
    Harmonization h;
    const double nc = static_cast<double>(cases.size());
    const double nk = static_cast<double>(controls.size());
    const double prevalence = nc / (nc + nk);
    std::vector<std::size_t> all(is_case.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    std::size_t keep_cases = cases.size(), keep_controls = controls.size();
    if (prevalence < target) {
        keep_controls = static_cast<std::size_t>(std::llround(nc * (1.0 - target) / target));
    } else if (prevalence > target) {
        keep_cases = static_cast<std::size_t>(std::llround(nk * target / (1.0 - target)));
        h.subsampled_cases = keep_cases < cases.size();
    }
    if (keep_cases == 0 || keep_controls == 0 || keep_controls > controls.size() || keep_cases > cases.size()) {
        h.flagged = true;
        h.subsamples.assign(static_cast<std::size_t>(reps), all);
        return h;
    }
    std::vector<std::uint8_t> seen(is_case.size(), 0);
    for (int r = 0; r < reps; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::vector<std::size_t> pick;
        if (keep_cases < cases.size()) {
            for (auto k : rng.sample_without_replacement(cases.size(), keep_cases)) pick.push_back(cases[k]);
        } else {
            pick = cases;
        }
        if (keep_controls < controls.size()) {
            for (auto k : rng.sample_without_replacement(controls.size(), keep_controls)) pick.push_back(controls[k]);
        } else {
            pick.insert(pick.end(), controls.begin(), controls.end());
        }
        std::sort(pick.begin(), pick.end());
        for (auto i : pick) seen[i] = 1;
        h.subsamples.push_back(std::move(pick));
    }
    std::size_t covered = 0;
    for (auto i : cases) covered += seen[i];
    h.coverage = static_cast<double>(covered) / nc;
    return h;
}

EvalReport evaluate_harmonized(std::span<const EvalStay> stays, const EvalConfig& cfg) {
    EvalReport rep = evaluate(stays, cfg);
    std::vector<std::uint8_t> is_case;
    for (const auto& s : stays) is_case.push_back(s.is_case ? 1 : 0);
    const Harmonization h = harmonize_prevalence(is_case, cfg.target_prevalence, cfg.n_subsamplings, cfg.seed);
    rep.coverage = h.coverage;
    rep.harmonization_flagged = h.flagged;
    rep.n_subsamples = h.subsamples.size();
    double auc = 0.0, prec = 0.0, early = 0.0;
    std::size_t attained = 0;
    std::vector<EvalStay> sub;
    for (const auto& idx : h.subsamples) {
        sub.clear();
        for (auto i : idx) sub.push_back(stays[i]);
        EvalReport r = evaluate(sub, cfg);
        auc += r.roc.auroc;
        if (r.at_recall.attained && std::isfinite(r.at_recall.precision)) {
            prec += r.at_recall.precision;
            early += r.at_recall.median_earliness;
            ++attained;
        }
    }
    rep.mean_auroc = auc / static_cast<double>(h.subsamples.size());
    rep.mean_precision = attained ? prec / static_cast<double>(attained) : kNaN;
    rep.mean_earliness = attained ? early / static_cast<double>(attained) : kNaN;
    rep.recall_attained_in = attained;
    return rep;
}

DatasetSplit split_dataset(std::span<const std::uint8_t> is_case, std::uint64_t seed, int repetitions,
                           double test_fraction, double validation_fraction) {
    if (repetitions < 1) throw InfeasibleError("split_dataset: repetitions must be >= 1");
    if (!(test_fraction > 0 && validation_fraction > 0 && test_fraction + validation_fraction < 1))
        throw InfeasibleError("split_dataset: invalid split fractions");
    std::array<std::vector<std::size_t>, 2> strata;
    for (std::size_t i = 0; i < is_case.size(); ++i) strata[is_case[i] ? 1 : 0].push_back(i);

    DatasetSplit split;
    split.repetitions.resize(static_cast<std::size_t>(repetitions));
    std::array<std::vector<std::size_t>, 2> dev;
    for (std::size_t s = 0; s < 2; ++s) {
        auto idx = strata[s];
        const std::size_t n = idx.size();
        const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
        const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
        if (n_test == 0 || n_val == 0 || n_test + n_val >= n)
            throw InfeasibleError(std::string("split_dataset: the ") + (s ? "case" : "control") +
                                  " stratum is too small (" + std::to_string(n) + " stays)");
        Rng rng(derive_seed(seed, s));
        rng.shuffle(idx);
        split.test.insert(split.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        dev[s].assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
        std::sort(dev[s].begin(), dev[s].end());
        for (int r = 0; r < repetitions; ++r) {
            auto d = dev[s];
            Rng rr(derive_seed(derive_seed(seed, 100 + static_cast<std::uint64_t>(r)), s));
            rr.shuffle(d);
            auto& rep = split.repetitions[static_cast<std::size_t>(r)];
            rep.validation.insert(rep.validation.end(), d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n_val));
            rep.train.insert(rep.train.end(), d.begin() + static_cast<std::ptrdiff_t>(n_val), d.end());
        }
    }
    std::sort(split.test.begin(), split.test.end());
    for (auto& r : split.repetitions) {
        std::sort(r.train.begin(), r.train.end());
        std::sort(r.validation.begin(), r.validation.end());
    }
    return split;
}

// ---------------------------------------------------------------------------

json EvalReport::to_json() const {
    json thr = json::array();
    for (const auto& m : metrics)
        thr.push_back({{"threshold", num(m.threshold)},
                       {"tp", m.confusion.tp},
                       {"fp", m.confusion.fp},
                       {"tn", m.confusion.tn},
                       {"fn", m.confusion.fn},
                       {"median_earliness", num(m.median_earliness)}});
    json roc_pts = json::array();
    for (const auto& [x, y] : roc.points) roc_pts.push_back({x, y});
    return {{"n_cases", n_cases},
            {"n_controls", n_controls},
            {"degenerate_grid", degenerate_grid},
            {"auroc", roc.auroc},
            {"target_recall", target_recall},
            {"at_target_recall",
             {{"attained", at_recall.attained},
              {"threshold", num(at_recall.threshold)},
              {"precision", num(at_recall.precision)},
              {"median_earliness", num(at_recall.median_earliness)}}},
            {"harmonized",
             {{"n_subsamples", n_subsamples},
              {"coverage", coverage},
              {"flagged", harmonization_flagged},
              {"mean_auroc", num(mean_auroc)},
              {"mean_precision", num(mean_precision)},
              {"mean_median_earliness", num(mean_earliness)},
              {"recall_attained_in", recall_attained_in}}},
            {"roc_points", roc_pts},
            {"thresholds", thr}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    try {
        r.n_cases = j.at("n_cases").get<std::size_t>();
        r.n_controls = j.at("n_controls").get<std::size_t>();
        r.degenerate_grid = j.at("degenerate_grid").get<bool>();
        r.roc.auroc = j.at("auroc").get<double>();
        r.target_recall = j.at("target_recall").get<double>();
        const auto& a = j.at("at_target_recall");
        r.at_recall.attained = a.at("attained").get<bool>();
        r.at_recall.threshold = num_from(a.at("threshold"));
        r.at_recall.precision = num_from(a.at("precision"));
        r.at_recall.median_earliness = num_from(a.at("median_earliness"));
        const auto& h = j.at("harmonized");
        r.n_subsamples = h.at("n_subsamples").get<std::size_t>();
        r.coverage = h.at("coverage").get<double>();
        r.harmonization_flagged = h.at("flagged").get<bool>();
        r.mean_auroc = num_from(h.at("mean_auroc"));
        r.mean_precision = num_from(h.at("mean_precision"));
        r.mean_earliness = num_from(h.at("mean_median_earliness"));
        r.recall_attained_in = h.at("recall_attained_in").get<std::size_t>();
        for (const auto& p : j.at("roc_points")) r.roc.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        for (const auto& t : j.at("thresholds")) {
            ThresholdMetrics m;
            m.threshold = num_from(t.at("threshold"));
            m.confusion = {t.at("tp").get<long>(), t.at("fp").get<long>(), t.at("tn").get<long>(),
                           t.at("fn").get<long>()};
            m.recall = m.confusion.recall();
            m.fpr = m.confusion.fpr();
            m.precision = m.confusion.precision();
            m.median_earliness = num_from(t.at("median_earliness"));
            r.metrics.push_back(m);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("eval report: ") + e.what());
    }
    return r;
}

std::string EvalReport::roc_csv() const {
    std::ostringstream out;
    out << "fpr,tpr\n";
    for (const auto& [x, y] : roc.points) out << csv::format_number(x) << ',' << csv::format_number(y) << '\n';
    return out.str();
}

std::string EvalReport::metrics_csv() const {
    std::ostringstream out;
    out << "threshold,tp,fp,tn,fn,recall,fpr,precision,median_earliness\n";
    for (const auto& m : metrics) {
        csv::RowWriter w(out);
        w << m.threshold << m.confusion.tp << m.confusion.fp << m.confusion.tn << m.confusion.fn << m.recall << m.fpr
          << m.precision << m.median_earliness;
        w.end();
    }
    return out.str();
}

} // namespace sepsis
