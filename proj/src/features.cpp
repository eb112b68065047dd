#include "sepsis/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sepsis/error.hpp"
#include "sepsis/ingest.hpp"

namespace sepsis {

using nlohmann::json;

std::string_view to_string(FeatureSet s) { return s == FeatureSet::compact ? "compact" : "extended"; }

FeatureSet feature_set_from_string(std::string_view s) {
    if (s == "compact") return FeatureSet::compact;
    if (s == "extended") return FeatureSet::extended;
    throw SchemaError("unknown feature set '" + std::string(s) + "'");
}

FeatureSpec FeatureSpec::make(FeatureSet set, const VariableCatalog& catalog, bool include_static) {
    FeatureSpec spec;
    spec.set = set;
    spec.include_static = include_static;
    spec.dynamic_variables = catalog.dynamic_ids();
    for (const auto& v : spec.dynamic_variables) spec.names.push_back("value_" + v);
    for (const auto& v : spec.dynamic_variables) spec.names.push_back("ind_" + v);
    for (const auto& v : spec.dynamic_variables) spec.names.push_back("cnt_" + v);
    for (auto d : kDerivedFeatures) spec.names.emplace_back(d);
    if (include_static)
        for (const char* s : {"age", "sex", "height", "weight"}) spec.names.emplace_back(s);
    if (set == FeatureSet::extended) {
        for (const auto& v : spec.dynamic_variables)
            for (int w : spec.lookback_windows)
                for (auto stat : kLookbackStats)
                    spec.names.push_back(v + "_" + std::string(stat) + "_" + std::to_string(w) + "h");
    }
    return spec;
}

std::string FeatureSpec::id() const {
    return std::string(to_string(set)) + (include_static ? "" : "-nostatic") + "-v1";
}

namespace {

const ScoreSeries& find_partial(std::span<const ScoreSeries> partial, std::string_view id) {
    for (const auto& s : partial)
        if (s.score_id == id) return s;
    throw std::invalid_argument("feature extraction needs partial score '" + std::string(id) + "'");
}

double ratio(double num, double den) {
    if (is_missing(num) || is_missing(den) || den == 0.0) return kMissing;
    return num / den;
}

double static_value(const StayStatic& s, std::string_view id) {
    if (id == "age") return s.age;
    if (id == "height") return s.height;
    if (id == "weight") return s.weight;
    switch (s.sex) {
    case Sex::female: return 0.0;
    case Sex::male: return 1.0;
    default: return kMissing;
    }
}

} // namespace

FeatureMatrix extract(const HourlyStay& filled, std::span<const ScoreSeries> partial, const FeatureSpec& spec,
                      const SepsisAnnotation* annotation) {
    const auto n = static_cast<std::size_t>(filled.n_hours);
    const std::size_t nv = spec.dynamic_variables.size();
    FeatureMatrix m;
    m.stay_id = filled.stay_id;
    m.spec_id = spec.id();
    m.columns = std::make_shared<const std::vector<std::string>>(spec.names);
    m.values = Matrix(n, spec.size(), kMissing);
    m.eligible.assign(n, 1);
    if (annotation) {
        if (annotation->stay_id != filled.stay_id || annotation->n_hours != filled.n_hours)
            throw std::invalid_argument("annotation does not match stay " + filled.stay_id);
        for (std::size_t t = 0; t < n; ++t)
            if (annotation->excluded(static_cast<long>(t))) m.eligible[t] = 0;
    }

    const auto& cat = *filled.catalog;
    std::vector<std::size_t> vidx(nv);
    for (std::size_t j = 0; j < nv; ++j) vidx[j] = cat.require_series(spec.dynamic_variables[j]);

    for (std::size_t j = 0; j < nv; ++j) {
        const auto& vals = filled.values[vidx[j]];
        const auto& cnts = filled.counts[vidx[j]];
        long cum = 0;
        for (std::size_t t = 0; t < n; ++t) {
            cum += cnts[t];
            auto row = m.values.row(t);
            row[j] = vals[t];
            row[nv + j] = cum > 0 ? 1.0 : 0.0;
            row[2 * nv + j] = static_cast<double>(cum);
        }
    }

    std::size_t col = 3 * nv;
    auto series = [&](std::string_view id) -> const std::vector<double>* {
        auto i = cat.series_index(id);
        return i ? &filled.values[*i] : nullptr;
    };
    auto at = [&](const std::vector<double>* s, std::size_t t) { return s ? (*s)[t] : kMissing; };
    const auto *hr = series("hr"), *sbp = series("sbp"), *po2 = series("po2"), *fio2 = series("fio2"),
               *bun = series("bun"), *crea = series("crea"), *o2sat = series("o2sat");
    std::vector<const ScoreSeries*> partial_cols;
    for (auto id : kPartialScoreIds) partial_cols.push_back(&find_partial(partial, id));
    for (const auto* p : partial_cols)
        if (p->values.size() != n) throw std::invalid_argument("partial score length mismatch for " + filled.stay_id);
    for (std::size_t t = 0; t < n; ++t) {
        auto row = m.values.row(t);
        const double f = at(fio2, t);
        const double f_frac = is_missing(f) ? kMissing : f / 100.0;
        row[col + 0] = ratio(at(hr, t), at(sbp, t));
        row[col + 1] = ratio(at(po2, t), f_frac);
        row[col + 2] = ratio(at(bun, t), at(crea, t));
        row[col + 3] = ratio(at(o2sat, t), f_frac);
        for (std::size_t k = 0; k < partial_cols.size(); ++k)
            row[col + 4 + k] = static_cast<double>(partial_cols[k]->values[t]);
    }
    col += kDerivedFeatures.size();

    if (spec.include_static) {
        for (const char* s : {"age", "sex", "height", "weight"}) {
            const double x = static_value(filled.statics, s);
            for (std::size_t t = 0; t < n; ++t) m.values(t, col) = x;
            ++col;
        }
    }

    if (spec.set == FeatureSet::extended) {
        std::vector<double> window;
        for (std::size_t j = 0; j < nv; ++j) {
            const auto& vals = filled.values[vidx[j]];
            const auto& cnts = filled.counts[vidx[j]];
            for (int w : spec.lookback_windows) {
                for (std::size_t t = 0; t < n; ++t) {
                    const std::size_t lo = t + 1 >= static_cast<std::size_t>(w) ? t + 1 - static_cast<std::size_t>(w) : 0;
                    window.clear();
                    for (std::size_t u = lo; u <= t; ++u)
                        if (cnts[u] > 0) window.push_back(vals[u]);
                    auto row = m.values.row(t);
                    double* out = &row[col];
                    if (window.empty()) continue;
                    const double k = static_cast<double>(window.size());
                    double sum = 0.0, mn = window[0], mx = window[0];
                    for (double x : window) {
                        sum += x;
                        mn = std::min(mn, x);
                        mx = std::max(mx, x);
                    }
                    const double mean = sum / k;
                    double ss = 0.0;
                    for (double x : window) ss += (x - mean) * (x - mean);
                    out[0] = mean;
                    out[2] = window.size() > 1 ? ss / (k - 1.0) : 0.0;
                    out[3] = mn;
                    out[4] = mx;
                    out[1] = median_inplace(window);
                }
                col += kLookbackStats.size();
            }
        }
    }
    if (col != spec.size()) throw std::logic_error("feature layout mismatch");
    return m;
}

json Normalizer::to_json() const {
    std::vector<int> c(constant.begin(), constant.end()), nv(never_observed.begin(), never_observed.end());
    return {{"spec_id", spec_id}, {"columns", columns}, {"mean", mean}, {"sd", sd},
            {"impute", impute},   {"constant", c},      {"never_observed", nv}};
}

Normalizer Normalizer::from_json(const json& j) {
    Normalizer n;
    try {
        n.spec_id = j.at("spec_id").get<std::string>();
        n.columns = j.at("columns").get<std::vector<std::string>>();
        n.mean = j.at("mean").get<std::vector<double>>();
        n.sd = j.at("sd").get<std::vector<double>>();
        n.impute = j.at("impute").get<std::vector<double>>();
        for (int x : j.at("constant").get<std::vector<int>>()) n.constant.push_back(static_cast<std::uint8_t>(x));
        for (int x : j.at("never_observed").get<std::vector<int>>())
            n.never_observed.push_back(static_cast<std::uint8_t>(x));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("normalizer: ") + e.what());
    }
    const std::size_t p = n.columns.size();
    if (n.mean.size() != p || n.sd.size() != p || n.impute.size() != p || n.constant.size() != p ||
        n.never_observed.size() != p)
        throw SchemaError("normalizer: column count mismatch");
    return n;
}

Normalizer fit_normalizer(std::span<const FeatureMatrix* const> train) {
    if (train.empty()) throw std::invalid_argument("fit_normalizer: empty training set");
    const FeatureMatrix& first = *train.front();
    const std::size_t p = first.n_columns();
    std::size_t n_eligible = 0;
    for (const auto* m : train) {
        if (m->n_columns() != p || m->spec_id != first.spec_id)
            throw std::invalid_argument("fit_normalizer: inconsistent feature layouts");
        n_eligible += static_cast<std::size_t>(std::count(m->eligible.begin(), m->eligible.end(), 1));
    }
    if (n_eligible == 0) throw std::invalid_argument("fit_normalizer: no training-eligible hours");

    Normalizer nz;
    nz.spec_id = first.spec_id;
    nz.columns = *first.columns;
    nz.mean.resize(p);
    nz.sd.resize(p);
    nz.impute.resize(p);
    nz.constant.assign(p, 0);
    nz.never_observed.assign(p, 0);

    std::vector<double> column;
    std::vector<double> observed;
    column.reserve(n_eligible);
    for (std::size_t c = 0; c < p; ++c) {
        column.clear();
        observed.clear();
        for (const auto* m : train) {
            for (std::size_t t = 0; t < m->n_hours(); ++t) {
                if (!m->eligible[t]) continue;
                const double x = m->values(t, c);
                column.push_back(x);
                if (!is_missing(x)) observed.push_back(x);
            }
        }
        double fill = 0.0;
        if (observed.empty())
            nz.never_observed[c] = 1;
        else
            fill = median_inplace(observed);
        double sum = 0.0;
        for (double& x : column) {
            if (is_missing(x)) x = fill;
            sum += x;
        }
        const double mean = sum / static_cast<double>(column.size());
        double ss = 0.0;
        for (double x : column) ss += (x - mean) * (x - mean);
        double sd = std::sqrt(ss / static_cast<double>(column.size()));
        if (!(sd > 0.0) || !std::isfinite(sd)) {
            sd = 1.0;
            nz.constant[c] = 1;
        }
        nz.impute[c] = fill;
        nz.mean[c] = mean;
        nz.sd[c] = sd;
    }
    return nz;
}

Normalizer fit_normalizer(std::span<const FeatureMatrix> train) {
    std::vector<const FeatureMatrix*> ptrs;
    for (const auto& m : train) ptrs.push_back(&m);
    return fit_normalizer(std::span<const FeatureMatrix* const>(ptrs));
}

void apply_normalizer_inplace(FeatureMatrix& m, const Normalizer& n) {
    if (m.n_columns() != n.columns.size() || (m.columns && *m.columns != n.columns))
        throw std::invalid_argument("apply_normalizer: column mismatch for stay " + m.stay_id);
    const std::size_t p = m.n_columns();
    for (std::size_t t = 0; t < m.n_hours(); ++t) {
        auto row = m.values.row(t);
        for (std::size_t c = 0; c < p; ++c) {
            double x = row[c];
            if (is_missing(x)) x = n.impute[c];
            row[c] = (x - n.mean[c]) / n.sd[c];
            if (!std::isfinite(row[c]))
                throw NumericalError("non-finite feature '" + n.columns[c] + "' in stay " + m.stay_id);
        }
    }
}

FeatureMatrix apply_normalizer(const FeatureMatrix& m, const Normalizer& n) {
    FeatureMatrix out = m;
    apply_normalizer_inplace(out, n);
    return out;
}

} // namespace sepsis
