#include "sepsis/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sepsis/csv.hpp"
#include "sepsis/error.hpp"

namespace sepsis {

using nlohmann::json;

namespace {

double softplus(double m) { return std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m))); }

double sigmoid(double m) {
    if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
    const double e = std::exp(m);
    return e / (1.0 + e);
}

double l1(std::span<const double> b) {
    double s = 0.0;
    for (double x : b) s += std::abs(x);
    return s;
}

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

} // namespace

// ---------------------------------------------------------------------------

LogisticProblem::LogisticProblem(const Matrix& x, std::span<const double> y, std::span<const std::uint8_t> mask,
                                 double pos_weight)
    : x_(x), pos_weight_(pos_weight) {
    if (y.size() != x.rows || (!mask.empty() && mask.size() != x.rows))
        throw std::invalid_argument("LogisticProblem: X, y and mask differ in length");
    if (!(pos_weight > 0.0) || !std::isfinite(pos_weight))
        throw std::invalid_argument("LogisticProblem: pos_weight must be > 0");
    for (std::size_t r = 0; r < x.rows; ++r) {
        if (!mask.empty() && !mask[r]) continue;
        if (y[r] != 0.0 && y[r] != 1.0) throw std::invalid_argument("LogisticProblem: labels must be 0 or 1");
        rows_.push_back(r);
    }
    if (rows_.empty()) throw std::invalid_argument("LogisticProblem: no eligible rows");
    const double n = static_cast<double>(rows_.size());
    y_.reserve(rows_.size());
    w_.reserve(rows_.size());
    for (std::size_t r : rows_) {
        y_.push_back(y[r]);
        w_.push_back((y[r] == 1.0 ? pos_weight : 1.0) / n);
    }
}

void LogisticProblem::margins(std::span<const double> beta, double intercept, std::span<double> out) const {
    const std::size_t p = x_.cols;
    // LASSO iterates are mostly sparse; skip the zero coefficients
    std::vector<std::size_t> nz;
    for (std::size_t j = 0; j < p; ++j)
        if (beta[j] != 0.0) nz.push_back(j);
    if (nz.size() * 2 < p) {
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const double* xr = x_.data.data() + rows_[i] * p;
            double s = 0.0;
            for (std::size_t j : nz) s += xr[j] * beta[j];
            out[i] = s + intercept;
        }
        return;
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const double* xr = x_.data.data() + rows_[i] * p;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= p; j += 4) {
            s0 += xr[j] * beta[j];
            s1 += xr[j + 1] * beta[j + 1];
            s2 += xr[j + 2] * beta[j + 2];
            s3 += xr[j + 3] * beta[j + 3];
        }
        for (; j < p; ++j) s0 += xr[j] * beta[j];
        out[i] = (s0 + s1) + (s2 + s3) + intercept;
    }
}

double LogisticProblem::loss_from_margins(std::span<const double> m) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) loss += w_[i] * (softplus(m[i]) - y_[i] * m[i]);
    return loss;
}

double LogisticProblem::smooth_loss(std::span<const double> beta, double intercept) const {
    std::vector<double> m(rows_.size());
    margins(beta, intercept, m);
    return loss_from_margins(m);
}

namespace {
// grad = X^T r, returns sum(r); r_i = w_i (sigmoid(m_i) - y_i)
double accumulate_gradient(const Matrix& x, std::span<const std::size_t> rows, std::span<const double> r,
                           std::span<double> grad) {
    const std::size_t p = x.cols;
    std::fill(grad.begin(), grad.end(), 0.0);
    double g0 = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double ri = r[i];
        g0 += ri;
        if (ri == 0.0) continue;
        const double* xr = x.data.data() + rows[i] * p;
        for (std::size_t j = 0; j < p; ++j) grad[j] += ri * xr[j];
    }
    return g0;
}
} // namespace

double LogisticProblem::loss_and_gradient(std::span<const double> beta, double intercept, std::span<double> grad,
                                          double& d_intercept, std::vector<double>& scratch) const {
    scratch.resize(rows_.size());
    margins(beta, intercept, scratch);
    const double loss = loss_from_margins(scratch);
    for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i] = w_[i] * (sigmoid(scratch[i]) - y_[i]);
    d_intercept = accumulate_gradient(x_, rows_, scratch, grad);
    return loss;
}

double LogisticProblem::gradient_from_margins(std::span<const double> m, std::span<double> grad,
                                              std::vector<double>& scratch) const {
    scratch.resize(rows_.size());
    for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i] = w_[i] * (sigmoid(m[i]) - y_[i]);
    return accumulate_gradient(x_, rows_, scratch, grad);
}

double LogisticProblem::gradient(std::span<const double> beta, double intercept, std::span<double> grad) const {
    std::vector<double> scratch;
    double d0 = 0.0;
    loss_and_gradient(beta, intercept, grad, d0, scratch);
    return d0;
}

double LogisticProblem::null_intercept() const {
    double wp = 0.0, wt = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
        wt += w_[i];
        wp += w_[i] * y_[i];
    }
    const double p = wp / wt;
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("LogisticProblem: labels are all one class");
    return std::log(p / (1.0 - p));
}

double LogisticProblem::lambda_max() const {
    std::vector<double> beta(x_.cols, 0.0), grad(x_.cols);
    gradient(beta, null_intercept(), grad);
    double m = 0.0;
    for (double g : grad) m = std::max(m, std::abs(g));
    return m;
}

double default_pos_weight(std::span<const double> y, std::span<const std::uint8_t> mask) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        (y[i] == 1.0 ? pos : neg) += 1.0;
    }
    if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("labels are all one class");
    return neg / pos;
}

namespace {

/// One pass over X for a candidate z: its margins and loss, plus the loss and
/// gradient at the extrapolated point v = z + mom (z - x), whose margins
/// follow linearly. The gradient is wasted when z is rejected, which is rare.
struct CandidatePass {
    double fz = 0.0;
    double fv = 0.0;
    double dv0 = 0.0;
};

CandidatePass candidate_pass(const Matrix& x, std::span<const std::size_t> rows, std::span<const double> y,
                             std::span<const double> w, std::span<const double> bz, double cz,
                             std::span<const double> mx, double mom, std::span<double> mz, std::span<double> mv,
                             std::span<double> grad) {
    const std::size_t p = x.cols;
    std::vector<std::size_t> nz;
    for (std::size_t j = 0; j < p; ++j)
        if (bz[j] != 0.0) nz.push_back(j);
    const bool sparse = nz.size() * 2 < p;
    std::fill(grad.begin(), grad.end(), 0.0);
    CandidatePass out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* xr = x.data.data() + rows[i] * p;
        double m;
        if (sparse) {
            m = 0.0;
            for (std::size_t j : nz) m += xr[j] * bz[j];
        } else {
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            std::size_t j = 0;
            for (; j + 4 <= p; j += 4) {
                s0 += xr[j] * bz[j];
                s1 += xr[j + 1] * bz[j + 1];
                s2 += xr[j + 2] * bz[j + 2];
                s3 += xr[j + 3] * bz[j + 3];
            }
            for (; j < p; ++j) s0 += xr[j] * bz[j];
            m = (s0 + s1) + (s2 + s3);
        }
        m += cz;
        mz[i] = m;
        const double v = m + mom * (m - mx[i]);
        mv[i] = v;
        out.fz += w[i] * (softplus(m) - y[i] * m);
        out.fv += w[i] * (softplus(v) - y[i] * v);
        const double r = w[i] * (sigmoid(v) - y[i]);
        out.dv0 += r;
        for (std::size_t j = 0; j < p; ++j) grad[j] += r * xr[j];
    }
    return out;
}

} // namespace

LassoFit fit_lasso(const LogisticProblem& prob, double lambda, const LassoOptions& opts, const LassoFit* warm) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("fit_lasso: lambda must be >= 0");
    return prob.solve(lambda, opts, warm);
}

LassoFit LogisticProblem::solve(double lambda, const LassoOptions& opts, const LassoFit* warm) const {
    const std::size_t p = n_features();
    const std::size_t n = n_rows();

    // x: accepted iterate, z: candidate, v: extrapolated point.
    std::vector<double> bx(p, 0.0), bz(p), bv(p), grad(p), gnext(p), mx(n), mz(n), mv(n), mvn(n), r(n);
    double cx = null_intercept(), cz = 0.0, cv = 0.0;
    if (warm && warm->weights.size() == p) {
        bx = warm->weights;
        cx = warm->intercept;
    }
    margins(bx, cx, mx);
    double fx = loss_from_margins(mx);
    double Fx = fx + lambda * l1(bx);

    bv = bx;
    cv = cx;
    mv = mx;
    double fv = fx;
    double dv0 = gradient_from_margins(mv, grad, r);
    double t = 1.0;
    double L = 1.0;
    int stall = 0;
    LassoFit fit;
    int k = 0;
    for (; k < opts.max_iterations; ++k) {
        double mom = 0.0, t_next = 1.0;
        if (opts.accelerate) {
            t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            mom = (t - 1.0) / t_next;
        }
        L = std::max(L * 0.9, 1e-12);
        CandidatePass pass;
        while (true) {
            for (std::size_t j = 0; j < p; ++j) bz[j] = soft_threshold(bv[j] - grad[j] / L, lambda / L);
            cz = cv - dv0 / L;
            pass = candidate_pass(x_, rows_, y_, w_, bz, cz, mx, mom, mz, mvn, gnext);
            double lin = (cz - cv) * dv0, quad = (cz - cv) * (cz - cv);
            for (std::size_t j = 0; j < p; ++j) {
                const double d = bz[j] - bv[j];
                lin += grad[j] * d;
                quad += d * d;
            }
            if (pass.fz <= fv + lin + 0.5 * L * quad + 1e-15 * std::abs(fv)) break;
            L *= 2.0;
            if (L > 1e20) throw NumericalError("fit_lasso: step size collapsed");
        }
        const double Fz = pass.fz + lambda * l1(bz);
        if (!std::isfinite(Fz)) throw NumericalError("fit_lasso: non-finite objective");

        if (Fz > Fx) {
            if (mom == 0.0) {
                // a plain proximal step from x went uphill: stationary up to rounding
                if (++stall >= opts.patience) {
                    fit.converged = true;
                    ++k;
                    break;
                }
                continue;
            }
            // monotone restart: discard momentum and step again from x
            t = 1.0;
            bv = bx;
            cv = cx;
            mv = mx;
            fv = fx;
            dv0 = gradient_from_margins(mv, grad, r);
            continue;
        }
        const double decrease = Fx - Fz;
        t = t_next;
        for (std::size_t j = 0; j < p; ++j) bv[j] = bz[j] + mom * (bz[j] - bx[j]);
        cv = cz + mom * (cz - cx);
        bx.swap(bz);
        cx = cz;
        mx.swap(mz);
        mv.swap(mvn);
        grad.swap(gnext);
        fx = pass.fz;
        fv = pass.fv;
        dv0 = pass.dv0;
        Fx = Fz;

        stall = decrease < opts.tolerance ? stall + 1 : 0;
        if (stall >= opts.patience) {
            fit.converged = true;
            ++k;
            break;
        }
    }
    fit.weights = std::move(bx);
    fit.intercept = cx;
    fit.iterations = k;
    fit.objective = Fx;
    return fit;
}

LinearModel train_lasso_lr(const Matrix& x, std::span<const double> y, std::span<const std::uint8_t> mask,
                           double lambda, std::optional<double> pos_weight, const LassoOptions& opts) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        if (!mask.empty() && !mask[r]) continue;
        for (double v : x.row(r))
            if (!std::isfinite(v)) throw NumericalError("train_lasso_lr: non-finite feature value");
    }
    const double pw = pos_weight ? *pos_weight : default_pos_weight(y, mask);
    LogisticProblem prob(x, y, mask, pw);
    LassoFit fit = fit_lasso(prob, lambda, opts);
    LinearModel m;
    m.weights = std::move(fit.weights);
    m.intercept = fit.intercept;
    m.lambda = lambda;
    m.pos_weight = pw;
    m.metadata.iterations = fit.iterations;
    m.metadata.final_objective = fit.objective;
    m.metadata.converged = fit.converged;
    return m;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 12; ++k) g.push_back(std::pow(10.0, -4.0 + k / 3.0));
    return g;
}

// ---------------------------------------------------------------------------

json LinearModel::to_json() const {
    return {{"format", "sepsis-ews-linear-model"},
            {"spec_id", spec_id},
            {"normalizer", normalizer.to_json()},
            {"weights", weights},
            {"intercept", intercept},
            {"lambda", lambda},
            {"pos_weight", pos_weight},
            {"metadata",
             {{"seed", metadata.seed},
              {"split_id", metadata.split_id},
              {"iterations", metadata.iterations},
              {"final_objective", metadata.final_objective},
              {"converged", metadata.converged},
              {"validation_auroc", std::isnan(metadata.validation_auroc) ? json(nullptr)
                                                                         : json(metadata.validation_auroc)}}}};
}

LinearModel LinearModel::from_json(const json& j) {
    LinearModel m;
    try {
        m.spec_id = j.at("spec_id").get<std::string>();
        m.normalizer = Normalizer::from_json(j.at("normalizer"));
        m.weights = j.at("weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.lambda = j.at("lambda").get<double>();
        m.pos_weight = j.at("pos_weight").get<double>();
        const auto& md = j.at("metadata");
        m.metadata.seed = md.at("seed").get<std::uint64_t>();
        m.metadata.split_id = md.at("split_id").get<std::string>();
        m.metadata.iterations = md.at("iterations").get<int>();
        m.metadata.final_objective = md.at("final_objective").get<double>();
        m.metadata.converged = md.at("converged").get<bool>();
        const auto& va = md.at("validation_auroc");
        m.metadata.validation_auroc = va.is_null() ? std::numeric_limits<double>::quiet_NaN() : va.get<double>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
    if (m.weights.size() != m.normalizer.columns.size())
        throw SchemaError("model: weight count does not match the feature count");
    return m;
}

void LinearModel::save(const std::filesystem::path& path) const {
    csv::AtomicFile f(path);
    f.stream() << to_json().dump(1) << '\n';
    f.commit();
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path.string(), 0, 0, "cannot open model");
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string(), 0, 0, e.what());
    }
}

ScoreStream predict_stream(const LinearModel& model, const FeatureMatrix& features) {
    const Normalizer& nz = model.normalizer;
    if (features.spec_id != model.spec_id || features.n_columns() != model.weights.size())
        throw std::invalid_argument("predict_stream: feature spec '" + features.spec_id + "' does not match model '" +
                                    model.spec_id + "'");
    ScoreStream s;
    s.stay_id = features.stay_id;
    s.scores.resize(features.n_hours());
    const std::size_t p = model.weights.size();
    for (std::size_t t = 0; t < features.n_hours(); ++t) {
        auto row = features.values.row(t);
        double acc = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            double x = row[c];
            if (is_missing(x)) x = nz.impute[c];
            acc += (x - nz.mean[c]) / nz.sd[c] * model.weights[c];
        }
        s.scores[t] = acc + model.intercept;
    }
    return s;
}

ScoreStream score_as_model(const ScoreSeries& series, std::string stay_id) {
    ScoreStream s;
    s.stay_id = std::move(stay_id);
    s.scores.assign(series.values.begin(), series.values.end());
    return s;
}

ScoreStream max_pool(std::span<const ScoreStream> streams) {
    if (streams.empty()) throw std::invalid_argument("max_pool: no streams");
    ScoreStream out = streams.front();
    for (const auto& s : streams.subspan(1)) {
        if (s.stay_id != out.stay_id || s.scores.size() != out.scores.size())
            throw std::invalid_argument("max_pool: streams cover different hours");
        for (std::size_t t = 0; t < out.scores.size(); ++t) out.scores[t] = std::max(out.scores[t], s.scores[t]);
    }
    return out;
}

std::vector<ScoreStream> max_pool(std::span<const std::vector<ScoreStream>> per_model, bool normalize) {
    if (per_model.empty()) throw std::invalid_argument("max_pool: no models");
    const std::size_t n_stays = per_model.front().size();
    for (const auto& m : per_model)
        if (m.size() != n_stays) throw std::invalid_argument("max_pool: models cover different stays");
    std::vector<std::vector<ScoreStream>> scaled;
    std::span<const std::vector<ScoreStream>> src = per_model;
    if (normalize) {
        scaled.assign(per_model.begin(), per_model.end());
        for (auto& model : scaled) {
            double sum = 0.0, n = 0.0;
            for (const auto& s : model)
                for (double x : s.scores) sum += x, n += 1.0;
            const double mean = n > 0 ? sum / n : 0.0;
            double ss = 0.0;
            for (const auto& s : model)
                for (double x : s.scores) ss += (x - mean) * (x - mean);
            double sd = n > 0 ? std::sqrt(ss / n) : 1.0;
            if (!(sd > 0.0)) sd = 1.0;
            for (auto& s : model)
                for (double& x : s.scores) x = (x - mean) / sd;
        }
        src = scaled;
    }
    std::vector<ScoreStream> out;
    out.reserve(n_stays);
    std::vector<ScoreStream> one(src.size());
    for (std::size_t i = 0; i < n_stays; ++i) {
        for (std::size_t m = 0; m < src.size(); ++m) one[m] = src[m][i];
        out.push_back(max_pool(std::span<const ScoreStream>(one)));
    }
    return out;
}

} // namespace sepsis
