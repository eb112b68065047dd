#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles/oracles.hpp"
#include "sepsis/error.hpp"
#include "sepsis/models.hpp"
#include "sepsis/rng.hpp"

using namespace sepsis;

namespace {

struct Data {
    Matrix x;
    std::vector<double> y;
    std::vector<std::uint8_t> mask;
};

Data make_data(Rng& rng, std::size_t n, std::size_t p, double signal = 1.5) {
    Data d{Matrix(n, p), std::vector<double>(n), std::vector<std::uint8_t>(n, 1)};
    for (std::size_t i = 0; i < n; ++i) {
        double m = -0.7;
        for (std::size_t j = 0; j < p; ++j) {
            d.x(i, j) = rng.normal();
            if (j < 2) m += signal * d.x(i, j) * (j == 0 ? 1 : -1);
        }
        d.y[i] = rng.bernoulli(oracle::sigmoid(m)) ? 1.0 : 0.0;
    }
    d.y[0] = 1;
    d.y[1] = 0;
    return d;
}

oracle::LassoProblem as_oracle(const Data& d, double pos_weight, double lambda) {
    oracle::LassoProblem pr;
    for (std::size_t i = 0; i < d.x.rows; ++i) {
        if (!d.mask[i]) continue;
        auto r = d.x.row(i);
        pr.x.emplace_back(r.begin(), r.end());
        pr.y.push_back(d.y[i]);
    }
    pr.pos_weight = pos_weight;
    pr.lambda = lambda;
    return pr;
}

LassoOptions tight() {
    LassoOptions o;
    o.tolerance = 1e-13;
    o.patience = 10;
    o.max_iterations = 100000;
    return o;
}

} // namespace

TEST_CASE("gradient matches finite differences") {
    Rng rng(1);
    auto d = make_data(rng, 40, 5);
    d.mask[3] = 0;
    LogisticProblem prob(d.x, d.y, d.mask, 2.0);
    std::vector<double> beta{0.3, -0.2, 0.1, 0.0, 0.5};
    std::vector<double> g(5);
    const double b = 0.2;
    const double gb = prob.gradient(beta, b, g);
    const double h = 1e-6;
    for (std::size_t j = 0; j < 5; ++j) {
        auto up = beta, dn = beta;
        up[j] += h;
        dn[j] -= h;
        CHECK(g[j] == doctest::Approx((prob.smooth_loss(up, b) - prob.smooth_loss(dn, b)) / (2 * h)).epsilon(1e-6));
    }
    CHECK(gb == doctest::Approx((prob.smooth_loss(beta, b + h) - prob.smooth_loss(beta, b - h)) / (2 * h)).epsilon(1e-6));
    const auto pr = as_oracle(d, 2.0, 0.0);
    for (std::size_t j = 0; j < 5; ++j) CHECK(g[j] == doctest::Approx(oracle::partial(pr, beta, b, j)).epsilon(1e-10));
}

TEST_CASE("solution agrees with an independent convex solver") {
    std::ifstream in(std::filesystem::path(SEPSIS_TEST_DATA_DIR) / "lasso_fixture.json");
    REQUIRE(in);
    const auto fx = nlohmann::json::parse(in);
    const auto rows = fx.at("x").get<std::vector<std::vector<double>>>();
    Matrix x(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
    const auto y = fx.at("y").get<std::vector<double>>();
    const std::vector<std::uint8_t> mask(y.size(), 1);
    CHECK(default_pos_weight(y, mask) == doctest::Approx(fx.at("pos_weight").get<double>()));
    LogisticProblem prob(x, y, mask, fx.at("pos_weight").get<double>());
    const auto fit = fit_lasso(prob, fx.at("lambda").get<double>(), tight());
    CHECK(fit.converged);
    const auto w = fx.at("weights").get<std::vector<double>>();
    for (std::size_t j = 0; j < w.size(); ++j) CHECK(fit.weights[j] == doctest::Approx(w[j]).epsilon(1e-5));
    CHECK(fit.intercept == doctest::Approx(fx.at("intercept").get<double>()).epsilon(1e-5));
    CHECK(fit.objective == doctest::Approx(fx.at("objective").get<double>()).epsilon(1e-8));
}

TEST_CASE("solution agrees with coordinate descent") {
    Rng rng(99);
    for (int trial = 0; trial < 6; ++trial) {
        auto d = make_data(rng, 60, 4);
        const double pw = default_pos_weight(d.y, d.mask);
        for (double lambda : {0.002, 0.02, 0.08}) {
            LogisticProblem prob(d.x, d.y, d.mask, pw);
            const auto fit = fit_lasso(prob, lambda, tight());
            const auto [beta, b0] = oracle::lasso_coordinate_descent(as_oracle(d, pw, lambda));
            for (std::size_t j = 0; j < beta.size(); ++j) CHECK(fit.weights[j] == doctest::Approx(beta[j]).scale(1).epsilon(1e-5));
            CHECK(fit.intercept == doctest::Approx(b0).scale(1).epsilon(1e-5));
        }
    }
}

TEST_CASE("fits satisfy the optimality conditions") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        auto d = make_data(rng, 200, 12);
        for (std::size_t i = 0; i < d.mask.size(); i += 7) d.mask[i] = 0;
        LogisticProblem prob(d.x, d.y, d.mask, default_pos_weight(d.y, d.mask));
        const double lambda = prob.lambda_max() * rng.uniform(0.02, 0.6);
        const auto fit = fit_lasso(prob, lambda);
        REQUIRE(fit.converged);
        std::vector<double> g(12);
        const double gb = prob.gradient(fit.weights, fit.intercept, g);
        CHECK(std::abs(gb) < 1e-3);
        for (std::size_t j = 0; j < 12; ++j) {
            if (fit.weights[j] == 0.0) CHECK(std::abs(g[j]) <= lambda + 1e-3);
            else CHECK(std::abs(g[j] + lambda * (fit.weights[j] > 0 ? 1 : -1)) < 1e-3);
        }
    }
}

TEST_CASE("null model above lambda max") {
    Rng rng(8);
    auto d = make_data(rng, 100, 6);
    LogisticProblem prob(d.x, d.y, d.mask, 1.7);
    const auto fit = fit_lasso(prob, prob.lambda_max() * 1.0001);
    for (double w : fit.weights) CHECK(w == 0.0);
    CHECK(fit.intercept == doctest::Approx(prob.null_intercept()).epsilon(1e-6));
    // Weighted base rate: logit(pw * n1 / n0).
    double n1 = 0, n0 = 0;
    for (double v : d.y) (v == 1 ? n1 : n0) += 1;
    CHECK(prob.null_intercept() == doctest::Approx(std::log(1.7 * n1 / n0)));
    const auto below = fit_lasso(prob, prob.lambda_max() * 0.9);
    CHECK(std::any_of(below.weights.begin(), below.weights.end(), [](double w) { return w != 0.0; }));
}

TEST_CASE("l1 norm shrinks along the lambda path") {
    Rng rng(21);
    auto d = make_data(rng, 300, 15, 0.8);
    LogisticProblem prob(d.x, d.y, d.mask, default_pos_weight(d.y, d.mask));
    double prev = -1;
    auto grid = default_lambda_grid();
    std::sort(grid.begin(), grid.end(), std::greater<>());
    std::optional<LassoFit> last;
    for (double lambda : grid) {
        const auto fit = fit_lasso(prob, lambda, {}, last ? &*last : nullptr);
        double l1 = 0;
        for (double w : fit.weights) l1 += std::abs(w);
        if (prev >= 0) CHECK(l1 >= prev - 1e-4);
        prev = l1;
        last = fit;
    }
}

TEST_CASE("warm starts and plain proximal gradient reach the same optimum") {
    Rng rng(2);
    auto d = make_data(rng, 150, 8);
    LogisticProblem prob(d.x, d.y, d.mask, 1.0);
    const auto cold = fit_lasso(prob, 0.01, tight());
    const auto start = fit_lasso(prob, 0.05, tight());
    const auto warm = fit_lasso(prob, 0.01, tight(), &start);
    auto plain_opts = tight();
    plain_opts.accelerate = false;
    const auto plain = fit_lasso(prob, 0.01, plain_opts);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(warm.weights[j] == doctest::Approx(cold.weights[j]).scale(1).epsilon(1e-6));
        CHECK(plain.weights[j] == doctest::Approx(cold.weights[j]).scale(1).epsilon(1e-5));
    }
    CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-10));
}

TEST_CASE("training input validation") {
    Matrix x(4, 2, 0.5);
    std::vector<double> one_class{1, 1, 1, 1};
    std::vector<std::uint8_t> mask(4, 1);
    CHECK_THROWS_AS(train_lasso_lr(x, one_class, mask, 0.1), std::invalid_argument);
    std::vector<double> y{1, 0, 1, 0};
    x(2, 1) = std::nan("");
    CHECK_THROWS_AS(train_lasso_lr(x, y, mask, 0.1), NumericalError);
    mask[2] = 0; // masked rows are not inspected
    CHECK_NOTHROW(train_lasso_lr(x, y, mask, 0.1));
}

TEST_CASE("lambda grid") {
    const auto g = default_lambda_grid();
    REQUIRE(g.size() == 13);
    CHECK(g.front() == doctest::Approx(1e-4));
    CHECK(g.back() == doctest::Approx(1.0));
    CHECK(g[3] == doctest::Approx(1e-3));
}

TEST_CASE("model serialization round-trips") {
    LinearModel m;
    m.spec_id = "compact-v1";
    m.normalizer.spec_id = "compact-v1";
    m.normalizer.columns = {"a", "b"};
    m.normalizer.mean = {1, 2};
    m.normalizer.sd = {1, 0.5};
    m.normalizer.impute = {0, 3};
    m.normalizer.constant = {0, 0};
    m.normalizer.never_observed = {0, 0};
    m.weights = {0.25, -1.0 / 3.0};
    m.intercept = -0.125;
    m.lambda = 0.01;
    m.pos_weight = 3;
    m.metadata.seed = 42;
    const auto path = std::filesystem::temp_directory_path() / "sepsis_model_test.json";
    m.save(path);
    const auto back = LinearModel::load(path);
    CHECK(back.weights == m.weights);
    CHECK(back.intercept == m.intercept);
    CHECK(back.normalizer.sd == m.normalizer.sd);
    CHECK(back.metadata.seed == 42);
    std::filesystem::remove(path);
    auto j = m.to_json();
    j.erase("weights");
    CHECK_THROWS_AS(LinearModel::from_json(j), SchemaError);

    FeatureMatrix f;
    f.stay_id = "s";
    f.spec_id = "compact-v1";
    f.values = Matrix(2, 2);
    f.values(0, 0) = 2;
    f.values(0, 1) = std::nan("");
    f.values(1, 0) = 1;
    f.values(1, 1) = 2.5;
    const auto s = predict_stream(m, f);
    CHECK(s.scores[0] == doctest::Approx(0.25 * 1 - 1.0 / 3.0 * 2 - 0.125));
    CHECK(s.scores[1] == doctest::Approx(0.25 * 0 - 1.0 / 3.0 * 1 - 0.125));
    f.spec_id = "extended-v1";
    CHECK_THROWS_AS(predict_stream(m, f), std::invalid_argument);
}

TEST_CASE("max pooling") {
    std::vector<ScoreStream> one{{"s", {1, 5, 2}}, {"s", {3, 0, 2}}};
    CHECK(max_pool(std::span<const ScoreStream>(one)).scores == std::vector<double>{3, 5, 2});
    std::vector<ScoreStream> bad{{"s", {1}}, {"t", {1}}};
    CHECK_THROWS_AS(max_pool(std::span<const ScoreStream>(bad)), std::invalid_argument);

    std::vector<std::vector<ScoreStream>> models{{{"a", {0, 1}}, {"b", {2}}}, {{"a", {10, 0}}, {"b", {20}}}};
    auto pooled = max_pool(std::span<const std::vector<ScoreStream>>(models));
    CHECK(pooled[0].scores == std::vector<double>{10, 1});
    // Pooling a model with itself is the identity.
    std::vector<std::vector<ScoreStream>> twice{models[0], models[0]};
    auto same = max_pool(std::span<const std::vector<ScoreStream>>(twice));
    CHECK(same[0].scores == models[0][0].scores);
    CHECK(same[1].scores == models[0][1].scores);
    auto z = max_pool(std::span<const std::vector<ScoreStream>>(models), true);
    // z-scores: model 0 -> {-c, 0}, {c}; model 1 -> {0, -c}, {c} with c = sqrt(3/2)
    CHECK(z[0].scores[0] == doctest::Approx(0.0));
    CHECK(z[0].scores[1] == doctest::Approx(0.0));
    CHECK(z[1].scores[0] == doctest::Approx(std::sqrt(1.5)));
}
