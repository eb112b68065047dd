#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sepsis/features.hpp"
#include "sepsis/scores.hpp"

namespace sepsis {

struct TrainingMetadata {
    std::uint64_t seed = 0;
    std::string split_id;
    int iterations = 0;
    double final_objective = 0.0;
    bool converged = false;
    double validation_auroc = std::numeric_limits<double>::quiet_NaN();
};

struct LinearModel {
    std::string spec_id;
    Normalizer normalizer;
    std::vector<double> weights;
    double intercept = 0.0;
    double lambda = 0.0;
    double pos_weight = 1.0;
    TrainingMetadata metadata;

    nlohmann::json to_json() const;
    static LinearModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static LinearModel load(const std::filesystem::path& path);
};

struct LassoOptions {
    double tolerance = 1e-8;
    int patience = 5;
    int max_iterations = 10000;
    /// Nesterov momentum with monotone restart. Off = plain proximal gradient.
    bool accelerate = true;
};

struct LassoFit;

/// Class-weighted logistic loss over the eligible rows.
///
/// L(b, beta) = sum_t w(y_t) * BCE(sigmoid(x_t . beta + b), y_t) / N,
/// w(1) = pos_weight, w(0) = 1, N = number of eligible rows.
class LogisticProblem {
public:
    LogisticProblem(const Matrix& x, std::span<const double> y, std::span<const std::uint8_t> mask,
                    double pos_weight);

    std::size_t n_features() const { return x_.cols; }
    std::size_t n_rows() const { return rows_.size(); }
    double smooth_loss(std::span<const double> beta, double intercept) const;
    /// Fills grad (size p) and returns the intercept derivative.
    double gradient(std::span<const double> beta, double intercept, std::span<double> grad) const;
    /// Smallest lambda for which beta = 0 is optimal.
    double lambda_max() const;
    /// Intercept minimizing the loss at beta = 0: logit of the weighted base rate.
    double null_intercept() const;
    double pos_weight() const { return pos_weight_; }

    double loss_and_gradient(std::span<const double> beta, double intercept, std::span<double> grad,
                             double& d_intercept, std::vector<double>& margin_scratch) const;
    double loss_from_margins(std::span<const double> margins) const;
    /// Gradient from precomputed margins; returns the intercept derivative.
    double gradient_from_margins(std::span<const double> margins, std::span<double> grad,
                                 std::vector<double>& scratch) const;
    void margins(std::span<const double> beta, double intercept, std::span<double> out) const;

    /// See fit_lasso.
    LassoFit solve(double lambda, const LassoOptions& opts, const LassoFit* warm) const;

private:
    const Matrix& x_;
    std::vector<std::size_t> rows_;
    std::vector<double> y_;
    std::vector<double> w_; // per-row weight already divided by N
    double pos_weight_;
};

/// Default pos-weight: eligible negatives / eligible positives.
double default_pos_weight(std::span<const double> y, std::span<const std::uint8_t> mask);

struct LassoFit {
    std::vector<double> weights;
    double intercept = 0.0;
    int iterations = 0;
    double objective = 0.0;
    bool converged = false;
};

/// Proximal gradient with backtracking on the objective above plus
/// lambda * |beta|_1 (intercept unpenalized).
LassoFit fit_lasso(const LogisticProblem& problem, double lambda, const LassoOptions& opts = {},
                   const LassoFit* warm_start = nullptr);

/// X must already be normalized. Throws std::invalid_argument for one-class
/// labels and NumericalError for non-finite features.
LinearModel train_lasso_lr(const Matrix& x, std::span<const double> y, std::span<const std::uint8_t> mask,
                           double lambda, std::optional<double> pos_weight = std::nullopt,
                           const LassoOptions& opts = {});

/// 10^(-4 + k/3), k = 0..12.
std::vector<double> default_lambda_grid();

struct ScoreStream {
    std::string stay_id;
    std::vector<double> scores;
};

/// `features` holds raw (unnormalized) features built with the model's spec.
ScoreStream predict_stream(const LinearModel& model, const FeatureMatrix& features);

ScoreStream score_as_model(const ScoreSeries& series, std::string stay_id);

/// Elementwise maximum of streams of one stay. Throws std::invalid_argument
/// on mismatched stays or lengths.
ScoreStream max_pool(std::span<const ScoreStream> streams);

/// `per_model[m][i]` is model m's stream for stay i. With `normalize`, each
/// model's scores are z-scored using that model's mean/sd over all hours of
/// the cohort before pooling.
std::vector<ScoreStream> max_pool(std::span<const std::vector<ScoreStream>> per_model, bool normalize = false);

} // namespace sepsis
