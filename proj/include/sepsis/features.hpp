#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sepsis/scores.hpp"
#include "sepsis/sepsis3.hpp"
#include "sepsis/stay.hpp"

namespace sepsis {

enum class FeatureSet { compact, extended };

std::string_view to_string(FeatureSet s);
FeatureSet feature_set_from_string(std::string_view s);

inline constexpr std::array<std::string_view, 5> kLookbackStats = {"mean", "median", "var", "min", "max"};
inline constexpr std::array<std::string_view, 9> kDerivedFeatures = {
    "shock_index", "pf_ratio", "bun_crea", "sf_ratio", "sofa_partial",
    "sirs_partial", "mews_partial", "news_partial", "qsofa_partial"};

/// Ordered feature layout.
///
/// Compact: value_<v>, ind_<v>, cnt_<v> for each dynamic variable, then the
/// derived features, then the statics. Extended appends
/// <v>_<stat>_<w>h for each variable, window and statistic.
struct FeatureSpec {
    FeatureSet set = FeatureSet::compact;
    bool include_static = true;
    std::vector<int> lookback_windows{4, 8, 16};
    std::vector<std::string> dynamic_variables;
    std::vector<std::string> names;

    static FeatureSpec make(FeatureSet set, const VariableCatalog& catalog, bool include_static = true);
    /// e.g. "compact-v1" or "extended-nostatic-v1".
    std::string id() const;
    std::size_t size() const { return names.size(); }
};

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Per-hour features of one stay. NaN marks a value still to be imputed.
struct FeatureMatrix {
    std::string stay_id;
    std::string spec_id;
    std::shared_ptr<const std::vector<std::string>> columns;
    Matrix values;
    /// 1 where the hour may be used for training or evaluation.
    std::vector<std::uint8_t> eligible;

    std::size_t n_hours() const { return values.rows; }
    std::size_t n_columns() const { return values.cols; }
};

/// `filled` is the carried-forward grid (its counts give the raw
/// observations); `partial` must hold every partial score the feature layout needs.
/// Hours after the annotation's truncation point are marked ineligible.
FeatureMatrix extract(const HourlyStay& filled, std::span<const ScoreSeries> partial, const FeatureSpec& spec,
                      const SepsisAnnotation* annotation = nullptr);

struct Normalizer {
    std::string spec_id;
    std::vector<std::string> columns;
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<double> impute;
    std::vector<std::uint8_t> constant;
    std::vector<std::uint8_t> never_observed;

    nlohmann::json to_json() const;
    static Normalizer from_json(const nlohmann::json& j);
};

/// Imputation value = median over observed entries (0 when none); mean and
/// population sd of the imputed column over eligible hours; sd 0 -> 1.
Normalizer fit_normalizer(std::span<const FeatureMatrix> train);
Normalizer fit_normalizer(std::span<const FeatureMatrix* const> train);

FeatureMatrix apply_normalizer(const FeatureMatrix& m, const Normalizer& n);
void apply_normalizer_inplace(FeatureMatrix& m, const Normalizer& n);

} // namespace sepsis
