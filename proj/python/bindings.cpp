// Python module `sepsis_ews._core`. Structured results cross as JSON text and
// are decoded on the Python side.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "sepsis/error.hpp"
#include "sepsis/evaluation.hpp"
#include "sepsis/models.hpp"
#include "sepsis/pipeline.hpp"
#include "sepsis/sepsis3.hpp"

namespace py = pybind11;
using namespace sepsis;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& x) {
    if (x.ndim() != 2) throw std::invalid_argument("x must be two-dimensional");
    Matrix m(static_cast<std::size_t>(x.shape(0)), static_cast<std::size_t>(x.shape(1)));
    std::copy(x.data(), x.data() + x.size(), m.data.begin());
    return m;
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

std::vector<double> si_times(const std::vector<double>& antibiotics, const std::vector<double>& samplings,
                             const std::string& definition, int min_administrations, double max_span) {
    TreatmentLog log;
    log.antibiotics = antibiotics;
    log.fluid_samplings = samplings;
    log.validate();
    std::vector<double> out;
    for (const auto& w : detect_si(log, si_definition_from_string(definition), {min_administrations, max_span}))
        out.push_back(w.si_time);
    return out;
}

std::optional<double> onset(const std::vector<int>& sofa_total, const std::vector<double>& times,
                            const std::string& definition) {
    const auto windows = merge_si_times(times, si_definition_from_string(definition));
    return detect_onset(std::span<const int>(sofa_total), windows);
}

std::vector<int> labels(long n_hours, std::optional<double> onset) {
    const auto a = build_labels("stay", n_hours, onset);
    return {a.labels.begin(), a.labels.end()};
}

using PyStay = std::tuple<std::string, bool, std::optional<double>, std::vector<double>>;

std::string evaluate_json(const std::vector<PyStay>& stays, const std::string& config, bool harmonized) {
    std::vector<EvalStay> es;
    for (const auto& [id, is_case, on, scores] : stays) es.push_back({id, is_case, on, scores});
    const auto cfg = EvalConfig::from_json(nlohmann::json::parse(config));
    cfg.validate();
    return (harmonized ? evaluate_harmonized(es, cfg) : evaluate(es, cfg)).to_json().dump();
}

py::dict lasso(const Array& x, const Array& y, double lambda, std::optional<double> pos_weight, double tolerance,
               int patience, int max_iterations) {
    const Matrix m = to_matrix(x);
    const auto yv = to_vector(y);
    if (yv.size() != m.rows) throw std::invalid_argument("x and y differ in length");
    const std::vector<std::uint8_t> mask(m.rows, 1);
    const double pw = pos_weight ? *pos_weight : default_pos_weight(yv, mask);
    const LogisticProblem prob(m, yv, mask, pw);
    LassoOptions opts;
    opts.tolerance = tolerance;
    opts.patience = patience;
    opts.max_iterations = max_iterations;
    LassoFit fit;
    {
        py::gil_scoped_release release;
        fit = fit_lasso(prob, lambda, opts);
    }
    py::dict d;
    d["weights"] = Array(static_cast<py::ssize_t>(fit.weights.size()), fit.weights.data());
    d["intercept"] = fit.intercept;
    d["objective"] = fit.objective;
    d["iterations"] = fit.iterations;
    d["converged"] = fit.converged;
    d["pos_weight"] = pw;
    d["lambda_max"] = prob.lambda_max();
    return d;
}

std::vector<double> pool(const std::vector<std::vector<double>>& streams) {
    std::vector<ScoreStream> s;
    for (const auto& x : streams) s.push_back({"stay", x});
    return max_pool(s).scores;
}

py::tuple harmonize(const std::vector<bool>& is_case, double target, int reps, std::uint64_t seed) {
    const std::vector<std::uint8_t> c(is_case.begin(), is_case.end());
    const auto h = harmonize_prevalence(c, target, reps, seed);
    return py::make_tuple(h.subsamples, h.coverage, h.flagged);
}

std::string run_all_json(const std::string& config) {
    const auto cfg = PipelineConfig::from_json(nlohmann::json::parse(config));
    py::gil_scoped_release release;
    return run_all_synthetic(cfg).summary().dump();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sepsis early-warning pipeline core";

    auto base = py::register_exception<Error>(m, "SepsisError", PyExc_RuntimeError);
    py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    m.def("detect_si", &si_times, py::arg("antibiotics"), py::arg("fluid_samplings"),
          py::arg("definition") = "fluid-abx", py::arg("min_administrations") = 2, py::arg("max_span") = 24.0,
          "Suspected-infection times (hours since admission) after merging overlapping windows.");
    m.def("detect_onset", &onset, py::arg("sofa_total"), py::arg("si_times"), py::arg("definition") = "fluid-abx",
          "Onset hour from hourly SOFA totals and SI times, or None.");
    m.def("hourly_labels", &labels, py::arg("n_hours"), py::arg("onset"));
    m.def("jaccard_si", [](const std::set<std::string>& a, const std::set<std::string>& b) { return jaccard_si(a, b); });
    m.def("evaluate_json", &evaluate_json, py::arg("stays"), py::arg("config") = "{}", py::arg("harmonized") = false);
    m.def("fit_lasso", &lasso, py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("pos_weight") = py::none(),
          py::arg("tolerance") = 1e-8, py::arg("patience") = 5, py::arg("max_iterations") = 10000);
    m.def("default_lambda_grid", &default_lambda_grid);
    m.def("max_pool", &pool, py::arg("streams"));
    m.def("harmonize_prevalence", &harmonize, py::arg("is_case"), py::arg("target") = 0.17, py::arg("reps") = 10,
          py::arg("seed") = 0);
    m.def("run_all_synthetic_json", &run_all_json, py::arg("config") = "{}");
}
