#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ensdiv/basis.hpp"
#include "ensdiv/ensemble_weights.hpp"
#include "ensdiv/error.hpp"
#include "ensdiv/estimator.hpp"
#include "ensdiv/experiments.hpp"
#include "ensdiv/knn_error.hpp"
#include "ensdiv/model.hpp"

namespace py = pybind11;
using namespace ensdiv;

namespace {

// Python targets by name only: a Python callable would be entered from
// worker threads without the GIL.
TargetFunctional resolve_target(const std::string& name, double prior1)
{
    if (name == "hellinger")
        return hellinger_target(prior1);
    return target_by_name(name);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "k-NN error rate basis estimators of density functionals";

    // Translators run newest first, so the base class goes in before its subclasses.
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
    py::register_exception<RankDeficientError>(m, "RankDeficientError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    // model
    py::class_<GaussianSpec>(m, "GaussianSpec")
        .def(py::init([](double mu, double beta, int d) { return GaussianSpec{mu, beta, d}; }),
             py::arg("mu"), py::arg("beta"), py::arg("d"))
        .def_readwrite("mu", &GaussianSpec::mu)
        .def_readwrite("beta", &GaussianSpec::beta)
        .def_readwrite("d", &GaussianSpec::d)
        .def("__repr__", [](const GaussianSpec& s) {
            std::ostringstream o;
            o << "GaussianSpec(mu=" << s.mu << ", beta=" << s.beta << ", d=" << s.d << ")";
            return o.str();
        });

    py::class_<DistributionPair>(m, "DistributionPair")
        .def(py::init([](GaussianSpec c0, GaussianSpec c1, double prior1) {
                 DistributionPair p{c0, c1, 1.0 - prior1, prior1};
                 p.validate();
                 return p;
             }),
             py::arg("class0"), py::arg("class1"), py::arg("prior1") = 0.5)
        .def_readwrite("class0", &DistributionPair::class0)
        .def_readwrite("class1", &DistributionPair::class1)
        .def_readonly("prior0", &DistributionPair::prior0)
        .def_readonly("prior1", &DistributionPair::prior1)
        .def_property_readonly("dim", &DistributionPair::dim);

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def(py::init([](PointMatrix points, std::vector<int> labels) {
                 LabeledDataset d{std::move(points), std::move(labels)};
                 d.validate();
                 return d;
             }),
             py::arg("points"), py::arg("labels"))
        .def_readonly("points", &LabeledDataset::points)
        .def_readonly("labels", &LabeledDataset::labels)
        .def("__len__", &LabeledDataset::size);

    py::class_<SplitDataset>(m, "SplitDataset")
        .def(py::init([](LabeledDataset train, LabeledDataset test) {
                 SplitDataset s{std::move(train), std::move(test)};
                 s.validate();
                 return s;
             }),
             py::arg("train"), py::arg("test"))
        .def_readonly("train", &SplitDataset::train)
        .def_readonly("test", &SplitDataset::test);

    py::class_<MonteCarloEstimate>(m, "MonteCarloEstimate")
        .def_readonly("value", &MonteCarloEstimate::value)
        .def_readonly("std_error", &MonteCarloEstimate::std_error)
        .def_readonly("samples", &MonteCarloEstimate::samples);

    m.def("sample", &sample, py::arg("pair"), py::arg("n"), py::arg("seed"));
    m.def("make_split", &make_split, py::arg("pair"), py::arg("n"), py::arg("seed"));
    m.def("split_in_half", &split_in_half, py::arg("data"));
    m.def("posterior_eta", [](const DistributionPair& p, const Eigen::VectorXd& x) { return posterior_eta(p, x); },
          py::arg("pair"), py::arg("x"));
    m.def("hellinger_squared_gaussian", &hellinger_squared_gaussian, py::arg("pair"));
    m.def(
        "functional_ground_truth_mc",
        [](const DistributionPair& p, const std::string& target, std::size_t n_mc, std::uint64_t seed, unsigned threads) {
            const auto t = resolve_target(target, p.prior1);
            py::gil_scoped_release release;
            return functional_ground_truth_mc(p, t.g, n_mc, seed, threads);
        },
        py::arg("pair"), py::arg("target") = "hellinger", py::arg("n_mc") = 1'000'000, py::arg("seed") = 0,
        py::arg("threads") = 1);

    // basis
    m.def("r_k", &r_k, py::arg("eta"), py::arg("k"));
    m.def("g_hellinger", &g_hellinger, py::arg("eta"));
    m.def("target_names", &target_names);

    py::class_<BasisCoefficients>(m, "BasisCoefficients")
        .def_readonly("ks", &BasisCoefficients::ks)
        .def_readonly("alpha", &BasisCoefficients::alpha)
        .def_readonly("fit_residual", &BasisCoefficients::fit_residual);

    m.def(
        "fit_alpha",
        [](const std::string& target, const std::vector<int>& ks, std::size_t grid_size, double prior1) {
            return fit_alpha(resolve_target(target, prior1), ks, grid_size);
        },
        py::arg("target"), py::arg("ks"), py::arg("grid_size") = 1001, py::arg("prior1") = 0.5);
    m.def("evaluate_basis_fit", &evaluate_basis_fit, py::arg("coeffs"), py::arg("eta"));

    // ensemble weights
    py::enum_<Method>(m, "Method")
        .value("plain", Method::plain)
        .value("exact", Method::exact)
        .value("relaxed", Method::relaxed);

    py::class_<EnsembleConfig>(m, "EnsembleConfig")
        .def(py::init([](std::vector<double> ls, int d, std::size_t n, double lambda) {
                 return EnsembleConfig{std::move(ls), d, n, lambda};
             }),
             py::arg("ls"), py::arg("d"), py::arg("n") = 1, py::arg("lam") = 1.0)
        .def_readwrite("ls", &EnsembleConfig::ls)
        .def_readwrite("d", &EnsembleConfig::d)
        .def_readwrite("n", &EnsembleConfig::n)
        .def_readwrite("lam", &EnsembleConfig::lambda);

    py::class_<EnsembleWeights>(m, "EnsembleWeights")
        .def_readonly("w", &EnsembleWeights::w)
        .def_readonly("epsilon", &EnsembleWeights::epsilon)
        .def_readonly("method", &EnsembleWeights::method);

    py::class_<ConstraintReport>(m, "ConstraintReport")
        .def_readonly("sum_residual", &ConstraintReport::sum_residual)
        .def_readonly("exponents", &ConstraintReport::exponents)
        .def_readonly("bias_terms", &ConstraintReport::bias_terms)
        .def_readonly("bias_bounds", &ConstraintReport::bias_bounds)
        .def_readonly("norm2", &ConstraintReport::norm2)
        .def_readonly("norm_bound", &ConstraintReport::norm_bound);

    m.def("constraint_exponents", &constraint_exponents, py::arg("d"));
    m.def("exact_weights", &exact_weights, py::arg("config"));
    m.def("relaxed_weights", &relaxed_weights, py::arg("config"));
    m.def("constraint_report", &constraint_report, py::arg("config"), py::arg("weights"));

    // k-NN error rates
    py::class_<ErrorRateTable>(m, "ErrorRateTable")
        .def_readonly("ks", &ErrorRateTable::ks)
        .def_readonly("ls", &ErrorRateTable::ls)
        .def_readonly("rates", &ErrorRateTable::rates)
        .def_readonly("n_train", &ErrorRateTable::n_train)
        .def_readonly("repeats", &ErrorRateTable::repeats)
        .def("rate", &ErrorRateTable::rate, py::arg("k"), py::arg("l_index"));

    m.def("holdout_error_rate", &holdout_error_rate, py::arg("split"), py::arg("k"));
    m.def(
        "error_table",
        [](const SplitDataset& split, const std::vector<int>& ks, const std::vector<double>& ls, std::size_t repeats,
           std::uint64_t seed, unsigned threads) {
            py::gil_scoped_release release;
            return error_table(split, ks, ls, repeats, seed, threads);
        },
        py::arg("split"), py::arg("ks"), py::arg("ls"), py::arg("repeats") = 1, py::arg("seed") = 0,
        py::arg("threads") = 1);
    m.def("log_spaced", &log_spaced, py::arg("lo"), py::arg("hi"), py::arg("count"));

    // estimator
    py::class_<EstimatorOptions>(m, "EstimatorOptions")
        .def(py::init<>())
        .def_readwrite("ks", &EstimatorOptions::ks)
        .def_readwrite("ls", &EstimatorOptions::ls)
        .def_readwrite("d", &EstimatorOptions::d)
        .def_readwrite("lam", &EstimatorOptions::lambda)
        .def_readwrite("method", &EstimatorOptions::method)
        .def_readwrite("repeats", &EstimatorOptions::repeats)
        .def_readwrite("seed", &EstimatorOptions::seed)
        .def_readwrite("grid_size", &EstimatorOptions::grid_size)
        .def_readwrite("threads", &EstimatorOptions::threads);

    py::class_<FunctionalEstimate>(m, "FunctionalEstimate")
        .def_readonly("value", &FunctionalEstimate::value)
        .def_readonly("per_k_phi", &FunctionalEstimate::per_k_phi)
        .def_readonly("alpha", &FunctionalEstimate::alpha)
        .def_readonly("weights", &FunctionalEstimate::weights);

    m.def(
        "estimate_functional",
        [](const SplitDataset& split, const std::string& target, const EstimatorOptions& options) {
            const auto t = resolve_target(target, 0.5);
            py::gil_scoped_release release;
            return estimate_functional(split, t, options);
        },
        py::arg("split"), py::arg("target"), py::arg("options"));
    m.def("variance_bound", [](const BasisCoefficients& a, const std::vector<double>& v) { return variance_bound(a, v); },
          py::arg("alpha"), py::arg("phi_variances"));

    // experiments
    py::class_<SimulationConfig>(m, "SimulationConfig")
        .def(py::init<>())
        .def_readwrite("pair", &SimulationConfig::pair)
        .def_readwrite("target", &SimulationConfig::target)
        .def_readwrite("ks", &SimulationConfig::ks)
        .def_readwrite("ls", &SimulationConfig::ls)
        .def_readwrite("lambdas", &SimulationConfig::lambdas)
        .def_readwrite("methods", &SimulationConfig::methods)
        .def_readwrite("n_grid", &SimulationConfig::n_grid)
        .def_readwrite("trials", &SimulationConfig::trials)
        .def_readwrite("base_seed", &SimulationConfig::base_seed)
        .def_readwrite("output", &SimulationConfig::output)
        .def_readwrite("intrinsic_d", &SimulationConfig::intrinsic_d)
        .def_readwrite("repeats", &SimulationConfig::repeats)
        .def_readwrite("truth_mc_samples", &SimulationConfig::truth_mc_samples)
        .def_readwrite("threads", &SimulationConfig::threads)
        .def("validate", &SimulationConfig::validate);

    py::class_<ResultRow>(m, "ResultRow")
        .def_readonly("n", &ResultRow::n)
        .def_property_readonly("method", [](const ResultRow& r) { return r.method.method; })
        .def_property_readonly("lam", [](const ResultRow& r) { return r.method.lambda; })
        .def_readonly("quantity", &ResultRow::quantity)
        .def_readonly("mean", &ResultRow::mean)
        .def_readonly("std_error", &ResultRow::std_error)
        .def_readonly("bias", &ResultRow::bias)
        .def_readonly("mse", &ResultRow::mse)
        .def_readonly("variance", &ResultRow::variance)
        .def_readonly("trials", &ResultRow::trials)
        .def_readonly("truth", &ResultRow::truth)
        .def_readonly("variance_bound", &ResultRow::variance_bound);

    m.def("parse_simulation_config", [](const std::string& text) {
        std::istringstream in(text);
        return parse_simulation_config(in);
    }, py::arg("text"));
    m.def("load_simulation_config", &load_simulation_config, py::arg("path"));
    m.def(
        "run_simulation",
        [](const SimulationConfig& config) {
            py::gil_scoped_release release;
            return run_simulation(config);
        },
        py::arg("config"));
    m.def("results_csv", [](const ResultsTable& table) {
        std::ostringstream out;
        write_results(table, out);
        return out.str();
    }, py::arg("table"));
    m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("has_header") = false);
}
