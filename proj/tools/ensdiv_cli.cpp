// ensdiv: command line front end.
//
//   ensdiv simulate  --config study.cfg [--output results.csv] [--threads N]
//   ensdiv estimate  --data data.csv --target hellinger --ks 1,3,5,7,9 --ls log:0.05,0.5,12 --d 10 --lambda 1 --method relaxed
//   ensdiv weights   --d 10 --n 1000 --lambda 1 --ls log:0.05,0.5,12
//   ensdiv fit-basis --target hellinger --ks 1,3,5,7,9 --grid 1001
//
// Failures print one line "error: kind=<kind> message=\"...\"" on stderr.

#include <cstdio>
#include <iostream>
#include <numeric>
#include <string>

#include "CLI11.hpp"

#include "ensdiv/basis.hpp"
#include "ensdiv/ensemble_weights.hpp"
#include "ensdiv/error.hpp"
#include "ensdiv/estimator.hpp"
#include "ensdiv/experiments.hpp"
#include "ensdiv/knn_error.hpp"

namespace {

using namespace ensdiv;

std::string fixed(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15f", v);
    return buf;
}

std::string quote(std::string s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += (c == '\n' ? ' ' : c);
    }
    return out;
}

int fail(const char* kind, const std::string& message)
{
    std::cerr << "error: kind=" << kind << " message=\"" << quote(message) << "\"\n";
    return 2;
}

void print_weights(const EnsembleConfig& config, const EnsembleWeights& w)
{
    const auto report = constraint_report(config, w);
    std::cout << "method: " << to_string(w.method) << '\n';
    std::cout << "epsilon: " << fixed(w.epsilon) << '\n';
    for (std::size_t i = 0; i < w.w.size(); ++i)
        std::cout << "w[" << i << "] l=" << fixed(config.ls[i]) << " " << fixed(w.w[i]) << '\n';
    std::cout << "sum_residual: " << fixed(report.sum_residual) << '\n';
    for (std::size_t j = 0; j < report.exponents.size(); ++j)
        std::cout << "bias_term j=" << report.exponents[j] << " value=" << fixed(report.bias_terms[j])
                  << " bound=" << fixed(report.bias_bounds[j]) << '\n';
    std::cout << "norm2: " << fixed(report.norm2) << '\n';
    if (w.method == Method::relaxed)
        std::cout << "norm2_bound: " << fixed(report.norm_bound) << '\n';
}

LabeledDataset shuffled(const LabeledDataset& data, std::uint64_t seed)
{
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    LabeledDataset out;
    out.points.resize(data.points.rows(), data.points.cols());
    out.labels.resize(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.points.row(static_cast<Eigen::Index>(i)) = data.points.row(static_cast<Eigen::Index>(order[i]));
        out.labels[i] = data.labels[order[i]];
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Direct k-NN ensemble estimation of density functionals"};
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study and write a CSV of results");
    std::string config_path, output_override;
    unsigned threads_override = 0;
    simulate->add_option("--config", config_path, "Study configuration file")->required();
    simulate->add_option("--output", output_override, "Output CSV (overrides the config; '-' for stdout)");
    simulate->add_option("--threads", threads_override, "Worker threads (0: config value)");

    auto* estimate = app.add_subcommand("estimate", "Estimate a functional from a labelled CSV dataset");
    std::string data_path, target_name = "hellinger", ks_text = "1,3,5,7,9", ls_text = "log:0.05,0.5,12",
                method_name = "relaxed";
    int d = 0;
    double lambda = 1.0;
    bool header = false;
    std::uint64_t seed = 0;
    std::size_t repeats = 1, grid = 1001;
    estimate->add_option("--data", data_path, "CSV: feature columns then a 0/1 label")->required();
    estimate->add_flag("--header", header, "First line of the CSV is a header");
    estimate->add_option("--target", target_name, "Target functional");
    estimate->add_option("--ks", ks_text, "Odd k values");
    estimate->add_option("--ls", ls_text, "Subsample fractions: list or log:lo,hi,count");
    estimate->add_option("--d", d, "Intrinsic dimension (default: number of features)");
    estimate->add_option("--lambda", lambda, "Variance trade-off for the relaxed method");
    estimate->add_option("--method", method_name, "plain, exact or relaxed");
    estimate->add_option("--seed", seed, "Seed for the row shuffle and subsample draws");
    estimate->add_option("--repeats", repeats, "Subsample draws per fraction");
    estimate->add_option("--grid", grid, "Grid size for the basis fit");

    auto* weights = app.add_subcommand("weights", "Print ensemble weights and constraint residuals");
    int w_d = 0;
    std::size_t w_n = 0;
    double w_lambda = 1.0;
    std::string w_ls = "log:0.05,0.5,12", w_method = "both";
    weights->add_option("--d", w_d, "Intrinsic dimension")->required();
    weights->add_option("--n", w_n, "Sample size N")->required();
    weights->add_option("--lambda", w_lambda, "Variance trade-off");
    weights->add_option("--ls", w_ls, "Subsample fractions: list or log:lo,hi,count");
    weights->add_option("--method", w_method, "exact, relaxed or both");

    auto* fit = app.add_subcommand("fit-basis", "Fit basis coefficients for a target functional");
    std::string f_target = "hellinger", f_ks = "1,3,5,7,9";
    std::size_t f_grid = 1001;
    fit->add_option("--target", f_target, "Target functional");
    fit->add_option("--ks", f_ks, "Odd k values");
    fit->add_option("--grid", f_grid, "Grid size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail("usage", e.what());
        return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
    }

    try {
        if (*simulate) {
            SimulationConfig config = load_simulation_config(config_path);
            if (!output_override.empty())
                config.output = output_override;
            if (threads_override != 0)
                config.threads = threads_override;
            const auto table = run_simulation(config);
            if (config.output.empty() || config.output == "-")
                write_results(table, std::cout);
            else
                emit_results(table, config.output);
        } else if (*estimate) {
            const LabeledDataset data = load_dataset(data_path, header);
            const SplitDataset split = split_in_half(shuffled(data, seed));
            EstimatorOptions options;
            options.ks = parse_int_list(ks_text);
            options.ls = parse_fraction_list(ls_text);
            options.d = d > 0 ? d : data.dim();
            options.lambda = lambda;
            options.method = parse_method(method_name);
            options.repeats = repeats;
            options.seed = seed;
            options.grid_size = grid;
            const FunctionalEstimate est = estimate_functional(split, target_by_name(target_name), options);

            std::cout << "target: " << target_name << '\n';
            std::cout << "n_train: " << split.train.size() << '\n';
            std::cout << "n_test: " << split.test.size() << '\n';
            std::cout << "dimension: " << options.d << '\n';
            std::cout << "method: " << to_string(options.method) << '\n';
            if (options.method == Method::relaxed)
                std::cout << "lambda: " << fixed(options.lambda) << '\n';
            std::cout << "epsilon: " << fixed(est.weights.epsilon) << '\n';
            for (std::size_t i = 0; i < est.weights.w.size(); ++i)
                std::cout << "w[" << i << "] " << fixed(est.weights.w[i]) << '\n';
            for (std::size_t i = 0; i < est.per_k_phi.size(); ++i)
                std::cout << "k=" << est.per_k_phi[i].first << " alpha=" << fixed(est.alpha.alpha[i])
                          << " phi=" << fixed(est.per_k_phi[i].second) << '\n';
            std::cout << "basis_fit_residual: " << fixed(est.alpha.fit_residual) << '\n';
            std::cout << "estimate: " << fixed(est.value) << '\n';
        } else if (*weights) {
            const EnsembleConfig config{parse_fraction_list(w_ls), w_d, w_n, w_lambda};
            if (w_method != "exact" && w_method != "relaxed" && w_method != "both")
                throw ConfigError("--method must be exact, relaxed or both");
            if (w_method != "relaxed")
                print_weights(config, exact_weights(config));
            if (w_method != "exact")
                print_weights(config, relaxed_weights(config));
        } else if (*fit) {
            const auto ks = parse_int_list(f_ks);
            const auto coeffs = fit_alpha(target_by_name(f_target), ks, f_grid);
            std::cout << "target: " << f_target << '\n';
            for (std::size_t i = 0; i < ks.size(); ++i)
                std::cout << "alpha[k=" << ks[i] << "] " << fixed(coeffs.alpha[i]) << '\n';
            std::cout << "fit_residual: " << fixed(coeffs.fit_residual) << '\n';
        }
    } catch (const Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
