#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ensdiv/ensemble_weights.hpp"
#include "ensdiv/model.hpp"

namespace ensdiv {

// One estimator column of a study: a method plus, for relaxed, its lambda.
struct MethodSpec {
    Method method = Method::plain;
    std::optional<double> lambda;

    std::string label() const;
};

struct SimulationConfig {
    DistributionPair pair{{0.0, 0.8, 10}, {1.0, 0.9, 10}, 0.5, 0.5};
    std::string target = "hellinger";
    std::vector<int> ks{1, 3, 5, 7, 9};
    std::vector<double> ls;  // empty means 12 log-spaced values in [0.05, 0.5]
    std::vector<double> lambdas{0.1, 1.0};
    std::vector<Method> methods{Method::plain, Method::relaxed};
    std::vector<std::size_t> n_grid{250, 500, 1000, 2000};
    std::size_t trials = 100;
    std::uint64_t base_seed = 1;
    std::string output;
    int intrinsic_d = 0;  // 0: use the ambient dimension
    std::size_t repeats = 1;
    std::size_t truth_mc_samples = 1'000'000;
    unsigned threads = 0;  // 0: hardware concurrency

    std::vector<double> fractions() const;
    int weight_dimension() const { return intrinsic_d > 0 ? intrinsic_d : pair.dim(); }
    std::vector<MethodSpec> method_specs() const;

    // Throws ConfigError describing the first problem found.
    void validate() const;
};

// "0.1,0.2,0.5" or "log:lo,hi,count". Throws ConfigError.
std::vector<double> parse_fraction_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

// Parses "key = value" lines; '#' starts a comment. Lists are comma
// separated; ls also accepts "log:lo,hi,count". Unknown keys and malformed
// values raise ParseError with the line number; the result is validated.
SimulationConfig parse_simulation_config(std::istream& in);
SimulationConfig load_simulation_config(const std::string& path);

struct ResultRow {
    std::size_t n = 0;
    MethodSpec method;
    std::string quantity;  // "R_<k>" or "G"
    double mean = 0.0;
    double std_error = 0.0;
    double bias = 0.0;
    double mse = 0.0;
    double variance = 0.0;  // population variance across trials
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double truth = 0.0;
    std::optional<double> variance_bound;  // G rows only
};

using ResultsTable = std::vector<ResultRow>;

// Monte Carlo study over n_grid x trials. Rows are ordered by N, then
// method, then quantity (R_k in ks order, then G). Output is independent of
// the thread count.
ResultsTable run_simulation(const SimulationConfig& config);

// Ground truth used for the "G" rows and the "R_k" rows.
double functional_truth(const SimulationConfig& config);
std::vector<double> error_rate_truths(const SimulationConfig& config);

// CSV: features in the first d columns, 0/1 label last.
LabeledDataset load_dataset(const std::string& path, bool has_header = false);
LabeledDataset parse_dataset(std::istream& in, bool has_header = false);
void write_dataset(const LabeledDataset& data, const std::string& path, bool header = false);

// Columns: N,method,lambda,quantity,mean,stderr,bias,mse,trials,seed,truth,variance_bound
void write_results(const ResultsTable& table, std::ostream& out);
void emit_results(const ResultsTable& table, const std::string& path);

} // namespace ensdiv
