#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace ensdiv {

// How the per-k error rate estimate is formed.
//   plain   - single classifier on the full training half
//   exact   - minimum-norm weights that zero every low-order bias term
//   relaxed - minimum joint bias/variance threshold epsilon
enum class Method { plain, exact, relaxed };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct EnsembleConfig {
    std::vector<double> ls;  // subsample fractions, strictly increasing in (0, 1]
    int d = 1;               // intrinsic dimension in the bias exponents
    std::size_t n = 1;       // sample size N (relaxed program only)
    double lambda = 1.0;     // variance budget per unit epsilon (relaxed program only)

    // ConfigError for malformed values; InfeasibleError for duplicate
    // fractions or fewer than |J| + 1 members.
    void validate() const;
};

struct EnsembleWeights {
    std::vector<double> w;
    double epsilon = 0.0;  // exact: ||w||^2; relaxed: the minimized threshold
    Method method = Method::exact;
};

// J = [2, ..., ceil(d/2 - 1)]; empty when that bound is below 2.
std::vector<int> constraint_exponents(int d);

// |J| x L matrix with entry (j, i) = l_i^(-J_j / d).
Eigen::MatrixXd bias_constraint_matrix(const std::vector<double>& ls, int d);

// Minimum-norm w with sum w = 1 and sum_i w_i l_i^(-j/d) = 0 for every j in J.
EnsembleWeights exact_weights(const EnsembleConfig& config);

// Minimizes epsilon subject to
//   sum w = 1,
//   |sum_i w_i l_i^(-j/d)| <= epsilon N^(j/d - 1/2)   for j in J,
//   sum w_i^2 <= lambda epsilon.
// Bisection on epsilon; each probe solves the minimum-norm problem under the
// bias slab with a primal active-set method started from the exact weights.
EnsembleWeights relaxed_weights(const EnsembleConfig& config);

// Minimum of ||w||^2 subject to sum w = 1 and the bias slab at the given
// epsilon. Exposed for diagnostics and tests.
Eigen::VectorXd min_norm_in_slab(const EnsembleConfig& config, double epsilon);

struct ConstraintReport {
    double sum_residual = 0.0;          // sum w - 1
    std::vector<int> exponents;         // J
    std::vector<double> bias_terms;     // sum_i w_i l_i^(-j/d)
    std::vector<double> bias_bounds;    // epsilon N^(j/d - 1/2)
    double norm2 = 0.0;                 // ||w||^2
    double norm_bound = 0.0;            // lambda epsilon
};

ConstraintReport constraint_report(const EnsembleConfig& config, const EnsembleWeights& weights);

} // namespace ensdiv
