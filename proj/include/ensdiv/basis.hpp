#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ensdiv {

// Asymptotic k-NN error at posterior eta (Cover-Hart):
//   r_k(eta) = sum_{i=ceil(k/2)}^{k} C(k,i) [eta^i (1-eta)^(k-i+1) + (1-eta)^i eta^(k-i+1)]
// k must be odd, 1 <= k <= 63; eta in [0, 1].
double r_k(double eta, int k);

// (sqrt(eta) - sqrt(1 - eta))^2. Its mean under f_x equals H^2(f0, f1)
// when the class priors are equal.
double g_hellinger(double eta);

// A density functional G = E_f[g(eta)], identified by name.
struct TargetFunctional {
    std::string name;
    std::function<double(double)> g;
};

// Squared Hellinger target for class-1 prior p1:
// g(eta) = 1 - sqrt(eta (1 - eta) / (p0 p1)); equals g_hellinger at p1 = 1/2.
TargetFunctional hellinger_target(double prior1 = 0.5);

// Target whose g is the basis curve r_k itself (E_f[g] = R_k(inf)).
TargetFunctional knn_error_target(int k);

// Named catalog. "hellinger" and "knn_error_<k>" are built in; further
// targets can be registered at runtime.
void register_target(TargetFunctional target);
TargetFunctional target_by_name(std::string_view name);
std::vector<std::string> target_names();

struct BasisCoefficients {
    std::vector<int> ks;
    std::vector<double> alpha;
    double fit_residual = 0.0;  // mean squared residual over the grid
};

// Least-squares fit of g by sum_k alpha_k r_k on grid_size uniform points of
// [0, 1], endpoints included. Throws ConfigError for bad ks or grid and
// RankDeficientError if the basis columns are linearly dependent.
BasisCoefficients fit_alpha(const TargetFunctional& target, std::span<const int> ks, std::size_t grid_size = 1001);

double evaluate_basis_fit(const BasisCoefficients& coeffs, double eta);

} // namespace ensdiv
