#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ensdiv/basis.hpp"
#include "ensdiv/ensemble_weights.hpp"
#include "ensdiv/knn_error.hpp"

namespace ensdiv {

// Ensemble estimate of R_k(inf): sum_i w_i R_k(N, l_i). Not clamped to [0, 1];
// negative weights can legitimately push it outside.
double phi_k(const ErrorRateTable& table, int k, const EnsembleWeights& weights);

struct FunctionalEstimate {
    double value = 0.0;                         // sum_k alpha_k phi_k
    std::vector<std::pair<int, double>> per_k_phi;
    BasisCoefficients alpha;
    EnsembleWeights weights;                    // plain: w = (1) on l = 1
    std::optional<double> variance_bound;
};

struct EstimatorOptions {
    std::vector<int> ks{1, 3, 5, 7, 9};
    std::vector<double> ls;        // ignored by the plain method
    int d = 1;                     // intrinsic dimension for the weight exponents
    double lambda = 1.0;
    Method method = Method::relaxed;
    std::size_t repeats = 1;
    std::uint64_t seed = 0;
    std::size_t grid_size = 1001;
    unsigned threads = 1;
};

// Weights for the given method; plain yields w = (1).
EnsembleWeights weights_for(Method method, const std::vector<double>& ls, int d, std::size_t n, double lambda);

// sum_k alpha_k phi_k, matching phi values to alpha by k.
double combine(const BasisCoefficients& alpha, std::span<const std::pair<int, double>> per_k_phi);

// Pipeline with precomputed basis coefficients (alpha is data independent).
FunctionalEstimate estimate_functional(const SplitDataset& split, const BasisCoefficients& alpha,
                                       const EstimatorOptions& options);

// Pipeline fitting alpha for `target` first.
FunctionalEstimate estimate_functional(const SplitDataset& split, const TargetFunctional& target,
                                       const EstimatorOptions& options);

// sum_j sum_k alpha_j alpha_k sqrt(V_j V_k).
double variance_bound(const BasisCoefficients& alpha, std::span<const double> phi_variances);

// Memoizes fit_alpha per (target name, ks, grid size). Thread-safe.
class AlphaCache {
public:
    const BasisCoefficients& get(const TargetFunctional& target, const std::vector<int>& ks,
                                 std::size_t grid_size = 1001);

private:
    using Key = std::tuple<std::string, std::vector<int>, std::size_t>;
    std::mutex mutex_;
    std::map<Key, BasisCoefficients> cache_;
};

} // namespace ensdiv
