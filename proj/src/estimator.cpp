#include "ensdiv/estimator.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "ensdiv/error.hpp"

namespace ensdiv {

namespace {

// Runs fn, re-raising library errors with the pipeline stage prepended and
// the original error kind preserved.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(stage + ": " + e.what());
    } catch (const RankDeficientError& e) {
        throw RankDeficientError(stage + ": " + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(stage + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    }
}

} // namespace

double phi_k(const ErrorRateTable& table, int k, const EnsembleWeights& weights)
{
    if (weights.w.size() != table.ls.size())
        throw ConfigError("weight count " + std::to_string(weights.w.size()) + " does not match table width "
                          + std::to_string(table.ls.size()));
    const auto row = static_cast<Eigen::Index>(table.row_of(k));
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.w.size(); ++i)
        sum += weights.w[i] * table.rates(row, static_cast<Eigen::Index>(i));
    return sum;
}

EnsembleWeights weights_for(Method method, const std::vector<double>& ls, int d, std::size_t n, double lambda)
{
    switch (method) {
    case Method::plain:
        return EnsembleWeights{{1.0}, 1.0, Method::plain};
    case Method::exact:
        return exact_weights(EnsembleConfig{ls, d, n, lambda});
    case Method::relaxed:
        return relaxed_weights(EnsembleConfig{ls, d, n, lambda});
    }
    throw ConfigError("unknown method");
}

double combine(const BasisCoefficients& alpha, std::span<const std::pair<int, double>> per_k_phi)
{
    if (alpha.ks.size() != per_k_phi.size())
        throw ConfigError("alpha and phi lengths differ");
    double value = 0.0;
    for (std::size_t i = 0; i < alpha.ks.size(); ++i) {
        if (per_k_phi[i].first != alpha.ks[i])
            throw ConfigError("phi for k = " + std::to_string(per_k_phi[i].first) + " paired with alpha for k = "
                              + std::to_string(alpha.ks[i]));
        value += alpha.alpha[i] * per_k_phi[i].second;
    }
    return value;
}

FunctionalEstimate estimate_functional(const SplitDataset& split, const BasisCoefficients& alpha,
                                       const EstimatorOptions& options)
{
    if (alpha.ks != options.ks)
        throw ConfigError("basis coefficients were fitted for a different k list");

    FunctionalEstimate out;
    out.alpha = alpha;
    out.weights = in_stage("ensemble weights", [&] {
        return weights_for(options.method, options.ls, options.d, split.train.size(), options.lambda);
    });

    const ErrorRateTable table = in_stage("error table", [&] {
        if (options.method == Method::plain) {
            const std::vector<double> full{1.0};
            return error_table(split, options.ks, full, 1, options.seed, options.threads);
        }
        return error_table(split, options.ks, options.ls, options.repeats, options.seed, options.threads);
    });

    for (int k : options.ks)
        out.per_k_phi.emplace_back(k, phi_k(table, k, out.weights));
    out.value = combine(alpha, out.per_k_phi);
    return out;
}

FunctionalEstimate estimate_functional(const SplitDataset& split, const TargetFunctional& target,
                                       const EstimatorOptions& options)
{
    const BasisCoefficients alpha = in_stage("basis fit", [&] { return fit_alpha(target, options.ks, options.grid_size); });
    return estimate_functional(split, alpha, options);
}

double variance_bound(const BasisCoefficients& alpha, std::span<const double> phi_variances)
{
    if (alpha.alpha.size() != phi_variances.size())
        throw ConfigError("alpha and variance lengths differ");
    for (double v : phi_variances)
        if (!(v >= 0.0))
            throw ConfigError("variances must be nonnegative");
    double sum = 0.0;
    for (std::size_t j = 0; j < phi_variances.size(); ++j)
        for (std::size_t k = 0; k < phi_variances.size(); ++k)
            sum += alpha.alpha[j] * alpha.alpha[k] * std::sqrt(phi_variances[j] * phi_variances[k]);
    return sum;
}

const BasisCoefficients& AlphaCache::get(const TargetFunctional& target, const std::vector<int>& ks,
                                         std::size_t grid_size)
{
    std::lock_guard lock(mutex_);
    Key key{target.name, ks, grid_size};
    auto it = cache_.find(key);
    if (it == cache_.end())
        it = cache_.emplace(std::move(key), fit_alpha(target, ks, grid_size)).first;
    return it->second;
}

} // namespace ensdiv
