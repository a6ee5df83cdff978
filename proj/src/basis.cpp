#include "ensdiv/basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>

#include <Eigen/Dense>

#include "ensdiv/error.hpp"

namespace ensdiv {

namespace {

constexpr int kMaxK = 63;

// Pascal's triangle; C(63, 31) < 2^63 so every entry is exact.
const std::array<std::array<std::uint64_t, kMaxK + 1>, kMaxK + 1>& binomials()
{
    static const auto table = [] {
        std::array<std::array<std::uint64_t, kMaxK + 1>, kMaxK + 1> c{};
        for (int n = 0; n <= kMaxK; ++n) {
            c[n][0] = c[n][n] = 1;
            for (int i = 1; i < n; ++i)
                c[n][i] = c[n - 1][i - 1] + c[n - 1][i];
        }
        return c;
    }();
    return table;
}

void check_basis_k(int k)
{
    if (k < 1 || k % 2 == 0 || k > kMaxK)
        throw ConfigError("basis index k must be odd and in [1, 63], got " + std::to_string(k));
}

struct Registry {
    std::mutex mutex;
    std::map<std::string, TargetFunctional, std::less<>> targets;

    Registry() { targets.emplace("hellinger", hellinger_target(0.5)); }
};

Registry& registry()
{
    static Registry r;
    return r;
}

} // namespace

double r_k(double eta, int k)
{
    check_basis_k(k);
    if (!(eta >= 0.0 && eta <= 1.0))
        throw ConfigError("eta must lie in [0, 1]");
    const auto& c = binomials()[static_cast<std::size_t>(k)];
    const double q = 1.0 - eta;
    double sum = 0.0;
    for (int i = (k + 1) / 2; i <= k; ++i) {
        const double term = std::pow(eta, i) * std::pow(q, k - i + 1) + std::pow(q, i) * std::pow(eta, k - i + 1);
        sum += static_cast<double>(c[static_cast<std::size_t>(i)]) * term;
    }
    return sum;
}

double g_hellinger(double eta)
{
    const double diff = std::sqrt(eta) - std::sqrt(1.0 - eta);
    return diff * diff;
}

TargetFunctional hellinger_target(double prior1)
{
    if (!(prior1 > 0.0 && prior1 < 1.0))
        throw ConfigError("hellinger target needs a class-1 prior in (0, 1)");
    if (prior1 == 0.5)
        return {"hellinger", g_hellinger};
    const double scale = 1.0 / std::sqrt(prior1 * (1.0 - prior1));
    return {"hellinger", [scale](double eta) { return 1.0 - scale * std::sqrt(eta * (1.0 - eta)); }};
}

TargetFunctional knn_error_target(int k)
{
    check_basis_k(k);
    return {"knn_error_" + std::to_string(k), [k](double eta) { return r_k(eta, k); }};
}

void register_target(TargetFunctional target)
{
    if (target.name.empty() || !target.g)
        throw ConfigError("a target needs a name and a function");
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.targets.insert_or_assign(target.name, std::move(target));
}

TargetFunctional target_by_name(std::string_view name)
{
    {
        auto& r = registry();
        std::lock_guard lock(r.mutex);
        if (auto it = r.targets.find(name); it != r.targets.end())
            return it->second;
    }
    constexpr std::string_view prefix = "knn_error_";
    if (name.starts_with(prefix)) {
        const std::string digits(name.substr(prefix.size()));
        if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; })
            && digits.size() <= 2)
            return knn_error_target(std::stoi(digits));
    }
    throw ConfigError("unknown target functional '" + std::string(name) + "'");
}

std::vector<std::string> target_names()
{
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    std::vector<std::string> names;
    for (const auto& [name, _] : r.targets)
        names.push_back(name);
    return names;
}

BasisCoefficients fit_alpha(const TargetFunctional& target, std::span<const int> ks, std::size_t grid_size)
{
    if (!target.g)
        throw ConfigError("target has no function");
    if (ks.empty())
        throw ConfigError("fit_alpha needs at least one basis element");
    // Repeated k values are left to the rank check below.
    for (int k : ks)
        check_basis_k(k);
    if (grid_size < 2 * ks.size())
        throw ConfigError("grid size must be at least twice the number of basis elements");

    const auto rows = static_cast<Eigen::Index>(grid_size);
    const auto cols = static_cast<Eigen::Index>(ks.size());
    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd rhs(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double eta = static_cast<double>(i) / static_cast<double>(grid_size - 1);
        for (Eigen::Index j = 0; j < cols; ++j)
            design(i, j) = r_k(eta, ks[static_cast<std::size_t>(j)]);
        rhs[i] = target.g(eta);
        if (!std::isfinite(rhs[i]))
            throw ConfigError("target '" + target.name + "' is not finite at eta = " + std::to_string(eta));
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-12);
    if (qr.rank() < cols)
        throw RankDeficientError("basis design matrix has rank " + std::to_string(qr.rank()) + " < "
                                 + std::to_string(cols));
    const Eigen::VectorXd alpha = qr.solve(rhs);

    BasisCoefficients out;
    out.ks.assign(ks.begin(), ks.end());
    out.alpha.assign(alpha.data(), alpha.data() + alpha.size());
    out.fit_residual = (design * alpha - rhs).squaredNorm() / static_cast<double>(grid_size);
    return out;
}

double evaluate_basis_fit(const BasisCoefficients& coeffs, double eta)
{
    if (coeffs.ks.size() != coeffs.alpha.size())
        throw ConfigError("coefficient and basis lengths differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < coeffs.ks.size(); ++i)
        sum += coeffs.alpha[i] * r_k(eta, coeffs.ks[i]);
    return sum;
}

} // namespace ensdiv
