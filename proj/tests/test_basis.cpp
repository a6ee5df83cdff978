#include "doctest.h"

#include <cmath>
#include <vector>

#include "ensdiv/basis.hpp"
#include "ensdiv/error.hpp"

using namespace ensdiv;

namespace {

// Asymptotic k-NN error by enumerating all 2^k neighbour label patterns:
// neighbours and the query label are i.i.d. Bernoulli(eta).
double r_k_by_enumeration(double eta, int k)
{
    double err = 0.0;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
        const int ones = __builtin_popcount(mask);
        const double p = std::pow(eta, ones) * std::pow(1.0 - eta, k - ones);
        const int vote = 2 * ones > k ? 1 : 0;
        err += p * (vote == 1 ? (1.0 - eta) : eta);
    }
    return err;
}

// Normal equations in long double with partial-pivot elimination.
std::vector<long double> normal_equations_fit(const std::function<double(double)>& g, const std::vector<int>& ks,
                                              int grid)
{
    const std::size_t m = ks.size();
    std::vector<std::vector<long double>> a(m, std::vector<long double>(m + 1, 0.0L));
    for (int i = 0; i < grid; ++i) {
        const long double eta = static_cast<long double>(i) / (grid - 1);
        std::vector<long double> row(m);
        for (std::size_t j = 0; j < m; ++j) {
            long double s = 0.0L;
            for (int t = (ks[j] + 1) / 2; t <= ks[j]; ++t) {
                long double c = 1.0L;
                for (int u = 1; u <= t; ++u)
                    c = c * (ks[j] - t + u) / u;
                s += c * (std::pow(eta, t) * std::pow(1.0L - eta, ks[j] - t + 1)
                          + std::pow(1.0L - eta, t) * std::pow(eta, ks[j] - t + 1));
            }
            row[j] = s;
        }
        const long double y = g(static_cast<double>(eta));
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < m; ++c)
                a[r][c] += row[r] * row[c];
            a[r][m] += row[r] * y;
        }
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col]))
                piv = r;
        std::swap(a[col], a[piv]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col)
                continue;
            const long double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= m; ++c)
                a[r][c] -= f * a[col][c];
        }
    }
    std::vector<long double> x(m);
    for (std::size_t i = 0; i < m; ++i)
        x[i] = a[i][m] / a[i][i];
    return x;
}

} // namespace

TEST_CASE("r_k closed values")
{
    for (int k : {1, 3, 5, 7, 9, 21, 63}) {
        CHECK(r_k(0.0, k) == 0.0);
        CHECK(r_k(1.0, k) == 0.0);
        CHECK(r_k(0.5, k) == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(r_k(0.3, 1) == doctest::Approx(0.42).epsilon(1e-14));
    CHECK(r_k(0.5, 3) == doctest::Approx(0.5).epsilon(1e-15));
    for (int i = 0; i <= 1000; ++i) {
        const double eta = i / 1000.0;
        CHECK(std::abs(r_k(eta, 1) - 2.0 * eta * (1.0 - eta)) < 1e-12);
    }
    CHECK_THROWS_AS(r_k(0.5, 2), ConfigError);
    CHECK_THROWS_AS(r_k(0.5, 65), ConfigError);
    CHECK_THROWS_AS(r_k(-0.1, 1), ConfigError);
    CHECK_THROWS_AS(r_k(1.1, 1), ConfigError);
}

TEST_CASE("r_k equals the enumerated majority-vote error")
{
    for (int k : {1, 3, 5, 7, 9, 11})
        for (int i = 0; i <= 50; ++i) {
            const double eta = i / 50.0;
            CHECK(r_k(eta, k) == doctest::Approx(r_k_by_enumeration(eta, k)).epsilon(1e-13));
        }
}

TEST_CASE("r_k symmetry and bounds")
{
    for (int k : {1, 3, 5, 7, 9})
        for (int i = 0; i <= 1000; ++i) {
            const double eta = i / 1000.0;
            const double v = r_k(eta, k);
            CHECK(std::abs(v - r_k(1.0 - eta, k)) < 1e-14);
            CHECK(v >= 0.0);
            CHECK(v <= 0.5 + 1e-15);
        }
}

TEST_CASE("g_hellinger")
{
    CHECK(g_hellinger(0.5) == 0.0);
    CHECK(g_hellinger(0.0) == 1.0);
    CHECK(g_hellinger(1.0) == 1.0);
    // (0.5 - sqrt(0.75))^2
    CHECK(g_hellinger(0.25) == doctest::Approx(0.1339745962155614).epsilon(1e-14));

    const auto equal = hellinger_target(0.5);
    const auto skewed = hellinger_target(0.3);
    CHECK(equal.g(0.25) == g_hellinger(0.25));
    // at the prior, eta(1-eta) = p0 p1 and the target vanishes
    CHECK(skewed.g(0.3) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(hellinger_target(0.0), ConfigError);
}

TEST_CASE("target registry")
{
    CHECK(target_by_name("hellinger").g(0.0) == 1.0);
    CHECK(target_by_name("knn_error_3").g(0.5) == doctest::Approx(0.5));
    CHECK_THROWS_AS(target_by_name("nope"), ConfigError);
    CHECK_THROWS_AS(target_by_name("knn_error_4"), ConfigError);
    register_target({"bayes_error", [](double eta) { return std::min(eta, 1.0 - eta); }});
    CHECK(target_by_name("bayes_error").g(0.2) == doctest::Approx(0.2));
    const auto names = target_names();
    CHECK(std::find(names.begin(), names.end(), "bayes_error") != names.end());
}

TEST_CASE("fit_alpha recovers representable targets")
{
    const std::vector<int> ks{1, 3, 5};
    const auto fit = fit_alpha(knn_error_target(3), ks, 1001);
    CHECK(std::abs(fit.alpha[0]) < 1e-8);
    CHECK(std::abs(fit.alpha[1] - 1.0) < 1e-8);
    CHECK(std::abs(fit.alpha[2]) < 1e-8);
    CHECK(fit.fit_residual < 1e-20);

    const auto zero = fit_alpha({"zero", [](double) { return 0.0; }}, ks, 101);
    for (double a : zero.alpha)
        CHECK(a == 0.0);

    const std::vector<int> wide{1, 3, 5, 7, 9};
    for (std::size_t j = 0; j < wide.size(); ++j) {
        const auto f = fit_alpha(knn_error_target(wide[j]), wide, 1001);
        for (std::size_t i = 0; i < wide.size(); ++i)
            CHECK(std::abs(f.alpha[i] - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
}

TEST_CASE("fit_alpha for the Hellinger target")
{
    const std::vector<int> ks{1, 3, 5, 7, 9};
    const auto target = hellinger_target();
    const auto fit = fit_alpha(target, ks, 1001);
    const auto oracle = normal_equations_fit(target.g, ks, 1001);
    // frozen from the long double oracle
    const double frozen[] = {47.90933639, -341.6640433, 872.3372811, -937.1798256, 358.6685715};
    for (std::size_t i = 0; i < ks.size(); ++i) {
        CHECK(fit.alpha[i] == doctest::Approx(static_cast<double>(oracle[i])).epsilon(1e-7));
        CHECK(fit.alpha[i] == doctest::Approx(frozen[i]).epsilon(1e-8));
    }

    const std::vector<std::vector<int>> ladder{{1}, {1, 3}, {1, 3, 5}, {1, 3, 5, 7}, {1, 3, 5, 7, 9}};
    double previous = INFINITY;
    for (const auto& sub : ladder) {
        const double residual = fit_alpha(target, sub, 1001).fit_residual;
        CHECK(residual < previous);
        previous = residual;
    }

    // Every r_k vanishes at the endpoints; the residual bounds the pointwise gap.
    CHECK(evaluate_basis_fit(fit, 0.0) == 0.0);
    CHECK(std::abs(evaluate_basis_fit(fit, 0.0) - target.g(0.0)) <= std::sqrt(1001.0 * fit.fit_residual));
}

TEST_CASE("fit residual never grows when a basis element is added")
{
    const auto target = hellinger_target();
    const std::vector<int> pool{1, 3, 5, 7, 9, 11, 13};
    for (unsigned mask = 1; mask < (1u << pool.size()); ++mask) {
        std::vector<int> ks;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (mask & (1u << i))
                ks.push_back(pool[i]);
        if (ks.size() >= pool.size())
            continue;
        const double base = fit_alpha(target, ks, 401).fit_residual;
        for (int extra : pool)
            if (std::find(ks.begin(), ks.end(), extra) == ks.end()) {
                auto bigger = ks;
                bigger.push_back(extra);
                CHECK(fit_alpha(target, bigger, 401).fit_residual <= base * (1.0 + 1e-9) + 1e-18);
            }
    }
}

TEST_CASE("fit_alpha errors")
{
    const auto target = hellinger_target();
    const std::vector<int> dup{1, 3, 3};
    CHECK_THROWS_AS(fit_alpha(target, dup, 101), RankDeficientError);
    const std::vector<int> even{1, 2};
    CHECK_THROWS_AS(fit_alpha(target, even, 101), ConfigError);
    const std::vector<int> ks{1, 3, 5};
    CHECK_THROWS_AS(fit_alpha(target, ks, 5), ConfigError);
    CHECK_THROWS_AS(fit_alpha(target, std::vector<int>{}, 101), ConfigError);
}

TEST_CASE("evaluate_basis_fit")
{
    BasisCoefficients unit{{1, 3}, {1.0, 0.0}, 0.0};
    CHECK(evaluate_basis_fit(unit, 0.5) == doctest::Approx(0.5));
    BasisCoefficients zero{{1, 3, 5}, {0.0, 0.0, 0.0}, 0.0};
    CHECK(evaluate_basis_fit(zero, 0.37) == 0.0);
}
