#include "doctest.h"

#include <cmath>
#include <string>

#include "ensdiv/error.hpp"
#include "ensdiv/estimator.hpp"
#include "ensdiv/model.hpp"

using namespace ensdiv;

namespace {

DistributionPair reference_pair()
{
    return {{0.0, 0.8, 10}, {1.0, 0.9, 10}};
}

ErrorRateTable hand_table()
{
    ErrorRateTable t;
    t.ks = {1, 3};
    t.ls = {0.2, 0.5, 1.0};
    t.rates.resize(2, 3);
    t.rates << 0.30, 0.25, 0.22,
               0.28, 0.24, 0.21;
    t.n_train = 100;
    return t;
}

} // namespace

TEST_CASE("phi_k is the weighted sum over fractions")
{
    const ErrorRateTable t = hand_table();
    EnsembleWeights w{{0.5, -1.0, 1.5}, 0.0, Method::relaxed};
    CHECK(phi_k(t, 1, w) == doctest::Approx(0.5 * 0.30 - 0.25 + 1.5 * 0.22).epsilon(1e-15));
    CHECK(phi_k(t, 3, w) == doctest::Approx(0.5 * 0.28 - 0.24 + 1.5 * 0.21).epsilon(1e-15));

    ErrorRateTable single = t;
    single.ls = {1.0};
    single.rates = t.rates.rightCols(1);
    EnsembleWeights one{{1.0}, 1.0, Method::plain};
    CHECK(phi_k(single, 1, one) == 0.22);

    // weights summing to one reproduce a constant row
    ErrorRateTable flat = t;
    flat.rates.setConstant(0.125);
    EnsembleWeights sums_to_one{{3.0, -4.0, 2.0}, 0.0, Method::exact};
    CHECK(phi_k(flat, 3, sums_to_one) == doctest::Approx(0.125).epsilon(1e-14));

    CHECK_THROWS_AS(phi_k(t, 1, one), ConfigError);
    CHECK_THROWS_AS(phi_k(t, 5, w), ConfigError);
}

TEST_CASE("combine matches alpha by k")
{
    BasisCoefficients a{{1, 3}, {2.0, -1.0}, 0.0};
    const std::vector<std::pair<int, double>> phi{{1, 0.3}, {3, 0.2}};
    CHECK(combine(a, phi) == doctest::Approx(0.4).epsilon(1e-15));
    const std::vector<std::pair<int, double>> swapped{{3, 0.2}, {1, 0.3}};
    CHECK_THROWS_AS(combine(a, swapped), ConfigError);
    const std::vector<std::pair<int, double>> short_list{{1, 0.3}};
    CHECK_THROWS_AS(combine(a, short_list), ConfigError);
}

TEST_CASE("variance bound")
{
    BasisCoefficients one{{1}, {3.0}, 0.0};
    const std::vector<double> v1{0.04};
    CHECK(variance_bound(one, v1) == doctest::Approx(9.0 * 0.04).epsilon(1e-15));

    BasisCoefficients two{{1, 3}, {0.5, 0.5}, 0.0};
    const std::vector<double> zeros{0.0, 0.0};
    CHECK(variance_bound(two, zeros) == 0.0);
    const std::vector<double> v2{0.04, 0.16};
    // 0.25 * 0.04 + 2 * 0.25 * sqrt(0.04 * 0.16) + 0.25 * 0.16
    CHECK(variance_bound(two, v2) == doctest::Approx(0.09).epsilon(1e-14));

    BasisCoefficients mixed{{1, 3}, {1.0, -1.0}, 0.0};
    CHECK(variance_bound(mixed, v2) == doctest::Approx(0.04 - 2 * 0.08 + 0.16).epsilon(1e-14));

    const std::vector<double> negative{0.04, -0.01};
    CHECK_THROWS_AS(variance_bound(two, negative), ConfigError);
    const std::vector<double> wrong_size{0.04};
    CHECK_THROWS_AS(variance_bound(two, wrong_size), ConfigError);
}

TEST_CASE("weights_for")
{
    const auto plain = weights_for(Method::plain, {}, 10, 100, 1.0);
    CHECK(plain.w == std::vector<double>{1.0});
    CHECK(plain.method == Method::plain);
    const auto ls = log_spaced(0.05, 0.5, 12);
    CHECK(weights_for(Method::exact, ls, 10, 1000, 1.0).w == exact_weights({ls, 10, 1000, 1.0}).w);
    CHECK(weights_for(Method::relaxed, ls, 10, 1000, 0.1).w == relaxed_weights({ls, 10, 1000, 0.1}).w);
}

TEST_CASE("r_1 target with the plain method is the 1-NN holdout error")
{
    const SplitDataset split = make_split(reference_pair(), 400, 31);
    EstimatorOptions opt;
    opt.method = Method::plain;
    const auto est = estimate_functional(split, knn_error_target(1), opt);
    CHECK(est.alpha.alpha[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(est.value == doctest::Approx(holdout_error_rate(split, 1)).epsilon(1e-8));
    CHECK(est.per_k_phi.size() == 5);
    CHECK(est.per_k_phi[2].first == 5);
    CHECK(est.per_k_phi[2].second == holdout_error_rate(split, 5));
}

TEST_CASE("estimate equals the double sum over k and l")
{
    const SplitDataset split = make_split(reference_pair(), 500, 8);
    EstimatorOptions opt;
    opt.ls = log_spaced(0.05, 0.5, 12);
    opt.d = 10;
    opt.lambda = 0.1;
    opt.seed = 12;
    const auto alpha = fit_alpha(hellinger_target(), opt.ks);
    const auto est = estimate_functional(split, alpha, opt);

    const auto table = error_table(split, opt.ks, opt.ls, 1, opt.seed);
    const auto w = relaxed_weights({opt.ls, 10, split.train.size(), 0.1});
    double by_l = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < opt.ls.size(); ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < opt.ks.size(); ++j) {
            inner += alpha.alpha[j] * table.rate(opt.ks[j], i);
            scale += std::abs(alpha.alpha[j] * w.w[i]);
        }
        by_l += w.w[i] * inner;
    }
    CHECK(std::abs(est.value - by_l) <= 1e-12 * scale);
    CHECK(est.weights.w == w.w);

    // linear in the target
    const TargetFunctional doubled{"hellinger_x2", [](double eta) { return 2.0 * g_hellinger(eta); }};
    const auto est2 = estimate_functional(split, doubled, opt);
    CHECK(std::abs(est2.value - 2.0 * est.value) <= 1e-9 * scale);
}

TEST_CASE("plain equals exact weights on the single fraction l = 1")
{
    const SplitDataset split = make_split(reference_pair(), 300, 4);
    const auto alpha = fit_alpha(hellinger_target(), std::vector<int>{1, 3, 5, 7, 9});
    EstimatorOptions plain;
    plain.method = Method::plain;
    EstimatorOptions exact = plain;
    exact.method = Method::exact;
    exact.ls = {1.0};
    exact.d = 4;
    CHECK(estimate_functional(split, alpha, plain).value == estimate_functional(split, alpha, exact).value);
}

TEST_CASE("identical classes give a 1-NN error near one half")
{
    DistributionPair same{{0.0, 0.8, 3}, {0.0, 0.8, 3}};
    const SplitDataset split = make_split(same, 4000, 2);
    EstimatorOptions opt;
    opt.method = Method::plain;
    const auto est = estimate_functional(split, knn_error_target(1), opt);
    CHECK(std::abs(est.value - 0.5) < 0.03);
}

TEST_CASE("threads do not change the estimate")
{
    const SplitDataset split = make_split(reference_pair(), 300, 17);
    EstimatorOptions opt;
    opt.ls = log_spaced(0.1, 0.5, 6);
    opt.d = 10;
    opt.repeats = 2;
    opt.seed = 3;
    const auto a = estimate_functional(split, hellinger_target(), opt);
    opt.threads = 4;
    const auto b = estimate_functional(split, hellinger_target(), opt);
    CHECK(a.value == b.value);
}

TEST_CASE("errors carry the failing stage")
{
    const SplitDataset split = make_split(reference_pair(), 200, 1);
    EstimatorOptions opt;
    opt.d = 10;
    opt.ls = {0.2, 0.5};
    try {
        estimate_functional(split, hellinger_target(), opt);
        FAIL("expected an infeasible weight problem");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).starts_with("ensemble weights: "));
    }

    opt.ls = {0.01, 0.1, 0.2, 0.5};
    try {
        estimate_functional(split, hellinger_target(), opt);
        FAIL("expected a table error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).starts_with("error table: "));
    }

    opt.ls = log_spaced(0.1, 0.5, 6);
    opt.ks = {1, 1, 3};
    try {
        estimate_functional(split, hellinger_target(), opt);
        FAIL("expected a rank deficient fit");
    } catch (const RankDeficientError& e) {
        CHECK(std::string(e.what()).starts_with("basis fit: "));
        CHECK(std::string(e.kind()) == "rank_deficient");
    }

    const auto alpha = fit_alpha(hellinger_target(), std::vector<int>{1, 3});
    opt.ks = {1, 3, 5};
    CHECK_THROWS_AS(estimate_functional(split, alpha, opt), ConfigError);
}

TEST_CASE("alpha cache")
{
    AlphaCache cache;
    const std::vector<int> ks{1, 3, 5};
    const auto& a = cache.get(hellinger_target(), ks);
    const auto& b = cache.get(hellinger_target(), ks);
    CHECK(&a == &b);
    CHECK(a.alpha == fit_alpha(hellinger_target(), ks).alpha);
    const auto& c = cache.get(hellinger_target(), ks, 501);
    CHECK(&c != &a);
    const auto& e = cache.get(knn_error_target(3), ks);
    CHECK(e.alpha[1] == doctest::Approx(1.0).epsilon(1e-9));
}
