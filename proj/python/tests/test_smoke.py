import math

import numpy as np
import pytest

import ensdiv


def reference_pair():
    return ensdiv.DistributionPair(ensdiv.GaussianSpec(0.0, 0.8, 10), ensdiv.GaussianSpec(1.0, 0.9, 10))


def test_basis_curves():
    for eta in np.linspace(0.0, 1.0, 11):
        assert ensdiv.r_k(eta, 1) == pytest.approx(2 * eta * (1 - eta), abs=1e-12)
    assert ensdiv.r_k(0.5, 9) == pytest.approx(0.5, abs=1e-12)
    assert ensdiv.g_hellinger(0.0) == 1.0
    with pytest.raises(ensdiv.ConfigError):
        ensdiv.r_k(0.5, 2)


def test_fit_alpha():
    fit = ensdiv.fit_alpha("knn_error_3", [1, 3, 5])
    assert fit.alpha == pytest.approx([0.0, 1.0, 0.0], abs=1e-8)
    with pytest.raises(ensdiv.RankDeficientError):
        ensdiv.fit_alpha("hellinger", [1, 1, 3])
    assert "hellinger" in ensdiv.target_names()


def test_weights():
    ls = ensdiv.log_spaced(0.05, 0.5, 12)
    exact = ensdiv.exact_weights(ensdiv.EnsembleConfig(ls, 10, 1000))
    assert sum(exact.w) == pytest.approx(1.0, abs=1e-10)
    relaxed = ensdiv.relaxed_weights(ensdiv.EnsembleConfig(ls, 10, 1000, 1.0))
    assert relaxed.epsilon <= exact.epsilon
    report = ensdiv.constraint_report(ensdiv.EnsembleConfig(ls, 10, 1000, 1.0), relaxed)
    assert report.norm2 <= report.norm_bound + 1e-10
    assert ensdiv.constraint_exponents(10) == [2, 3, 4]
    with pytest.raises(ensdiv.InfeasibleError):
        ensdiv.exact_weights(ensdiv.EnsembleConfig([0.1, 0.1, 0.5], 4))
    with pytest.raises(ensdiv.Error):
        ensdiv.exact_weights(ensdiv.EnsembleConfig([0.2, 0.5], 10))


def test_model_and_tables():
    pair = reference_pair()
    assert ensdiv.hellinger_squared_gaussian(pair) == pytest.approx(0.379603756196388, rel=1e-12)
    mc = ensdiv.functional_ground_truth_mc(pair, "hellinger", 20000, 1)
    assert abs(mc.value - 0.3796) < 5 * mc.std_error

    data = ensdiv.sample(pair, 200, 3)
    assert data.points.shape == (200, 10)
    assert sum(data.labels) == 100

    split = ensdiv.make_split(pair, 300, 5)
    table = ensdiv.error_table(split, [1, 3], [0.25, 0.5, 1.0], repeats=2, seed=9)
    assert table.rates.shape == (2, 3)
    assert table.rate(1, 2) == ensdiv.holdout_error_rate(split, 1)


def test_estimate_functional():
    split = ensdiv.make_split(reference_pair(), 400, 11)
    opt = ensdiv.EstimatorOptions()
    opt.ls = ensdiv.log_spaced(0.05, 0.5, 12)
    opt.d = 10
    est = ensdiv.estimate_functional(split, "hellinger", opt)
    assert math.isfinite(est.value)
    assert [k for k, _ in est.per_k_phi] == [1, 3, 5, 7, 9]
    assert est.weights.method == ensdiv.Method.relaxed

    opt.method = ensdiv.Method.plain
    est = ensdiv.estimate_functional(split, "knn_error_1", opt)
    assert est.value == pytest.approx(ensdiv.holdout_error_rate(split, 1), abs=1e-8)


def test_simulation_round_trip():
    cfg = ensdiv.parse_simulation_config(
        "d = 3\nls = log:0.2,0.6,4\nn_grid = 100,200\ntrials = 3\ntruth_mc_samples = 5000\nthreads = 1\n"
    )
    rows = ensdiv.run_simulation(cfg)
    assert len(rows) == 2 * 3 * 6
    assert rows[5].quantity == "G"
    assert rows[5].variance_bound is not None
    csv = ensdiv.results_csv(rows)
    assert csv == ensdiv.results_csv(ensdiv.run_simulation(cfg))
    assert csv.splitlines()[0].startswith("N,method,lambda,quantity")
    with pytest.raises(ensdiv.ParseError):
        ensdiv.parse_simulation_config("colour = red\n")
