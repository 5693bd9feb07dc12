import math

import numpy as np
import pytest

import stopdeck as sd


def table1():
    return sd.MarketParams(s0=120, strike=100, maturity=3, rate=0.05, dividend=0.1, sigma=0.1, steps=50)


def test_improvement_values():
    assert round(sd.improvement_pct(6.67, 0.64)) == 1042
    assert round(sd.improvement_pct(6.07, 1.19)) == 510
    assert sd.improvement_pct(1.0, 0.0) is None


def test_bad_params_raise():
    with pytest.raises(sd.ConfigError):
        sd.MarketParams(steps=0)


def test_gbm_paths_shape_and_seed():
    p = table1()
    a = sd.gbm_paths(p, 64, 7)
    b = sd.gbm_paths(p, 64, 7)
    assert a.shape == (64, 51)
    assert np.all(a[:, 0] == 120)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sd.gbm_paths(p, 64, 8))


def test_fbm_covariance_symmetry():
    assert sd.fbm_covariance(1.0, 2.0, 0.7) == pytest.approx(sd.fbm_covariance(2.0, 1.0, 0.7))
    assert sd.fbm_covariance(1.0, 1.0, 0.5) == pytest.approx(1.0)


def test_payoff_matrix_discounting():
    p = sd.MarketParams(s0=90, strike=100, maturity=1, rate=0.05, sigma=0.0, steps=2)
    prices = np.full((1, 3), 90.0)
    pay = sd.payoff_matrix(prices, p)
    assert pay[0, 0] == pytest.approx(10.0)
    assert pay[0, 2] == pytest.approx(10.0 * math.exp(-0.05))


def test_lsmc_round_trip():
    p = table1()
    fit_paths = sd.gbm_paths(p, 4000, 1)
    model, in_sample = sd.lsmc_fit(fit_paths, p, 3)
    assert 3.5 < in_sample["mean"] < 6.0
    again = sd.LsmcModel.from_text(model.to_text())
    test_paths = sd.gbm_paths(p, 2000, 2)
    s1, st1 = sd.lsmc_apply(model, test_paths, p)
    s2, st2 = sd.lsmc_apply(again, test_paths, p)
    assert s1 == s2
    assert st1["mean"] == st2["mean"]


def test_train_and_evaluate_tiny():
    p = sd.MarketParams(s0=100, strike=100, maturity=1, rate=0.05, sigma=0.2, steps=6)
    pol = sd.train_gbm(p, epochs=3, batch=64, seed=5)
    assert pol.parameter_count == 9161
    assert [r[0] for r in pol.trace] == [0, 1, 2]
    steps, stats = sd.evaluate(pol, sd.gbm_paths(p, 256, 9), p)
    assert len(steps) == 256
    assert all(1 <= s <= 6 for s in steps)
    assert stats["ci_lo"] <= stats["mean"] <= stats["ci_hi"]


def test_cli_unknown_command():
    code, out, err = sd.run_cli(["frobnicate"])
    assert code != 0
    assert err
