import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import clri_iterate
from magt.clri import (
    ClriParams,
    UnderdeterminedFit,
    clri_predict,
    clri_simulate,
    error,
    fit_clri,
    fixed_point,
    next_error,
    results_to_csv,
    volatility,
)
from magt.errors import ConfigError


def test_error_examples():
    assert error([0, 1, 2, 3], [0, 1, 2, 3]) == 0
    assert error([0, 1, 2, 3], [1, 2, 3, 0]) == 1
    assert error([0, 1, 2, 3], [0, 1, 2, 0]) == 0.25
    assert error([0, 1], [1, 1], weights=[0.9, 0.1]) == pytest.approx(0.9)


def test_predict_examples():
    p = ClriParams.single(4, 0.3, 0.3, 1.0)
    assert clri_predict(p, 0.5, 1).values[1, 0] == pytest.approx(0.35)
    p = ClriParams.single(4, 0.5, 0.5, 0.9)
    assert clri_predict(p, 0.0, 1).values[1, 0] == pytest.approx(0.1)
    traj = clri_predict(p, 0.8, 200).agent(0)
    assert traj[-1] == pytest.approx(1 / 6, abs=1e-12)
    assert fixed_point(p)[0] == pytest.approx(1 / 6)


def test_predict_matches_scalar_oracle():
    p = ClriParams.single(5, 0.6, 0.4, 0.7, v=0.15)
    np.testing.assert_allclose(clri_predict(p, 0.9, 25).agent(0),
                               clri_iterate(0.6, 0.4, 0.7, 5, 0.15, 0.9, 25), atol=1e-15)


def _impact(n_others, i_val):
    n = n_others + 1
    imp = np.zeros((n, n))
    imp[1:, 0] = i_val
    return imp


def test_volatility_examples():
    p = ClriParams([4, 4], 0.5, 0.5, 0.9, impact=np.zeros((2, 2)))
    assert volatility(p, [0.4, 0.4]).tolist() == [0, 0]
    p = ClriParams([4, 4], 0.5, 0.5, 0.9, impact=_impact(1, 0.5))
    assert volatility(p, [0.4, 0.4])[0] == pytest.approx(0.2)
    p = ClriParams([4, 4, 4], 0.5, 0.5, 0.9, impact=_impact(2, 0.5))
    assert volatility(p, [0.4, 0.4, 0.4])[0] == pytest.approx(0.36)


@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
@settings(max_examples=50, deadline=None)
def test_volatility_monotone(seed, n):
    rng = np.random.default_rng(seed)
    imp = rng.uniform(size=(n, n))
    p = rng.uniform(size=n)
    params = ClriParams([4] * n, 0.5, 0.5, 0.9, impact=imp)
    base = volatility(params, p)
    j, i = rng.integers(n, size=2)
    bumped = imp.copy()
    bumped[j, i] = min(1.0, imp[j, i] + 0.1)
    assert np.all(volatility(ClriParams([4] * n, 0.5, 0.5, 0.9, impact=bumped), p) >= base - 1e-15)
    q = p.copy()
    q[j] = min(1.0, p[j] + 0.1)
    assert np.all(volatility(params, q) >= base - 1e-15)


def test_learn_not_above_change():
    with pytest.raises(ConfigError, match="l <= c"):
        ClriParams.single(4, 0.2, 0.3, 0.9)
    with pytest.raises(ConfigError, match="c must equal l"):
        ClriParams.single(2, 0.5, 0.3, 0.9)


def _valid_grid():
    grid = np.round(np.arange(0, 1.01, 0.1), 10)
    for n in (2, 3, 4, 8):
        for c, l, r, v in itertools.product(grid, repeat=4):
            if l > c or (n == 2 and c != l):
                continue
            yield n, c, l, r, v


def test_recurrence_stays_in_unit_interval():
    worst = 0.0
    for n, c, l, r, v in _valid_grid():
        p = ClriParams.single(n, c, l, r, v)
        for e in (0.0, 1.0):   # affine in e: endpoints suffice
            out = next_error(p, np.array([e]), p.volatility)[0]
            worst = max(worst, -out, out - 1)
    assert worst <= 1e-12


@given(st.floats(0.05, 1), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_monotone_convergence_to_fixed_point(l, r, e0):
    p = ClriParams.single(4, l, l, r)
    traj = clri_predict(p, e0, 400).agent(0)
    star = fixed_point(p)[0]
    d = np.abs(traj - star)
    assert np.all(np.diff(d) <= 1e-15)
    assert d[-1] <= abs(r - l) ** 400 * d[0] + 1e-12


def test_geometric_decay_prediction():
    p = ClriParams.single(4, 0.3, 0.3, 1.0)
    np.testing.assert_allclose(clri_predict(p, 0.8, 20).agent(0), 0.8 * 0.7 ** np.arange(21))


def test_simulate_deterministic_cases():
    sim = clri_simulate(ClriParams.single(4, 1, 1, 1), steps=5, trials=200)
    assert sim.mean.values[0, 0] == 1 and np.all(sim.mean.values[1:] == 0)
    sim = clri_simulate(ClriParams.single(4, 0, 0, 1), steps=5, trials=200, e0=0.5)
    assert np.all(sim.mean.values == sim.mean.values[0])


def test_simulate_fixed_point():
    p = ClriParams.single(4, 0.5, 0.5, 0.9)
    sim = clri_simulate(p, steps=40, trials=10_000, seed=7)
    assert abs(sim.mean.values[-1, 0] - 1 / 6) < 3 * sim.stderr[-1, 0]


def test_simulate_geometric_decay():
    p = ClriParams.single(4, 0.3, 0.3, 1.0)
    sim = clri_simulate(p, steps=15, trials=10_000, seed=11)
    pred = clri_predict(p, 1.0, 15).agent(0)
    z = np.abs(sim.mean.agent(0) - pred)[1:] / sim.stderr[1:, 0]
    assert z.max() < 3


def test_simulation_is_reproducible():
    p = ClriParams.single(4, 0.6, 0.4, 0.8, v=0.1)
    a = clri_simulate(p, steps=10, trials=2500, seed=3)
    b = clri_simulate(p, steps=10, trials=2500, seed=3)
    assert results_to_csv(clri_predict(p, 1.0, 10), a) == results_to_csv(clri_predict(p, 1.0, 10), b)


def test_moving_target_coupling():
    p = ClriParams([4, 4], [0.5, 0.5], [0.3, 0.3], [0.8, 0.8], impact=[[0, 0.4], [0.4, 0]])
    sim = clri_simulate(p, steps=10, trials=500, seed=1)
    assert np.all(sim.volatility > 0)
    solo = ClriParams([4, 4], [0.5, 0.5], [0.3, 0.3], [0.8, 0.8], impact=np.zeros((2, 2)))
    assert np.all(clri_simulate(solo, steps=10, trials=200, seed=1).volatility == 0)


def test_fit_exact():
    p = ClriParams.single(4, 0.45, 0.45, 0.85)
    fit = fit_clri(clri_predict(p, 1.0, 30).agent(0), 4)
    assert fit.residual < 1e-6
    assert fit.retain == pytest.approx(0.85, abs=1e-6)
    assert fit.learn == pytest.approx(0.45, abs=1e-6)


def test_fit_with_known_retain_recovers_volatility():
    p = ClriParams.single(6, 0.5, 0.5, 0.8, v=0.1)
    fit = fit_clri(clri_predict(p, 1.0, 30).agent(0), 6, change=0.5, retain=0.8)
    assert fit.volatility == pytest.approx(0.1, abs=1e-6)
    assert fit.learn == pytest.approx(0.5, abs=1e-6)


def test_fit_constant_warns():
    with pytest.warns(UnderdeterminedFit):
        fit = fit_clri(np.zeros(20), 4)
    assert fit.warnings


def test_fit_noisy_simulation():
    p = ClriParams.single(4, 0.3, 0.3, 0.9)
    sim = clri_simulate(p, steps=30, trials=10_000, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit = fit_clri(sim.mean.agent(0), 4)
    assert abs(fit.retain - 0.9) < 0.05 and abs(fit.learn - 0.3) < 0.05


def test_csv_columns():
    p = ClriParams.single(4, 0.5, 0.5, 0.9)
    text = results_to_csv(clri_predict(p, 1.0, 2), clri_simulate(p, steps=2, trials=10))
    assert text.splitlines()[0] == "step,agent,predicted,empirical,half_width"
    assert len(text.splitlines()) == 4
