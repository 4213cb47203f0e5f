import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from photonrc.core import ConditioningError, DivergenceError, ParameterError, RandomSource, StateMatrix, TimeSeries
from photonrc.esn import EsnParams, build_esn, esn_runner
from photonrc.readout import RidgeConfig
from photonrc.tasks import (
    TaskSpec,
    evaluate,
    gen_mackey_glass,
    gen_narma10,
    mackey_glass_trajectory,
    memory_capacity,
    narma10_target,
    tapped_delay_runner,
    task_data,
)


def narma_loop(u):
    """Independent NARMA10 reference with explicit zero padding."""
    pad = 10
    uu = [0.0] * pad + list(u)
    yy = [0.0] * (pad + 1)
    for k in range(len(u)):
        i = k + pad
        s = sum(yy[i - j] for j in range(10))
        yy.append(0.3 * yy[i] + 0.05 * yy[i] * s + 1.5 * uu[i - 9] * uu[i] + 0.1)
    return np.array(yy[pad + 1 :])


def delay_line_runner(inputs):
    u = inputs.values[:, 0]
    return StateMatrix(np.concatenate([[0.0], u[:-1]])[:, None])


def noise_runner(seed):
    def run(inputs):
        return StateMatrix(RandomSource(seed).child("noise").uniform(-1, 1, (inputs.length, 10)))

    return run


# ---------------------------------------------------------------- NARMA10


def test_narma_fixed_point_under_zero_input():
    y_star = brentq(lambda y: 0.3 * y + 0.05 * 10 * y * y + 0.1 - y, 0.0, 0.5)
    assert y_star == pytest.approx(0.161483, abs=1e-6)
    y = narma10_target(np.zeros(300))
    assert y[-1] == pytest.approx(y_star, abs=1e-6)


def test_narma_first_target_is_constant_term():
    u, y = gen_narma10(50, RandomSource(3))
    assert y.values[0, 0] == 0.1


def test_narma_matches_loop_reference():
    u, y = gen_narma10(400, RandomSource(8))
    assert np.allclose(y.values[:, 0], narma_loop(u.values[:, 0]), atol=1e-14, rtol=0)


def test_narma_input_range_and_determinism():
    u1, y1 = gen_narma10(1000, RandomSource(5))
    u2, y2 = gen_narma10(1000, RandomSource(5))
    assert np.array_equal(u1.values, u2.values) and np.array_equal(y1.values, y2.values)
    assert u1.values.min() >= 0 and u1.values.max() < 0.5


def test_narma_divergence_detected():
    with pytest.raises(DivergenceError):
        narma10_target(np.full(200, 3.0))


def test_narma_short_length():
    with pytest.raises(ParameterError):
        gen_narma10(19, RandomSource(1))


# ---------------------------------------------------------------- Mackey-Glass


def test_mackey_glass_attractor_range():
    x = gen_mackey_glass(5000).values[:, 0]
    assert x.min() > 0.2 and x.max() < 1.5


def test_mackey_glass_frozen_history_closed_form():
    traj = mackey_glass_trajectory(17.0, 0.1)
    g = 1.2 / (1 + 1.2**10)
    exact = 2 * g + (1.2 - 2 * g) * np.exp(-0.1 * traj.times)
    assert np.max(np.abs(traj.values[:, 0] - exact)) < 1e-4


def test_mackey_glass_self_convergence():
    coarse = gen_mackey_glass(500, dt=0.025, subsample=40).values[:, 0]
    fine = gen_mackey_glass(500, dt=0.0125, subsample=80).values[:, 0]
    assert np.sqrt(np.mean((coarse - fine) ** 2)) < 1e-3


def test_mackey_glass_sampling_grid():
    x = gen_mackey_glass(10, dt=0.1, subsample=10)
    assert x.dt == pytest.approx(1.0)
    assert x.t0 == pytest.approx(1000.0)
    raw = mackey_glass_trajectory(1009.0, 0.1).values[10000::10, 0]
    assert np.array_equal(x.values[:, 0], raw)


@pytest.mark.parametrize("kw", [{"dt": 0.2}, {"subsample": 0}])
def test_mackey_glass_bad_args(kw):
    with pytest.raises(ParameterError):
        gen_mackey_glass(10, **kw)


# ---------------------------------------------------------------- memory capacity


def test_mc_perfect_delay_line():
    res = memory_capacity(delay_line_runner, 10, 1000, RandomSource(1))
    assert res.capacities[0] >= 0.99
    assert np.all(res.capacities[1:] <= 0.05)


@pytest.mark.parametrize("seed", range(10))
def test_mc_noise_null_model(seed):
    assert memory_capacity(noise_runner(seed), 40, 1000, RandomSource(seed)).total <= 0.1 * 40


@pytest.mark.parametrize("seed", range(5))
def test_mc_linear_esn_bounded_by_size(seed):
    r = build_esn(EsnParams(n_nodes=20, activation="identity"), RandomSource(seed))
    res = memory_capacity(esn_runner(r), 40, 2000, RandomSource(seed).child("mc"))
    assert 5.0 <= res.total <= 20.5


def test_mc_tapped_delay_line_remembers_its_taps():
    res = memory_capacity(tapped_delay_runner(5), 10, 1500, RandomSource(2))
    assert np.all(res.capacities[:4] > 0.99)
    assert np.all(res.capacities[5:] < 0.05)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lags=st.integers(1, 29))
def test_mc_capacities_in_unit_interval_and_monotone_total(seed, lags):
    r = build_esn(EsnParams(n_nodes=15, spectral_radius_target=0.8), RandomSource(seed))
    run = esn_runner(r)
    small = memory_capacity(run, lags, 600, RandomSource(seed))
    big = memory_capacity(run, lags + 1, 600, RandomSource(seed))
    assert np.all((big.capacities >= 0) & (big.capacities <= 1))
    assert big.total >= small.total


def test_mc_zero_states_rejected():
    with pytest.raises(ConditioningError):
        memory_capacity(lambda ts: StateMatrix(np.zeros((ts.length, 3))), 5, 500, RandomSource(1))


def test_mc_lag_beyond_washout_rejected():
    with pytest.raises(ParameterError):
        memory_capacity(delay_line_runner, 101, 1000, RandomSource(1))


# ---------------------------------------------------------------- TaskSpec / evaluate


def test_split_is_chronological_counts():
    assert TaskSpec().split(2000) == (1400, 600)


@pytest.mark.parametrize(
    "kw",
    [
        {"train_fraction": 0.0},
        {"train_fraction": 0.8, "test_fraction": 0.3},
        {"length": 200},
        {"length": 210, "test_fraction": 0.05},
        {"kind": "xor"},
    ],
)
def test_task_spec_errors(kw):
    with pytest.raises(ParameterError):
        TaskSpec(**kw)


def esn_cell(seed):
    return esn_runner(build_esn(EsnParams(n_nodes=30), RandomSource(seed).child("reservoir")))


def test_evaluate_deterministic_record():
    task = TaskSpec(length=600, washout=100)
    a = evaluate(task, esn_cell(4), RidgeConfig(1e-6), RandomSource(4).child("task"), {"kind": "esn"})
    b = evaluate(task, esn_cell(4), RidgeConfig(1e-6), RandomSource(4).child("task"), {"kind": "esn"})
    assert a.keys() == b.keys()
    assert all(a[k] == b[k] or (math.isnan(a[k]) and math.isnan(b[k])) for k in a)
    assert a["kind"] == "esn" and a["ridge_lambda"] == 1e-6
    assert 0 < a["train_nmse"] < 1 and 0 < a["test_nmse"] < 1.5
    assert math.isnan(a["mc_total"])


def test_evaluate_narma_uses_test_block_after_train():
    # a runner that leaks the target makes train NMSE zero only if rows line up
    task = TaskSpec(length=400, washout=50)
    rng = RandomSource(1).child("task")
    _, y = task_data(task, rng)
    leak = lambda ts: StateMatrix(y.values)  # noqa: E731
    rec = evaluate(task, leak, RidgeConfig(0.0), rng)
    assert rec["train_nmse"] < 1e-20 and rec["test_nmse"] < 1e-20


def test_evaluate_memory_capacity_record():
    task = TaskSpec(kind="memory_capacity", length=800, washout=100, max_lag=10)
    rec = evaluate(task, tapped_delay_runner(5), RidgeConfig(1e-8), RandomSource(2))
    # taps hold u(k)..u(k-4): lags 1..4 are recalled, lag 0 does not count
    assert rec["mc_total"] == pytest.approx(4.0, abs=0.1)
    assert math.isnan(rec["test_nmse"])


def test_evaluate_mackey_glass_one_step():
    task = TaskSpec(kind="mackey_glass", length=800, washout=100)
    rec = evaluate(task, esn_cell(1), RidgeConfig(1e-8), RandomSource(1))
    assert rec["test_nmse"] < 0.01
