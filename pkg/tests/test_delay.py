import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from photonrc.core import DivergenceError, ParameterError, RandomSource, ShapeError, StabilityError, TimeSeries
from photonrc.delay import (
    DelayParams,
    Mask,
    integrate_delayed,
    integrate_dde,
    make_mask,
    multiplex,
    run_delay_reservoir,
    run_discrete_map,
    sample_nodes,
)


def heun_reference(g, drive, tau, eps, history):
    """Textbook Heun, one step at a time, delayed term by np.interp on the grid so far."""
    h = drive.dt
    j = drive.values[:, 0]
    x = [history]
    for n in range(j.size):
        grid = h * np.arange(len(x))

        def past(t):
            if t <= 0:
                return history
            return float(np.interp(t, grid, x))

        t = n * h
        k1 = (-x[n] + g(past(t - tau), j[n])) / eps
        pred = x[n] + h * k1
        # x(t_{n+1} - tau) is already on the grid because tau >= h
        k2 = (-pred + g(past(t + h - tau), j[n])) / eps
        x.append(x[n] + 0.5 * h * (k1 + k2))
    return np.array(x)


# ---------------------------------------------------------------- masks


def test_make_mask_binary_codomain():
    m = make_mask(4, "binary", RandomSource(3), 0.1)
    assert m.n == 4
    assert set(m.amplitudes.tolist()) <= {-1.0, 1.0}


def test_make_mask_binary_equiprobable():
    m = make_mask(4000, "binary", RandomSource(3), 0.1)
    assert abs(np.mean(m.amplitudes == 1.0) - 0.5) < 0.03


def test_make_mask_uniform_range():
    m = make_mask(1000, "uniform", RandomSource(3), 0.1)
    assert np.all(np.abs(m.amplitudes) <= 1.0)
    assert m.amplitudes.min() < -0.9 and m.amplitudes.max() > 0.9


def test_mask_period():
    m = make_mask(400, "uniform", RandomSource(1), 0.02)
    assert m.period == pytest.approx(8.0)


def test_make_mask_deterministic():
    a = make_mask(50, "binary", RandomSource(6), 0.1)
    b = make_mask(50, "binary", RandomSource(6), 0.1)
    assert np.array_equal(a.amplitudes, b.amplitudes)


@pytest.mark.parametrize("n,theta,kind", [(0, 0.1, "binary"), (3, 0.0, "binary"), (3, 0.1, "gauss")])
def test_make_mask_errors(n, theta, kind):
    with pytest.raises(ParameterError):
        make_mask(n, kind, RandomSource(1), theta)


# ---------------------------------------------------------------- params


def test_delay_params_tau_relation():
    p = DelayParams(n_virtual=50, node_separation=0.1, desync_shift=3)
    assert p.period == pytest.approx(5.0)
    assert p.delay_time == pytest.approx(5.3)
    assert DelayParams(n_virtual=50, node_separation=0.1, desync_shift=0).delay_time == pytest.approx(p.period)
    with pytest.raises(ParameterError):
        DelayParams(n_virtual=50, node_separation=0.1, desync_shift=1, delay_time=5.0)


def test_delay_params_default_phase_puts_fixed_point_at_steepest_slope():
    p = DelayParams(feedback_gain=0.9)
    x_star = p.feedback_gain / 2
    assert p.feedback_gain * math.sin(x_star + p.phase_offset) ** 2 == pytest.approx(x_star)
    assert x_star + p.phase_offset == pytest.approx(math.pi / 4)


# ---------------------------------------------------------------- multiplex


def slot_oracle(s, m, gamma):
    out = []
    for sk in s:
        for mi in m:
            out.append(gamma * mi * sk)
    return out


def test_multiplex_hand_example():
    drive = multiplex(TimeSeries([1.0, -2.0]), Mask([0.5, -1.0], 1.0), 2.0, oversample=1)
    assert drive.values[:, 0].tolist() == [1.0, -2.0, -2.0, 4.0]
    assert drive.values[:, 0].tolist() == slot_oracle([1.0, -2.0], [0.5, -1.0], 2.0)


def test_multiplex_constant_input_repeats_mask():
    m = make_mask(5, "uniform", RandomSource(2), 0.1)
    drive = multiplex(TimeSeries(np.ones(3)), m, 1.0, oversample=10)
    assert drive.dt == pytest.approx(0.01)
    per = drive.values[:, 0].reshape(3, 5, 10)
    for k in range(3):
        for i in range(5):
            assert np.all(per[k, i] == m.amplitudes[i])


def test_multiplex_zero_input():
    m = make_mask(5, "uniform", RandomSource(2), 0.1)
    assert not np.any(multiplex(TimeSeries(np.zeros(4)), m, 3.0).values)


# ---------------------------------------------------------------- integrator


def test_linear_relaxation():
    eps, x0 = 0.05, 0.7
    p = DelayParams(n_virtual=10, node_separation=0.05, response_time=eps, feedback_gain=0.0, desync_shift=0)
    drive = TimeSeries(np.zeros(500), eps / 100)
    x = integrate_dde(p, drive, history=x0)
    t = x.times
    exact = x0 * np.exp(-t / eps)
    assert np.max(np.abs(x.values[:, 0] - exact) / exact) < 1e-4


def test_fixed_point_against_scalar_solve():
    beta, phi0 = 0.9, math.pi / 4
    x_star = brentq(lambda x: x - beta * math.sin(x + phi0) ** 2, 0.0, 1.0)
    p = DelayParams(n_virtual=10, node_separation=0.02, feedback_gain=beta, phase_offset=phi0, desync_shift=0)
    drive = TimeSeries(np.zeros(40 * 10 * 20), 0.001)
    x = integrate_dde(p, drive, history=0.0)
    assert x.values[-1, 0] == pytest.approx(x_star, abs=1e-6)


@pytest.mark.parametrize("frac_delay", [False, True])
def test_vectorised_heun_matches_plain_loop(frac_delay):
    rng = RandomSource(4)
    eps, h = 0.03, 0.005
    tau = 0.2137 if frac_delay else 0.2
    beta, phi0 = 1.1, 0.3
    drive = TimeSeries(np.repeat(rng.uniform(-1, 1, 60), 5), h)

    def g(xd, j):
        return beta * np.sin(xd + j + phi0) ** 2

    fast = integrate_delayed(g, drive, tau, eps, history=0.1).values[:, 0]
    slow = heun_reference(lambda xd, j: beta * math.sin(xd + j + phi0) ** 2, drive, tau, eps, 0.1)
    assert np.max(np.abs(fast - slow)) < 1e-12


def test_self_convergence_standard_run():
    """Standard run: N=20, theta=0.02, eps=theta/5, d=1, 20 random inputs."""
    p = DelayParams(n_virtual=20, node_separation=0.02)
    m = make_mask(20, "uniform", RandomSource(1), 0.02)
    s = TimeSeries(RandomSource(2).uniform(0, 0.5, 20))
    coarse = integrate_dde(p, multiplex(s, m, p.input_gain, 100))
    fine = integrate_dde(p, multiplex(s, m, p.input_gain, 200))
    diff = coarse.values[:, 0] - fine.values[::2, 0]
    assert np.sqrt(np.mean(diff**2)) < 1e-5


def test_stability_error():
    p = DelayParams(n_virtual=10, node_separation=0.02, response_time=0.001)
    with pytest.raises(StabilityError):
        integrate_dde(p, TimeSeries(np.zeros(100), 0.001))


def test_divergence_error_reports_time():
    drive = TimeSeries(np.zeros(400), 0.01)
    with pytest.raises(DivergenceError) as info, np.errstate(over="ignore"):
        integrate_delayed(lambda xd, j: 1e300 * (1 + xd * xd), drive, 0.5, 1.0, history=1.0)
    assert info.value.time is not None and info.value.time > 0


def test_coarse_drive_rejected():
    p = DelayParams(n_virtual=10, node_separation=0.02)
    with pytest.raises(ParameterError):
        integrate_dde(p, TimeSeries(np.zeros(100), 0.005))


@settings(max_examples=15, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    beta=st.floats(0.1, 2.0),
    x0=st.floats(-1.0, 2.0),
    d=st.integers(0, 3),
)
def test_dde_states_bounded(seed, beta, x0, d):
    p = DelayParams(n_virtual=8, node_separation=0.02, feedback_gain=beta, desync_shift=d)
    m = make_mask(8, "uniform", RandomSource(seed), 0.02)
    s = TimeSeries(RandomSource(seed).child("s").uniform(-1, 1, 10))
    x = integrate_dde(p, multiplex(s, m, 1.0, 10), history=x0).values[:, 0]
    lo, hi = min(0.0, x0), max(abs(beta), abs(x0))
    assert np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)


# ---------------------------------------------------------------- sampling


def test_sample_nodes_count_from_period():
    traj = TimeSeries(np.zeros(2 * 400 * 10 + 1), 0.002)
    assert sample_nodes(traj, 8.0, 0.02, 2).n_nodes == 400


def test_sample_nodes_constant():
    traj = TimeSeries(np.full(3 * 5 * 4 + 1, 0.37), 0.25)
    s = sample_nodes(traj, 5.0, 1.0, 3)
    assert np.all(s.values == 0.37)


def test_sample_nodes_ramp():
    dt, theta, n, k = 0.01, 0.05, 6, 4
    T = n * theta
    steps = k * n * 5 + 1
    traj = TimeSeries(dt * np.arange(steps), dt)
    s = sample_nodes(traj, T, theta, k)
    for row in range(k):
        for i in range(1, n + 1):
            assert s.values[row, i - 1] == pytest.approx(row * T + i * theta, abs=1e-12)


def test_sample_nodes_coverage_error():
    traj = TimeSeries(np.zeros(50), 0.01)
    with pytest.raises(ParameterError):
        sample_nodes(traj, 0.2, 0.02, 3)


def test_sample_nodes_requires_integer_ratios():
    traj = TimeSeries(np.zeros(500), 0.01)
    with pytest.raises(ParameterError):
        sample_nodes(traj, 0.25, 0.02, 1)
    with pytest.raises(ParameterError):
        sample_nodes(traj, 0.3, 0.015, 1)


# ---------------------------------------------------------------- map


def test_map_without_feedback_is_memoryless():
    p = DelayParams(n_virtual=3, node_separation=1.0, feedback_gain=0.0, input_gain=0.8, phase_offset=0.2)
    s = TimeSeries([0.5, -1.0])
    x = run_discrete_map(p, s, Mask([1.0, 0.5, -0.3], 1.0), history=0.7)
    assert not np.any(x.values)


def test_map_zero_drive_zero_phase_stays_zero():
    p = DelayParams(n_virtual=4, node_separation=1.0, input_gain=0.0, phase_offset=0.0)
    x = run_discrete_map(p, TimeSeries(np.ones(6)), Mask(np.ones(4), 1.0))
    assert not np.any(x.values)


def test_map_unrolled_ring_shift():
    beta, gamma, phi0 = 0.8, 0.6, 0.25
    m = [0.5, -1.0, 0.25]
    s = [0.4, -0.7]
    p = DelayParams(n_virtual=3, node_separation=1.0, feedback_gain=beta, input_gain=gamma, phase_offset=phi0, desync_shift=1)

    def f(fb, mi, sk):
        return beta * math.sin(fb + gamma * mi * sk + phi0) ** 2

    # with tau = T + theta, every node sees the slot N + 1 = 4 places earlier
    x10 = f(0.0, m[0], s[0])
    x11 = f(0.0, m[1], s[0])
    x12 = f(0.0, m[2], s[0])
    x20 = f(0.0, m[0], s[1])  # slot 3 - 4 < 0: still history
    x21 = f(x10, m[1], s[1])
    x22 = f(x11, m[2], s[1])
    got = run_discrete_map(p, TimeSeries(s), Mask(m, 1.0)).values
    assert np.allclose(got, [[x10, x11, x12], [x20, x21, x22]], atol=1e-12, rtol=0)


def test_map_self_coupling_d0():
    beta, gamma, phi0 = 0.9, 0.5, 0.1
    m = [0.3, -0.6]
    s = [1.0, 0.5, -0.2]
    p = DelayParams(n_virtual=2, node_separation=1.0, feedback_gain=beta, input_gain=gamma, phase_offset=phi0, desync_shift=0)
    x = np.zeros(2)
    rows = []
    for sk in s:
        x = np.array([beta * math.sin(x[i] + gamma * m[i] * sk + phi0) ** 2 for i in range(2)])
        rows.append(x)
    got = run_discrete_map(p, TimeSeries(s), Mask(m, 1.0)).values
    assert np.allclose(got, rows, atol=1e-12, rtol=0)


def test_map_mask_length_mismatch():
    p = DelayParams(n_virtual=3, node_separation=1.0)
    with pytest.raises(ShapeError):
        run_discrete_map(p, TimeSeries([1.0]), Mask([1.0, 2.0], 1.0))


def test_constant_mask_gives_identical_columns():
    p = DelayParams(n_virtual=6, node_separation=0.1, desync_shift=0)
    x = run_discrete_map(p, TimeSeries(RandomSource(1).uniform(0, 1, 30)), Mask(np.full(6, 0.4), 0.1))
    assert np.all(x.values == x.values[:, :1])


def test_settled_dde_matches_map_small():
    p = DelayParams(n_virtual=10, node_separation=0.02, response_time=0.0002, desync_shift=0)
    m = make_mask(10, "binary", RandomSource(5), 0.02)
    s = TimeSeries(RandomSource(6).uniform(-1, 1, 60))
    a = run_delay_reservoir(p, s, m, "dde")
    b = run_delay_reservoir(p, s, m, "map")
    assert np.sqrt(np.mean((a.values - b.values) ** 2)) < 1e-2


def test_column_count_equals_n_virtual():
    for n, theta in [(7, 0.03), (33, 0.01)]:
        p = DelayParams(n_virtual=n, node_separation=theta)
        m = make_mask(n, "uniform", RandomSource(n), theta)
        assert run_delay_reservoir(p, TimeSeries(np.ones(3)), m).n_nodes == n


def test_unknown_regime():
    p = DelayParams(n_virtual=3, node_separation=0.1)
    with pytest.raises(ParameterError):
        run_delay_reservoir(p, TimeSeries([1.0]), Mask([1, 1, 1], 0.1), regime="laser")
