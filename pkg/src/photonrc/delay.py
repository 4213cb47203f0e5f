"""Delay-based reservoir: one nonlinear node with delayed feedback, time
multiplexed into ``N`` virtual nodes.

Time layout. Input sample ``s(k)`` (0-based ``k``) is held for one period
``T = N * theta`` and multiplied by the mask, so slot ``i`` (0-based) of input
``k`` covers ``[k T + i theta, k T + (i + 1) theta)`` and carries the drive
``J = gamma * m_i * s(k)``. Virtual node ``i`` of input ``k`` is read at the
*end* of its slot, ``t = k T + (i + 1) theta``.

Node model. The continuous node is a first-order low-pass with an Ikeda-type
``sin^2`` feedback:

    eps * dx/dt = -x(t) + beta * sin^2(x(t - tau) + J(t) + phi0)

with ``tau = T + d * theta``. When ``eps << theta`` every slot settles and the
sampled states obey the map

    x[g] = beta * sin^2(x[g - N - d] + J[g] + phi0)

over the flat slot index ``g = k N + i``. ``d = 0`` couples each node to
itself one period back; ``d >= 1`` couples node ``i`` to node ``i - d``,
wrapping into the period before for the first ``d`` nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .core import (
    DivergenceError,
    ParameterError,
    RandomSource,
    ShapeError,
    StabilityError,
    StateMatrix,
    TimeSeries,
)

DEFAULT_OVERSAMPLE = 20
_INT_TOL = 1e-9


def _as_int_ratio(num: float, den: float, what: str) -> int:
    r = num / den
    n = round(r)
    if n < 1 or abs(r - n) > _INT_TOL * max(1.0, abs(r)):
        raise ParameterError(f"{what} must be a positive integer, got {r}")
    return int(n)


@dataclass(frozen=True)
class Mask:
    amplitudes: np.ndarray
    node_separation: float

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=float).reshape(-1)
        if a.size < 1:
            raise ParameterError("mask needs at least one amplitude")
        if not np.all(np.isfinite(a)):
            raise ParameterError("mask amplitudes must be finite")
        if not (np.isfinite(self.node_separation) and self.node_separation > 0):
            raise ParameterError(f"node_separation must be > 0, got {self.node_separation}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "node_separation", float(self.node_separation))

    @property
    def n(self) -> int:
        return self.amplitudes.size

    @property
    def period(self) -> float:
        return self.n * self.node_separation


def make_mask(n: int, kind: str, rng: RandomSource, node_separation: float) -> Mask:
    """Random step mask: ``binary`` draws +-1 with equal odds, ``uniform``
    draws from [-1, 1]."""
    if n < 1:
        raise ParameterError(f"mask needs n >= 1, got {n}")
    if not node_separation > 0:
        raise ParameterError(f"node_separation must be > 0, got {node_separation}")
    if kind == "binary":
        amps = 2.0 * rng.integers(0, 2, n) - 1.0
    elif kind == "uniform":
        amps = rng.uniform(-1.0, 1.0, n)
    else:
        raise ParameterError(f"unknown mask kind {kind!r}; use 'binary' or 'uniform'")
    return Mask(amps, node_separation)


@dataclass(frozen=True)
class DelayParams:
    """Constants of the delayed-feedback node.

    ``delay_time`` defaults to ``T + d * theta``; if given it must agree.
    ``response_time`` defaults to ``theta / 5`` (transient regime).
    ``phase_offset`` defaults to ``pi/4 - beta/2``: with no drive the fixed
    point is then ``x* = beta/2`` and the sin^2 argument ``x* + phi0`` sits
    at its steepest point ``pi/4``.
    """

    n_virtual: int = 400
    node_separation: float = 0.02
    response_time: float | None = None
    feedback_gain: float = 0.9
    input_gain: float = 0.5
    phase_offset: float | None = None
    desync_shift: int = 1
    delay_time: float | None = None

    def __post_init__(self):
        if int(self.n_virtual) != self.n_virtual or self.n_virtual < 1:
            raise ParameterError(f"n_virtual must be a positive integer, got {self.n_virtual}")
        if int(self.desync_shift) != self.desync_shift or self.desync_shift < 0:
            raise ParameterError(f"desync_shift must be an integer >= 0, got {self.desync_shift}")
        if not (np.isfinite(self.node_separation) and self.node_separation > 0):
            raise ParameterError(f"node_separation must be > 0, got {self.node_separation}")
        eps = self.node_separation / 5 if self.response_time is None else self.response_time
        if not (np.isfinite(eps) and eps > 0):
            raise ParameterError(f"response_time must be > 0, got {eps}")
        tau = (self.n_virtual + self.desync_shift) * self.node_separation
        if self.delay_time is not None and not math.isclose(self.delay_time, tau, rel_tol=1e-9):
            raise ParameterError(
                f"delay_time {self.delay_time} inconsistent with T + d*theta = {tau}"
            )
        if self.phase_offset is None:
            object.__setattr__(self, "phase_offset", math.pi / 4 - self.feedback_gain / 2)
        for name in ("feedback_gain", "input_gain", "phase_offset"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        object.__setattr__(self, "phase_offset", float(self.phase_offset))
        object.__setattr__(self, "n_virtual", int(self.n_virtual))
        object.__setattr__(self, "desync_shift", int(self.desync_shift))
        object.__setattr__(self, "response_time", float(eps))
        object.__setattr__(self, "delay_time", float(tau))

    @property
    def period(self) -> float:
        return self.n_virtual * self.node_separation


def multiplex(inputs: TimeSeries, mask: Mask, gain: float, oversample: int = DEFAULT_OVERSAMPLE) -> TimeSeries:
    """Hold each input sample for one period and imprint the mask.

    Returns the drive ``gain * m(t) * s~(t)`` sampled ``oversample`` times per
    slot (``dt = theta / oversample``). Use ``oversample=1`` for the map.
    """
    if inputs.width != 1:
        raise ShapeError(f"delay reservoir takes scalar input, got width {inputs.width}")
    if int(oversample) != oversample or oversample < 1:
        raise ParameterError(f"oversample must be a positive integer, got {oversample}")
    slots = gain * (inputs.values[:, 0:1] * mask.amplitudes[None, :]).reshape(-1)
    return TimeSeries(np.repeat(slots, int(oversample)), mask.node_separation / oversample)


DelayedNonlinearity = Callable[[np.ndarray, np.ndarray], np.ndarray]


def ikeda(beta: float, phi0: float) -> DelayedNonlinearity:
    def g(x_delayed, drive):
        return beta * np.sin(x_delayed + drive + phi0) ** 2

    return g


def integrate_delayed(
    g: DelayedNonlinearity,
    drive: TimeSeries,
    delay_time: float,
    response_time: float,
    history: float = 0.0,
) -> TimeSeries:
    """Fixed-step Heun integration of ``eps x' = -x + g(x(t - tau), J(t))``.

    ``J`` is taken piecewise constant on each step (sample ``n`` of ``drive``
    holds over ``[t_n, t_n+1)``) and the same value is used in both Heun
    stages. The delayed argument is linearly interpolated on the grid; for
    ``t <= 0`` it equals the constant ``history``. The step is ``drive.dt``.

    Because ``g`` only sees values at least ``tau`` old, the right-hand side
    is a known forcing over any window shorter than ``tau``. Inside such a
    window Heun reduces to the linear recurrence ``x[n+1] = a x[n] + c[n]``,
    which is evaluated per window with :func:`scipy.signal.lfilter`.

    Returns ``len(drive) + 1`` samples starting at ``t = 0`` (the history
    value) on the drive grid.
    """
    h = drive.dt
    eps = float(response_time)
    if not eps > 0 or not delay_time > 0:
        raise ParameterError("response_time and delay_time must be > 0")
    if h > eps / 2:
        raise StabilityError(f"step {h:g} exceeds response_time/2 = {eps / 2:g}; refine the grid")
    lag = delay_time / h
    if lag < 1:
        raise ParameterError(f"delay {delay_time} shorter than one step {h}")
    lag_int = round(lag)
    if abs(lag - lag_int) <= _INT_TOL * lag:
        lag, frac = lag_int, 0.0
    else:
        frac = lag - math.floor(lag)
    width = int(math.floor(lag))

    j = drive.values[:, 0]
    m = j.size
    x = np.empty(m + 1)
    x[0] = history
    r = h / eps
    a = 1.0 - r + 0.5 * r * r
    lead = 0.5 * r * (1.0 - r)
    trail = 0.5 * r

    def delayed(n: np.ndarray) -> np.ndarray:
        if frac == 0.0:
            i = n - lag
            return np.where(i < 0, history, x[np.maximum(i, 0)])
        p = n - lag
        i0 = np.floor(p).astype(np.int64)
        w = p - i0
        lo = np.where(i0 < 0, history, x[np.maximum(i0, 0)])
        hi = np.where(i0 + 1 < 0, history, x[np.maximum(i0 + 1, 0)])
        return (1.0 - w) * lo + w * hi

    s = 0
    while s < m:
        e = min(s + width, m)
        n = np.arange(s, e + 1)
        xd = delayed(n)
        js = j[s:e]
        f_now = g(xd[:-1], js)
        f_next = g(xd[1:], js)
        c = lead * f_now + trail * f_next
        y, _ = lfilter([1.0], [1.0, -a], c, zi=[a * x[s]])
        if not np.all(np.isfinite(y)):
            bad = s + 1 + int(np.argmax(~np.isfinite(y)))
            raise DivergenceError(f"non-finite state at t = {bad * h:g}", time=bad * h)
        x[s + 1 : e + 1] = y
        s = e
    return TimeSeries(x, h, 0.0)


def integrate_dde(p: DelayParams, drive: TimeSeries, history: float = 0.0) -> TimeSeries:
    """Integrate the Ikeda-type node driven by a multiplexed signal."""
    if drive.width != 1:
        raise ShapeError("drive must be a scalar series")
    if drive.dt > p.node_separation / 10 * (1 + _INT_TOL):
        raise ParameterError(
            f"drive step {drive.dt:g} coarser than theta/10 = {p.node_separation / 10:g}"
        )
    return integrate_delayed(
        ikeda(p.feedback_gain, p.phase_offset), drive, p.delay_time, p.response_time, history
    )


def sample_nodes(trajectory: TimeSeries, period: float, node_separation: float, n_inputs: int) -> StateMatrix:
    """Read virtual node ``i`` of input ``k`` at ``t = k T + (i + 1) theta``.

    Row ``k`` holds the ``N = T / theta`` node states of input ``k``.
    """
    n_nodes = _as_int_ratio(period, node_separation, "T/theta")
    per_slot = _as_int_ratio(node_separation, trajectory.dt, "theta/dt")
    if n_inputs < 1:
        raise ParameterError(f"n_inputs must be >= 1, got {n_inputs}")
    start = trajectory.t0 / trajectory.dt
    if abs(start - round(start)) > _INT_TOL * max(1.0, abs(start)):
        raise ParameterError("trajectory start is not on the sampling grid")
    start = round(start)
    k = np.arange(n_inputs)[:, None]
    i = np.arange(1, n_nodes + 1)[None, :]
    idx = (k * n_nodes + i) * per_slot - start
    if idx.min() < 0 or idx.max() >= trajectory.length:
        raise ParameterError(
            f"trajectory covers samples [0, {trajectory.length}) but nodes need up to {idx.max()}"
        )
    return StateMatrix(trajectory.values[idx, 0], np.arange(n_inputs))


def run_discrete_map(p: DelayParams, inputs: TimeSeries, mask: Mask, history: float = 0.0) -> StateMatrix:
    """Settled-regime limit of the delay node, one row per input sample."""
    if mask.n != p.n_virtual:
        raise ShapeError(f"mask has {mask.n} steps but params have n_virtual={p.n_virtual}")
    if inputs.width != 1:
        raise ShapeError(f"delay reservoir takes scalar input, got width {inputs.width}")
    n = p.n_virtual
    j = p.input_gain * (inputs.values[:, 0:1] * mask.amplitudes[None, :]).reshape(-1)
    lag = n + p.desync_shift
    x = np.empty_like(j)
    beta, phi0 = p.feedback_gain, p.phase_offset
    for s in range(0, j.size, lag):
        e = min(s + lag, j.size)
        prev = history if s == 0 else x[s - lag : e - lag]
        x[s:e] = beta * np.sin(prev + j[s:e] + phi0) ** 2
    return StateMatrix(x.reshape(inputs.length, n), np.arange(inputs.length))


def run_delay_reservoir(
    p: DelayParams,
    inputs: TimeSeries,
    mask: Mask,
    regime: str = "dde",
    oversample: int | None = None,
    history: float = 0.0,
) -> StateMatrix:
    """Virtual-node states for every input sample, via the DDE or the map.

    ``oversample=None`` picks the default (20) or whatever finer grid the
    response time needs.
    """
    if regime == "map":
        return run_discrete_map(p, inputs, mask, history)
    if regime != "dde":
        raise ParameterError(f"unknown regime {regime!r}; use 'dde' or 'map'")
    if mask.n != p.n_virtual or not math.isclose(mask.node_separation, p.node_separation):
        raise ShapeError("mask does not match the delay parameters")
    if oversample is None:
        oversample = max(DEFAULT_OVERSAMPLE, settled_oversample(p))
    drive = multiplex(inputs, mask, p.input_gain, oversample)
    traj = integrate_dde(p, drive, history)
    return sample_nodes(traj, p.period, p.node_separation, inputs.length)


def settled_oversample(p: DelayParams) -> int:
    """Smallest oversampling that keeps the Heun step within ``eps / 2``."""
    return max(10, math.ceil(2 * p.node_separation / p.response_time - 1e-9))


def delay_runner(p: DelayParams, mask: Mask, regime: str = "dde", oversample: int | None = None, history: float = 0.0):
    """Callable mapping a scalar input series to virtual-node states."""

    def run(inputs: TimeSeries) -> StateMatrix:
        return run_delay_reservoir(p, inputs, mask, regime, oversample, history)

    return run
