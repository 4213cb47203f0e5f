"""Benchmark tasks and the shared evaluation protocol.

NARMA10 (fixed definition used throughout)::

    y(k+1) = 0.3 y(k) + 0.05 y(k) sum_{i=0..9} y(k-i) + 1.5 u(k-9) u(k) + 0.1

with ``u(k) ~ U[0, 0.5]`` and zero history (``y(k) = u(k) = 0`` for
``k < 0``, ``y(0) = 0``). Sample ``k`` of the returned pair is input ``u(k)``
with target ``y(k+1)``.

Mackey-Glass::

    x'(t) = 0.2 x(t-17) / (1 + x(t-17)^10) - 0.1 x(t),   x(t <= 0) = 1.2

integrated with the delay module's Heun integrator written as
``10 x' = -x + 2 x_tau / (1 + x_tau^10)``.

All splits are chronological: ``washout`` rows are dropped, then the next
``train_fraction`` of the remainder trains and the following
``test_fraction`` tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    ConditioningError,
    DivergenceError,
    ParameterError,
    RandomSource,
    StateMatrix,
    TimeSeries,
)
from .delay import integrate_delayed
from .readout import RidgeConfig, nmse, predict, train_ridge

Runner = Callable[[TimeSeries], StateMatrix]

TASK_KINDS = ("memory_capacity", "narma10", "mackey_glass")


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "narma10"
    length: int = 2200
    washout: int = 200
    train_fraction: float = 0.7
    test_fraction: float = 0.3
    max_lag: int = 40
    horizon: int = 1
    mg_dt: float = 0.1
    mg_subsample: int = 10

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ParameterError(f"unknown task {self.kind!r}; choose from {TASK_KINDS}")
        for name in ("train_fraction", "test_fraction"):
            f = getattr(self, name)
            if not 0 < f <= 1:
                raise ParameterError(f"{name} must be in (0, 1], got {f}")
        if self.train_fraction + self.test_fraction > 1 + 1e-12:
            raise ParameterError("train_fraction + test_fraction must not exceed 1")
        if self.washout < 0 or self.length <= self.washout:
            raise ParameterError(f"length {self.length} must exceed washout {self.washout}")
        if self.max_lag < 1 or self.horizon < 1:
            raise ParameterError("max_lag and horizon must be >= 1")
        self.split(self.length - self.washout)

    def split(self, n: int) -> tuple[int, int]:
        """Chronological (train, test) row counts out of ``n`` usable rows."""
        n_train = int(np.floor(self.train_fraction * n + 1e-9))
        n_test = min(int(np.floor(self.test_fraction * n + 1e-9)), n - n_train)
        if n_train < 1 or n_test < 1:
            raise ParameterError(f"split of {n} rows leaves train={n_train}, test={n_test}; need >= 1 each")
        return n_train, n_test


def narma10_target(u: np.ndarray) -> np.ndarray:
    """Targets ``y(1..L)`` for inputs ``u(0..L-1)``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.zeros(u.size + 1)
    for k in range(u.size):
        window = y[max(0, k - 9) : k + 1].sum()
        u_old = u[k - 9] if k >= 9 else 0.0
        y[k + 1] = 0.3 * y[k] + 0.05 * y[k] * window + 1.5 * u_old * u[k] + 0.1
        if abs(y[k + 1]) > 10 or not np.isfinite(y[k + 1]):
            raise DivergenceError(f"NARMA10 recurrence diverged at k = {k + 1}", iterations=k + 1)
    return y[1:]


def gen_narma10(length: int, rng: RandomSource, attempts: int = 10) -> tuple[TimeSeries, TimeSeries]:
    """Input/target pair. A diverging draw is replaced by the next sub-stream
    (``narma0``, ``narma1``, ...); after ``attempts`` failures the error propagates."""
    if length < 20:
        raise ParameterError(f"NARMA10 needs length >= 20, got {length}")
    for a in range(attempts):
        u = rng.child(f"narma{a}").uniform(0.0, 0.5, length)
        try:
            y = narma10_target(u)
        except DivergenceError:
            if a == attempts - 1:
                raise
            continue
        return TimeSeries(u), TimeSeries(y)
    raise AssertionError("unreachable")


def _mg_feedback(x_delayed, _drive):
    return 2.0 * x_delayed / (1.0 + x_delayed**10)


def mackey_glass_trajectory(duration: float, dt: float = 0.1, history: float = 1.2, tau: float = 17.0) -> TimeSeries:
    """Raw Mackey-Glass integration on ``[0, duration]``, first sample at ``t = 0``."""
    steps = int(round(duration / dt))
    if steps < 1:
        raise ParameterError("duration shorter than one step")
    return integrate_delayed(_mg_feedback, TimeSeries(np.zeros(steps), dt), tau, 10.0, history)


def gen_mackey_glass(
    length: int,
    dt: float = 0.1,
    subsample: int = 10,
    transient: float = 1000.0,
    history: float = 1.2,
) -> TimeSeries:
    """``length`` samples spaced ``dt * subsample`` apart, after ``transient`` time units."""
    if not 0 < dt <= 0.1:
        raise ParameterError(f"dt must be in (0, 0.1], got {dt}")
    if subsample < 1 or length < 1:
        raise ParameterError("subsample and length must be >= 1")
    skip = int(round(transient / dt))
    steps = skip + (length - 1) * subsample
    traj = mackey_glass_trajectory(max(steps, 1) * dt, dt, history)
    vals = traj.values[skip : steps + 1 : subsample, 0]
    return TimeSeries(vals, dt * subsample, skip * dt)


@dataclass(frozen=True)
class MemoryCapacityResult:
    capacities: np.ndarray
    total: float


def _squared_corr(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den == 0:
        return 0.0
    return float(min(1.0, (np.dot(a, b) / den) ** 2))


def memory_capacity(
    runner: Runner,
    max_lag: int,
    length: int,
    rng: RandomSource,
    washout: int = 100,
    lam: float = 1e-8,
    train_fraction: float = 0.7,
) -> MemoryCapacityResult:
    """Linear memory capacity.

    Drives ``runner`` with i.i.d. ``U[-1, 1]`` input and, for each lag
    ``d = 1..max_lag``, trains a ridge readout to recall ``u(k - d)``. The
    capacity at lag ``d`` is the squared correlation between recall and
    truth on the held-out tail. The input stream and the usable rows do not
    depend on ``max_lag``, so per-lag values are comparable across calls.
    """
    if max_lag < 1:
        raise ParameterError(f"max_lag must be >= 1, got {max_lag}")
    if max_lag > washout:
        raise ParameterError(f"max_lag {max_lag} exceeds washout {washout}; lagged targets would be undefined")
    if length <= washout + 2:
        raise ParameterError("length too short for the washout")
    u = rng.child("mc-input").uniform(-1.0, 1.0, length)
    states = runner(TimeSeries(u))
    if states.n_rows != length:
        raise ParameterError(f"runner returned {states.n_rows} rows for {length} inputs")
    s = states.values[washout:]
    if not np.any(s):
        raise ConditioningError("state matrix is identically zero (rank 0)")
    n = s.shape[0]
    n_train = int(np.floor(train_fraction * n + 1e-9))
    if not 1 <= n_train < n:
        raise ParameterError("train_fraction leaves no test rows")
    caps = np.empty(max_lag)
    cfg = RidgeConfig(lam)
    for d in range(1, max_lag + 1):
        target = u[washout - d : length - d]
        w = train_ridge(StateMatrix(s[:n_train]), TimeSeries(target[:n_train]), cfg)
        pred = predict(w, StateMatrix(s[n_train:])).values[:, 0]
        caps[d - 1] = _squared_corr(pred, target[n_train:])
    return MemoryCapacityResult(caps, float(caps.sum()))


def tapped_delay_runner(taps: int = 20) -> Runner:
    """Linear baseline: the state at step ``k`` is ``(u(k), ..., u(k - taps + 1))``."""

    def run(inputs: TimeSeries) -> StateMatrix:
        u = inputs.values[:, 0]
        out = np.zeros((u.size, taps))
        for i in range(taps):
            out[i:, i] = u[: u.size - i]
        return StateMatrix(out)

    return run


def task_data(task: TaskSpec, rng: RandomSource) -> tuple[TimeSeries, TimeSeries]:
    """Input/target pair for prediction tasks."""
    if task.kind == "narma10":
        return gen_narma10(task.length, rng.child("narma10"))
    if task.kind == "mackey_glass":
        x = gen_mackey_glass(task.length + task.horizon, task.mg_dt, task.mg_subsample).values[:, 0]
        return TimeSeries(x[: task.length]), TimeSeries(x[task.horizon :])
    raise ParameterError(f"task {task.kind!r} has no input/target pair")


def evaluate(
    task: TaskSpec,
    runner: Runner,
    readout: RidgeConfig,
    rng: RandomSource,
    meta: dict | None = None,
) -> dict:
    """Run one (task, reservoir, readout, seed) cell and return a flat record."""
    record = {"task": task.kind, "seed": rng.seed}
    record.update(meta or {})
    record["ridge_lambda"] = readout.lam
    if task.kind == "memory_capacity":
        mc = memory_capacity(runner, task.max_lag, task.length, rng, task.washout, readout.lam, task.train_fraction)
        record.update(train_nmse=float("nan"), test_nmse=float("nan"), mc_total=mc.total)
        return record

    inputs, targets = task_data(task, rng)
    states = runner(inputs)
    if states.n_rows != inputs.length:
        raise ParameterError(f"runner returned {states.n_rows} rows for {inputs.length} inputs")
    n_train, n_test = task.split(task.length - task.washout)
    a, b, c = task.washout, task.washout + n_train, task.washout + n_train + n_test
    w = train_ridge(states.rows(a, b), targets.slice(a, b), readout)
    train_err = nmse(predict(w, states.rows(a, b)), targets.slice(a, b))
    test_err = nmse(predict(w, states.rows(b, c)), targets.slice(b, c))
    record.update(train_nmse=train_err, test_nmse=test_err, mc_total=float("nan"))
    return record
