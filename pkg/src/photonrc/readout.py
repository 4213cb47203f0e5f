"""Linear readout training and error metrics.

States are augmented with a constant-1 column so every output gets its own
bias term (the last column of ``w_out``). The bias is never penalised by the
ridge term. Pass ``bias=False`` to train a pure ``W_out x`` map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    ConditioningError,
    DivergenceError,
    ParameterError,
    RandomSource,
    ShapeError,
    StateMatrix,
    TimeSeries,
)

# condition number above which an unregularised solve is refused
MAX_CONDITION = 1e12
LMS_WEIGHT_LIMIT = 1e12


class MetricError(ParameterError):
    """Metric undefined for the given data."""


@dataclass(frozen=True)
class ReadoutWeights:
    """``w_out`` has shape ``(M, N + 1)`` with a bias column, else ``(M, N)``."""

    w_out: np.ndarray
    kind: str = "real"
    bias: bool = True
    alphabet: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        w = np.array(self.w_out, dtype=float)
        if w.ndim == 1:
            w = w[None, :]
        if w.ndim != 2:
            raise ShapeError(f"w_out must be 2-D, got shape {w.shape}")
        if self.kind not in ("real", "boolean"):
            raise ParameterError(f"kind must be 'real' or 'boolean', got {self.kind!r}")
        if self.kind == "boolean":
            node_part = w[:, :-1] if self.bias else w
            if not np.all(np.isin(node_part, self.alphabet)):
                raise ParameterError(f"boolean weights must lie in {self.alphabet}")
        w.setflags(write=False)
        object.__setattr__(self, "w_out", w)
        object.__setattr__(self, "alphabet", tuple(float(a) for a in self.alphabet))

    @property
    def n_outputs(self) -> int:
        return self.w_out.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.w_out.shape[1] - (1 if self.bias else 0)


@dataclass(frozen=True)
class RidgeConfig:
    lam: float = 1e-6
    bias: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ParameterError(f"ridge lambda must be finite and >= 0, got {self.lam}")


def _design(states: StateMatrix | np.ndarray, bias: bool) -> np.ndarray:
    s = states.values if isinstance(states, StateMatrix) else np.asarray(states, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if bias:
        s = np.hstack([s, np.ones((s.shape[0], 1))])
    return s


def _targets(targets: TimeSeries | np.ndarray) -> np.ndarray:
    y = targets.values if isinstance(targets, TimeSeries) else np.asarray(targets, dtype=float)
    return y[:, None] if y.ndim == 1 else y


def train_ridge(states: StateMatrix, targets: TimeSeries, cfg: RidgeConfig = RidgeConfig()) -> ReadoutWeights:
    """Solve ``(S^T S + lam D) W = S^T Y`` by Cholesky.

    ``D`` is the identity with a zero on the bias entry. With ``lam = 0`` the
    system must be well conditioned (condition number below ``1e12``).
    """
    s = _design(states, cfg.bias)
    y = _targets(targets)
    if s.shape[0] != y.shape[0]:
        raise ShapeError(f"{s.shape[0]} state rows but {y.shape[0]} targets")
    gram = s.T @ s
    penalty = np.full(s.shape[1], cfg.lam)
    if cfg.bias:
        penalty[-1] = 0.0
    gram[np.diag_indices_from(gram)] += penalty
    if cfg.lam == 0:
        cond = np.linalg.cond(gram)
        if not cond < MAX_CONDITION:
            raise ConditioningError(
                f"normal equations are singular or ill-conditioned (cond={cond:.3g}); use lam > 0"
            )
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"normal matrix is not positive definite ({exc}); increase lam") from exc
    w = scipy.linalg.cho_solve(factor, s.T @ y, check_finite=False)
    return ReadoutWeights(w.T, "real", cfg.bias)


def predict(w: ReadoutWeights, states: StateMatrix) -> TimeSeries:
    s = _design(states, w.bias)
    if s.shape[1] != w.w_out.shape[1]:
        raise ShapeError(f"states have {s.shape[1] - w.bias} nodes but weights expect {w.n_nodes}")
    return TimeSeries(s @ w.w_out.T)


def train_online_lms(
    states: StateMatrix,
    targets: TimeSeries,
    rate: float,
    passes: int = 1,
    bias: bool = True,
    w0: np.ndarray | None = None,
) -> ReadoutWeights:
    """Least-mean-squares: ``w <- w + rate * (y - w.x) x`` per sample, in time order."""
    if not rate > 0:
        raise ParameterError(f"rate must be > 0, got {rate}")
    if passes < 1:
        raise ParameterError(f"passes must be >= 1, got {passes}")
    s = _design(states, bias)
    y = _targets(targets)
    if s.shape[0] != y.shape[0]:
        raise ShapeError(f"{s.shape[0]} state rows but {y.shape[0]} targets")
    w = np.zeros((y.shape[1], s.shape[1])) if w0 is None else np.array(w0, dtype=float)
    for epoch in range(passes):
        for k in range(s.shape[0]):
            x = s[k]
            w += rate * np.outer(y[k] - w @ x, x)
            if not np.linalg.norm(w) <= LMS_WEIGHT_LIMIT:
                raise DivergenceError(
                    f"LMS weights diverged at epoch {epoch}, sample {k}", iterations=epoch * s.shape[0] + k
                )
    return ReadoutWeights(w, "real", bias)


@dataclass(frozen=True)
class BooleanSearchResult:
    weights: ReadoutWeights
    error: float
    history: np.ndarray


def boolean_error(s: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """MSE of ``s @ w`` after refitting only the scalar bias (= residual variance)."""
    r = y - s @ w
    return float(np.mean((r - r.mean()) ** 2))


def train_boolean_reinforce(
    states: StateMatrix,
    targets: TimeSeries,
    iterations: int,
    rng: RandomSource,
    restarts: int = 1,
    alphabet: tuple[float, float] = (0.0, 1.0),
) -> BooleanSearchResult:
    """Greedy random-flip search over two-valued node weights.

    Each restart starts from a random weight vector; every iteration flips
    one uniformly chosen weight and keeps the flip unless the error grows.
    The bias is refit in closed form for each candidate. ``history`` holds
    the best error found so far after every iteration (all restarts
    concatenated) and is therefore non-increasing.
    """
    if iterations < 1 or restarts < 1:
        raise ParameterError("iterations and restarts must be >= 1")
    s = _design(states, bias=False)
    y = _targets(targets)
    if y.shape[1] != 1:
        raise ShapeError("Boolean search trains a single output; call once per output")
    if s.shape[0] != y.shape[0]:
        raise ShapeError(f"{s.shape[0]} state rows but {y.shape[0]} targets")
    y = y[:, 0]
    lo, hi = alphabet
    n = s.shape[1]

    best_w, best_err = None, np.inf
    history = np.empty(iterations * restarts)
    for rs in range(restarts):
        stream = rng.child(f"restart{rs}")
        w = np.where(stream.integers(0, 2, n) == 1, hi, lo)
        resid = y - s @ w
        err = float(np.var(resid))
        if err < best_err:
            best_w, best_err = w.copy(), err
        flips = stream.integers(0, n, iterations)
        for it, j in enumerate(flips):
            step = (lo if w[j] == hi else hi) - w[j]
            cand = resid - step * s[:, j]
            cand_err = float(np.var(cand))
            if cand_err <= err:
                w[j] += step
                resid, err = cand, cand_err
                if err < best_err:
                    best_w, best_err = w.copy(), err
            history[rs * iterations + it] = best_err

    b = float(np.mean(y - s @ best_w))
    weights = ReadoutWeights(np.append(best_w, b)[None, :], "boolean", True, alphabet)
    return BooleanSearchResult(weights, best_err, history)


def nmse(pred: TimeSeries | np.ndarray, target: TimeSeries | np.ndarray) -> float:
    """Mean squared error over population variance of the target.

    Multi-column series are scored per column and averaged.
    """
    p, t = _targets(pred), _targets(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != target shape {t.shape}")
    var = t.var(axis=0)
    if np.any(var <= 0):
        raise MetricError("target has zero variance; NMSE undefined")
    return float(np.mean(np.mean((p - t) ** 2, axis=0) / var))
