"""Shared plumbing: seeded randomness, the time-series and state containers,
error types, and the spectral-radius estimate used to scale recurrent weights.

Randomness
----------
Every draw goes through :class:`RandomSource`, a thin wrapper over numpy's
``PCG64`` bit generator (PCG-XSL-RR 128/64) seeded through
``numpy.random.SeedSequence``. Sub-streams are derived from a parent seed and
a string label: the label is hashed (first 8 bytes of SHA-256, little endian)
into the SeedSequence ``spawn_key``. Deriving a child never advances the
parent, so ``RandomSource(7).child("mask")`` is the same stream no matter what
else was drawn before.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


class PhotonRCError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PhotonRCError, ValueError):
    """An argument is outside its documented domain."""


class ShapeError(ParameterError):
    """Array dimensions do not line up."""


class ConstructionError(PhotonRCError):
    """A randomly drawn object cannot satisfy its construction contract."""


class NumericalError(PhotonRCError, ArithmeticError):
    """A numerical routine failed; ``iterations`` is set when meaningful."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class StabilityError(NumericalError):
    """Integration step too coarse for the stiffness of the model."""


class DivergenceError(NumericalError):
    """State became non-finite or grew without bound."""

    def __init__(self, message: str, time: float | None = None, iterations: int | None = None):
        super().__init__(message, iterations)
        self.time = time


class ConditioningError(NumericalError):
    """Linear system is singular or too ill-conditioned to solve."""


U64_MAX = 2**64 - 1


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


class RandomSource:
    """Deterministic PCG64 stream identified by ``(seed, path)``.

    Single owner: drawing mutates internal state, so do not share one
    instance between threads. Use :meth:`child` to hand out independent
    streams instead.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed <= U64_MAX:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.path = tuple(path)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, label: str) -> "RandomSource":
        return RandomSource(self.seed, self.path + (_label_key(label),))

    def uniform(self, lo: float, hi: float, size) -> np.ndarray:
        return self._gen.uniform(lo, hi, size)

    def normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, lo: int, hi: int, size=None):
        """Integers in ``[lo, hi)``."""
        return self._gen.integers(lo, hi, size)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self.path})"


def draw_uniform(rng: RandomSource, lo: float, hi: float, count: int) -> np.ndarray:
    """Draw ``count`` values uniformly from ``[lo, hi)``."""
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise ParameterError(f"need finite lo < hi, got [{lo}, {hi})")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    out = rng.uniform(lo, hi, int(count))
    # uniform() may round up to hi when hi - lo is tiny relative to hi
    return np.where(out >= hi, np.nextafter(hi, lo), out)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled sequence of real vectors.

    ``values`` has shape ``(L, D)``; 1-D input is promoted to one column.
    Sample ``j`` sits at time ``t0 + j * dt``.
    """

    values: np.ndarray
    dt: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ShapeError(f"time series values must be 1-D or 2-D, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeError(f"time series must have L >= 1 and D >= 1, got shape {v.shape}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.length)

    def __len__(self) -> int:
        return self.length

    def slice(self, start: int, stop: int | None = None) -> "TimeSeries":
        return TimeSeries(self.values[start:stop], self.dt, self.t0 + start * self.dt)


@dataclass(frozen=True)
class StateMatrix:
    """Reservoir states, one row per time step and one column per node."""

    values: np.ndarray
    index: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ShapeError(f"state matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise NumericalError(f"non-finite state at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "values", _frozen(v))
        idx = np.arange(v.shape[0]) if self.index is None else np.array(self.index)
        if idx.shape != (v.shape[0],):
            raise ShapeError("index length must equal the number of rows")
        idx.setflags(write=False)
        object.__setattr__(self, "index", idx)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    def rows(self, start: int, stop: int | None = None) -> "StateMatrix":
        return StateMatrix(self.values[start:stop], self.index[start:stop])


def hstack_states(parts: list[StateMatrix]) -> StateMatrix:
    if not parts:
        raise ParameterError("nothing to concatenate")
    n = {p.n_rows for p in parts}
    if len(n) != 1:
        raise ShapeError(f"state matrices have different row counts: {sorted(n)}")
    return StateMatrix(np.hstack([p.values for p in parts]), parts[0].index)


def spectral_radius(
    m,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    dense_cutoff: int = 64,
    block: int = 16,
    patience: int = 10,
) -> float:
    """Largest absolute eigenvalue of a square matrix.

    Matrices with ``N <= dense_cutoff`` use a full eigendecomposition. Larger
    ones use block power iteration: a ``block``-dimensional subspace is pushed
    through ``m`` and re-orthonormalised each step, and the radius is read off
    the Ritz values of the projected ``block x block`` matrix. A block (rather
    than a single vector) is needed because real random matrices usually have
    a complex-conjugate dominant pair, on which plain power iteration
    oscillates. Iteration stops once the estimate changes by less than
    ``tol`` relative for ``patience`` consecutive steps; a single small
    change is not trusted because the estimate can stall before converging.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"spectral radius needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("matrix has non-finite entries")
    n = a.shape[0]
    if n == 0:
        raise ShapeError("empty matrix")
    if n <= dense_cutoff:
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    if not np.any(a):
        return 0.0

    k = min(block, n)
    # fixed start so the estimate itself is deterministic
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((n, k)))
    prev = None
    calm = 0
    for it in range(1, max_iter + 1):
        z = a @ q
        if not np.any(z):
            return 0.0
        ritz = np.linalg.eigvals(q.T @ z)
        est = float(np.max(np.abs(ritz)))
        if prev is not None and abs(est - prev) <= tol * max(est, 1e-300):
            calm += 1
            if calm >= patience:
                return est
        else:
            calm = 0
        prev = est
        q, _ = np.linalg.qr(z)
    raise NumericalError(
        f"power iteration did not converge to {tol:g} in {max_iter} iterations", iterations=max_iter
    )
