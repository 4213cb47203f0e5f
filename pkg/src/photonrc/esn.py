"""Discrete-time echo-state reservoir.

The state update is

    x(t+1) = f(W_int x(t) + W_inj u(t+1) + b)

i.e. the input applied at a step is the one indexed by the step being
computed. There is no leak term.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    ConstructionError,
    ParameterError,
    RandomSource,
    ShapeError,
    StateMatrix,
    TimeSeries,
    spectral_radius,
)


class Activation(str, Enum):
    TANH = "tanh"
    IDENTITY = "identity"
    SIN2 = "sin2"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.IDENTITY:
            return np.asarray(z, dtype=float)
        return np.sin(z) ** 2


@dataclass(frozen=True)
class EsnParams:
    n_nodes: int = 100
    spectral_radius_target: float = 0.9
    input_scaling: float = 1.0
    bias_scale: float = 0.2
    input_dim: int = 1
    activation: Activation = Activation.TANH

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 1:
            raise ParameterError(f"n_nodes must be a positive integer, got {self.n_nodes}")
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise ParameterError(f"input_dim must be a positive integer, got {self.input_dim}")
        for name in ("spectral_radius_target", "input_scaling", "bias_scale"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class EsnReservoir:
    w_int: np.ndarray
    w_inj: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.TANH

    def __post_init__(self):
        w_int = np.array(self.w_int, dtype=float)
        w_inj = np.array(self.w_inj, dtype=float)
        bias = np.array(self.bias, dtype=float).reshape(-1)
        n = w_int.shape[0]
        if w_int.shape != (n, n):
            raise ShapeError(f"w_int must be square, got {w_int.shape}")
        if w_inj.ndim != 2 or w_inj.shape[0] != n:
            raise ShapeError(f"w_inj must be {n} x K, got {w_inj.shape}")
        if bias.shape != (n,):
            raise ShapeError(f"bias must have length {n}, got {bias.shape}")
        for a in (w_int, w_inj, bias):
            a.setflags(write=False)
        object.__setattr__(self, "w_int", w_int)
        object.__setattr__(self, "w_inj", w_inj)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def n_nodes(self) -> int:
        return self.w_int.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_inj.shape[1]


def build_esn(params: EsnParams, rng: RandomSource) -> EsnReservoir:
    """Draw a reservoir. Each weight block comes from its own labelled
    sub-stream (``w_int``, ``w_inj``, ``bias``) of ``rng``."""
    n, k = params.n_nodes, params.input_dim
    if params.spectral_radius_target == 0:
        w_int = np.zeros((n, n))
    else:
        w_int = rng.child("w_int").uniform(-1.0, 1.0, (n, n))
        rho = spectral_radius(w_int)
        if rho == 0:
            raise ConstructionError("drawn W_int has zero spectral radius; cannot rescale")
        w_int *= params.spectral_radius_target / rho
    w_inj = rng.child("w_inj").uniform(-1.0, 1.0, (n, k)) * params.input_scaling
    bias = rng.child("bias").uniform(-1.0, 1.0, n) * params.bias_scale
    return EsnReservoir(w_int, w_inj, bias, params.activation)


def esn_step(r: EsnReservoir, x, u) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape != (r.n_nodes,):
        raise ShapeError(f"state must have length {r.n_nodes}, got {x.shape}")
    if u.shape != (r.input_dim,):
        raise ShapeError(f"input must have length {r.input_dim}, got {u.shape}")
    return r.activation(r.w_int @ x + r.w_inj @ u + r.bias)


def esn_run(r: EsnReservoir, inputs: TimeSeries, x0=None, washout: int = 100) -> StateMatrix:
    """Drive the reservoir with ``inputs`` and collect states.

    Row ``j`` of the result is the state after consuming input sample
    ``washout + j``; the first ``washout`` states are dropped.
    """
    if inputs.width != r.input_dim:
        raise ShapeError(f"input width {inputs.width} != reservoir input_dim {r.input_dim}")
    if not 0 <= washout < inputs.length:
        raise ParameterError(f"washout must be in [0, {inputs.length}), got {washout}")
    x = np.zeros(r.n_nodes) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (r.n_nodes,):
        raise ShapeError(f"x0 must have length {r.n_nodes}, got {x.shape}")

    # input drive precomputed in one matmul; the loop only carries recurrence
    drive = inputs.values @ r.w_inj.T + r.bias
    out = np.empty((inputs.length, r.n_nodes))
    f, w = r.activation, r.w_int
    for t in range(inputs.length):
        x = f(w @ x + drive[t])
        out[t] = x
    return StateMatrix(out[washout:], np.arange(washout, inputs.length))


def esn_runner(r: EsnReservoir, x0=None):
    """Callable mapping an input series to all of its states (no washout)."""

    def run(inputs: TimeSeries) -> StateMatrix:
        return esn_run(r, inputs, x0, washout=0)

    return run
