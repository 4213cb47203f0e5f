"""Cascaded (deep) reservoirs and the weight-transfer tolerance experiment.

Layers are connected feed-forward only: the states of layer ``i`` at input
step ``k`` pass through a coupling matrix and become the input of layer
``i + 1`` at the same step. For a delay layer one step is one input period
``T``, and its input is scalar, so the coupling into it is a ``1 x N`` row.

Seeding: layer ``i`` draws from ``rng.child(f"layer{i}")`` and coupling
``i`` (into layer ``i + 1``) from ``rng.child(f"coupling{i}")`` unless
``CascadeSpec.coupling_labels`` says otherwise. A one-layer cascade
therefore reproduces ``build_esn(params, rng.child("layer0"))`` bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .core import (
    ConstructionError,
    ParameterError,
    RandomSource,
    StateMatrix,
    TimeSeries,
    hstack_states,
)
from .delay import DelayParams, Mask, make_mask, run_delay_reservoir
from .esn import EsnParams, EsnReservoir, build_esn, esn_run
from .readout import RidgeConfig, nmse, predict, train_ridge
from .tasks import TaskSpec, task_data


@dataclass(frozen=True)
class DelayLayer:
    """A delay reservoir as a cascade layer. With ``mask=None`` the mask is
    drawn (``mask_kind``) from the layer's stream when the cascade is built."""

    params: DelayParams
    mask: Mask | None = None
    mask_kind: str = "uniform"
    regime: str = "dde"
    oversample: int | None = None
    history: float = 0.0

    @property
    def n_nodes(self) -> int:
        return self.params.n_virtual

    @property
    def input_dim(self) -> int:
        return 1


LayerSpec = Union[EsnParams, DelayLayer]
Layer = Union[EsnReservoir, DelayLayer]


@dataclass(frozen=True)
class CascadeSpec:
    layers: tuple
    coupling_scale: float = 1.0
    coupling_labels: tuple | None = None
    readout_layers: str = "all"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ParameterError("a cascade needs at least one layer")
        if not (np.isfinite(self.coupling_scale) and self.coupling_scale >= 0):
            raise ParameterError(f"coupling_scale must be >= 0, got {self.coupling_scale}")
        if self.coupling_labels is not None and len(self.coupling_labels) != len(self.layers) - 1:
            raise ParameterError("need one coupling label per layer boundary")
        if self.readout_layers not in ("all", "last"):
            raise ParameterError("readout_layers must be 'all' or 'last'")


@dataclass(frozen=True)
class PerturbationSpec:
    amplitude: float
    mode: str = "multiplicative"

    def __post_init__(self):
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ParameterError(f"perturbation amplitude must be finite and >= 0, got {self.amplitude}")
        if self.mode not in ("multiplicative", "additive"):
            raise ParameterError("mode must be 'multiplicative' or 'additive'")


@dataclass(frozen=True)
class DeepReservoir:
    layers: tuple
    couplings: tuple
    readout_layers: str = "all"

    def __post_init__(self):
        layers, couplings = tuple(self.layers), tuple(np.array(c, dtype=float) for c in self.couplings)
        if len(couplings) != len(layers) - 1:
            raise ConstructionError(f"{len(layers)} layers need {len(layers) - 1} couplings, got {len(couplings)}")
        for i, c in enumerate(couplings):
            want = (layers[i + 1].input_dim, layers[i].n_nodes)
            if c.shape != want:
                raise ConstructionError(f"coupling {i} has shape {c.shape}, expected {want}")
            c.setflags(write=False)
        for lay in layers:
            if isinstance(lay, DelayLayer) and (lay.mask is None or lay.mask.n != lay.params.n_virtual):
                raise ConstructionError("delay layer mask missing or not matching n_virtual")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "couplings", couplings)

    @property
    def widths(self) -> list[int]:
        return [lay.n_nodes for lay in self.layers]


def _build_layer(spec: LayerSpec, rng: RandomSource) -> Layer:
    if isinstance(spec, EsnParams):
        return build_esn(spec, rng)
    if isinstance(spec, DelayLayer):
        if spec.mask is not None:
            if spec.mask.n != spec.params.n_virtual:
                raise ConstructionError(
                    f"mask has {spec.mask.n} steps but layer has n_virtual={spec.params.n_virtual}"
                )
            return spec
        mask = make_mask(spec.params.n_virtual, spec.mask_kind, rng.child("mask"), spec.params.node_separation)
        return replace(spec, mask=mask)
    raise ConstructionError(f"unsupported layer descriptor {type(spec).__name__}")


def build_cascade(spec: CascadeSpec, rng: RandomSource) -> DeepReservoir:
    layers = [_build_layer(s, rng.child(f"layer{i}")) for i, s in enumerate(spec.layers)]
    labels = spec.coupling_labels or tuple(f"coupling{i}" for i in range(len(layers) - 1))
    couplings = []
    for i in range(len(layers) - 1):
        shape = (layers[i + 1].input_dim, layers[i].n_nodes)
        couplings.append(rng.child(labels[i]).uniform(-1.0, 1.0, shape) * spec.coupling_scale)
    return DeepReservoir(tuple(layers), tuple(couplings), spec.readout_layers)


def _run_layer(layer: Layer, inputs: TimeSeries) -> StateMatrix:
    if isinstance(layer, EsnReservoir):
        return esn_run(layer, inputs, washout=0)
    return run_delay_reservoir(layer.params, inputs, layer.mask, layer.regime, layer.oversample, layer.history)


@dataclass(frozen=True)
class CascadeStates:
    per_layer: list = field(default_factory=list)
    concatenated: StateMatrix | None = None
    readout_layers: str = "all"

    @property
    def readout(self) -> StateMatrix:
        """States the readout is trained on: all layers, or only the last."""
        return self.concatenated if self.readout_layers == "all" else self.per_layer[-1]


def _propagate(d: DeepReservoir, inputs: TimeSeries, upstream: list[StateMatrix] | None = None) -> list[StateMatrix]:
    states = list(upstream or [])
    drive = inputs
    if states:
        drive = TimeSeries(states[-1].values @ d.couplings[len(states) - 1].T, inputs.dt)
    for i in range(len(states), len(d.layers)):
        s = _run_layer(d.layers[i], drive)
        states.append(s)
        if i + 1 < len(d.layers):
            drive = TimeSeries(s.values @ d.couplings[i].T, inputs.dt)
    return states


def _readout_view(states: list[StateMatrix], readout_layers: str) -> StateMatrix:
    return hstack_states(states) if readout_layers == "all" else states[-1]


def run_cascade(d: DeepReservoir, inputs: TimeSeries, washout: int = 0) -> CascadeStates:
    """Run every layer over ``inputs`` and drop the first ``washout`` rows of each."""
    if not 0 <= washout < inputs.length:
        raise ParameterError(f"washout must be in [0, {inputs.length}), got {washout}")
    full = _propagate(d, inputs)
    per_layer = [s.rows(washout) for s in full]
    return CascadeStates(per_layer, hstack_states(per_layer), d.readout_layers)


def cascade_runner(d: DeepReservoir):
    def run(inputs: TimeSeries) -> StateMatrix:
        return run_cascade(d, inputs).readout

    return run


def perturb_couplings(d: DeepReservoir, p: PerturbationSpec, rng: RandomSource) -> DeepReservoir:
    """Copy of ``d`` with every coupling entry jittered by ``sigma * g``,
    ``g ~ N(0, 1)``; relative (``w (1 + sigma g)``) by default, absolute
    (``w + sigma g``) in additive mode. Layers are shared, not copied."""
    new = []
    for i, c in enumerate(d.couplings):
        g = rng.child(f"perturb{i}").normal(c.shape)
        new.append(c * (1.0 + p.amplitude * g) if p.mode == "multiplicative" else c + p.amplitude * g)
    return DeepReservoir(d.layers, tuple(new), d.readout_layers)


@dataclass(frozen=True)
class ToleranceResult:
    sigmas: tuple
    nmse: np.ndarray  # (len(sigmas), seeds)

    @property
    def median(self) -> np.ndarray:
        return np.median(self.nmse, axis=1)

    def rows(self) -> list[dict]:
        return [
            {"sigma": s, "median_nmse": float(m), "n_seeds": self.nmse.shape[1]}
            for s, m in zip(self.sigmas, self.median)
        ]


def tolerance_experiment(
    spec: CascadeSpec,
    task: TaskSpec,
    sigmas,
    seeds: int,
    rng: RandomSource,
    readout: RidgeConfig = RidgeConfig(),
    mode: str = "multiplicative",
) -> ToleranceResult:
    """Train the readout on the nominal cascade, then score that fixed
    readout on cascades whose couplings were perturbed by each ``sigma``.

    Seed ``j`` draws a fresh cascade and data set from ``rng.child(f"seed{j}")``.
    The perturbation for a given ``sigma`` uses a stream labelled by the
    value of ``sigma``, so it does not depend on the rest of the grid.
    """
    sigmas = tuple(float(s) for s in sigmas)
    if not sigmas:
        raise ParameterError("need at least one sigma")
    if seeds < 1:
        raise ParameterError(f"seeds must be >= 1, got {seeds}")
    if task.kind == "memory_capacity":
        raise ParameterError("tolerance experiment needs a prediction task")
    out = np.empty((len(sigmas), seeds))
    for j in range(seeds):
        srng = rng.child(f"seed{j}")
        deep = build_cascade(spec, srng.child("cascade"))
        inputs, targets = task_data(task, srng.child("data"))
        nominal = _propagate(deep, inputs)
        n_train, n_test = task.split(task.length - task.washout)
        a, b, c = task.washout, task.washout + n_train, task.washout + n_train + n_test
        s_nom = _readout_view(nominal, deep.readout_layers)
        w = train_ridge(s_nom.rows(a, b), targets.slice(a, b), readout)
        for i, sigma in enumerate(sigmas):
            if sigma == 0:
                states = s_nom
            else:
                pert = perturb_couplings(deep, PerturbationSpec(sigma, mode), srng.child(f"sigma={sigma!r}"))
                # layers are untouched, so the first layer's states carry over
                states = _readout_view(_propagate(pert, inputs, nominal[:1]), deep.readout_layers)
            out[i, j] = nmse(predict(w, states.rows(b, c)), targets.slice(b, c))
    return ToleranceResult(sigmas, out)
