"""Numerical photonic reservoir computing: echo-state and delay-based
reservoirs, readout training, deep cascades and benchmark tasks."""

__version__ = "0.1.0"

from .core import (
    ConditioningError,
    ConstructionError,
    DivergenceError,
    NumericalError,
    ParameterError,
    PhotonRCError,
    RandomSource,
    ShapeError,
    StabilityError,
    StateMatrix,
    TimeSeries,
    draw_uniform,
    spectral_radius,
)
from .delay import (
    DelayParams,
    Mask,
    integrate_dde,
    make_mask,
    multiplex,
    run_delay_reservoir,
    run_discrete_map,
    sample_nodes,
)
from .esn import Activation, EsnParams, EsnReservoir, build_esn, esn_run, esn_step
from .readout import (
    ReadoutWeights,
    RidgeConfig,
    nmse,
    predict,
    train_boolean_reinforce,
    train_online_lms,
    train_ridge,
)
