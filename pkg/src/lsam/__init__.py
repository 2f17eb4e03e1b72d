"""Landscape-smoothed SAM: densities, samplers, coupled chains and a distributed runtime."""

from .conditional import ConditionalSamplerConfig, sample_conditional, score_via_conditional
from .dist import DistConfig, run_baseline, run_distributed
from .dual_loop import ScheduleSpec, run_chain, step
from .errors import (
    ChainDivergenceError, ConfigurationError, DivergedPartitionError, ProtocolError, SamplerHealthWarning,
)
from .kernels import exp_power_kernel, gaussian_kernel, stationary_kernel
from .landscapes import make_basin_landscape, make_double_well, make_mlp_regression, make_quadratic
from .sam_map import SamParams, lookback_map, sam_grad, sam_loss, sam_stochastic_grad

__version__ = "0.1.0"

__all__ = [
    "ChainDivergenceError", "ConditionalSamplerConfig", "ConfigurationError", "DistConfig",
    "DivergedPartitionError", "ProtocolError", "SamParams", "SamplerHealthWarning", "ScheduleSpec",
    "exp_power_kernel", "gaussian_kernel", "lookback_map", "make_basin_landscape", "make_double_well",
    "make_mlp_regression", "make_quadratic", "run_baseline", "run_chain", "run_distributed",
    "sam_grad", "sam_loss", "sam_stochastic_grad", "sample_conditional", "score_via_conditional",
    "stationary_kernel", "step",
]
