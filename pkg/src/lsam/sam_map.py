"""Stabilized SAM perturbation, surrogate loss and its Boltzmann density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError
from .landscapes import Objective
from .quadrature import (
    PiecewiseGrid1D, QuadratureGrid, QuadratureResult, integrate_log_density, integrate_piecewise,
)


def default_gamma(dim: int) -> float:
    return 1e-12 * np.sqrt(dim) + 1e-8


@dataclass(frozen=True)
class SamParams:
    """Perturbation radius ``rho`` and stabilizer ``gamma``.

    ``gamma=None`` resolves to a tiny dimension-aware constant, see
    :func:`default_gamma`.
    """

    rho: float = 0.0
    gamma: float | None = None

    def __post_init__(self):
        if self.rho < 0:
            raise ConfigurationError(f"rho must be >= 0, got {self.rho}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigurationError(f"gamma must be > 0, got {self.gamma}")

    def gamma_for(self, dim: int) -> float:
        return default_gamma(dim) if self.gamma is None else self.gamma


def _unit_shift(g, gamma):
    norm = np.sqrt(np.sum(g * g, axis=-1, keepdims=True))
    return g / (norm + gamma)


def lookback_map(obj: Objective, p: SamParams, x: np.ndarray, rho: float | None = None) -> np.ndarray:
    """``T(x) = x + rho * grad f(x) / (||grad f(x)|| + gamma)``."""
    x = np.asarray(x, dtype=float)
    rho = p.rho if rho is None else rho
    if rho == 0.0:
        return x
    return x + rho * _unit_shift(obj.grad(x), p.gamma_for(obj.dim))


def sam_loss(obj: Objective, p: SamParams, x: np.ndarray) -> np.ndarray:
    return obj.eval(lookback_map(obj, p, x))


def sam_grad(obj: Objective, p: SamParams, x: np.ndarray, rho: float | None = None) -> np.ndarray:
    """Exact gradient evaluated at the look-back point (no Jacobian of the map)."""
    return obj.grad(lookback_map(obj, p, x, rho))


def sam_stochastic_grad(
    obj: Objective, p: SamParams, x: np.ndarray, xi: np.ndarray, rho: float | None = None
) -> np.ndarray:
    """Single-sample SAM gradient ``grad f(x + rho*u; xi)`` with ``u`` built from the same ``xi``.

    ``rho`` overrides ``p.rho`` (used for decaying schedules).
    """
    rho = p.rho if rho is None else rho
    g = obj.stochastic_grad(x, xi)
    if rho == 0.0:
        return g
    x_adv = x + rho * _unit_shift(g, p.gamma_for(obj.dim))
    return obj.stochastic_grad(x_adv, xi)


def sam_log_density_unnormalized(obj: Objective, p: SamParams, x: np.ndarray) -> np.ndarray:
    return -sam_loss(obj, p, x)


def sam_density_unnormalized(obj: Objective, p: SamParams, x: np.ndarray) -> np.ndarray:
    return np.exp(-sam_loss(obj, p, x))


def sam_partition_1d2d(
    obj: Objective, p: SamParams, grid: QuadratureGrid, full: bool = False
) -> float | QuadratureResult:
    """Normalizer of ``exp(-f(T(x)))`` by trapezoidal quadrature (d in {1, 2}).

    With ``full=True`` the log value, Richardson error estimate and tail
    mass estimate are returned as well.
    """
    if obj.dim not in (1, 2) or grid.dim != obj.dim:
        raise ConfigurationError(f"partition quadrature needs dim 1 or 2 matching the grid, got {obj.dim}")
    res = integrate_log_density(lambda pts: -sam_loss(obj, p, pts), grid)
    return res if full else res.value


def lookback_jumps_1d(obj: Objective, lo: float, hi: float, step: float = 1e-3) -> list[float]:
    """Critical points of a 1-D objective in ``[lo, hi]``.

    For ``rho > 0`` the look-back map flips from ``x - rho`` to ``x + rho``
    where the gradient changes sign, so ``exp(-f(T(x)))`` can jump there.
    Found by sign changes on a grid, refined with Brent's method.
    """
    if obj.dim != 1:
        raise ConfigurationError("lookback_jumps_1d needs a 1-D objective")
    xs = np.linspace(lo, hi, int(np.ceil((hi - lo) / step)) + 1)
    g = obj.grad(xs[:, None])[:, 0]
    out = [float(x) for x, v in zip(xs, g) if v == 0.0]
    for a, b, ga, gb in zip(xs[:-1], xs[1:], g[:-1], g[1:]):
        if ga * gb < 0:
            out.append(brentq(lambda t: float(obj.grad(np.array([t]))[0]), a, b, xtol=1e-14))
    return sorted(out)


def sam_partition_piecewise_1d(
    obj: Objective, p: SamParams, radius: float, step: float = 0.02, full: bool = False
) -> float | QuadratureResult:
    """Normalizer of ``exp(-f(T(x)))`` on ``[-radius, radius]``, split at the jumps of ``T``."""
    grid = sam_grid_1d(obj, p, radius, step)
    res = integrate_piecewise(lambda pts: -sam_loss(obj, p, pts), grid)
    return res if full else res.value


def sam_grid_1d(obj: Objective, p: SamParams, radius: float, step: float = 0.02) -> PiecewiseGrid1D:
    """Piecewise grid (panel width ``step``) whose panels avoid the jumps of the SAM density."""
    breaks = lookback_jumps_1d(obj, -radius, radius, min(step, 1e-3)) if p.rho > 0 else []
    return PiecewiseGrid1D(-radius, radius, step, tuple(breaks))
