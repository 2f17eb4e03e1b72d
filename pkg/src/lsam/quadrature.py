"""Trapezoidal quadrature on uniform 1-D and 2-D grids, done in log space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .errors import ConfigurationError, DivergedPartitionError

# exp(700) is close to the float64 ceiling
LOG_OVERFLOW_GUARD = 700.0


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product uniform grid; ``n`` nodes per axis, endpoints included."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        lo, hi, n = (tuple(v) if np.ndim(v) else (v,) for v in (self.lo, self.hi, self.n))
        if not (len(lo) == len(hi) == len(n)) or len(lo) not in (1, 2):
            raise ConfigurationError("quadrature grids are 1-D or 2-D only")
        if any(b <= a for a, b in zip(lo, hi)) or any(k < 3 for k in n):
            raise ConfigurationError(f"degenerate grid lo={lo} hi={hi} n={n}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))
        object.__setattr__(self, "n", tuple(int(v) for v in n))

    @classmethod
    def symmetric(cls, radius: float, step: float, dim: int = 1) -> "QuadratureGrid":
        """Grid on ``[-radius, radius]**dim`` with an odd node count and spacing <= ``step``."""
        k = int(np.ceil(radius / step))
        return cls((-radius,) * dim, (radius,) * dim, (2 * k + 1,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, k) for a, b, k in zip(self.lo, self.hi, self.n)]

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple((b - a) / (k - 1) for a, b, k in zip(self.lo, self.hi, self.n))

    def points(self) -> np.ndarray:
        """Nodes with shape ``(*n, dim)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def log_weights(self) -> np.ndarray:
        """Log trapezoid weights with shape ``n``."""
        out = np.zeros(self.n)
        for ax, (k, h) in enumerate(zip(self.n, self.steps)):
            w = np.full(k, h)
            w[0] = w[-1] = 0.5 * h
            shape = [1] * self.dim
            shape[ax] = k
            out = out + np.log(w).reshape(shape)
        return out


@dataclass(frozen=True)
class QuadratureResult:
    log_value: float
    error_estimate: float
    tail_mass: float

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))


def _log_trapezoid(logp: np.ndarray, grid: QuadratureGrid) -> float:
    return float(logsumexp(logp + grid.log_weights()))


def _coarsen(logp, grid):
    sl = tuple(slice(None, None, 2) for _ in range(grid.dim))
    coarse = QuadratureGrid(grid.lo, grid.hi, tuple((k - 1) // 2 + 1 for k in grid.n))
    return logp[sl], coarse


def _tail_mass(logp, grid, log_z):
    """Mass beyond the grid, assuming exponential decay past each face."""
    total = 0.0
    lw = grid.log_weights()
    for ax, h in enumerate(grid.steps):
        for face, inner in ((0, 1), (-1, -2)):
            lp_face = np.take(logp, face, axis=ax)
            if np.all(lp_face == -np.inf):
                continue
            with np.errstate(invalid="ignore"):
                slope = (lp_face - np.take(logp, inner, axis=ax)) / h
            decaying = slope < 0
            # non-decaying faces only matter where they carry visible mass
            if np.any(~decaying & (lp_face - log_z > -40.0)):
                return float("inf")
            w_face = np.take(lw, face, axis=ax) - np.log(0.5 * h)
            with np.errstate(divide="ignore", invalid="ignore"):
                log_len = np.where(decaying, -np.log(-slope), 0.0)
            total += float(np.exp(logsumexp(lp_face + w_face + log_len) - log_z))
    return total


def integrate_log_density(
    log_density: Callable[[np.ndarray], np.ndarray],
    grid: QuadratureGrid,
    tail_tol: float = 1e-8,
) -> QuadratureResult:
    """Integrate ``exp(log_density)`` over ``grid``.

    Raises DivergedPartitionError if the estimate overflows or the density
    does not decay at the grid boundary, and ConfigurationError when the
    estimated mass outside the grid exceeds ``tail_tol`` (relative).
    """
    pts = grid.points()
    logp = np.asarray(log_density(pts), dtype=float)
    if np.any(np.isnan(logp)):
        raise DivergedPartitionError("log-density is NaN on the grid")
    log_z = _log_trapezoid(logp, grid)
    if not np.isfinite(log_z) or log_z > LOG_OVERFLOW_GUARD:
        raise DivergedPartitionError(f"partition estimate overflowed (log Z = {log_z})")
    tail = _tail_mass(logp, grid, log_z)
    if not np.isfinite(tail):
        raise DivergedPartitionError("density does not decay at the grid boundary")
    if tail > tail_tol:
        raise ConfigurationError(f"grid misses {tail:.3g} of the mass; widen it")
    err = float("nan")
    if all(k % 2 == 1 for k in grid.n):
        lc, coarse = _coarsen(logp, grid)
        err = abs(np.exp(log_z) - np.exp(_log_trapezoid(lc, coarse))) / 3.0
    return QuadratureResult(log_z, err, tail)


def trapezoid_richardson(values: np.ndarray, step: float) -> float:
    """1-D trapezoid with one Richardson extrapolation step (odd length)."""
    if values.shape[0] % 2 == 0:
        raise ConfigurationError("Richardson step needs an odd number of nodes")
    fine = trapezoid(values, dx=step)
    coarse = trapezoid(values[::2], dx=2 * step)
    return float(fine + (fine - coarse) / 3.0)


@dataclass(frozen=True)
class PiecewiseGrid1D:
    """Composite Gauss-Legendre rule on ``[lo, hi]`` split at ``breaks``.

    Panels never straddle a break and the rule is open, so a jump at a
    break is integrated with its one-sided values.  Use it for integrands
    that are smooth except at known points.
    """

    lo: float
    hi: float
    step: float
    breaks: tuple[float, ...] = ()
    order: int = 6

    def _edges(self):
        inner = sorted(b for b in self.breaks if self.lo < b < self.hi)
        pts = [self.lo, *inner, self.hi]
        edges = []
        for a, b in zip(pts[:-1], pts[1:]):
            k = max(1, int(np.ceil((b - a) / self.step)))
            edges.append(np.linspace(a, b, k + 1)[:-1])
        edges.append(np.array([self.hi]))
        return np.concatenate(edges)

    @property
    def dim(self) -> int:
        return 1

    def _nodes_weights(self):
        t, w = np.polynomial.legendre.leggauss(self.order)
        e = self._edges()
        a, b = e[:-1, None], e[1:, None]
        x = 0.5 * (b - a) * t + 0.5 * (a + b)
        return x.ravel(), (0.5 * (b - a) * w).ravel()

    def points(self) -> np.ndarray:
        return self._nodes_weights()[0][:, None]

    def log_weights(self) -> np.ndarray:
        return np.log(self._nodes_weights()[1])

    def coarser(self) -> "PiecewiseGrid1D":
        return PiecewiseGrid1D(self.lo, self.hi, 2 * self.step, self.breaks, self.order)


def integrate_piecewise(log_density: Callable[[np.ndarray], np.ndarray], grid: PiecewiseGrid1D) -> QuadratureResult:
    """Integrate ``exp(log_density)`` with the piecewise Gauss-Legendre rule.

    The error estimate compares against panels twice as wide; the tail
    mass is the relative density at the outermost nodes.
    """
    def _log_sum(g):
        logp = np.asarray(log_density(g.points()), dtype=float)
        if np.any(np.isnan(logp)):
            raise DivergedPartitionError("log-density is NaN on the grid")
        return float(logsumexp(logp + g.log_weights())), logp

    log_z, logp = _log_sum(grid)
    if not np.isfinite(log_z) or log_z > LOG_OVERFLOW_GUARD:
        raise DivergedPartitionError(f"partition estimate overflowed (log Z = {log_z})")
    log_c, _ = _log_sum(grid.coarser())
    edge = float(np.exp(max(logp[0], logp[-1]) - log_z))
    return QuadratureResult(log_z, abs(np.exp(log_z) - np.exp(log_c)), edge)
