"""Stationary kernels ``k(x, y) = phi(x - y)`` and the kernel-smoothed SAM density."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import logsumexp

from .errors import ConfigurationError
from .landscapes import Objective
from .quadrature import QuadratureGrid, integrate_log_density, trapezoid_richardson
from .sam_map import SamParams, sam_loss

TAIL_CLASSES = ("poly-exp growth", "super-log growth", "none")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Stationary kernel described by its slice ``phi``.

    ``normalizer_Z`` is ``int exp(-phi(z)) dz`` when known in closed form,
    else ``None`` (see :func:`kernel_normalizer`).  ``scale_sq`` is set only
    for the Gaussian kernel, where the score estimator has a closed form in
    the chain mean.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    grad_phi: Callable[[np.ndarray], np.ndarray]
    dim: int
    tail_class: str
    normalizer_Z: float | None = None
    radial: bool = False
    scale_sq: float | None = None
    name: str = "kernel"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tail_class not in TAIL_CLASSES:
            raise ConfigurationError(f"unknown tail class {self.tail_class!r}")

    def k(self, x, y):
        return self.phi(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def grad_x(self, x, y):
        return self.grad_phi(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def grad_y(self, x, y):
        return -self.grad_x(x, y)

    @property
    def admissible(self) -> bool:
        return self.tail_class != "none"


def gaussian_kernel(s: float, dim: int) -> KernelSpec:
    """``phi(z) = ||z||**2 / (2 s**2)``."""
    if not s > 0:
        raise ConfigurationError(f"kernel scale must be > 0, got {s}")
    s2 = float(s) ** 2

    def phi(z):
        return np.sum(z * z, axis=-1) / (2.0 * s2)

    def grad_phi(z):
        return z / s2

    return KernelSpec(
        phi, grad_phi, dim, "poly-exp growth",
        normalizer_Z=float((2.0 * np.pi * s2) ** (dim / 2)),
        radial=True, scale_sq=s2, name="gaussian", params={"s": float(s)},
    )


def exp_power_kernel(lambda_: float, alpha: float, dim: int) -> KernelSpec:
    """``phi(z) = lambda * ||z||**alpha``; Gaussian for ``alpha == 2``."""
    if not lambda_ > 0:
        raise ConfigurationError(f"lambda must be > 0, got {lambda_}")
    if not alpha > 0:
        raise ConfigurationError(f"alpha must be > 0, got {alpha}")
    lam, a = float(lambda_), float(alpha)

    def phi(z):
        r = np.sqrt(np.sum(z * z, axis=-1))
        return lam * r**a

    def grad_phi(z):
        r = np.sqrt(np.sum(z * z, axis=-1, keepdims=True))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = lam * a * r ** (a - 2.0) * z
        # subgradient 0 at the origin
        return np.where(r > 0, g, 0.0)

    return KernelSpec(
        phi, grad_phi, dim, "poly-exp growth", normalizer_Z=None, radial=True,
        name="exp-power", params={"lambda": lam, "alpha": a},
    )


def exp_power_normalizer_exact(lambda_: float, alpha: float, dim: int) -> float:
    """Closed form ``S_{d-1} Gamma(d/alpha) / (alpha lambda**(d/alpha))`` (test oracle)."""
    sphere = 2.0 * np.pi ** (dim / 2) / gamma_fn(dim / 2)
    return float(sphere * gamma_fn(dim / alpha) / (alpha * lambda_ ** (dim / alpha)))


def classify_tail(phi: Callable[[np.ndarray], np.ndarray], dim: int) -> str:
    """Probe the growth of ``phi`` along a ray and name its tail class.

    Power-law growth shows a log-log slope that is positive and roughly
    constant across decades; logarithmic growth has a slope that keeps
    shrinking.  The super-logarithmic test is ``phi >= (d + 0.05) log(1+r)``.
    """
    e = np.zeros(dim)
    e[0] = 1.0
    radii = np.logspace(2, 10, 9)
    vals = np.array([float(phi(r * e)) for r in radii])
    if np.all(np.isinf(vals) & (vals > 0)):
        return "poly-exp growth"
    if np.all(vals > 0):
        with np.errstate(divide="ignore"):
            slopes = np.diff(np.log(vals)) / np.diff(np.log(radii))
        if np.all(np.isfinite(slopes)) and slopes.min() > 0 and slopes[-1] > 0.8 * slopes[0]:
            return "poly-exp growth"
    if np.all(vals >= (dim + 0.05) * np.log1p(radii)):
        return "super-log growth"
    return "none"


def stationary_kernel(phi, grad_phi, dim: int, tail_class: str | None = None, **kw) -> KernelSpec:
    """Wrap a user ``phi``; the tail class is probed when not given."""
    if tail_class is None:
        tail_class = classify_tail(phi, dim)
    return KernelSpec(phi, grad_phi, dim, tail_class, **kw)


def kernel_normalizer(kern: KernelSpec, step: float = 1e-4, cutoff: float = 40.0) -> float:
    """``int exp(-phi(z)) dz``: closed form when known, else quadrature (d <= 2)."""
    if kern.normalizer_Z is not None:
        return kern.normalizer_Z
    if not kern.admissible:
        raise ConfigurationError(f"kernel {kern.name} has no finite normalizer (tail class 'none')")
    e = np.zeros(kern.dim)
    e[0] = 1.0
    # radius where phi exceeds the cutoff along every axis, found by doubling
    R = 1.0
    axes = np.eye(kern.dim) if not kern.radial else e[None, :]
    while float(np.min(kern.phi(R * np.concatenate([axes, -axes])))) < cutoff:
        R *= 2.0
        if R > 1e8:
            raise ConfigurationError("kernel slice decays too slowly for quadrature")
    if kern.radial:
        k = int(np.ceil(R / step))
        k += k % 2
        r = np.linspace(0.0, R, k + 1)
        sphere = 2.0 * np.pi ** (kern.dim / 2) / gamma_fn(kern.dim / 2)
        vals = sphere * r ** (kern.dim - 1) * np.exp(-kern.phi(r[:, None] * e))
        return trapezoid_richardson(vals, R / k)
    if kern.dim > 2:
        raise ConfigurationError("non-radial kernel normalizer needs dim <= 2")
    grid = QuadratureGrid.symmetric(R, max(step, R / 2000), kern.dim)
    return integrate_log_density(lambda z: -kern.phi(z), grid).value


def _require_admissible(kern: KernelSpec):
    if not kern.admissible:
        raise ConfigurationError(
            f"kernel {kern.name} rejected: tail class 'none' gives no finite normalizer"
        )


def lsam_log_density_on_grid(
    obj: Objective,
    p: SamParams,
    kern: KernelSpec,
    grid: QuadratureGrid,
    ys: np.ndarray | None = None,
    chunk: int = 512,
) -> np.ndarray:
    """Log of the kernel-smoothed SAM density at ``ys`` (default: the grid nodes).

    The x-integral runs over ``grid``; the same grid gives the SAM
    partition function, so the result is normalized consistently.
    """
    _require_admissible(kern)
    if obj.dim not in (1, 2) or grid.dim != obj.dim:
        raise ConfigurationError("smoothed density quadrature needs dim 1 or 2")
    xs = grid.points().reshape(-1, obj.dim)
    lw = grid.log_weights().reshape(-1)
    log_pi_sam = -sam_loss(obj, p, xs) + lw
    log_z_sam = float(logsumexp(log_pi_sam))
    log_z_kern = float(np.log(kernel_normalizer(kern)))
    if ys is None:
        ys = grid.points()
    ys = np.asarray(ys, dtype=float)
    flat = ys.reshape(-1, obj.dim)
    out = np.empty(flat.shape[0])
    for i in range(0, flat.shape[0], chunk):
        yb = flat[i:i + chunk]
        kv = kern.phi(xs[None, :, :] - yb[:, None, :])
        out[i:i + chunk] = logsumexp(log_pi_sam[None, :] - kv, axis=1)
    return (out - log_z_sam - log_z_kern).reshape(ys.shape[:-1])


def lsam_density_quadrature(
    obj: Objective, p: SamParams, kern: KernelSpec, y: np.ndarray, grid: QuadratureGrid
) -> float | np.ndarray:
    """Kernel-modulated SAM density at ``y`` by quadrature over ``grid``."""
    return np.exp(lsam_log_density_on_grid(obj, p, kern, grid, ys=np.asarray(y, dtype=float)))
