"""Sampling the conditional ``q(x|y) ~ exp(-f(T(x)) - k(x, y))`` and the score estimator.

The score of the smoothed density at ``y`` equals the negative posterior
mean of ``grad_y k(x, y)`` under ``q(.|y)``; here that mean is a chain
average.  Both samplers accept a batch of query points (leading axes of
``y``) and run one independent chain per query point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ChainDivergenceError, ConfigurationError, SamplerHealthWarning
from .kernels import KernelSpec
from .landscapes import NoiseStream, Objective
from .rng import stream
from .sam_map import SamParams, lookback_map, sam_grad, sam_stochastic_grad

CONFINEMENT_RADIUS = 1e3
HEALTHY_ACCEPTANCE = (0.05, 0.99)


@dataclass(frozen=True)
class ConditionalSamplerConfig:
    """``chain_len`` counts all iterations; the first ``burn_in`` are dropped.

    ``burn_in=None`` means 20% of ``chain_len``.
    """

    method: str = "MALA"
    step: float = 0.1
    chain_len: int = 10_000
    burn_in: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("MALA", "SGLD"):
            raise ConfigurationError(f"method must be MALA or SGLD, got {self.method!r}")
        if not self.step > 0:
            raise ConfigurationError("step must be > 0")
        if self.chain_len < 1:
            raise ConfigurationError("chain_len must be >= 1")
        if self.burn_in is not None and not 0 <= self.burn_in < self.chain_len:
            raise ConfigurationError("burn_in must lie in [0, chain_len)")

    @property
    def n_burn(self) -> int:
        return int(0.2 * self.chain_len) if self.burn_in is None else self.burn_in


@dataclass
class ConditionalChain:
    samples: np.ndarray  # (n_kept, *batch, d)
    acceptance_rate: np.ndarray | None
    warnings: list[str] = field(default_factory=list)


@dataclass
class ScoreEstimate:
    score: np.ndarray
    n_samples: int
    acceptance_rate: np.ndarray | None
    warnings: list[str] = field(default_factory=list)


def _log_q(obj, p, kern, x, y):
    return -obj.eval(lookback_map(obj, p, x)) - kern.k(x, y)


def _drift(obj, p, kern, x, y):
    return -(sam_grad(obj, p, x) + kern.grad_x(x, y))


def _check(x, i):
    r = np.sqrt(np.sum(x * x, axis=-1))
    if not np.all(np.isfinite(r)) or np.any(r > CONFINEMENT_RADIUS):
        raise ChainDivergenceError(
            f"chain left the ball of radius {CONFINEMENT_RADIUS:g} at iteration {i}",
            {"iteration": i, "max_norm": float(np.nanmax(r)) if np.any(np.isfinite(r)) else float("nan")},
        )


def sample_conditional(
    obj: Objective, p: SamParams, kern: KernelSpec, y: np.ndarray, cfg: ConditionalSamplerConfig,
    x0: np.ndarray | None = None,
) -> ConditionalChain:
    """Run MALA or SGLD on ``q(.|y)`` starting from ``x0`` (default ``y``).

    MALA drifts with the gradient at the look-back point and corrects with
    the exact unnormalized ``log q``.  SGLD uses the single-sample SAM
    stochastic gradient and no correction.
    """
    if not kern.admissible:
        raise ConfigurationError(f"kernel {kern.name} rejected: tail class 'none'")
    y = np.asarray(y, dtype=float)
    x = y.copy() if x0 is None else np.broadcast_to(np.asarray(x0, dtype=float), y.shape).copy()
    h = cfg.step
    sqrt_h = np.sqrt(h)
    rng = stream(cfg.seed, "conditional", cfg.method)
    n_burn = cfg.n_burn
    kept = np.empty((cfg.chain_len - n_burn,) + y.shape)
    batch = y.shape[:-1]

    if cfg.method == "SGLD":
        noise = NoiseStream(obj, stream(cfg.seed, "conditional", "oracle"), batch_shape=batch)
        gauss = rng.standard_normal
        for i in range(cfg.chain_len):
            g = sam_stochastic_grad(obj, p, x, noise()) + kern.grad_x(x, y)
            x = x - 0.5 * h * g + sqrt_h * gauss(y.shape)
            _check(x, i)
            if i >= n_burn:
                kept[i - n_burn] = x
        return ConditionalChain(kept, None)

    accepted = np.zeros(batch)
    lq = _log_q(obj, p, kern, x, y)
    dr = _drift(obj, p, kern, x, y)
    for i in range(cfg.chain_len):
        mean_fwd = x + 0.5 * h * dr
        prop = mean_fwd + sqrt_h * rng.standard_normal(y.shape)
        lq_prop = _log_q(obj, p, kern, prop, y)
        dr_prop = _drift(obj, p, kern, prop, y)
        back = x - prop - 0.5 * h * dr_prop
        fwd = prop - mean_fwd
        log_ratio = (
            lq_prop - lq
            - np.sum(back * back, axis=-1) / (2 * h)
            + np.sum(fwd * fwd, axis=-1) / (2 * h)
        )
        accept = np.log(rng.uniform(size=batch)) < log_ratio
        x = np.where(accept[..., None], prop, x)
        lq = np.where(accept, lq_prop, lq)
        dr = np.where(accept[..., None], dr_prop, dr)
        accepted += accept
        _check(x, i)
        if i >= n_burn:
            kept[i - n_burn] = x
    rate = accepted / cfg.chain_len
    notes = []
    lo, hi = HEALTHY_ACCEPTANCE
    if np.any(rate < lo) or np.any(rate > hi):
        notes.append(f"MALA acceptance rate {np.round(rate, 4).tolist()} outside [{lo}, {hi}]")
        warnings.warn(notes[-1], SamplerHealthWarning, stacklevel=2)
    return ConditionalChain(kept, rate, notes)


def score_from_samples(kern: KernelSpec, samples: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``-mean_i grad_y k(x_i, y)``; for the Gaussian kernel ``(mean_i x_i - y) / s**2``."""
    if kern.scale_sq is not None:
        return (samples.mean(axis=0) - y) / kern.scale_sq
    return -np.mean(kern.grad_y(samples, y), axis=0)


def score_via_conditional(
    obj: Objective, p: SamParams, kern: KernelSpec, y: np.ndarray, cfg: ConditionalSamplerConfig,
    x0: np.ndarray | None = None,
) -> ScoreEstimate:
    """Monte-Carlo estimate of the gradient of the smoothed log-density at ``y``."""
    y = np.asarray(y, dtype=float)
    chain = sample_conditional(obj, p, kern, y, cfg, x0=x0)
    score = score_from_samples(kern, chain.samples, y)
    return ScoreEstimate(score, chain.samples.shape[0], chain.acceptance_rate, chain.warnings)


def batch_means_ess(samples: np.ndarray, n_batches: int = 50) -> np.ndarray:
    """Effective sample size per coordinate from non-overlapping batch means."""
    n = samples.shape[0] - samples.shape[0] % n_batches
    s = samples[:n]
    var = s.var(axis=0, ddof=1)
    bm = s.reshape((n_batches, n // n_batches) + s.shape[1:]).mean(axis=1)
    var_mean = bm.var(axis=0, ddof=1) / n_batches
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(var_mean > 0, var / var_mean, float(n))
