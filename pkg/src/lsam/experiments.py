"""Objective registry, run dispatch and the three-basin selection experiment."""

from __future__ import annotations

import inspect
from dataclasses import dataclass

import numpy as np

from .dist import BASELINES, DistConfig, run_baseline, run_distributed
from .dual_loop import ScheduleSpec, run_chain
from .errors import ConfigurationError
from .landscapes import (
    BASIN_LABELS, make_basin_landscape, make_double_well, make_mlp_regression, make_quadratic,
)
from .metrics import MetricsLog
from .rng import stream
from .sam_map import SamParams

OBJECTIVES = {
    "quadratic": make_quadratic,
    "double_well": make_double_well,
    "basin3": make_basin_landscape,
    "mlp": make_mlp_regression,
}
CHAIN_ALGORITHMS = ("esgd", "lsam-chain")
DIST_ALGORITHMS = ("lsam",) + tuple(a.lower() for a in BASELINES)
ALGORITHMS = CHAIN_ALGORITHMS + DIST_ALGORITHMS


def make_objective(name: str, params: dict | None = None):
    """Build a shipped objective by name; unknown parameters are rejected."""
    if name not in OBJECTIVES:
        raise ConfigurationError(f"unknown objective {name!r}; choose from {sorted(OBJECTIVES)}")
    factory = OBJECTIVES[name]
    params = dict(params or {})
    accepted = inspect.signature(factory).parameters
    unknown = sorted(set(params) - set(accepted))
    if unknown:
        raise ConfigurationError(f"objective {name!r} does not take {unknown}; accepted: {list(accepted)}")
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"objective {name!r}: {exc}") from exc


def default_init(obj, seed: int) -> np.ndarray:
    """Starting point when a config gives none: small Gaussian around the origin."""
    return 0.5 * stream(seed, "init").standard_normal(obj.dim)


def run_chain_logs(obj, sched: ScheduleSpec, sam: SamParams, x0, y0, horizon: int, seeds: list[int]):
    """Batched dual-loop run; one metrics stream per seed."""
    run = run_chain(obj, sched, sam, x0, y0, horizon, list(seeds))
    return [MetricsLog.from_chain(run.replica(i)) for i in range(len(seeds))], run


def run_dist_log(obj, algo: str, cfg: DistConfig, x0, y0, outer_steps: int, seed: int):
    """Distributed run (``lsam`` or a baseline); every worker starts at ``x0``."""
    x0s = [np.asarray(x0, dtype=float)] * cfg.n_workers
    if algo == "lsam":
        return run_distributed(obj, cfg, x0s, y0, outer_steps, seed=seed)
    return run_baseline(obj, algo.upper(), cfg, x0s, y0, outer_steps, seed=seed)


@dataclass(frozen=True)
class BasinSettings:
    """Knobs of the basin-selection comparison.

    ESGD is the noise-free coupled chain (no perturbation).  SAM is one
    chain without coupling at radius ``rho``.  LSAM is the distributed
    sampler with the same ``rho``.  Step sizes of the two single chains sit
    at their convergence caps.
    """

    n_inits: int = 200
    seed: int = 0
    rho: float = 0.1
    esgd_lambda: float = 1.0
    esgd_alpha: float = 0.5
    chain_steps: int = 20_000
    n_workers: int = 4
    tau: int = 16
    eta_inner: float = 0.02
    lambda0: float = 0.1
    eta_outer: float = 0.1
    outer_steps: int = 300
    classify_steps: int = 10_000


@dataclass
class BasinResult:
    fractions: dict  # algorithm -> array of per-basin fractions (BASIN_LABELS order)
    labels: dict  # algorithm -> per-init basin index
    settings: BasinSettings

    def wide_deep(self, algo: str) -> float:
        return float(self.fractions[algo][BASIN_LABELS.index("wide-deep")])

    def table(self) -> str:
        head = f"{'algorithm':<10}" + "".join(f"{lab:>14}" for lab in BASIN_LABELS)
        rows = [head]
        for algo, fr in self.fractions.items():
            rows.append(f"{algo:<10}" + "".join(f"{v:>14.3f}" for v in fr))
        return "\n".join(rows)


def basin_selection(settings: BasinSettings | None = None) -> BasinResult:
    """Run ESGD, SAM and LSAM from the same uniform inits and classify the end points."""
    st = settings or BasinSettings()
    obj = make_basin_landscape()
    lo, hi = obj.domain
    x0 = stream(st.seed, "basin", "init").uniform(lo, hi, size=(st.n_inits, 2))
    seeds = list(range(st.n_inits))
    L = obj.smoothness_L

    esgd = ScheduleSpec(
        eta0=1.0 / (L + st.esgd_lambda), lambda_=st.esgd_lambda, alpha=st.esgd_alpha, eta_mode="constant",
    )
    x_esgd = run_chain(obj, esgd, None, x0, x0, st.chain_steps, seeds).final.y

    sam = ScheduleSpec(eta0=1.0 / (4.0 * L), rho_mode="constant", rho0=st.rho, eta_mode="constant")
    x_sam = run_chain(obj, sam, SamParams(st.rho), x0, x0, st.chain_steps, seeds).final.x

    cfg = DistConfig(
        st.n_workers, st.tau, st.eta_inner, st.lambda0, eta_outer=st.eta_outer,
        sam=SamParams(st.rho), seed=st.seed,
    )
    x_lsam = run_distributed(obj, cfg, [x0] * st.n_workers, x0, st.outer_steps, record=False).center.y

    labels, fractions = {}, {}
    for algo, pts in (("ESGD", x_esgd), ("SAM", x_sam), ("LSAM", x_lsam)):
        lab = obj.classify(pts, steps=st.classify_steps)
        labels[algo] = lab
        fractions[algo] = np.bincount(lab, minlength=len(BASIN_LABELS)) / len(lab)
    return BasinResult(fractions, labels, st)
