"""Verification suites: each check returns a :class:`CriterionResult`.

Suites share expensive runs through module-level caches, so running
``rates`` and then ``anchor`` reuses the same chains.  Every verification
run that logs diagnostics is registered for the gradient-split identity
check.
"""

from __future__ import annotations

import functools
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conditional import ConditionalSamplerConfig, score_via_conditional
from .dist import DistConfig, run_distributed
from .dual_loop import ScheduleSpec, anchor_gap_bound, run_chain
from .experiments import BasinSettings, basin_selection
from .kernels import gaussian_kernel, lsam_log_density_on_grid
from .landscapes import make_basin_landscape, make_double_well, make_mlp_regression, make_quadratic
from .metrics import write_csv
from .quadrature import QuadratureGrid
from .rng import stream
from .sam_map import SamParams, sam_grid_1d, sam_loss, sam_partition_piecewise_1d

SUITES = ("densities", "score", "rates", "anchor", "distributed", "basins")

# frozen outcome of the first verified basin run (fractions of 200 inits)
BASIN_REGRESSION = {"ESGD": 0.52, "SAM": 0.53, "LSAM": 0.87}


@dataclass
class CriterionResult:
    name: str
    passed: bool
    measured: str
    threshold: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: measured {self.measured}; threshold {self.threshold} [{self.seconds:.1f}s]"


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    return wrapper


# every (label, grad_norm_sq, G_norm_sq, z_norm_sq, lambda) logged by a verification run
_LOGGED: list[tuple] = []


def _register(label, gg, GG, zz, lam):
    _LOGGED.append((label, np.asarray(gg, dtype=float), np.asarray(GG, dtype=float),
                    np.asarray(zz, dtype=float), float(lam)))


def _register_chain(label, run):
    _register(label, run.grad_norm_sq, run.G_norm_sq, run.z_norm_sq, run.lambda_)


def _register_log(label, log, lam):
    _register(label, log.column("grad_norm_sq"), log.column("G_norm_sq"), log.column("z_norm_sq"), lam)


def logged_runs() -> list[str]:
    """Labels of the runs the gradient-split check will inspect."""
    return [entry[0] for entry in _LOGGED]


# objective-level checks

def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def shipped_objectives():
    return {
        "quadratic": make_quadratic(3, [1.0, 2.0, 5.0]),
        "double_well": make_double_well(2),
        "basin3": make_basin_landscape(),
        "mlp": make_mlp_regression(hidden=8, samples=64, seed=0),
    }


@_timed
def check_gradients(n_points: int = 20, tol: float = 1e-5) -> CriterionResult:
    rng = stream(0, "verify", "gradients")
    worst = {}
    for name, obj in shipped_objectives().items():
        errs = []
        scale = 1.0 if name == "mlp" else 2.0
        for _ in range(n_points):
            x = scale * rng.standard_normal(obj.dim)
            g = obj.grad(x)
            fd = central_difference(obj.eval, x)
            errs.append(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-8))
        worst[name] = max(errs)
    m = max(worst.values())
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    return CriterionResult("gradient correctness", m < tol, f"max rel err {m:.2e} ({detail})", f"< {tol:g}")


def _density_testbeds():
    return {"quadratic": make_quadratic(1, [1.0]), "double_well": make_double_well(1)}


@_timed
def check_densities(tol: float = 1e-6) -> CriterionResult:
    """Normalization on grids that split at the jumps of the look-back map.

    ``Z`` comes from one grid; the normalized densities are integrated on
    different grids, so agreement with 1 measures quadrature accuracy.
    """
    y_grid = QuadratureGrid.symmetric(14.0, 4e-3, 1)
    worst = 0.0
    convex_ok = True
    notes = []
    for name, obj in _density_testbeds().items():
        z0 = sam_partition_piecewise_1d(obj, SamParams(0.0), 8.0, 0.02)
        for rho in (0.0, 0.05):
            p = SamParams(rho)
            z = sam_partition_piecewise_1d(obj, p, 8.0, 0.02)
            alt = sam_grid_1d(obj, p, 9.0, 0.015)
            mass_sam = float(np.exp(alt.log_weights() - sam_loss(obj, p, alt.points())).sum() / z)
            worst = max(worst, abs(mass_sam - 1.0))
            if name == "quadratic" and rho > 0:
                convex_ok &= z <= z0
                notes.append(f"Z_rho/Z_0={z / z0:.4f}")
            x_grid = sam_grid_1d(obj, p, 8.0, 0.02)
            for s in (0.5, 1.0):
                kern = gaussian_kernel(s, 1)
                logd = lsam_log_density_on_grid(obj, p, kern, x_grid, ys=y_grid.points())
                mass = float(np.exp(logd + y_grid.log_weights()).sum())
                worst = max(worst, abs(mass - 1.0))
    passed = worst < tol and convex_ok
    return CriterionResult(
        "density validity", passed,
        f"max |mass-1| {worst:.2e}, convex Z_rho <= Z_0: {convex_ok} ({', '.join(notes)})",
        f"< {tol:g} and Z_rho <= Z_0",
    )


# score identity

@_timed
def check_score(tol: float = 0.05) -> CriterionResult:
    ys = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])[:, None]
    s = 1.0
    quad = make_quadratic(1, [1.0])
    est = score_via_conditional(
        quad, SamParams(0.0), gaussian_kernel(s, 1), ys,
        ConditionalSamplerConfig("MALA", step=1.0, chain_len=100_000, seed=1),
    )
    exact = -ys[:, 0] / (1 + s * s)
    err_conj = float(np.max(np.abs(est.score[:, 0] - exact)))

    dw = make_double_well(1)
    p = SamParams(0.05, gamma=1e-8)
    kern = gaussian_kernel(0.5, 1)
    grid = sam_grid_1d(dw, p, 6.0, 0.01)
    h = 1e-3
    lp = lsam_log_density_on_grid(dw, p, kern, grid, ys=np.concatenate([ys + h, ys - h]))
    fd = (lp[: len(ys)] - lp[len(ys):]) / (2 * h)
    est_dw = score_via_conditional(
        dw, p, kern, ys, ConditionalSamplerConfig("MALA", step=0.4, chain_len=100_000, seed=2),
    )
    err_dw = float(np.max(np.abs(est_dw.score[:, 0] - fd)))
    return CriterionResult(
        "score identity", max(err_conj, err_dw) < tol,
        f"conjugate max err {err_conj:.4f}, double-well max err {err_dw:.4f}", f"< {tol:g} absolute",
    )


# convergence-rate runs (quadratic testbed, L = 2)

QUAD_H = (1.0, 2.0)
QUAD_X0 = np.array([2.0, -1.0])
LAM = 1.0
ALPHA = 0.5


def _quad(sigma):
    return make_quadratic(2, list(QUAD_H), noise_sigma=sigma)


def esgd_schedule():
    L = max(QUAD_H)
    return ScheduleSpec(eta0=1.0 / (L + LAM), lambda_=LAM, alpha=ALPHA)


def decaying_schedule(rho0=0.5):
    L = max(QUAD_H)
    return ScheduleSpec(eta0=1.0 / (4 * (L + LAM)), rho_mode="decaying", rho0=rho0, lambda_=LAM, alpha=ALPHA)


def constant_schedule(rho):
    L = max(QUAD_H)
    return ScheduleSpec(eta0=1.0 / (4 * (L + LAM)), rho_mode="constant", rho0=rho, lambda_=LAM, alpha=ALPHA)


@functools.lru_cache(maxsize=None)
def esgd_run(T: int = 100_000, n_seeds: int = 10):
    run = run_chain(_quad(0.5), esgd_schedule(), None, QUAD_X0, QUAD_X0, T, list(range(n_seeds)))
    _register_chain("esgd", run)
    return run


@functools.lru_cache(maxsize=None)
def decaying_run(T: int = 1_000_000, n_seeds: int = 4):
    run = run_chain(_quad(0.1), decaying_schedule(), None, QUAD_X0, QUAD_X0, T, list(range(n_seeds)))
    _register_chain("decaying-rho", run)
    return run


@functools.lru_cache(maxsize=None)
def constant_runs(T: int = 100_000, n_seeds: int = 10):
    # noise-free oracle so the rho-induced neighbourhood is not masked by gradient noise
    x0 = 2.0 * stream(0, "verify", "constant-rho").standard_normal((n_seeds, 2))
    out = {}
    for rho in (0.05, 0.1, 0.2):
        run = run_chain(_quad(0.0), constant_schedule(rho), None, x0, x0, T, list(range(n_seeds)))
        _register_chain(f"constant-rho-{rho}", run)
        out[rho] = run
    return out


def rate_statistic(run) -> np.ndarray:
    """Seed-averaged running mean of ``||G_t||^2`` times ``sqrt(t) / log t`` (t counts from 1)."""
    avg = run.running_avg("G_norm_sq")
    avg = avg.mean(axis=1) if avg.ndim > 1 else avg
    t = np.arange(1, avg.shape[0] + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return avg * np.sqrt(t) / np.log(t)


def _window(stat, lo, hi):
    return stat[lo - 1:hi]


@_timed
def check_rate_esgd() -> CriterionResult:
    stat = rate_statistic(esgd_run())
    c = float(_window(stat, 100, 1000).mean())
    late = float(_window(stat, 10_000, 100_000).max())
    return CriterionResult(
        "ESGD rate", late <= 2 * c, f"late max {late:.4g}, fitted c {c:.4g}", "late <= 2c",
    )


@_timed
def check_rate_constant_rho() -> CriterionResult:
    runs = constant_runs()
    L = max(QUAD_H)
    ok = True
    parts = []
    plateau = {}
    for rho, run in runs.items():
        T = run.T
        stat = rate_statistic(run)
        c = float(_window(stat, 100, 1000).mean())
        slack = c * np.log(T) / np.sqrt(T)
        tail = float(run.G_norm_sq[-T // 10:].mean())
        avg = float(run.avg_G_norm_sq.mean())
        bound = 4 * L * L * rho * rho + slack
        ok &= tail <= bound and avg <= bound
        plateau[rho] = tail
        parts.append(f"rho={rho}: plateau {tail:.3g}, avg {avg:.3g}, bound {bound:.3g}")
    ratio = plateau[0.2] / plateau[0.1]
    ok &= 2.0 <= ratio <= 8.0
    return CriterionResult(
        "constant-rho neighbourhood", ok, "; ".join(parts) + f"; ratio(0.2/0.1) {ratio:.3f}",
        "plateau and avg <= 4 L^2 rho^2 + c log T/sqrt T; ratio in [2, 8]",
    )


def window_means(col: np.ndarray, ends=(1_000, 10_000, 100_000, 1_000_000)) -> list[float]:
    """Mean over ``[0.9 t, t]`` (1-indexed) for each decade end ``t``."""
    out = []
    for t in ends:
        w = col[int(0.9 * t):t]
        out.append(float(w.mean()))
    return out


@_timed
def check_rate_decaying_rho() -> CriterionResult:
    run = decaying_run()
    G = run.G_norm_sq.mean(axis=1)
    tail = float(G[-run.T // 10:].mean())
    wins = window_means(G)
    decreasing = all(b < a for a, b in zip(wins, wins[1:]))
    return CriterionResult(
        "decaying-rho vanishing", tail < 1e-2 and decreasing,
        f"tail mean {tail:.3g}, windows {[f'{w:.2e}' for w in wins]}",
        "tail < 1e-2 and windows strictly decreasing",
    )


# anchor gap

def binned_loglog_slope(col: np.ndarray, lo: int, hi: int, bins: int = 20) -> float:
    """Slope of log window-means against log window centers over ``[lo, hi]`` (1-indexed)."""
    edges = np.unique(np.geomspace(lo, hi, bins + 1).astype(int))
    centers, means = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        centers.append(np.sqrt(a * b))
        means.append(col[a - 1:b].mean())
    return float(np.polyfit(np.log(centers), np.log(means), 1)[0])


def pathwise_gap(obj, sched, x0, T):
    """Max ``||z_t||`` and max ``||x_t||`` of a single noise-free run from ``x0 = y0``."""
    acc = {"z": 0.0, "x": float(np.linalg.norm(x0))}

    def watch(t, x, y, x_new, y_new, g):
        acc["z"] = max(acc["z"], float(np.linalg.norm(x_new - y_new)))
        acc["x"] = max(acc["x"], float(np.linalg.norm(x_new)))

    run = run_chain(obj, sched, None, x0, x0, T, 0, on_step=watch)
    _register_chain("pathwise", run)
    return acc["z"], acc["x"]


@_timed
def check_anchor_gap() -> CriterionResult:
    slopes = {}
    for label, run in (("esgd", esgd_run()), ("decaying-rho", decaying_run())):
        zz = run.z_norm_sq.mean(axis=1)
        slopes[label] = binned_loglog_slope(zz, 1_000, 100_000)
    radius = 2.0 * float(np.linalg.norm(QUAD_X0))
    obj = _quad(0.0)
    pathwise = {}
    ok_path = True
    for label, sched in (("esgd", esgd_schedule()), ("decaying-rho", decaying_schedule())):
        zmax, xmax = pathwise_gap(obj, sched, QUAD_X0, 100_000)
        D = anchor_gap_bound(obj, sched, radius)
        pathwise[label] = (zmax, D)
        ok_path &= xmax <= radius and zmax <= D
    ok = ok_path and all(s <= -0.4 for s in slopes.values())
    return CriterionResult(
        "anchor gap", ok,
        ", ".join(f"slope[{k}] {v:.3f}" for k, v in slopes.items())
        + "; " + ", ".join(f"max|z|[{k}] {z:.3g} vs D {d:.3g}" for k, (z, d) in pathwise.items()),
        "slopes <= -0.4 and max|z| <= D",
    )


@_timed
def check_gradient_split(rel: float = 1e-9) -> CriterionResult:
    worst = -np.inf
    n_rows = 0
    bad = []
    for label, gg, GG, zz, lam in _LOGGED:
        rhs = 2 * GG + 2 * lam * lam * zz
        excess = (gg - rhs) / np.maximum(np.abs(rhs), np.finfo(float).tiny)
        n_rows += gg.size
        w = float(np.max(excess)) if gg.size else -np.inf
        worst = max(worst, w)
        if w > rel:
            bad.append(label)
    return CriterionResult(
        "gradient split identity", n_rows > 0 and not bad,
        f"{n_rows} logged rows from {len(_LOGGED)} runs, worst relative excess {worst:.2e}"
        + (f", violations in {bad}" if bad else ""),
        f"grad <= 2 G + 2 lam^2 z within {rel:g} relative",
    )


# distributed protocol

def _protocol_cfg(scheduler="round-robin"):
    return DistConfig(4, 16, 0.05, 0.5, eta_outer=0.1, sam=SamParams(0.05), scheduler=scheduler, seed=7)


def _protocol_inits():
    return [np.array([1.0, -1.0]) * (i + 1) for i in range(4)], np.zeros(2)


def protocol_run(scheduler="round-robin", outer=100):
    obj = _quad(0.5)
    cfg = _protocol_cfg(scheduler)
    x0s, y0 = _protocol_inits()
    resets = []

    def watch(ev, center, workers):
        resets.append(all(w.t_x == 0 and not np.any(w.sample_sum) for w in workers))

    run = run_distributed(obj, cfg, x0s, y0, outer, on_sync=watch)
    _register_log(f"dist-{scheduler}", run.metrics, cfg.lambda_)
    return run, resets


def _csv_bytes(run) -> bytes:
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "m.csv"
        write_csv(p, run.metrics.records())
        return p.read_bytes()


def concurrent_trials(n_trials: int = 20, seed: int = 0) -> list[dict]:
    rng = stream(seed, "verify", "concurrent")
    obj = _quad(0.5)
    out = []
    for k in range(n_trials):
        n = int(rng.integers(1, 6))
        tau = int(rng.integers(1, 12))
        steps = int(rng.integers(3, 25))
        cfg = DistConfig(n, tau, 0.05, 0.5, eta_outer=0.1, scheduler="real-concurrent", seed=k)
        x0s = [rng.standard_normal(2) for _ in range(n)]
        run = run_distributed(obj, cfg, x0s, np.zeros(2), steps)
        totals = [e.worker_iteration_total for e in run.syncs]
        st = run.protocol
        out.append({
            "n": n, "tau": tau, "steps": steps,
            "cadence": totals == [cfg.period * (i + 1) for i in range(steps)],
            "conservation": st["requests"] == st["responses"] and st["samples"] == steps * cfg.period
            and st["stops"] == n and st["queue_empty"],
            "counters_reset": st["counters_reset"],
        })
    return out


@_timed
def check_protocol() -> CriterionResult:
    run, resets = protocol_run("round-robin")
    totals = [e.worker_iteration_total for e in run.syncs]
    cadence = totals == [64 * (k + 1) for k in range(100)]
    reset_ok = len(resets) == 100 and all(resets)
    replay = _csv_bytes(run) == _csv_bytes(protocol_run("round-robin")[0])
    rnd = protocol_run("seeded-random")[0]
    replay_rnd = _csv_bytes(rnd) == _csv_bytes(protocol_run("seeded-random")[0])
    lag_ok = run.max_view_lag <= 1
    trials = concurrent_trials()
    conc_ok = all(t["cadence"] and t["conservation"] and t["counters_reset"] for t in trials)
    ok = cadence and reset_ok and replay and replay_rnd and lag_ok and conc_ok
    return CriterionResult(
        "distributed protocol", ok,
        f"cadence {cadence}, resets {reset_ok}, replay rr/random {replay}/{replay_rnd}, "
        f"view lag {run.max_view_lag}, concurrent {sum(t['conservation'] and t['counters_reset'] and t['cadence'] for t in trials)}/{len(trials)}",
        "all invariants hold",
    )


def equivalence_gap(obj, eta, lambda0, alpha, rho, x0, y0, T):
    """Largest per-step gap between the single chain and the one-worker distributed run."""
    lam = lambda0 / eta
    cfg = DistConfig(1, 1, eta, lambda0, beta=0.0, eta_outer=alpha, momentum=0.0, temperature=0.0,
                     sam=SamParams(rho))
    sched = ScheduleSpec(eta0=eta, lambda_=lam, alpha=alpha, eta_mode="constant",
                         rho_mode="constant" if rho > 0 else "zero", rho0=rho)
    chain = []
    run_chain(obj, sched, SamParams(rho), x0, y0, T, 0,
              on_step=lambda t, x, y, xn, yn, g: chain.append(np.concatenate([xn, yn])))
    dist = []
    drun = run_distributed(obj, cfg, [x0], y0, T,
                           on_sync=lambda ev, c, ws: dist.append(np.concatenate([ws[0].x, c.y])))
    _register_log("equivalence", drun.metrics, cfg.lambda_)
    a, b = np.array(chain), np.array(dist)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(a))))


@_timed
def check_equivalence(tol: float = 1e-10) -> CriterionResult:
    gap_q = equivalence_gap(make_quadratic(2, [1.0, 2.0]), 0.05, 0.05, 0.5, 0.0,
                            np.array([3.0, -2.0]), np.array([-1.0, 1.0]), 10_000)
    gap_b = equivalence_gap(make_basin_landscape(), 0.005, 0.005, 0.5, 0.05,
                            np.array([3.5, -1.0]), np.array([-2.0, 1.0]), 10_000)
    return CriterionResult(
        "single-chain equivalence", max(gap_q, gap_b) <= tol,
        f"max per-step gap quadratic {gap_q:.2e}, basin3 with rho=0.05 {gap_b:.2e}", f"<= {tol:g}",
    )


# basin selection

@functools.lru_cache(maxsize=None)
def basin_result():
    return basin_selection(BasinSettings())


@_timed
def check_basins() -> CriterionResult:
    res = basin_result()
    l, e, s = res.wide_deep("LSAM"), res.wide_deep("ESGD"), res.wide_deep("SAM")
    return CriterionResult(
        "basin selection", l > e and l > s,
        f"wide-deep fraction LSAM {l:.3f}, SAM {s:.3f}, ESGD {e:.3f}", "LSAM > SAM and LSAM > ESGD",
    )


SUITE_CHECKS = {
    "densities": (check_gradients, check_densities),
    "score": (check_score,),
    "rates": (check_rate_esgd, check_rate_constant_rho, check_rate_decaying_rho, check_gradient_split),
    "anchor": (check_anchor_gap, check_gradient_split),
    "distributed": (check_protocol, check_equivalence, check_gradient_split),
    "basins": (check_basins,),
}


def run_suite(name: str, echo=print) -> list[CriterionResult]:
    """Run one suite (or ``"all"``), echoing one line per criterion."""
    names = SUITES if name == "all" else (name,)
    if any(n not in SUITE_CHECKS for n in names):
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    done = set()
    results = []
    for n in names:
        for check in SUITE_CHECKS[n]:
            if check is check_gradient_split and name == "all":
                continue
            if check in done:
                continue
            done.add(check)
            res = check()
            results.append(res)
            if echo:
                echo(res.line())
    if name == "all":
        res = check_gradient_split()
        results.append(res)
        if echo:
            echo(res.line())
    if "basins" in names and echo:
        echo(basin_result().table())
    return results
