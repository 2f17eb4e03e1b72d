"""Executes run configs and hyperparameter sweeps, writing metrics and summaries."""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .config import RunConfig, config_to_dict, parse_config, save_config
from .errors import ChainDivergenceError, ConfigurationError
from .experiments import default_init, make_objective, run_chain_logs, run_dist_log
from .metrics import MetricsLog, read_csv, summarize, write_csv, write_summary

# value sets of the standard hyperparameter grid
DEFAULT_GRID = {
    "eta": [0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
    "rho": [0.1, 0.05, 0.01],
    "lambda0": [0.1, 0.2, 0.5, 0.9],
}
DEFAULT_MAX_RUNS = 256


@dataclass
class SeedOutcome:
    seed: int
    status: str  # "ok" or "diverged"
    csv_path: Path
    summary_path: Path
    summary: dict


@dataclass
class RunOutcome:
    outcomes: list[SeedOutcome] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(o.status == "ok" for o in self.outcomes)


def _initial_points(cfg: RunConfig, obj, seeds):
    init = cfg.init
    if init is not None and init.x0 is not None:
        x0 = np.broadcast_to(np.asarray(init.x0, dtype=float), (len(seeds), obj.dim)).copy()
    else:
        x0 = np.stack([default_init(obj, s) for s in seeds])
    if init is not None and init.y0 is not None:
        y0 = np.broadcast_to(np.asarray(init.y0, dtype=float), (len(seeds), obj.dim)).copy()
    else:
        y0 = x0.copy()
    if x0.shape[-1] != obj.dim or y0.shape[-1] != obj.dim:
        raise ConfigurationError(f"init points must have dimension {obj.dim}")
    return x0, y0


def _persist(out: Path, seed: int, log: MetricsLog, status: str, cfg: RunConfig) -> SeedOutcome:
    csv_path = out / f"metrics_seed{seed}.csv"
    summary_path = out / f"summary_seed{seed}.json"
    rows = write_csv(csv_path, log.records())
    summary = summarize(rows)
    summary.update({"seed": seed, "status": status, "algorithm": cfg.algorithm, "objective": cfg.objective.name})
    write_summary(summary_path, summary)
    return SeedOutcome(seed, status, csv_path, summary_path, summary)


def execute(cfg: RunConfig, out: str | Path | None = None, seed_override: int | None = None) -> RunOutcome:
    """Run every seed of ``cfg``; one CSV plus one summary per seed under ``out``.

    A numeric abort flushes the metrics logged so far, marks the seed
    ``diverged`` and continues.  Configuration problems raise
    ConfigurationError before anything is written.
    """
    if seed_override is not None:
        cfg = cfg.model_copy(update={"seeds": [seed_override]})
    out = Path(out if out is not None else cfg.output_path)
    obj = make_objective(cfg.objective.name, cfg.objective.params)
    x0, y0 = _initial_points(cfg, obj, cfg.seeds)
    result = RunOutcome()

    if cfg.is_chain:
        sched = cfg.schedule.build()
        sched.check_cap(obj.smoothness_L)
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out / "config.yaml")
        try:
            logs, _ = run_chain_logs(obj, sched, cfg.sam_params(), x0, y0, cfg.horizon, cfg.seeds)
            status = "ok"
        except ChainDivergenceError as exc:
            partial = exc.diagnostics["partial"]
            logs = [MetricsLog.from_chain(partial.replica(i)) for i in range(len(cfg.seeds))]
            status = "diverged"
        for s, log in zip(cfg.seeds, logs):
            result.outcomes.append(_persist(out, s, log, status, cfg))
        return result

    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    for k, s in enumerate(cfg.seeds):
        dcfg = cfg.dist.build(cfg.sam.gamma, s)
        try:
            run = run_dist_log(obj, cfg.algorithm, dcfg, x0[k], y0[k], cfg.horizon, s)
            log, status = run.metrics, "ok"
        except ChainDivergenceError as exc:
            log, status = exc.diagnostics.get("metrics", MetricsLog()), "diverged"
        result.outcomes.append(_persist(out, s, log, status, cfg))
    return result


def recompute_summary(csv_path: str | Path) -> dict:
    """Summary statistics from a metrics CSV alone."""
    return summarize(read_csv(csv_path))


# sweeps

def parse_grid(spec: str | None) -> dict[str, list]:
    """``"default"``, a YAML file mapping keys to value lists, or ``"k=v1,v2;k2=v3"``."""
    if spec is None or spec.strip() == "":
        return {}
    if spec == "default":
        return copy.deepcopy(DEFAULT_GRID)
    p = Path(spec)
    if p.suffix in (".yaml", ".yml") and p.exists():
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    else:
        data = {}
        for part in filter(None, (s.strip() for s in spec.split(";"))):
            if "=" not in part:
                raise ConfigurationError(f"grid entry {part!r} is not key=v1,v2,...")
            key, vals = part.split("=", 1)
            data[key.strip()] = [yaml.safe_load(v) for v in vals.split(",") if v.strip()]
    if not isinstance(data, dict):
        raise ConfigurationError("grid spec must map keys to value lists")
    grid = {}
    for k, v in data.items():
        vals = v if isinstance(v, list) else [v]
        if not vals:
            raise ConfigurationError(f"grid key {k!r} has no values")
        grid[str(k)] = vals
    return grid


def _alias_paths(key: str, chain: bool) -> list[str]:
    aliases = {
        "eta": ["schedule.eta0"] if chain else ["dist.eta_inner"],
        "rho": ["schedule.rho0"] if chain else ["dist.rho"],
        "lambda0": ["schedule.lambda"] if chain else ["dist.lambda0"],
    }
    return aliases.get(key, [key])


def _set_path(d: dict, path: str, value):
    parts = path.split(".")
    cur = d
    for p in parts[:-1]:
        if not isinstance(cur.get(p), dict):
            cur[p] = {}
        cur = cur[p]
    cur[parts[-1]] = value


def expand_grid(base: RunConfig, grid: dict[str, list], max_runs: int = DEFAULT_MAX_RUNS) -> list[tuple[dict, dict]]:
    """Cartesian product of ``grid`` applied to ``base``; ``(overrides, config dict)`` per run."""
    n = int(np.prod([len(v) for v in grid.values()])) if grid else 1
    if n > max_runs:
        raise ConfigurationError(f"grid has {n} runs, above the cap of {max_runs}")
    keys = list(grid)
    runs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        d = config_to_dict(base)
        overrides = dict(zip(keys, combo))
        for k, v in overrides.items():
            for path in _alias_paths(k, base.is_chain):
                _set_path(d, path, v)
        runs.append((overrides, d))
    return runs


def sweep(base: RunConfig, grid: dict[str, list], out: str | Path, max_runs: int = DEFAULT_MAX_RUNS) -> list[dict]:
    """Run every grid point; write ``sweep_summary.json`` ranked by mean final objective."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (overrides, d) in enumerate(expand_grid(base, grid, max_runs)):
        run_dir = out / f"run_{k:03d}"
        row = {"run": run_dir.name, "overrides": overrides}
        try:
            outcome = execute(parse_config(d), run_dir)
            finals = [o.summary.get("final_f_val", float("nan")) for o in outcome.outcomes]
            row["status"] = "ok" if outcome.ok else "diverged"
            row["final_f_val"] = float(np.mean(finals)) if outcome.ok else float("nan")
        except (ConfigurationError, ValueError) as exc:
            row["status"] = "invalid"
            row["error"] = str(exc)
            row["final_f_val"] = float("nan")
        rows.append(row)
    rows.sort(key=lambda r: (r["status"] != "ok", r["final_f_val"] if r["status"] == "ok" else 0.0))
    for rank, r in enumerate(rows, 1):
        r["rank"] = rank
    (out / "sweep_summary.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    return rows
