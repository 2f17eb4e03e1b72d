"""Command line: ``lsam run``, ``lsam verify``, ``lsam sweep``."""

from __future__ import annotations

import argparse
import sys

from pydantic import ValidationError

from .config import format_validation_error, load_config
from .errors import ConfigurationError
from .runner import DEFAULT_MAX_RUNS, execute, parse_grid, sweep
from .verify import SUITES, run_suite


def _load(path):
    try:
        return load_config(path), None
    except ValidationError as exc:
        return None, format_validation_error(exc)
    except (OSError, ValueError) as exc:
        return None, f"cannot read config: {exc}"


def _apply_scheduler(cfg, scheduler):
    if scheduler is None:
        return cfg
    if cfg.dist is None:
        raise ConfigurationError("--scheduler needs a config with a 'dist' section")
    return cfg.model_copy(update={"dist": cfg.dist.model_copy(update={"scheduler": scheduler})})


def cmd_run(args) -> int:
    cfg, err = _load(args.config)
    if err:
        print(err, file=sys.stderr)
        return 2
    try:
        cfg = _apply_scheduler(cfg, args.scheduler)
        result = execute(cfg, args.out, seed_override=args.seed_override)
    except ConfigurationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    for o in result.outcomes:
        s = o.summary
        print(f"seed {o.seed}: {o.status}, rows {s.get('rows', 0)}, final f {s.get('final_f_val', float('nan')):.6g} -> {o.csv_path}")
    if not result.ok:
        print("numeric abort: metrics up to the last good step were written", file=sys.stderr)
        return 3
    return 0


def cmd_verify(args) -> int:
    results = run_suite(args.suite)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def cmd_sweep(args) -> int:
    cfg, err = _load(args.config)
    if err:
        print(err, file=sys.stderr)
        return 2
    try:
        cfg = _apply_scheduler(cfg, args.scheduler)
        if args.seed_override is not None:
            cfg = cfg.model_copy(update={"seeds": [args.seed_override]})
        grid = parse_grid(args.grid)
        rows = sweep(cfg, grid, args.out or cfg.output_path, max_runs=args.max_runs)
    except ConfigurationError as exc:
        print(f"sweep refused: {exc}", file=sys.stderr)
        return 2
    for r in rows:
        print(f"{r['rank']:>3} {r['run']} {r['status']:<8} final f {r['final_f_val']:.6g} {r['overrides']}")
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsam", description="Landscape-smoothed SAM experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (default: output_path of the config)")
    run.add_argument("--seed-override", type=int, default=None)
    run.add_argument("--scheduler", choices=["round-robin", "seeded-random", "real-concurrent"], default=None)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run verification suites")
    ver.add_argument("--suite", choices=SUITES + ("all",), default="all")
    ver.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="grid search over a base config")
    sw.add_argument("--config", required=True)
    sw.add_argument("--grid", default=None,
                    help="'default', a YAML file, or 'key=v1,v2;key2=v3' (keys: eta, rho, lambda0 or dotted paths)")
    sw.add_argument("--out", default=None)
    sw.add_argument("--max-runs", type=int, default=DEFAULT_MAX_RUNS)
    sw.add_argument("--seed-override", type=int, default=None)
    sw.add_argument("--scheduler", choices=["round-robin", "seeded-random", "real-concurrent"], default=None)
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
