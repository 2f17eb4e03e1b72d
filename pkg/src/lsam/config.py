"""Run configuration: one YAML file fully determines a run, seeds included."""

from __future__ import annotations

import inspect
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dist import SCHEDULERS, DistConfig
from .dual_loop import ETA_MODES, RHO_MODES, ScheduleSpec
from .experiments import ALGORITHMS, CHAIN_ALGORITHMS, OBJECTIVES
from .sam_map import SamParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)


class ObjectiveModel(_Strict):
    name: Literal[tuple(OBJECTIVES)]  # type: ignore[valid-type]
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _known_params(self):
        accepted = inspect.signature(OBJECTIVES[self.name]).parameters
        unknown = sorted(set(self.params) - set(accepted))
        if unknown:
            raise ValueError(f"objective {self.name!r} does not take {unknown}; accepted: {list(accepted)}")
        return self


class ScheduleModel(_Strict):
    eta0: float = Field(gt=0)
    rho_mode: Literal[RHO_MODES] = "zero"  # type: ignore[valid-type]
    rho0: float = Field(0.0, ge=0)
    lambda_: float = Field(0.0, ge=0, alias="lambda")
    alpha: float = Field(1.0, gt=0, le=1)
    eta_mode: Literal[ETA_MODES] = "inv_sqrt"  # type: ignore[valid-type]
    decay_at: int | None = Field(None, ge=0)
    decay_factor: float = Field(0.1, gt=0)

    def build(self) -> ScheduleSpec:
        return ScheduleSpec(
            self.eta0, self.rho_mode, self.rho0, self.lambda_, self.alpha,
            self.eta_mode, self.decay_at, self.decay_factor,
        )


class SamModel(_Strict):
    gamma: float | None = Field(None, gt=0)


class DistModel(_Strict):
    n_workers: int = Field(gt=0)
    tau: int = Field(gt=0)
    eta_inner: float = Field(gt=0)
    lambda0: float = Field(gt=0)
    beta: float = Field(0.9, ge=0)
    eta_outer: float = Field(1.0, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    temperature: float = Field(1.0, ge=0)
    inner_momentum: float = Field(0.0, ge=0, lt=1)
    rho: float = Field(0.0, ge=0)
    scheduler: Literal[SCHEDULERS] = "round-robin"  # type: ignore[valid-type]

    def build(self, gamma: float | None, seed: int) -> DistConfig:
        return DistConfig(
            self.n_workers, self.tau, self.eta_inner, self.lambda0, beta=self.beta,
            eta_outer=self.eta_outer, momentum=self.momentum, temperature=self.temperature,
            inner_momentum=self.inner_momentum, sam=SamParams(self.rho, gamma),
            scheduler=self.scheduler, seed=seed,
        )


class InitModel(_Strict):
    x0: list[float] | None = None
    y0: list[float] | None = None


class RunConfig(_Strict):
    """``horizon`` counts steps for single-chain algorithms and outer steps otherwise."""

    objective: ObjectiveModel
    algorithm: Literal[ALGORITHMS]  # type: ignore[valid-type]
    schedule: ScheduleModel | None = None
    sam: SamModel = Field(default_factory=SamModel)
    dist: DistModel | None = None
    horizon: int = Field(gt=0)
    seeds: list[int] = Field(min_length=1)
    output_path: str = "runs"
    init: InitModel | None = None

    @model_validator(mode="after")
    def _sections_match_algorithm(self):
        if self.algorithm in CHAIN_ALGORITHMS:
            if self.schedule is None:
                raise ValueError(f"algorithm {self.algorithm!r} needs a 'schedule' section")
            if self.algorithm == "esgd" and self.schedule.rho_mode != "zero":
                raise ValueError("algorithm 'esgd' runs without perturbation; use rho_mode 'zero' or 'lsam-chain'")
            if self.algorithm == "lsam-chain" and self.schedule.rho_mode == "zero":
                raise ValueError("algorithm 'lsam-chain' needs rho_mode 'constant' or 'decaying'")
        elif self.dist is None:
            raise ValueError(f"algorithm {self.algorithm!r} needs a 'dist' section")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        return self

    @property
    def is_chain(self) -> bool:
        return self.algorithm in CHAIN_ALGORITHMS

    def sam_params(self) -> SamParams:
        return SamParams(0.0, self.sam.gamma)


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid config:\n" + "\n".join(lines)


def parse_config(data: dict) -> RunConfig:
    return RunConfig.model_validate(data)


def load_config(path: str | Path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return parse_config(data)


def config_to_dict(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json", by_alias=True, exclude_none=True)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")
