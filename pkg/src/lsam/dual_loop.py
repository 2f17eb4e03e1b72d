"""Single-chain coupled update of a worker ``x`` and an anchor ``y``.

    x_{t+1} = x_t - eta_t (g_t + lam (x_t - y_t))
    y_{t+1} = alpha x_{t+1} + (1 - alpha) y_t

``g_t`` is a plain stochastic gradient (``rho_mode="zero"``) or the
single-sample SAM gradient with constant or decaying radius.  Every step
also reports exact-gradient diagnostics at ``(x_t, y_t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChainDivergenceError, ConfigurationError
from .landscapes import NoiseStream, Objective
from .rng import stream
from .sam_map import SamParams, sam_stochastic_grad

RHO_MODES = ("zero", "constant", "decaying")
ETA_MODES = ("inv_sqrt", "constant", "step")
DIAGNOSTIC_FIELDS = ("f_val", "grad_norm_sq", "G_norm_sq", "z_norm_sq", "phi")


@dataclass(frozen=True)
class ScheduleSpec:
    """Step-size and perturbation schedules plus the coupling constants.

    ``eta_mode="inv_sqrt"`` gives ``eta0 / sqrt(t + 1)``.  ``"constant"``
    and ``"step"`` (multiply by ``decay_factor`` from ``decay_at`` on) are
    there for experiments outside the convergence checks.
    """

    eta0: float
    rho_mode: str = "zero"
    rho0: float = 0.0
    lambda_: float = 0.0
    alpha: float = 1.0
    eta_mode: str = "inv_sqrt"
    decay_at: int | None = None
    decay_factor: float = 0.1

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ConfigurationError(f"eta0 must be > 0, got {self.eta0}")
        if self.rho_mode not in RHO_MODES:
            raise ConfigurationError(f"rho_mode must be one of {RHO_MODES}, got {self.rho_mode!r}")
        if self.eta_mode not in ETA_MODES:
            raise ConfigurationError(f"eta_mode must be one of {ETA_MODES}, got {self.eta_mode!r}")
        if self.rho0 < 0 or self.lambda_ < 0:
            raise ConfigurationError("rho0 and lambda_ must be nonnegative")
        if self.rho_mode != "zero" and not self.rho0 > 0:
            raise ConfigurationError(f"rho_mode={self.rho_mode!r} needs rho0 > 0")
        if not 0 < self.alpha <= 1:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.eta_mode == "step" and self.decay_at is None:
            raise ConfigurationError("eta_mode='step' needs decay_at")

    def eta(self, t: int) -> float:
        if self.eta_mode == "inv_sqrt":
            return self.eta0 / np.sqrt(t + 1)
        if self.eta_mode == "step" and t >= self.decay_at:
            return self.eta0 * self.decay_factor
        return self.eta0

    def rho(self, t: int) -> float:
        if self.rho_mode == "zero":
            return 0.0
        if self.rho_mode == "constant":
            return self.rho0
        return self.rho0 / np.sqrt(t + 1)

    def step_cap(self, L: float) -> tuple[float, str]:
        if self.rho_mode == "zero":
            return 1.0 / (L + self.lambda_), "η₀ ≤ 1/(L+λ)"
        return 1.0 / (4.0 * (L + self.lambda_)), "η₀ ≤ 1/(4(L+λ))"

    def check_cap(self, L: float | None) -> None:
        """Raise ConfigurationError when ``eta0`` exceeds the convergence cap.

        Skipped when the smoothness constant is unknown.
        """
        if L is None:
            return
        cap, label = self.step_cap(L)
        if self.eta0 > cap * (1 + 1e-12):
            raise ConfigurationError(
                f"step-size cap violated: {label} requires eta0 <= {cap:.6g} "
                f"(L={L:.6g}, lambda={self.lambda_:g}), got eta0={self.eta0:g}"
            )


@dataclass(frozen=True)
class ChainState:
    x: np.ndarray
    y: np.ndarray
    t: int = 0
    rng_seed: int = 0


@dataclass(frozen=True)
class StepDiagnostics:
    f_val: np.ndarray
    grad_norm_sq: np.ndarray
    G_norm_sq: np.ndarray
    z_norm_sq: np.ndarray
    phi: np.ndarray


def _sq(v):
    return np.sum(v * v, axis=-1)


def _diagnose(obj, lam, x, y):
    g = obj.grad(x)
    z = x - y
    G = g + lam * z
    zz = _sq(z)
    f = obj.eval(x)
    return f, _sq(g), _sq(G), zz, f + 0.5 * lam * zz


def _draw_g(obj, sched, sam, x, xi, t):
    if sched.rho_mode == "zero":
        return obj.stochastic_grad(x, xi)
    return sam_stochastic_grad(obj, sam, x, xi, rho=sched.rho(t))


def _update(sched, x, y, g, t):
    eta = sched.eta(t)
    x_new = x - eta * (g + sched.lambda_ * (x - y))
    y_new = sched.alpha * x_new + (1.0 - sched.alpha) * y
    return x_new, y_new


def step(
    obj: Objective,
    sched: ScheduleSpec,
    sam: SamParams | None,
    state: ChainState,
    xi: np.ndarray | None = None,
) -> tuple[ChainState, StepDiagnostics]:
    """One coupled update from ``state``; diagnostics describe ``state`` itself.

    ``rho_t`` comes from ``sched``; ``sam`` only contributes ``gamma``.
    Without ``xi`` the noise is drawn from a stream keyed by
    ``(state.rng_seed, state.t)``, which differs from the block-drawn
    stream :func:`run_chain` uses.
    """
    sam = sam or SamParams()
    sched.check_cap(obj.smoothness_L)
    x = np.asarray(state.x, dtype=float)
    y = np.asarray(state.y, dtype=float)
    if x.shape != y.shape:
        raise ConfigurationError(f"x and y shapes differ: {x.shape} vs {y.shape}")
    if xi is None:
        xi = obj.noise(stream(state.rng_seed, "step", state.t), x.shape[:-1])
    diag = StepDiagnostics(*_diagnose(obj, sched.lambda_, x, y))
    g = _draw_g(obj, sched, sam, x, xi, state.t)
    x_new, y_new = _update(sched, x, y, g, state.t)
    return ChainState(x_new, y_new, state.t + 1, state.rng_seed), diag


@dataclass
class ChainRun:
    """Per-step diagnostics as columns of shape ``(T, *batch)``."""

    f_val: np.ndarray
    grad_norm_sq: np.ndarray
    G_norm_sq: np.ndarray
    z_norm_sq: np.ndarray
    phi: np.ndarray
    final: ChainState
    lambda_: float
    seeds: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.f_val.shape[0]

    @property
    def avg_G_norm_sq(self) -> np.ndarray:
        return self.G_norm_sq.mean(axis=0)

    def running_avg(self, name: str = "G_norm_sq") -> np.ndarray:
        col = getattr(self, name)
        n = np.arange(1, col.shape[0] + 1).reshape((-1,) + (1,) * (col.ndim - 1))
        return np.cumsum(col, axis=0) / n

    def replica(self, i: int) -> "ChainRun":
        pick = lambda a: a[:, i]
        return ChainRun(
            *(pick(getattr(self, k)) for k in DIAGNOSTIC_FIELDS),
            final=ChainState(self.final.x[i], self.final.y[i], self.final.t, self.seeds[i]),
            lambda_=self.lambda_, seeds=[self.seeds[i]],
        )


def run_chain(
    obj: Objective,
    sched: ScheduleSpec,
    sam: SamParams | None,
    x0: np.ndarray,
    y0: np.ndarray,
    T: int,
    seed: int | list[int],
    on_step=None,
) -> ChainRun:
    """Run ``T`` coupled updates.

    ``seed`` may be a list: each seed becomes one replica (leading axis of
    the state), with its own noise stream, so replica ``i`` matches the
    single run with ``seed[i]`` exactly.  ``on_step(t, x, y, x_new, y_new, g)``
    is an optional observer for invariant checks.

    Raises ChainDivergenceError, carrying the partial run under
    ``diagnostics["partial"]``, if the state becomes non-finite.
    """
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    sam = sam or SamParams()
    sched.check_cap(obj.smoothness_L)
    seeds = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    batched = isinstance(seed, (list, tuple))
    x = np.asarray(x0, dtype=float)
    y = np.asarray(y0, dtype=float)
    if batched:
        x = np.broadcast_to(x, (len(seeds), obj.dim)).copy()
        y = np.broadcast_to(y, (len(seeds), obj.dim)).copy()
        noise = NoiseStream(obj, [stream(s, "chain", "noise") for s in seeds])
    else:
        noise = NoiseStream(obj, stream(seeds[0], "chain", "noise"), batch_shape=x.shape[:-1])
    if x.shape != y.shape:
        raise ConfigurationError(f"x0 and y0 shapes differ: {x.shape} vs {y.shape}")
    cols = {k: np.empty((T,) + x.shape[:-1]) for k in DIAGNOSTIC_FIELDS}
    lam = sched.lambda_
    for t in range(T):
        f, gg, GG, zz, phi = _diagnose(obj, lam, x, y)
        if not np.all(np.isfinite(GG)) or not np.all(np.isfinite(f)):
            partial = ChainRun(
                *(cols[k][:t] for k in DIAGNOSTIC_FIELDS),
                final=ChainState(x, y, t, seeds[0]), lambda_=lam, seeds=seeds,
            )
            raise ChainDivergenceError(f"non-finite state at t={t}", {"t": t, "partial": partial})
        cols["f_val"][t] = f
        cols["grad_norm_sq"][t] = gg
        cols["G_norm_sq"][t] = GG
        cols["z_norm_sq"][t] = zz
        cols["phi"][t] = phi
        g = _draw_g(obj, sched, sam, x, noise(), t)
        x_new, y_new = _update(sched, x, y, g, t)
        if on_step is not None:
            on_step(t, x, y, x_new, y_new, g)
        x, y = x_new, y_new
    return ChainRun(
        *(cols[k] for k in DIAGNOSTIC_FIELDS),
        final=ChainState(x, y, T, seeds[0] if not batched else seeds),
        lambda_=lam, seeds=seeds,
    )


def anchor_gap_bound(obj: Objective, sched: ScheduleSpec, radius: float) -> float:
    """``D = max(C/lam, (C + rho0 L)/lam)`` with ``C`` for the ball of ``radius``."""
    if not sched.lambda_ > 0:
        raise ConfigurationError("anchor-gap bound needs lambda > 0")
    C = obj.effective_C(radius)
    L = obj.smoothness_L or 0.0
    return max(C / sched.lambda_, (C + sched.rho0 * L) / sched.lambda_)
