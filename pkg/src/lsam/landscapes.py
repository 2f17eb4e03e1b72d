"""Test objectives with exact gradients and stochastic-gradient oracles.

Points are numpy arrays whose last axis is the parameter dimension; any
leading axes index independent replicas and are carried through every
method untouched.  A stochastic gradient is a pure function of the point
and a noise realization ``xi`` drawn with :meth:`Objective.noise`, which
is what lets SAM reuse the same ``xi`` for the perturbation and the
outer gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

BASIN_LABELS = ("deep-sharp", "wide-shallow", "wide-deep")


@dataclass(frozen=True)
class Minimum:
    location: np.ndarray
    label: str


class Objective:
    """Differentiable landscape ``f`` with exact and stochastic gradients.

    Subclasses set the metadata attributes and implement ``eval``,
    ``grad``, ``noise`` and ``stochastic_grad``.
    """

    name: str = "objective"
    dim: int
    smoothness_L: float | None = None
    noise_sigma: float | None = None
    grad_norm_C: float | None = None
    minima: tuple[Minimum, ...] = ()
    lower_bound: float | None = None

    def eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def noise(self, rng: np.random.Generator, shape=()) -> np.ndarray:
        """Draw noise realizations with leading shape ``shape``."""
        raise NotImplementedError

    def stochastic_grad(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def effective_C(self, radius: float) -> float:
        """Bound on E||grad f(x; xi)|| inside a ball of the given radius.

        Uses ``L * radius + sigma * sqrt(d)``; infinite when either constant
        is unknown.
        """
        if self.smoothness_L is None or self.noise_sigma is None:
            return float("inf")
        if self.grad_norm_C is not None:
            return self.grad_norm_C
        return self.smoothness_L * radius + self.noise_sigma * np.sqrt(self.dim)

    def classify(self, x: np.ndarray, steps: int = 10_000, lr: float | None = None) -> np.ndarray:
        """Basin label index of each point after plain gradient descent.

        Runs ``steps`` full-gradient steps from ``x`` and returns the index of
        the nearest cataloged minimum (index into ``self.minima``).
        """
        if not self.minima:
            raise ConfigurationError(f"{self.name} has no minima catalog")
        if lr is None:
            lr = 0.5 / self.smoothness_L
        z = np.array(x, dtype=float)
        for _ in range(steps):
            z = z - lr * self.grad(z)
        locs = np.stack([m.location for m in self.minima])
        dist = np.linalg.norm(z[..., None, :] - locs, axis=-1)
        return np.argmin(dist, axis=-1)


class _GaussianNoiseMixin:
    """Additive isotropic Gaussian noise on the gradient."""

    def noise(self, rng, shape=()):
        if isinstance(shape, int):
            shape = (shape,)
        return rng.standard_normal(tuple(shape) + (self.dim,))

    def stochastic_grad(self, x, xi):
        g = self.grad(x)
        if self.noise_sigma == 0.0:
            return g
        # per-coordinate scale sigma/sqrt(d) gives E||g - grad f||^2 == sigma^2
        return g + (self.noise_sigma / np.sqrt(self.dim)) * xi


@dataclass(frozen=True, eq=False)
class Quadratic(_GaussianNoiseMixin, Objective):
    hessian_diag: np.ndarray
    noise_sigma: float = 0.0
    name: str = field(default="quadratic", init=False)

    def __post_init__(self):
        h = np.asarray(self.hessian_diag, dtype=float)
        object.__setattr__(self, "hessian_diag", h)
        object.__setattr__(self, "dim", h.shape[0])
        object.__setattr__(self, "smoothness_L", float(h.max()))
        object.__setattr__(self, "minima", (Minimum(np.zeros(h.shape[0]), "wide-deep"),))
        object.__setattr__(self, "lower_bound", 0.0)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(self.hessian_diag * x * x, axis=-1)

    def grad(self, x):
        return self.hessian_diag * np.asarray(x, dtype=float)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.diag(self.hessian_diag), x.shape[:-1] + (self.dim, self.dim))


def make_quadratic(dim: int, hessian_diag: Sequence[float], noise_sigma: float = 0.0) -> Quadratic:
    """``f(x) = 0.5 * sum_i h_i x_i**2`` with Gaussian gradient noise of total variance ``sigma**2``."""
    h = np.asarray(hessian_diag, dtype=float)
    if dim < 1 or h.shape != (dim,):
        raise ConfigurationError(f"hessian_diag must have shape ({dim},), got {h.shape}")
    if not np.all(h > 0):
        raise ConfigurationError(f"hessian_diag must be strictly positive, got {h.tolist()}")
    if noise_sigma < 0:
        raise ConfigurationError("noise_sigma must be nonnegative")
    return Quadratic(hessian_diag=h, noise_sigma=float(noise_sigma))


@dataclass(frozen=True, eq=False)
class DoubleWell(_GaussianNoiseMixin, Objective):
    """``f(x) = sum_i (x_i**2 - 1)**2``; not globally smooth, so ``smoothness_L`` is None."""

    dim: int = 1
    noise_sigma: float = 0.0
    name: str = field(default="double_well", init=False)

    def __post_init__(self):
        loc = np.ones(self.dim)
        object.__setattr__(self, "minima", (Minimum(-loc, "wide-deep"), Minimum(loc, "wide-deep")))
        object.__setattr__(self, "lower_bound", 0.0)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        u = x * x - 1.0
        return np.sum(u * u, axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return 4.0 * x * (x * x - 1.0)


def make_double_well(dim: int = 1, noise_sigma: float = 0.0) -> DoubleWell:
    if dim < 1 or noise_sigma < 0:
        raise ConfigurationError("double well needs dim >= 1 and noise_sigma >= 0")
    return DoubleWell(dim=dim, noise_sigma=float(noise_sigma))


# Three-basin landscape: confining bowl minus Gaussian wells.
# Columns: depth, width, center_x, center_y.  Fixed by design.
_BASIN_BOWL = 0.04
_BASIN_WELLS = np.array([
    [4.0, 0.30, -2.5, 2.5],   # deep-sharp
    [2.0, 1.10, 2.5, 2.0],    # wide-shallow
    [3.0, 1.10, 0.0, -2.5],   # wide-deep
])
_BASIN_DOMAIN = (-5.0, 5.0)


@dataclass(frozen=True, eq=False)
class BasinLandscape(_GaussianNoiseMixin, Objective):
    """Two-dimensional bowl with three Gaussian wells of distinct shape."""

    seed: int = 0
    noise_sigma: float = 0.0
    name: str = field(default="basin3", init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", 2)
        object.__setattr__(self, "domain", _BASIN_DOMAIN)
        mins = tuple(
            Minimum(self._polish(_BASIN_WELLS[k, 2:].copy()), BASIN_LABELS[k]) for k in range(3)
        )
        object.__setattr__(self, "minima", mins)
        rng = np.random.default_rng(self.seed)
        object.__setattr__(self, "smoothness_L", self._estimate_L(rng))
        # wells are bounded by their depth, bowl is nonnegative
        object.__setattr__(self, "lower_bound", -float(_BASIN_WELLS[:, 0].sum()))

    def _wells(self, x):
        x = np.asarray(x, dtype=float)
        diff = x[..., None, :] - _BASIN_WELLS[:, 2:]
        r2 = np.sum(diff * diff, axis=-1)
        w2 = _BASIN_WELLS[:, 1] ** 2
        b = _BASIN_WELLS[:, 0] * np.exp(-0.5 * r2 / w2)
        return diff, w2, b

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        _, _, b = self._wells(x)
        return _BASIN_BOWL * np.sum(x * x, axis=-1) - np.sum(b, axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        diff, w2, b = self._wells(x)
        return 2.0 * _BASIN_BOWL * x + np.sum((b / w2)[..., None] * diff, axis=-2)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        diff, w2, b = self._wells(x)
        eye = np.eye(2)
        outer = diff[..., :, None] * diff[..., None, :]
        per_well = (b / w2)[..., None, None] * (eye - outer / w2[:, None, None])
        return 2.0 * _BASIN_BOWL * eye + per_well.sum(axis=-3)

    def _polish(self, x):
        for _ in range(100):
            step = np.linalg.solve(self.hessian(x), self.grad(x))
            x = x - step
            if np.linalg.norm(step) < 1e-15:
                break
        return x

    def _estimate_L(self, rng):
        lo, hi = self.domain
        grid = np.linspace(lo, hi, 201)
        pts = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = np.concatenate([pts, rng.uniform(lo, hi, size=(20_000, 2))])
        pts = np.concatenate([pts] + [m.location[None] for m in self.minima])
        eig = np.linalg.eigvalsh(self.hessian(pts))
        return float(np.abs(eig).max())


def make_basin_landscape(seed: int = 0, noise_sigma: float = 0.0) -> BasinLandscape:
    """Three-basin 2-D landscape: one deep-sharp, one wide-shallow, one wide-deep well.

    ``seed`` only drives the random part of the Hessian sampling used to
    estimate ``smoothness_L``; the geometry itself is fixed.
    """
    if noise_sigma < 0:
        raise ConfigurationError("noise_sigma must be nonnegative")
    return BasinLandscape(seed=seed, noise_sigma=float(noise_sigma))


@dataclass(frozen=True, eq=False)
class MLPRegression(Objective):
    """Least-squares loss of a one-hidden-layer tanh network on fixed data.

    Parameters are packed as ``[W1 (h x p), b1 (h), W2 (q x h), b2 (q)]``.
    The loss is ``mean_i ||net(a_i) - t_i||**2``.  ``xi`` is an integer
    array of sample indices; the stochastic gradient is the same formula
    restricted to that minibatch.
    """

    hidden: int
    inputs: np.ndarray
    targets: np.ndarray
    batch_size: int = 32
    name: str = field(default="mlp", init=False)

    def __post_init__(self):
        p = self.inputs.shape[1]
        q = self.targets.shape[1]
        h = self.hidden
        object.__setattr__(self, "dim", h * p + h + q * h + q)
        object.__setattr__(self, "lower_bound", 0.0)

    def _unpack(self, x):
        p, q, h = self.inputs.shape[1], self.targets.shape[1], self.hidden
        lead = x.shape[:-1]
        i = 0
        W1 = x[..., i:i + h * p].reshape(lead + (h, p)); i += h * p
        b1 = x[..., i:i + h]; i += h
        W2 = x[..., i:i + q * h].reshape(lead + (q, h)); i += q * h
        b2 = x[..., i:i + q]
        return W1, b1, W2, b2

    def _forward(self, x, a):
        # a: (..., m, p) samples, broadcast against leading axes of x
        W1, b1, W2, b2 = self._unpack(x)
        pre = np.einsum("...hp,...mp->...mh", W1, a) + b1[..., None, :]
        act = np.tanh(pre)
        out = np.einsum("...qh,...mh->...mq", W2, act) + b2[..., None, :]
        return act, out

    def _loss_grad(self, x, idx):
        x = np.asarray(x, dtype=float)
        a = self.inputs[idx]
        t = self.targets[idx]
        act, out = self._forward(x, a)
        resid = out - t
        m = resid.shape[-2]
        loss = np.sum(resid * resid, axis=(-1, -2)) / m
        d_out = 2.0 * resid / m
        W1, b1, W2, b2 = self._unpack(x)
        gW2 = np.einsum("...mq,...mh->...qh", d_out, act)
        gb2 = d_out.sum(axis=-2)
        d_act = np.einsum("...mq,...qh->...mh", d_out, W2)
        d_pre = d_act * (1.0 - act * act)
        gW1 = np.einsum("...mh,...mp->...hp", d_pre, a)
        gb1 = d_pre.sum(axis=-2)
        lead = x.shape[:-1]
        g = np.concatenate(
            [gW1.reshape(lead + (-1,)), gb1, gW2.reshape(lead + (-1,)), gb2], axis=-1
        )
        return loss, g

    def eval(self, x):
        return self._loss_grad(x, slice(None))[0]

    def grad(self, x):
        return self._loss_grad(x, slice(None))[1]

    def noise(self, rng, shape=()):
        if isinstance(shape, int):
            shape = (shape,)
        n = self.inputs.shape[0]
        return rng.integers(0, n, size=tuple(shape) + (self.batch_size,))

    def stochastic_grad(self, x, xi):
        return self._loss_grad(x, xi)[1]


def make_mlp_regression(hidden: int, samples: int, seed: int, batch_size: int = 32) -> MLPRegression:
    """Tanh network regression on a synthetic 2-in/1-out teacher dataset."""
    if not 1 <= hidden <= 64:
        raise ConfigurationError(f"hidden must lie in [1, 64], got {hidden}")
    if not 1 <= samples <= 4096:
        raise ConfigurationError(f"samples must lie in [1, 4096], got {samples}")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-2.0, 2.0, size=(samples, 2))
    t = np.sin(1.5 * a[:, :1]) * np.cos(a[:, 1:]) + 0.1 * rng.standard_normal((samples, 1))
    return MLPRegression(hidden=hidden, inputs=a, targets=t, batch_size=min(batch_size, samples))


class NoiseStream:
    """Hands out one noise realization per call, drawn from pre-filled blocks.

    With a list of generators every replica (leading axis) gets its own
    stream, so a batched run reproduces the corresponding single runs
    exactly.  With one generator, ``batch_shape`` realizations are drawn
    jointly.
    """

    def __init__(self, obj: Objective, rngs, batch_shape=(), block: int = 2048):
        self.obj = obj
        self.block = block
        if isinstance(rngs, np.random.Generator):
            self._rngs = None
            self._rng = rngs
            self.batch_shape = tuple(batch_shape)
        else:
            self._rngs = list(rngs)
            self.batch_shape = (len(self._rngs),)
        self._buf = None
        self._pos = block

    def _refill(self):
        if self._rngs is None:
            self._buf = self.obj.noise(self._rng, (self.block,) + self.batch_shape)
        else:
            self._buf = np.stack([self.obj.noise(r, self.block) for r in self._rngs], axis=1)
        self._pos = 0

    def __call__(self) -> np.ndarray:
        if self._pos >= self.block:
            self._refill()
        xi = self._buf[self._pos]
        self._pos += 1
        return xi
