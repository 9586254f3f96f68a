"""Ground-process simulators: Poisson, log-Gaussian Cox, immigration-death,
pairwise-interaction Gibbs, and point-level thinning.

Every simulator is a pure function of (model, window, seed): identical seeds
give identical outputs, and replicates with distinct seeds may run
concurrently.  Locations are returned as arrays with the event time in the
last column when the window is temporal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .core import Configuration, MarkedPoint, SampleSchedule, Window
from .errors import NumericalError, ValidationError

__all__ = [
    "HomogeneousPoisson",
    "InhomogeneousPoisson",
    "LogGaussianCox",
    "ImmigrationDeath",
    "PairwiseGibbs",
    "GridField",
    "simulate_poisson",
    "simulate_lgcp",
    "simulate_immigration_death",
    "simulate_gibbs",
    "thin",
    "observable_retention",
]


# ---------------------------------------------------------------------------
# model descriptors
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HomogeneousPoisson:
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValidationError("rate must be nonnegative")


@dataclass(frozen=True)
class InhomogeneousPoisson:
    """Intensity function on ground locations with a rejection bound."""

    intensity: Callable
    max_rate: float

    def __post_init__(self):
        if self.max_rate <= 0:
            raise ValidationError("max_rate must be positive")


@dataclass(frozen=True)
class LogGaussianCox:
    """log-intensity = mean + stationary Gaussian field on a regular grid.

    ``kernel`` is ("exponential"|"gaussian", variance, spatial range[, temporal
    range]); ``grid_shape`` gives cells per axis (time last when temporal).
    """

    mean: float | Callable
    kernel: tuple
    grid_shape: tuple

    def __post_init__(self):
        fam = self.kernel[0]
        if fam not in ("exponential", "gaussian"):
            raise ValidationError(f"unknown covariance family {fam!r}")
        if self.kernel[1] < 0:
            raise ValidationError("field variance must be nonnegative")
        object.__setattr__(self, "kernel", tuple(self.kernel))
        object.__setattr__(self, "grid_shape", tuple(int(g) for g in self.grid_shape))


@dataclass(frozen=True)
class ImmigrationDeath:
    arrival_rate: float
    death_rate: float

    def __post_init__(self):
        if self.arrival_rate <= 0 or self.death_rate <= 0:
            raise ValidationError("arrival and death rates must be positive")


@dataclass(frozen=True)
class PairwiseGibbs:
    """Pairwise-interaction density beta^n gamma^(neighbour pairs).

    Neighbours are points within spatial range ``range_`` and, when
    ``temporal_range`` is set, within that time lag (a space-time cylinder).
    gamma must lie in (0, 1] so the density is hereditary; gamma=0 is the
    hard core.
    """

    beta: float
    gamma: float
    range_: float
    temporal_range: float | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError("gamma must lie in [0, 1] (inhibition only)")
        if self.range_ <= 0:
            raise ValidationError("interaction range must be positive")
        if self.temporal_range is not None and self.temporal_range < 0:
            raise ValidationError("temporal range must be nonnegative")


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------
def _uniform_ground(n: int, w: Window, rng) -> np.ndarray:
    lo = np.asarray(w.lo)
    hi = np.asarray(w.hi)
    x = lo + rng.random((n, w.dim)) * (hi - lo)
    if w.is_temporal:
        t = rng.random((n, 1)) * w.t_star
        x = np.hstack([x, t])
    return x


def simulate_poisson(model, w: Window, seed: int) -> np.ndarray:
    """Simulate a Poisson ground process; inhomogeneous via rejection."""
    rng = np.random.default_rng(seed)
    vol = w.ground_volume
    if isinstance(model, HomogeneousPoisson):
        n = rng.poisson(model.rate * vol)
        return _uniform_ground(n, w, rng)
    if isinstance(model, InhomogeneousPoisson):
        n = rng.poisson(model.max_rate * vol)
        cand = _uniform_ground(n, w, rng)
        u = rng.random(n)
        keep = np.zeros(n, dtype=bool)
        for i in range(n):
            lam = float(model.intensity(cand[i]))
            if lam > model.max_rate * (1 + 1e-12):
                raise NumericalError(
                    f"intensity {lam} exceeds the rejection bound {model.max_rate}")
            keep[i] = u[i] * model.max_rate < lam
        return cand[keep]
    raise ValidationError("simulate_poisson expects a Poisson model")


# ---------------------------------------------------------------------------
# log-Gaussian Cox
# ---------------------------------------------------------------------------
class GridField:
    """Piecewise-constant random field on a regular grid over the ground space.

    ``axes`` holds the cell-center coordinates per axis (time last when the
    window is temporal); ``values`` has shape ``grid_shape``.
    """

    __slots__ = ("axes", "values", "window")

    def __init__(self, axes, values, window):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values, dtype=float)
        self.window = window

    def cell_index(self, g) -> tuple:
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if g.size != len(self.axes):
            raise ValidationError("location outside the field grid dimension")
        idx = []
        for coord, ax in zip(g, self.axes):
            j = int(np.argmin(np.abs(ax - coord)))
            step = ax[1] - ax[0] if ax.size > 1 else np.inf
            if abs(ax[j] - coord) > 0.5 * step * (1 + 1e-9):
                raise ValidationError("location outside the field grid")
            idx.append(j)
        return tuple(idx)

    def __call__(self, g) -> float:
        return float(self.values[self.cell_index(g)])

    @property
    def cell_volume(self) -> float:
        out = 1.0
        for ax in self.axes:
            out *= ax[1] - ax[0] if ax.size > 1 else 1.0
        return out


def _field_axes(model: LogGaussianCox, w: Window):
    bounds = list(zip(w.lo, w.hi))
    if w.is_temporal:
        bounds.append((0.0, w.t_star))
    shape = model.grid_shape
    if len(shape) != len(bounds):
        raise ValidationError("grid_shape does not match the ground dimension")
    axes = []
    for (lo, hi), cells in zip(bounds, shape):
        edges = np.linspace(lo, hi, cells + 1)
        axes.append(0.5 * (edges[:-1] + edges[1:]))
    return axes


def _covariance(model: LogGaussianCox, centers: np.ndarray, d_spatial: int):
    fam, var = model.kernel[0], model.kernel[1]
    rho_s = model.kernel[2]
    rho_t = model.kernel[3] if len(model.kernel) > 3 else rho_s
    ds = centers[:, None, :d_spatial] - centers[None, :, :d_spatial]
    h = np.sqrt(np.sum(ds * ds, axis=-1)) / rho_s
    if centers.shape[1] > d_spatial:
        ht = np.abs(centers[:, None, -1] - centers[None, :, -1]) / rho_t
        h = np.sqrt(h * h + ht * ht)
    if fam == "exponential":
        return var * np.exp(-h)
    return var * np.exp(-h * h)


def simulate_lgcp(model: LogGaussianCox, w: Window, seed: int):
    """Sample the log-Gaussian intensity field, then Poisson points given it.

    Returns (GridField of the intensity, ground locations).  The field is
    returned so intensity-dependent marking can reuse the same draw.
    """
    rng = np.random.default_rng(seed)
    axes = _field_axes(model, w)
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    mean = (np.asarray([model.mean(c) for c in centers])
            if callable(model.mean) else np.full(len(centers), float(model.mean)))
    var = model.kernel[1]
    if var == 0.0:
        log_field = mean
    else:
        cov = _covariance(model, centers, w.dim)
        jitter = 1e-10 * var
        for _ in range(8):
            try:
                chol = np.linalg.cholesky(cov + jitter * np.eye(len(cov)))
                break
            except np.linalg.LinAlgError:
                jitter *= 100.0
        else:
            raise NumericalError("covariance matrix is not positive semi-definite")
        log_field = mean + chol @ rng.standard_normal(len(centers))
    shape = tuple(len(a) for a in axes)
    field = GridField(axes, np.exp(log_field).reshape(shape), w)
    # given the field, a Poisson draw per cell with piecewise-constant rate
    cellvol = field.cell_volume
    counts = rng.poisson(field.values * cellvol)
    pts = []
    steps = [a[1] - a[0] if a.size > 1 else 1.0 for a in field.axes]
    for idx in np.ndindex(shape):
        c = counts[idx]
        if c == 0:
            continue
        center = np.asarray([field.axes[a][idx[a]] for a in range(len(shape))])
        offs = (rng.random((c, len(shape))) - 0.5) * np.asarray(steps)
        pts.append(center + offs)
    locs = np.vstack(pts) if pts else np.empty((0, len(shape)))
    return field, locs


# ---------------------------------------------------------------------------
# immigration-death
# ---------------------------------------------------------------------------
def simulate_immigration_death(model: ImmigrationDeath, w: Window, seed: int):
    """Poisson arrivals on [0, t_star], uniform locations, Exp lifetimes.

    Returns (locations (n,d), birth times (n,), lifetimes (n,)); the death
    time is min(birth + lifetime, t_star).
    """
    if not w.is_temporal:
        raise ValidationError("immigration-death needs a temporal window")
    rng = np.random.default_rng(seed)
    n = rng.poisson(model.arrival_rate * w.t_star)
    births = np.sort(rng.random(n) * w.t_star)
    lo = np.asarray(w.lo)
    hi = np.asarray(w.hi)
    xs = lo + rng.random((n, w.dim)) * (hi - lo)
    lifetimes = rng.exponential(1.0 / model.death_rate, size=n)
    return xs, births, lifetimes


# ---------------------------------------------------------------------------
# Gibbs via birth-death Metropolis-Hastings
# ---------------------------------------------------------------------------
def simulate_gibbs(model: PairwiseGibbs, w: Window, steps: int, seed: int,
                   init: np.ndarray | None = None) -> np.ndarray:
    """Birth-death MH chain targeting beta^n gamma^(pairs) wrt unit Poisson.

    Burn-in is the caller's responsibility via ``steps``; the final state
    after ``steps`` proposals is returned.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    D = w.dim + (1 if w.is_temporal else 0)
    lo = np.asarray(list(w.lo) + ([0.0] if w.is_temporal else []), dtype=float)
    hi = np.asarray(list(w.hi) + ([w.t_star] if w.is_temporal else []), dtype=float)
    x0 = np.empty((0, D)) if init is None else np.asarray(init, dtype=float)
    trad = -1.0 if model.temporal_range is None else float(model.temporal_range)
    if w.is_temporal and model.temporal_range is None:
        raise ValidationError("temporal window requires a temporal_range")
    out = _kernels.gibbs_chain(
        x0, lo, hi, w.torus, float(model.beta), float(model.gamma),
        rng.random(steps), rng.random((steps, D)), rng.random(steps),
        rng.random(steps), float(model.range_), trad, w.dim,
    )
    return np.asarray(out)


# ---------------------------------------------------------------------------
# thinning and the observable process
# ---------------------------------------------------------------------------
def thin(c: Configuration, retention: Callable, seed: int) -> Configuration:
    """Keep each point independently with probability retention(point)."""
    rng = np.random.default_rng(seed)
    kept = []
    for p in c.points:
        prob = float(retention(p))
        if not 0.0 <= prob <= 1.0:
            raise ValidationError("retention probability outside [0, 1]")
        if rng.random() < prob:
            kept.append(p)
    return Configuration(kept, c.window, c.reference)


def observable_retention(schedule: SampleSchedule) -> Callable:
    """Retention indicator of the observable process at the sample times.

    A point survives iff its mark support [a, b) contains at least one
    sample time (left endpoint closed).
    """

    def retention(p: MarkedPoint) -> float:
        a, b = p.mark.support
        return 1.0 if any(a <= s < b for s in schedule.times) else 0.0

    return retention
