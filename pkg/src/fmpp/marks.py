"""Functional-mark models and marking strategies.

Covers deterministic marks, Brownian/diffusion reference marks (random
labelling), the coupled growth-interaction system (deterministic RK4 or
Euler-Maruyama with noise), geostatistical marking from a space-time
Gaussian field, intensity-dependent marks read off a Cox driving field,
and the finite-dimensional (fidi) and auxiliary-mark densities that feed
the likelihoods.

Growth, interaction and noise functions are chosen from a named registry
with numeric parameter vectors (arbitrary code injection is out of scope
for config files; library callers may also pass callables where noted).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .core import (
    AuxMark,
    AuxMeasure,
    CadlagPath,
    Configuration,
    MarkedPoint,
    ReferenceSpec,
    SampleSchedule,
    Window,
)
from .errors import NumericalError, ValidationError
from .ground import GridField

__all__ = [
    "Deterministic",
    "Wiener",
    "Diffusion",
    "GrowthInteraction",
    "Geostatistical",
    "IntensityDependent",
    "FidiDensitySpec",
    "AuxDensitySpec",
    "DEGENERATE_DENSITY",
    "GROWTH_REGISTRY",
    "INTERACTION_REGISTRY",
    "NOISE_REGISTRY",
    "DETERMINISTIC_REGISTRY",
    "attach_marks",
    "gi_integrate",
    "geostat_marking",
    "intensity_dependent_marking",
    "fidi_density_eval",
    "aux_density_eval",
    "brownian_fidi",
    "deterministic_fidi",
    "make_configuration",
]


# ---------------------------------------------------------------------------
# registries (names resolvable from config files)
# ---------------------------------------------------------------------------
# growth g(m; a, b)
GROWTH_REGISTRY = {"linear": 0, "logistic": 1}
# interaction h(point_i, point_j, m_i, m_j; c, r): symmetric distance decay
INTERACTION_REGISTRY = {"none": 0, "gauss": 1, "overlap": 2}
# noise sigma(m; s0)
NOISE_REGISTRY = {"zero": 0, "const": 1, "prop": 2}
# deterministic mark families f*(g, l, t; params)
DETERMINISTIC_REGISTRY = {
    "constant": lambda g, l, t, p: np.full_like(np.asarray(t, dtype=float), p[0]),
    "linear": lambda g, l, t, p: p[0] + p[1] * np.asarray(t, dtype=float),
}


def _registry_entry(registry, spec, what):
    name = spec[0]
    if name not in registry:
        raise ValidationError(f"unknown {what} function {name!r}")
    return registry[name], np.asarray(spec[1:], dtype=float)


# ---------------------------------------------------------------------------
# mark model descriptors
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Deterministic:
    """M_i(t) = f*(g_i, l_i, t): registry name with params, or a callable."""

    fn: object = ("constant", 1.0)

    def evaluate(self, g, l, t):
        if callable(self.fn):
            return np.asarray([self.fn(g, l, tt) for tt in np.atleast_1d(t)])
        func = DETERMINISTIC_REGISTRY.get(self.fn[0])
        if func is None:
            raise ValidationError(f"unknown deterministic mark family {self.fn[0]!r}")
        return func(g, l, np.atleast_1d(t), list(self.fn[1:]))


@dataclass(frozen=True)
class Wiener:
    """Independent scaled Brownian marks from 0 (random labelling)."""

    scale: float = 1.0

    def __post_init__(self):
        if self.scale < 0:
            raise ValidationError("Wiener scale must be nonnegative")


@dataclass(frozen=True)
class Diffusion:
    """dM = a(M, t) dt + b(M, t) dW from m0, Euler-Maruyama on the grid."""

    drift: Callable
    diffusion: Callable
    m0: float = 0.0


@dataclass(frozen=True)
class GrowthInteraction:
    """Coupled growth system dM_i = g(M_i) - sum_j h(i, j) (+ noise).

    growth: ("linear", a, b) for a(b - m) or ("logistic", a, b);
    interaction: ("none",), ("gauss", c, r) for c m_i m_j exp(-(d/r)^2), or
    ("overlap", c) for c max(0, m_i + m_j - d); noise: ("zero",),
    ("const", s0) or ("prop", s0).  Marks vanish outside [birth, death).
    ``negative_policy`` says what to do when noise drives a mark negative:
    clamp at zero (default), absorb (kill the point) or error.  The
    interaction sum runs over all alive neighbours; ``interaction_cutoff``
    optionally skips pairs beyond that distance to speed up large runs.
    """

    growth: tuple = ("linear", 1.0, 1.0)
    interaction: tuple = ("none",)
    noise: tuple = ("zero",)
    m0: float = 0.0
    negative_policy: str = "clamp"
    interaction_cutoff: float | None = None

    def __post_init__(self):
        if self.m0 < 0:
            raise ValidationError("initial mark value must be nonnegative")
        if self.negative_policy not in ("clamp", "absorb", "error"):
            raise ValidationError("negative_policy must be clamp|absorb|error")
        for registry, spec, what in (
            (GROWTH_REGISTRY, self.growth, "growth"),
            (INTERACTION_REGISTRY, self.interaction, "interaction"),
            (NOISE_REGISTRY, self.noise, "noise"),
        ):
            _registry_entry(registry, spec, what)
        if self.noise[0] != "zero" and self.noise[1] < 0:
            raise ValidationError("noise scale must be nonnegative")


@dataclass(frozen=True)
class Geostatistical:
    """Marks sampled from one space-time Gaussian field at the point locations.

    kernel = (family, variance, spatial range, temporal range) with family
    'exponential' or 'gaussian'; separable in space and time.  When
    ``per_class`` is true, each discrete aux class gets its own independent
    field copy.
    """

    mean: object = 0.0
    kernel: tuple = ("exponential", 1.0, 0.3, 0.3)
    per_class: bool = False

    def __post_init__(self):
        if self.kernel[0] not in ("exponential", "gaussian"):
            raise ValidationError(f"unknown covariance family {self.kernel[0]!r}")
        if self.kernel[1] < 0:
            raise ValidationError("field variance must be nonnegative")


@dataclass(frozen=True)
class IntensityDependent:
    """M_i(t) = driving-intensity field at (X_i, t); needs a Cox field."""

    field: GridField | None = None


# ---------------------------------------------------------------------------
# mark attachment
# ---------------------------------------------------------------------------
def _mean_at(mean, x, t):
    return float(mean(x, t)) if callable(mean) else float(mean)


def _cov_1d(family, h):
    return np.exp(-h) if family == "exponential" else np.exp(-h * h)


def attach_marks(ground: Sequence, model, grid, seed: int,
                 t_star: float | None = None) -> list:
    """Generate one cadlag mark per ground point.

    ``ground`` is a sequence of ((x, t), aux) pairs with t None in the purely
    spatial case.  The grid must cover [0, t_star].  Independent-marking
    models draw each mark independently; growth-interaction marks are coupled
    and need birth times and lifetime aux marks.
    """
    grid = np.asarray(grid, dtype=float)
    rng = np.random.default_rng(seed)
    if t_star is None:
        t_star = float(grid[-1])
    full = (float(grid[0]), np.inf)

    if isinstance(model, Deterministic):
        return [
            CadlagPath(grid, model.evaluate((x, t), aux, grid), full,
                       "step", t_star)
            for (x, t), aux in ground
        ]
    if isinstance(model, Wiener):
        out = []
        for _ in ground:
            steps = np.sqrt(np.diff(grid)) * rng.standard_normal(len(grid) - 1)
            vals = model.scale * np.concatenate([[0.0], np.cumsum(steps)])
            out.append(CadlagPath(grid, vals, full, "step", t_star))
        return out
    if isinstance(model, Diffusion):
        out = []
        for (x, t), aux in ground:
            vals = np.empty_like(grid)
            vals[0] = model.m0
            noise = rng.standard_normal(len(grid) - 1)
            for j in range(len(grid) - 1):
                dt = grid[j + 1] - grid[j]
                m = vals[j]
                vals[j + 1] = (m + model.drift(m, grid[j]) * dt
                               + model.diffusion(m, grid[j]) * math.sqrt(dt) * noise[j])
            out.append(CadlagPath(grid, vals, full, "step", t_star))
        return out
    if isinstance(model, GrowthInteraction):
        xs, births, lifetimes = [], [], []
        for (x, t), aux in ground:
            if t is None:
                raise ValidationError("growth-interaction marks need birth times")
            if aux.continuous is None:
                raise ValidationError("growth-interaction marks need lifetime aux marks")
            xs.append(x)
            births.append(t)
            lifetimes.append(aux.continuous[0])
        dt = float(grid[1] - grid[0]) if len(grid) > 1 else t_star
        return gi_integrate(
            (np.asarray(xs, dtype=float), np.asarray(births), np.asarray(lifetimes)),
            model, dt, seed, t_star)
    if isinstance(model, Geostatistical):
        locs = np.asarray([x for (x, t), aux in ground], dtype=float)
        classes = None
        if model.per_class:
            classes = [aux.discrete for (x, t), aux in ground]
            if any(c is None for c in classes):
                raise ValidationError("per-class marking needs discrete aux marks")
        return geostat_marking(locs, model, grid, seed, t_star, classes)
    if isinstance(model, IntensityDependent):
        if model.field is None:
            raise ValidationError("intensity-dependent marking needs the Cox field")
        locs = np.asarray([x for (x, t), aux in ground], dtype=float)
        return intensity_dependent_marking(model.field, locs, grid)
    raise ValidationError(f"unknown mark model {type(model).__name__}")


def gi_integrate(points, model: GrowthInteraction, step: float, seed: int,
                 t_star: float) -> list:
    """Integrate the coupled growth system on the global grid 0..t_star.

    ``points`` is (locations (n,d), births (n,), lifetimes (n,)).  The
    deterministic system (zero noise) uses classical RK4 and is bitwise
    reproducible; with noise an Euler-Maruyama step of exactly the grid
    step is used.  The interaction sum runs over alive neighbours only.
    Marks start at m0 at the first grid time after birth and vanish
    outside [birth, death), death = min(birth + lifetime, t_star).
    """
    xs, births, lifetimes = points
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    births = np.asarray(births, dtype=float)
    lifetimes = np.asarray(lifetimes, dtype=float)
    nsteps = int(round(t_star / step))
    if abs(nsteps * step - t_star) > 1e-9 * max(t_star, 1.0) or nsteps < 1:
        raise ValidationError("step must divide the mark horizon t_star")
    deaths = np.minimum(births + lifetimes, t_star)
    gcode, gp = _registry_entry(GROWTH_REGISTRY, model.growth, "growth")
    icode, ip = _registry_entry(INTERACTION_REGISTRY, model.interaction, "interaction")
    scode, sp = _registry_entry(NOISE_REGISTRY, model.noise, "noise")
    n = xs.shape[0]
    if scode == 0:
        normals = np.zeros((1, max(n, 1)))
    else:
        normals = np.random.default_rng(seed).standard_normal((nsteps, max(n, 1)))
    clamp_code = {"clamp": 0, "absorb": 1, "error": 2}[model.negative_policy]
    if n == 0:
        return []
    cutoff = -1.0 if model.interaction_cutoff is None else float(model.interaction_cutoff)
    vals, negative, deaths_out = _kernels.gi_integrate_values(
        xs, births, deaths.copy(), float(model.m0), float(step), nsteps,
        gcode, gp if gp.size else np.zeros(1),
        icode, ip if ip.size else np.zeros(1),
        scode, sp if sp.size else np.zeros(1),
        normals, clamp_code, cutoff)
    if negative and model.negative_policy == "error":
        raise NumericalError("noise drove a mark negative (clamping disabled)")
    grid = np.arange(nsteps + 1) * step
    out = []
    for i in range(n):
        # absorption moves the death time forward; supports follow it
        out.append(CadlagPath(grid, vals[:, i], (births[i], deaths_out[i]),
                              "step", t_star))
    return out


def geostat_marking(locations, model: Geostatistical, grid, seed: int,
                    t_star: float | None = None, classes=None) -> list:
    """One joint Gaussian draw of the field at all (location, grid time) pairs.

    Uses the separable Kronecker structure cov = C_space x C_time, so a draw
    is L_s Z L_t' with Cholesky factors of the two marginals.  With
    ``classes`` the draw is repeated independently per discrete class.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if t_star is None:
        t_star = float(grid[-1])
    n, k = locations.shape[0], grid.size
    if n == 0:
        return []
    fam, var = model.kernel[0], model.kernel[1]
    rho_s = model.kernel[2]
    rho_t = model.kernel[3] if len(model.kernel) > 3 else rho_s
    rng = np.random.default_rng(seed)
    mean = np.asarray([[_mean_at(model.mean, x, t) for t in grid] for x in locations])
    if var == 0.0:
        draws = mean
    else:
        dx = locations[:, None, :] - locations[None, :, :]
        Cs = _cov_1d(fam, np.sqrt(np.sum(dx * dx, axis=-1)) / rho_s)
        Ct = _cov_1d(fam, np.abs(grid[:, None] - grid[None, :]) / rho_t)
        try:
            Ls = np.linalg.cholesky(Cs + 1e-10 * np.eye(n))
            Lt = np.linalg.cholesky(Ct + 1e-10 * np.eye(k))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("field covariance factorization failed") from exc
        if classes is None:
            draws = mean + math.sqrt(var) * (Ls @ rng.standard_normal((n, k)) @ Lt.T)
        else:
            draws = mean.copy()
            for cls in sorted(set(classes)):
                z = math.sqrt(var) * (Ls @ rng.standard_normal((n, k)) @ Lt.T)
                rows = [i for i, c in enumerate(classes) if c == cls]
                draws[rows] += z[rows]
    full = (float(grid[0]), np.inf)
    return [CadlagPath(grid, draws[i], full, "step", t_star) for i in range(n)]


def intensity_dependent_marking(field: GridField, locations, grid) -> list:
    """Marks M_i(t) = field(X_i, t), read off the nearest field cell."""
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    grid = np.asarray(grid, dtype=float)
    w = field.window
    out = []
    for x in locations:
        x_sp = x[: w.dim]
        if w.is_temporal:
            vals = np.asarray([field(np.concatenate([x_sp, [t]])) for t in grid])
        else:
            vals = np.full(grid.size, field(x_sp))
        out.append(CadlagPath(grid, vals, (float(grid[0]), np.inf), "step",
                              None))
    return out


# ---------------------------------------------------------------------------
# fidi and auxiliary densities
# ---------------------------------------------------------------------------
class _Degenerate:
    """Sentinel for point-mass mark laws, which have no density w.r.t. a
    diffuse reference; downstream likelihoods drop the mark factor."""

    def __repr__(self):
        return "DEGENERATE_DENSITY"

    def __bool__(self):
        return True


DEGENERATE_DENSITY = _Degenerate()


@dataclass(frozen=True)
class FidiDensitySpec:
    """Markov fidi law: initial density at s_1 plus transition densities.

    ``initial(s1, u)`` and ``transition(t, s, u_t, u_s)`` act on vectors of
    per-point values and return joint densities; ``degenerate`` marks
    point-mass laws (deterministic marks).
    """

    initial: Callable | None = None
    transition: Callable | None = None
    degenerate: bool = False
    label: str = ""

    def __post_init__(self):
        if not self.degenerate and (self.initial is None or self.transition is None):
            raise ValidationError("non-degenerate fidi spec needs both densities")


def _gauss(u, mean, var):
    return np.exp(-0.5 * (u - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def brownian_fidi(scale: float = 1.0, start: float = 0.0) -> FidiDensitySpec:
    """Fidi densities of independent scaled Brownian marks started at
    ``start`` at time zero."""
    if scale <= 0:
        raise ValidationError("Brownian scale must be positive")
    var0 = scale * scale

    def initial(s1, u):
        if s1 <= 0:
            raise ValidationError("Brownian fidi undefined at s1 = 0")
        return float(np.prod(_gauss(np.asarray(u, dtype=float), start, var0 * s1)))

    def transition(t, s, u_t, u_s):
        if t <= s:
            raise ValidationError("transition needs t > s")
        return float(np.prod(_gauss(np.asarray(u_t, dtype=float),
                                    np.asarray(u_s, dtype=float), var0 * (t - s))))

    return FidiDensitySpec(initial, transition, label=f"brownian(scale={scale})")


def deterministic_fidi() -> FidiDensitySpec:
    return FidiDensitySpec(degenerate=True, label="deterministic")


def fidi_density_eval(spec: FidiDensitySpec, schedule: SampleSchedule, u):
    """Joint fidi density f^{s_1}(u_1) prod p_{s_j, s_{j-1}}(u_j; u_{j-1}).

    ``u`` is an (n, k) matrix of sampled mark values (n points, k times).
    Returns DEGENERATE_DENSITY for point-mass mark laws.
    """
    if spec.degenerate:
        return DEGENERATE_DENSITY
    u = np.atleast_2d(np.asarray(u, dtype=float))
    k = len(schedule)
    if u.shape[1] != k:
        raise ValidationError("value matrix has wrong number of sample columns")
    s = schedule.times
    dens = spec.initial(s[0], u[:, 0])
    for j in range(1, k):
        dens *= spec.transition(s[j], s[j - 1], u[:, j], u[:, j - 1])
    return float(dens)


@dataclass(frozen=True)
class AuxDensitySpec:
    """Joint density of the auxiliary marks w.r.t. the declared measure.

    ``discrete_probs``: probabilities over {1..k}, constant or a function of
    the ground location.  ``continuous_density``: density (location, value)
    -> float w.r.t. the continuous part of ``measure``.  Points are
    independent unless a ``joint`` callable on (locations, values) is given.
    """

    discrete_probs: object = None
    continuous_density: Callable | None = None
    measure: AuxMeasure = field(default_factory=lambda: AuxMeasure("counting", (1,)))
    joint: Callable | None = None

    def point_density(self, location, aux: AuxMark) -> float:
        dens = 1.0
        if self.discrete_probs is not None:
            probs = (self.discrete_probs(location) if callable(self.discrete_probs)
                     else self.discrete_probs)
            probs = np.asarray(probs, dtype=float)
            if aux.discrete is None or not 1 <= aux.discrete <= probs.size:
                raise ValidationError("discrete aux value outside its range")
            dens *= float(probs[aux.discrete - 1])
        if self.continuous_density is not None:
            if aux.continuous is None:
                raise ValidationError("continuous aux value missing")
            dens *= float(self.continuous_density(location, aux.continuous))
        return dens


def aux_density_eval(spec: AuxDensitySpec, locations, values) -> float:
    """Evaluate the joint aux density at per-point values.

    With no ``joint`` callable the points are independent and the result is
    the product of marginals.
    """
    if spec.joint is not None:
        return float(spec.joint(locations, values))
    dens = 1.0
    for loc, val in zip(locations, values):
        dens *= spec.point_density(loc, val)
    return float(dens)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------
def make_configuration(window: Window, locations, auxs, paths,
                       reference: ReferenceSpec | None = None) -> Configuration:
    """Zip ground locations, aux marks and cadlag marks into a configuration."""
    pts = []
    for loc, aux, path in zip(locations, auxs, paths):
        if window.is_temporal:
            x, t = tuple(loc[: window.dim]), float(loc[window.dim])
        else:
            x, t = tuple(np.atleast_1d(loc)), None
        pts.append(MarkedPoint(x, t, aux, path))
    return Configuration(pts, window, reference)
