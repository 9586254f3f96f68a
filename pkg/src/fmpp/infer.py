"""Model-level densities and the estimation schemes.

Intensity functionals and conditional intensities for parametric ground
models with sampled-mark and auxiliary factors, Janossy densities and
densities with respect to a reference Poisson process, Papangelou
conditional intensities, and four fitting routes: temporal maximum
likelihood, finite-sample (Janossy) likelihood, maximum pseudo-likelihood,
and least squares on sampled mark trajectories.  All fits share one
derivative-free simplex optimizer.

Ground families are deliberately closed: homogeneous rates, a log-linear
temporal rate exp(a + b t) (self-exciting families are out of scope), and
the inhibitory pairwise-interaction model.  The spatial density of a
temporally grounded model is uniform by default, with a normalized
log-linear-in-x alternative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._optim import nelder_mead
from .core import AuxMark, Configuration, SampleSchedule, Window
from .errors import NumericalError, ValidationError
from .marks import (
    DEGENERATE_DENSITY,
    AuxDensitySpec,
    FidiDensitySpec,
    GrowthInteraction,
    aux_density_eval,
    fidi_density_eval,
    gi_integrate,
)

__all__ = [
    "ParametricModel",
    "Observation",
    "FitResult",
    "JanossyValue",
    "sample_observations",
    "intensity_functional",
    "conditional_intensity",
    "loglik_temporal",
    "janossy_density",
    "janossy_total_mass",
    "density_wrt_poisson",
    "papangelou",
    "pseudolikelihood",
    "least_squares_marks",
    "optimize",
    "fit_loglik_temporal",
    "fit_pseudolikelihood",
]

GROUND_FAMILIES = ("poisson", "poisson-t", "loglinear-t", "gibbs")


@dataclass(frozen=True)
class ParametricModel:
    """Parametric ground model plus marking, with free parameters theta.

    ground families:
      'poisson'      homogeneous rate theta[0] per unit ground volume;
      'poisson-t'    temporally grounded, constant temporal rate theta[0];
      'loglinear-t'  temporal rate exp(theta[0] + theta[1] t);
      'gibbs'        pairwise interaction, theta = (beta, gamma), fixed
                     ranges ``interaction_range``/``temporal_range``.

    ``spatial`` is the spatial density family of temporally grounded
    models: ('uniform',) or ('loglinear-x', c1, ..., cd), normalized on the
    window.  ``aux``/``fidi`` supply the auxiliary and sampled-mark density
    factors; either may be None (factor treated as absent).
    """

    ground: str
    theta: tuple
    window: Window
    bounds: tuple = ()
    aux: AuxDensitySpec | None = None
    fidi: FidiDensitySpec | None = None
    spatial: tuple = ("uniform",)
    interaction_range: float | None = None
    temporal_range: float | None = None

    def __post_init__(self):
        if self.ground not in GROUND_FAMILIES:
            raise ValidationError(f"unknown ground family {self.ground!r}")
        theta = tuple(float(v) for v in self.theta)
        object.__setattr__(self, "theta", theta)
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if bounds:
            if len(bounds) != len(theta):
                raise ValidationError("bounds must match the parameter vector")
            if any(not (np.isfinite(a) and np.isfinite(b)) for a, b in bounds):
                raise ValidationError("bounds must be finite")
            if any(not a <= t <= b for t, (a, b) in zip(theta, bounds)):
                raise ValidationError("theta outside its bounds")
        if self.ground in ("poisson-t", "loglinear-t") and not self.window.is_temporal:
            raise ValidationError("temporal ground family needs a temporal window")
        if self.ground == "gibbs":
            if self.interaction_range is None or self.interaction_range <= 0:
                raise ValidationError("gibbs model needs a positive interaction_range")
            beta, gamma = theta[0], theta[1]
            if beta <= 0 or not 0.0 <= gamma <= 1.0:
                raise ValidationError("gibbs parameters need beta > 0, gamma in [0, 1]")
        if self.spatial[0] not in ("uniform", "loglinear-x"):
            raise ValidationError(f"unknown spatial density family {self.spatial[0]!r}")

    def with_theta(self, theta) -> "ParametricModel":
        return replace(self, theta=tuple(float(v) for v in theta))


@dataclass(frozen=True)
class Observation:
    """One data point: location, optional time, aux mark, sampled mark vector."""

    x: tuple
    t: float | None = None
    aux: AuxMark | None = None
    u: tuple | None = None


@dataclass(frozen=True)
class FitResult:
    theta: tuple
    objective: float
    iterations: int
    converged: bool
    scheme: str

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "theta_hat": list(self.theta),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class JanossyValue:
    value: float
    normalized: bool


def sample_observations(c: Configuration, schedule: SampleSchedule) -> list:
    """Read the mark of every point at the schedule times."""
    out = []
    for p in c.points:
        u = tuple(float(p.mark(s)) for s in schedule.times)
        out.append(Observation(p.x, p.t, p.aux, u))
    return out


# ---------------------------------------------------------------------------
# ground building blocks
# ---------------------------------------------------------------------------
def _spatial_density(model: ParametricModel, x) -> float:
    w = model.window
    fam = model.spatial[0]
    if fam == "uniform":
        return 1.0 / w.volume
    coeffs = np.asarray(model.spatial[1:], dtype=float)
    z = 1.0
    for c_a, lo, hi in zip(coeffs, w.lo, w.hi):
        if c_a == 0.0:
            z *= hi - lo
        else:
            z *= (math.exp(c_a * hi) - math.exp(c_a * lo)) / c_a
    return math.exp(float(np.dot(coeffs, np.asarray(x, dtype=float)))) / z


def temporal_rate(model: ParametricModel, t: float) -> float:
    """Temporal ground conditional intensity of the supported families."""
    if model.ground == "poisson-t":
        return float(model.theta[0])
    if model.ground == "loglinear-t":
        a, b = model.theta[0], model.theta[1]
        return math.exp(a + b * t)
    raise ValidationError("model has no temporal ground rate")


def ground_intensity(model: ParametricModel, g) -> float:
    """First-order ground intensity at a ground location g = x or (x, t)."""
    if model.ground == "poisson":
        return float(model.theta[0])
    if model.ground in ("poisson-t", "loglinear-t"):
        x = np.asarray(g, dtype=float)[: model.window.dim]
        t = float(np.asarray(g, dtype=float)[-1])
        return temporal_rate(model, t) * _spatial_density(model, x)
    raise ValidationError("ground intensity has no closed form for this family")


def ground_intensity_mass(model: ParametricModel, quad_res: int = 64) -> float:
    """Integral of the ground intensity over the window, by quadrature."""
    w = model.window
    if model.ground == "poisson":
        return float(model.theta[0]) * w.ground_volume
    if model.ground in ("poisson-t", "loglinear-t"):
        edges = np.linspace(0.0, w.t_star, quad_res + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        # the spatial density integrates to one over the window
        return float(np.sum([temporal_rate(model, t) for t in mids])
                     * (w.t_star / quad_res))
    raise ValidationError("intensity mass undefined for this family")


def _mark_aux_factors(model: ParametricModel, obs: Observation,
                      schedule: SampleSchedule | None):
    """(mark density or None-if-dropped, aux density or None)."""
    mark = None
    if model.fidi is not None:
        if schedule is None or obs.u is None:
            raise ValidationError("mark factor needs a schedule and sampled values")
        dens = fidi_density_eval(model.fidi, schedule,
                                 np.asarray(obs.u, dtype=float)[None, :])
        mark = None if dens is DEGENERATE_DENSITY else float(dens)
    aux_d = None
    if model.aux is not None:
        if obs.aux is None:
            raise ValidationError("aux factor needs aux marks in the data")
        aux_d = model.aux.point_density((obs.x, obs.t), obs.aux)
    return mark, aux_d


# ---------------------------------------------------------------------------
# intensities
# ---------------------------------------------------------------------------
def intensity_functional(model: ParametricModel, obs: Observation,
                         schedule: SampleSchedule | None = None) -> float:
    """Sampled-mark intensity functional: fidi(u) * aux(l) * ground intensity."""
    g = obs.x if obs.t is None else tuple(obs.x) + (obs.t,)
    lam = ground_intensity(model, g)
    mark, aux_d = _mark_aux_factors(model, obs, schedule)
    if mark is not None:
        lam *= mark
    if aux_d is not None:
        lam *= aux_d
    return float(lam)


def conditional_intensity(model: ParametricModel, history, obs: Observation,
                          schedule: SampleSchedule | None = None) -> float:
    """Predictable conditional intensity of a temporally grounded model.

    ``history`` holds the event times strictly before obs.t (sorted); the
    supported rate families do not feed back on it, but it is validated so
    the predictability contract is explicit.
    """
    if obs.t is None:
        raise ValidationError("conditional intensity needs an event time")
    hist = np.asarray(history, dtype=float)
    if hist.size and np.any(np.diff(hist) < 0):
        raise ValidationError("history must be time-sorted")
    if hist.size and hist[-1] >= obs.t:
        raise ValidationError("history must precede the evaluation time")
    rate = temporal_rate(model, obs.t) * _spatial_density(model, obs.x)
    mark, aux_d = _mark_aux_factors(model, obs, schedule)
    if mark is not None:
        rate *= mark
    if aux_d is not None:
        rate *= aux_d
    return float(rate)


# ---------------------------------------------------------------------------
# likelihoods
# ---------------------------------------------------------------------------
def loglik_temporal(model: ParametricModel, data: Sequence,
                    schedule: SampleSchedule | None = None,
                    quad_res: int = 64) -> float:
    """Temporal log-likelihood sum log(rate) - compensator integral.

    The mark and aux densities enter the event sum only; their integrals
    over the mark spaces are one, so the compensator reduces to the double
    integral of the spatial density times the temporal rate (midpoint
    quadrature with ``quad_res`` nodes per axis).
    """
    if model.ground not in ("poisson-t", "loglinear-t"):
        raise ValidationError("temporal likelihood needs a temporally grounded model")
    total = 0.0
    for obs in data:
        lam = conditional_intensity(model, (), obs, schedule)
        if lam <= 0.0 or not np.isfinite(lam):
            raise NumericalError("data point with vanishing conditional intensity")
        total += math.log(lam)
    w = model.window
    t_edges = np.linspace(0.0, w.t_star, quad_res + 1)
    t_mids = 0.5 * (t_edges[:-1] + t_edges[1:])
    axes = [np.linspace(lo, hi, quad_res + 1) for lo, hi in zip(w.lo, w.hi)]
    mids = [0.5 * (e[:-1] + e[1:]) for e in axes]
    mesh = np.meshgrid(*mids, indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=-1)
    cell = np.prod([(hi - lo) / quad_res for lo, hi in zip(w.lo, w.hi)])
    f_spatial = np.asarray([_spatial_density(model, x) for x in xs])
    spatial_mass = float(np.sum(f_spatial) * cell)
    rate = np.asarray([temporal_rate(model, t) for t in t_mids])
    compensator = float(np.sum(rate) * (w.t_star / quad_res) * spatial_mass)
    return total - compensator


def janossy_density(model: ParametricModel, data: Sequence,
                    schedule: SampleSchedule | None = None,
                    quad_res: int = 64) -> JanossyValue:
    """Sampled Janossy density fidi * aux * ground Janossy.

    Poisson families give exp(-mass) * prod(ground intensity); the pairwise
    model returns the unnormalized beta^n gamma^(pairs) with
    ``normalized=False``.
    """
    mark_fac = 1.0
    aux_fac = 1.0
    for obs in data:
        mark, aux_d = _mark_aux_factors(model, obs, schedule)
        if mark is not None:
            mark_fac *= mark
        if aux_d is not None:
            aux_fac *= aux_d
    if model.ground == "gibbs":
        pts = _ground_array(model.window, data)
        beta, gamma = model.theta[0], model.theta[1]
        pairs = _gibbs_pair_count(model, pts)
        val = beta ** len(data) * (gamma ** pairs if pairs else 1.0)
        return JanossyValue(float(val * mark_fac * aux_fac), False)
    mass = ground_intensity_mass(model, quad_res)
    val = math.exp(-mass)
    for obs in data:
        g = obs.x if obs.t is None else tuple(obs.x) + (obs.t,)
        val *= ground_intensity(model, g)
    return JanossyValue(float(val * mark_fac * aux_fac), True)


def janossy_total_mass(model: ParametricModel, n_max: int = 30,
                       quad_res: int = 64,
                       mark_grid: np.ndarray | None = None,
                       schedule: SampleSchedule | None = None) -> float:
    """Truncated normalization sum over n of J_n(Y^n) / n!.

    Every factor is computed numerically: the ground mass by quadrature and
    the mark/aux masses by quadrature over their spaces (both equal one for
    normalized densities), so the series checks the whole density stack.
    """
    if model.ground == "gibbs":
        raise ValidationError("gibbs Janossy densities are unnormalized")
    mass = ground_intensity_mass(model, quad_res)
    mark_mass = 1.0
    if model.fidi is not None and not model.fidi.degenerate:
        if mark_grid is None or schedule is None or len(schedule) != 1:
            raise ValidationError(
                "mark mass quadrature needs a value grid and a k=1 schedule")
        du = mark_grid[1] - mark_grid[0]
        mark_mass = float(sum(
            fidi_density_eval(model.fidi, schedule, np.asarray([[u]]))
            for u in mark_grid) * du)
    aux_mass = 1.0
    if model.aux is not None and model.aux.discrete_probs is not None:
        probs = model.aux.discrete_probs
        probs = probs((None, None)) if callable(probs) else probs
        aux_mass = float(np.sum(np.asarray(probs, dtype=float)))
    lam_total = mass * mark_mass * aux_mass
    return float(sum(math.exp(-mass + n * math.log(lam_total) - math.lgamma(n + 1))
                     if lam_total > 0 else (math.exp(-mass) if n == 0 else 0.0)
                     for n in range(n_max + 1)))


def density_wrt_poisson(model: ParametricModel, data: Sequence,
                        reference: ParametricModel,
                        schedule: SampleSchedule | None = None,
                        quad_res: int = 64) -> float:
    """Likelihood ratio of a finite model against a reference Poisson process.

    exp(reference mass) * model Janossy / product of reference intensity
    functionals at the points; identically one when model and reference
    coincide, and with unit mean under the reference law.  Needs a finite
    auxiliary reference measure.
    """
    if reference.ground not in ("poisson", "poisson-t", "loglinear-t"):
        raise ValidationError("reference must be a Poisson family")
    for m in (model, reference):
        if m.aux is not None and not m.aux.measure.finite:
            raise ValidationError("auxiliary reference measure must be finite")
    mass_ref = ground_intensity_mass(reference, quad_res)
    jan = janossy_density(model, data, schedule, quad_res)
    if not jan.normalized:
        raise ValidationError("model Janossy density is unnormalized")
    denom = 1.0
    for obs in data:
        lam = intensity_functional(reference, obs, schedule)
        if lam <= 0:
            raise NumericalError("reference intensity vanishes at a data point")
        denom *= lam
    return float(math.exp(mass_ref) * jan.value / denom)


# ---------------------------------------------------------------------------
# Papangelou and pseudo-likelihood
# ---------------------------------------------------------------------------
def _ground_array(w: Window, data: Sequence) -> np.ndarray:
    rows = []
    for obs in data:
        rows.append(list(obs.x) + ([obs.t] if obs.t is not None else []))
    d = w.dim + (1 if w.is_temporal else 0)
    return np.asarray(rows, dtype=float).reshape(-1, d)


def _gibbs_pair_count(model: ParametricModel, pts: np.ndarray) -> int:
    n = pts.shape[0]
    if n < 2:
        return 0
    trad = -1.0 if model.temporal_range is None else float(model.temporal_range)
    total = 0
    counts = _kernels.neighbour_counts(
        np.ascontiguousarray(pts), np.ascontiguousarray(pts),
        model.window.sides.astype(float), model.window.torus,
        float(model.interaction_range), trad, model.window.dim)
    total = int(np.sum(counts) - n) // 2  # self-pairs removed, unordered
    return total


def _gibbs_neighbour_count(model: ParametricModel, g: np.ndarray,
                           pts: np.ndarray) -> int:
    if pts.shape[0] == 0:
        return 0
    trad = -1.0 if model.temporal_range is None else float(model.temporal_range)
    return int(_kernels.neighbour_counts(
        np.ascontiguousarray(np.atleast_2d(g)), np.ascontiguousarray(pts),
        model.window.sides.astype(float), model.window.torus,
        float(model.interaction_range), trad, model.window.dim)[0])


def papangelou_ground(model: ParametricModel, g, ground_pts: np.ndarray) -> float:
    """Ground-space Papangelou conditional intensity at g given the points."""
    g = np.asarray(g, dtype=float)
    if model.ground == "gibbs":
        beta, gamma = model.theta[0], model.theta[1]
        cnt = _gibbs_neighbour_count(model, g, ground_pts)
        return float(beta * gamma ** cnt) if cnt else float(beta)
    return ground_intensity(model, g)


def papangelou(model: ParametricModel, obs: Observation, config: Sequence,
               schedule: SampleSchedule | None = None) -> float:
    """Papangelou conditional intensity of a candidate point given a
    configuration (zero when the candidate ground location already occurs).

    For Poisson families this is the intensity functional, independent of
    the configuration; for the pairwise model it is beta gamma^(neighbours)
    times the mark and aux factors.
    """
    pts = _ground_array(model.window, config)
    g = np.asarray(list(obs.x) + ([obs.t] if obs.t is not None else []))
    if pts.size and np.any(np.all(pts == g[None, :], axis=1)):
        return 0.0
    lam = papangelou_ground(model, g, pts)
    mark, aux_d = _mark_aux_factors(model, obs, schedule)
    if mark is not None:
        lam *= mark
    if aux_d is not None:
        lam *= aux_d
    return float(lam)


def pseudolikelihood(model: ParametricModel, data: Sequence,
                     schedule: SampleSchedule | None = None,
                     quad_res: int = 64) -> float:
    """Log pseudo-likelihood sum log lambda(x_i; data minus x_i) - integral.

    The event sum adds the sampled-mark and aux log densities; the integral
    term is mark-integrated (the fidi density integrates to one), leaving
    the ground Papangelou intensity integrated over the window by midpoint
    quadrature (exactly summed over a discrete aux space).
    """
    pts = _ground_array(model.window, data)
    total = 0.0
    for i, obs in enumerate(data):
        rest = np.delete(pts, i, axis=0)
        g = pts[i]
        lam = papangelou_ground(model, g, rest)
        mark, aux_d = _mark_aux_factors(model, obs, schedule)
        if mark is not None:
            lam *= mark
        if aux_d is not None:
            lam *= aux_d
        if lam <= 0.0 or not np.isfinite(lam):
            raise NumericalError("vanishing Papangelou intensity at a data point")
        total += math.log(lam)
    w = model.window
    bounds = list(zip(w.lo, w.hi))
    if w.is_temporal:
        bounds.append((0.0, w.t_star))
    axes = [np.linspace(lo, hi, quad_res + 1) for lo, hi in bounds]
    mids = [0.5 * (e[:-1] + e[1:]) for e in axes]
    mesh = np.meshgrid(*mids, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    cell = float(np.prod([(hi - lo) / quad_res for lo, hi in bounds]))
    if model.ground == "gibbs":
        beta, gamma = model.theta[0], model.theta[1]
        trad = -1.0 if model.temporal_range is None else float(model.temporal_range)
        counts = _kernels.neighbour_counts(
            np.ascontiguousarray(nodes), np.ascontiguousarray(pts),
            w.sides.astype(float), w.torus, float(model.interaction_range),
            trad, w.dim)
        integral = float(np.sum(beta * np.power(gamma, counts)) * cell)
    else:
        integral = float(np.sum([ground_intensity(model, g) for g in nodes]) * cell)
    return total - integral


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------
def optimize(objective: Callable, theta0, bounds=None, budget: int = 500,
             scheme: str = "custom") -> FitResult:
    """Minimize a black-box objective; the result is never worse than theta0."""
    theta, fval, evals, converged = nelder_mead(objective, theta0, bounds, budget)
    return FitResult(tuple(float(v) for v in theta), float(fval), evals,
                     converged, scheme)


def fit_loglik_temporal(model: ParametricModel, data: Sequence,
                        schedule: SampleSchedule | None = None,
                        theta0=None, budget: int = 500,
                        quad_res: int = 64) -> FitResult:
    """Maximum likelihood for temporally grounded models."""
    theta0 = model.theta if theta0 is None else theta0

    def objective(theta):
        try:
            return -loglik_temporal(model.with_theta(theta), data, schedule,
                                    quad_res)
        except NumericalError:
            return 1e12

    res = optimize(objective, theta0, model.bounds or None, budget,
                   "mle-temporal")
    return replace(res, objective=-res.objective)


def fit_pseudolikelihood(model: ParametricModel, data: Sequence,
                         schedule: SampleSchedule | None = None,
                         theta0=None, budget: int = 500,
                         quad_res: int = 64) -> FitResult:
    """Maximum pseudo-likelihood (the only normalization-free Gibbs fit)."""
    theta0 = model.theta if theta0 is None else theta0

    def objective(theta):
        try:
            return -pseudolikelihood(model.with_theta(theta), data, schedule,
                                     quad_res)
        except NumericalError:
            return 1e12

    res = optimize(objective, theta0, model.bounds or None, budget, "pseudo")
    return replace(res, objective=-res.objective)


def least_squares_marks(family: Callable, points, observed, schedule:
                        SampleSchedule, theta0, bounds=None, dt: float = 0.01,
                        t_star: float | None = None, budget: int = 400,
                        edge_correction: str = "none",
                        torus_simulator: Callable | None = None,
                        correction_rounds: int = 1, seed: int = 0) -> FitResult:
    """Least squares on sampled growth trajectories.

    ``family(theta)`` builds the growth model; ``points`` is (locations,
    births, lifetimes) and ``observed`` the (n, k) matrix of mark values at
    the schedule times.  Fitted trajectories are integrated noise-free
    (the noise term has zero mean) and scored by the summed squared error
    over points and sample times.

    With ``edge_correction='torus-simulation'`` the fitted model is
    re-simulated on an enlarged torus via ``torus_simulator(theta, seed)``,
    which must return extra (locations, births, lifetimes) outside the
    observation window; those points are imputed as missing neighbours and
    the objective re-minimized (``correction_rounds`` times, default one).
    """
    xs, births, lifetimes = points
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    observed = np.atleast_2d(np.asarray(observed, dtype=float))
    if t_star is None:
        t_star = float(schedule.times[-1])
    n = xs.shape[0]
    if observed.shape != (n, len(schedule)):
        raise ValidationError("observed matrix must be n points by k times")

    def make_objective(extra):
        if extra is None:
            all_xs, all_b, all_l = xs, births, lifetimes
        else:
            ex, eb, el = extra
            all_xs = np.vstack([xs, np.atleast_2d(ex)])
            all_b = np.concatenate([births, eb])
            all_l = np.concatenate([lifetimes, el])

        def objective(theta):
            model = family(theta)
            if not isinstance(model, GrowthInteraction):
                raise ValidationError("family must build a growth model")
            model = replace(model, noise=("zero",))
            paths = gi_integrate((all_xs, all_b, all_l), model, dt, seed, t_star)
            err = 0.0
            for i in range(n):
                pred = np.asarray([paths[i](s) for s in schedule.times])
                err += float(np.sum((observed[i] - pred) ** 2))
            return err

        return objective

    res = optimize(make_objective(None), theta0, bounds, budget, "least-squares")
    if edge_correction == "none":
        return res
    if edge_correction != "torus-simulation":
        raise ValidationError("edge_correction must be 'none' or 'torus-simulation'")
    if torus_simulator is None:
        raise ValidationError("torus-simulation correction needs a torus_simulator")
    for r in range(correction_rounds):
        extra = torus_simulator(np.asarray(res.theta), seed + 1 + r)
        res = optimize(make_objective(extra), res.theta, bounds, budget,
                       "least-squares")
    return res
