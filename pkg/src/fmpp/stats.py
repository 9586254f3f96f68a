"""Empirical summary statistics and Monte Carlo identity checks.

Ground intensity (box counts or kernel), pair correlation of the ground
pattern and its mark-sampled variants, the trace-variogram of located
curves with parametric fitting, ordinary kriging of curves, and the two
moment identities (Campbell, conditional-intensity residual) used to
validate simulators against analytic expectations.

The population quantities come with no canonical estimators; the kernel
and translation-correction choices here are standard plumbing (Epanechnikov
kernel, default bandwidth 0.15/sqrt(intensity), variogram bin width =
window diameter / 15), all overridable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._optim import nelder_mead
from .core import CadlagPath, Configuration, SampleSchedule, Window
from .errors import NumericalError, ValidationError

__all__ = [
    "PcfEstimate",
    "VariogramEstimate",
    "VariogramModel",
    "IntensitySurface",
    "CheckReport",
    "intensity_estimate",
    "pcf_ground",
    "pcf_mark_sampled",
    "trace_variogram",
    "fit_variogram",
    "kriging_weights",
    "kriging_predict",
    "campbell_check",
    "gnz_check",
]


# ---------------------------------------------------------------------------
# intensity
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class IntensitySurface:
    """Piecewise-constant intensity estimate on a regular grid of cells."""

    edges: tuple          # cell edges per ground axis
    values: np.ndarray    # shape = cells per axis
    mode: str

    @property
    def cell_volume(self) -> float:
        out = 1.0
        for e in self.edges:
            out *= e[1] - e[0]
        return out

    def integral(self) -> float:
        return float(np.sum(self.values) * self.cell_volume)


def _ground_bounds(w: Window):
    bounds = list(zip(w.lo, w.hi))
    if w.is_temporal:
        bounds.append((0.0, w.t_star))
    return bounds


def intensity_estimate(c: Configuration, cells=8, mode: str = "box",
                       bandwidth: float | None = None) -> IntensitySurface:
    """Ground intensity on a regular grid.

    Box mode counts points per cell and divides by the cell volume, so the
    estimate integrates exactly to the point count.  Kernel mode smooths
    with a product Epanechnikov kernel (no edge correction, mass is not
    conserved near the boundary).
    """
    bounds = _ground_bounds(c.window)
    ndim = len(bounds)
    if isinstance(cells, int):
        cells = (cells,) * ndim
    if len(cells) != ndim:
        raise ValidationError("cells must match the ground dimension")
    edges = [np.linspace(lo, hi, k + 1) for (lo, hi), k in zip(bounds, cells)]
    locs = c.locations()
    if mode == "box":
        if len(locs):
            values, _ = np.histogramdd(locs, bins=edges)
        else:
            values = np.zeros(cells)
        cellvol = np.prod([e[1] - e[0] for e in edges])
        return IntensitySurface(tuple(e for e in edges), values / cellvol, "box")
    if mode != "kernel":
        raise ValidationError("mode must be 'box' or 'kernel'")
    if bandwidth is None or bandwidth <= 0:
        raise ValidationError("kernel mode needs a positive bandwidth")
    centers = [0.5 * (e[:-1] + e[1:]) for e in edges]
    mesh = np.meshgrid(*centers, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=-1)
    values = np.zeros(grid.shape[0])
    for x in locs:
        u = (grid - x[None, :]) / bandwidth
        k = np.prod(np.where(np.abs(u) < 1, 0.75 * (1 - u * u) / bandwidth, 0.0),
                    axis=1)
        values += k
    return IntensitySurface(tuple(e for e in edges),
                            values.reshape([len(cc) for cc in centers]), "kernel")


# ---------------------------------------------------------------------------
# pair correlation
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PcfEstimate:
    lags: np.ndarray
    values: np.ndarray
    bandwidth: float
    edge_correction: str

    def __post_init__(self):
        if np.any(np.diff(self.lags) <= 0):
            raise ValidationError("lags must be increasing")
        if np.any(self.values < 0):
            raise ValidationError("pair correlation values must be nonnegative")


def _pcf_from_weights(c: Configuration, w, v, pair_norm, lags, bandwidth):
    window = c.window
    pts = c.spatial_locations()
    lags = np.asarray(lags, dtype=float)
    if np.any(lags >= 0.5 * np.min(window.sides)):
        raise ValidationError("lags must stay below half the window side")
    if np.any(lags <= 0):
        raise ValidationError("lags must be positive")
    # the kernel already divides each pair by the surface measure at its
    # own distance, so only the intensity normalizer remains
    num, _ = _kernels.pair_stats(
        np.ascontiguousarray(pts), np.ascontiguousarray(w, dtype=float),
        np.ascontiguousarray(v, dtype=float), lags, float(bandwidth),
        window.sides.astype(float), window.torus)
    denom = pair_norm / window.volume ** 2
    vals = num / denom if denom > 0 else np.zeros_like(num)
    tag = "torus" if window.torus else "translation"
    return PcfEstimate(lags, np.maximum(vals, 0.0), float(bandwidth), tag)


def pcf_ground(c: Configuration, lags, bandwidth: float | None = None) -> PcfEstimate:
    """Kernel pair-correlation estimate of the spatial ground pattern.

    Translation edge correction on a box, minimal-image distances on a
    torus; the intensity normalizer is n(n-1)/|W|^2.  Assumes stationarity.
    """
    if c.window.is_temporal:
        raise ValidationError("ground pcf is implemented for spatial windows")
    n = len(c)
    if n < 2:
        raise ValidationError("need at least two points")
    if bandwidth is None:
        bandwidth = 0.15 / math.sqrt(n / c.window.volume)
    w = np.ones(n)
    return _pcf_from_weights(c, w, w, float(n * (n - 1)), lags, bandwidth)


def pcf_mark_sampled(c: Configuration, schedule: SampleSchedule, lags,
                     bandwidth: float | None = None,
                     test: Callable | None = None,
                     classes: Callable | None = None) -> dict:
    """Second-order statistics with points weighted or classified by their
    sampled mark vector (M(s_1), ..., M(s_k)).

    ``test`` maps the sampled vector to a nonnegative weight (default 1);
    ``classes`` maps a point to a label, in which case one estimate per
    label pair is returned.  Weight normalizers use the empirical weighted
    intensities, so under random labelling (weights independent of
    locations) the estimates agree with the ground pcf in expectation, and
    constant weights reproduce it exactly.
    """
    if c.window.is_temporal:
        raise ValidationError("mark-sampled pcf is implemented for spatial windows")
    n = len(c)
    if n < 2:
        raise ValidationError("need at least two points")
    if c.window.t_star is None:
        horizon = max((p.mark.ambient_end for p in c.points), default=0.0)
    else:
        horizon = c.window.t_star
    if schedule.times[-1] > horizon:
        raise ValidationError("sample time outside the mark horizon")
    if bandwidth is None:
        bandwidth = 0.15 / math.sqrt(n / c.window.volume)
    samples = [np.asarray([p.mark(s) for s in schedule.times]) for p in c.points]
    if classes is not None:
        labels = [classes(p) for p in c.points]
        uniq = sorted(set(labels))
        out = {}
        for a_i, la in enumerate(uniq):
            for lb in uniq[a_i:]:
                w = np.asarray([1.0 if l == la else 0.0 for l in labels])
                v = np.asarray([1.0 if l == lb else 0.0 for l in labels])
                n_a, n_b = w.sum(), v.sum()
                # the kernel scores each cross pair once and each same-class
                # pair in both orders
                norm = n_a * (n_a - 1) if la == lb else n_a * n_b
                if norm <= 0:
                    continue
                out[(la, lb)] = _pcf_from_weights(c, w, v, float(norm), lags,
                                                  bandwidth)
        return out
    w = (np.asarray([float(test(s)) for s in samples]) if test is not None
         else np.ones(n))
    if np.any(w < 0):
        raise ValidationError("mark test weights must be nonnegative")
    if np.all(w == 0):
        raise ValidationError("mark test weights are degenerate")
    # the estimator is scale-invariant in the weights; normalizing makes
    # constant weights reduce to the ground estimate bit for bit
    w = w / (np.sum(w) / n)
    norm = float(np.sum(w) ** 2 - np.sum(w * w))
    if norm <= 0:
        raise ValidationError("mark test weights are degenerate")
    return {"weighted": _pcf_from_weights(c, w, w, norm, lags, bandwidth)}


# ---------------------------------------------------------------------------
# trace-variogram and kriging
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class VariogramEstimate:
    bin_edges: np.ndarray
    values: np.ndarray       # mean half integrated squared difference per bin
    counts: np.ndarray       # pairs per bin (0 flags an empty bin)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


@dataclass(frozen=True)
class VariogramModel:
    """Parametric variogram: 'exponential' or 'spherical', zero nugget allowed."""

    family: str
    nugget: float
    sill: float
    range_: float

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        if self.family == "exponential":
            base = 1.0 - np.exp(-h / self.range_)
        elif self.family == "spherical":
            x = np.clip(h / self.range_, 0.0, 1.0)
            base = 1.5 * x - 0.5 * x ** 3
        else:
            raise ValidationError(f"unknown variogram family {self.family!r}")
        out = self.nugget + self.sill * base
        return np.where(h <= 0, 0.0, out)


def _pair_trace_values(curves):
    locs = np.atleast_2d(np.asarray([loc for loc, _ in curves], dtype=float))
    paths = [p for _, p in curves]
    grid = paths[0].grid
    for p in paths[1:]:
        if not np.array_equal(p.grid, grid):
            raise ValidationError("curves must share a common grid")
    V = np.stack([p.values for p in paths])
    # trapezoid weights on the shared grid
    wts = np.zeros(grid.size)
    dg = np.diff(grid)
    wts[:-1] += 0.5 * dg
    wts[1:] += 0.5 * dg
    S = (V * wts) @ V.T
    diag = np.diag(S)
    D = 0.5 * (diag[:, None] + diag[None, :] - 2.0 * S)
    dx = locs[:, None, :] - locs[None, :, :]
    H = np.sqrt(np.sum(dx * dx, axis=-1))
    iu = np.triu_indices(len(paths), k=1)
    return H[iu], D[iu]


def trace_variogram(curves: Sequence, bins=None) -> VariogramEstimate:
    """Empirical trace-variogram of located curves.

    Bin average of half the integrated squared curve difference (trapezoid
    rule on the shared grid) over pairs at spatial distance in each bin.
    ``bins`` is an edge array or a bin count; the default is 15 equal bins
    up to the largest pair distance (window-diameter/15 spacing).
    """
    if len(curves) < 2:
        raise ValidationError("need at least two curves")
    h, d = _pair_trace_values(curves)
    if bins is None:
        bins = 15
    if np.isscalar(bins):
        edges = np.linspace(0.0, float(np.max(h)) * (1 + 1e-12), int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    idx = np.clip(np.searchsorted(edges, h, side="right") - 1, 0, len(edges) - 2)
    values = np.zeros(len(edges) - 1)
    counts = np.zeros(len(edges) - 1, dtype=int)
    for k in range(len(edges) - 1):
        mask = (idx == k) & (h >= edges[0]) & (h <= edges[-1])
        counts[k] = int(np.sum(mask))
        if counts[k]:
            values[k] = float(np.mean(d[mask]))
    return VariogramEstimate(edges, values, counts)


def fit_variogram(est: VariogramEstimate, family: str = "exponential") -> VariogramModel:
    """Weighted least squares on the binned estimate (weights = pair counts)."""
    mask = est.counts > 0
    if not np.any(mask):
        raise ValidationError("variogram estimate has no occupied bins")
    h = est.bin_centers[mask]
    g = est.values[mask]
    wts = est.counts[mask].astype(float)
    sill0 = max(float(np.max(g)), 1e-12)
    range0 = max(float(np.max(h)) / 3.0, 1e-6)

    def objective(theta):
        model = VariogramModel(family, theta[0], theta[1], theta[2])
        return float(np.sum(wts * (model(h) - g) ** 2))

    theta, _, _, _ = nelder_mead(
        objective, np.asarray([0.0, sill0, range0]),
        bounds=[(0.0, sill0 * 10), (1e-12, sill0 * 10),
                (1e-6, float(np.max(h)) * 10)],
        budget=800)
    return VariogramModel(family, float(theta[0]), float(theta[1]), float(theta[2]))


def kriging_weights(locations, x0, model: VariogramModel) -> np.ndarray:
    """Ordinary-kriging weights for predicting at x0 (they sum to one)."""
    locs = np.atleast_2d(np.asarray(locations, dtype=float))
    x0 = np.asarray(x0, dtype=float)
    n = locs.shape[0]
    if n == 0:
        raise ValidationError("kriging needs at least one curve")
    if n == 1:
        return np.asarray([1.0])
    dx = locs[:, None, :] - locs[None, :, :]
    G = model(np.sqrt(np.sum(dx * dx, axis=-1)))
    g0 = model(np.sqrt(np.sum((locs - x0[None, :]) ** 2, axis=-1)))
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = G
    A[n, :n] = 1.0
    A[:n, n] = 1.0
    b = np.concatenate([g0, [1.0]])
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular kriging system") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalError("singular kriging system")
    return sol[:n]


def kriging_predict(curves: Sequence, x0, model: VariogramModel) -> CadlagPath:
    """Predict the curve at x0 as a weighted sum of the observed curves.

    Weights are time-constant ordinary-kriging weights from the fitted
    trace-variogram; prediction at an observed location returns that curve
    (kriging exactness).
    """
    locs = np.atleast_2d(np.asarray([loc for loc, _ in curves], dtype=float))
    paths = [p for _, p in curves]
    x0 = np.asarray(x0, dtype=float)
    dist0 = np.sqrt(np.sum((locs - x0[None, :]) ** 2, axis=1))
    hit = np.where(dist0 < 1e-12)[0]
    if hit.size:
        return paths[int(hit[0])]
    wts = kriging_weights(locs, x0, model)
    grid = paths[0].grid
    vals = np.zeros_like(grid)
    for lam, p in zip(wts, paths):
        if not np.array_equal(p.grid, grid):
            raise ValidationError("curves must share a common grid")
        vals = vals + lam * p.values
    a = min(p.support[0] for p in paths)
    b = max(p.support[1] for p in paths)
    return CadlagPath(grid, vals, (a, b), paths[0].mode, paths[0].t_star)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CheckReport:
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    replicates: int

    @property
    def combined_se(self) -> float:
        return math.sqrt(self.se_lhs ** 2 + self.se_rhs ** 2)

    def passed(self, n_se: float = 3.0) -> bool:
        tol = n_se * max(self.combined_se, 1e-300)
        return abs(self.lhs - self.rhs) <= tol


def _ground_quadrature(w: Window, quad_res: int):
    bounds = _ground_bounds(w)
    axes = []
    for lo, hi in bounds:
        edges = np.linspace(lo, hi, quad_res + 1)
        axes.append(0.5 * (edges[:-1] + edges[1:]))
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    cellvol = np.prod([(hi - lo) / quad_res for lo, hi in bounds])
    return nodes, float(cellvol)


def campbell_check(simulate: Callable, h: Callable, rhs_integrand: Callable,
                   w: Window, replicates: int = 200, seed: int = 0,
                   quad_res: int = 64) -> CheckReport:
    """First-moment identity: E[sum over points of h] vs its intensity integral.

    ``simulate(seed)`` yields a configuration, ``h`` scores a MarkedPoint,
    and ``rhs_integrand(g)`` must equal the mark-averaged h times the ground
    intensity at ground location g (analytic or quadrature-derived by the
    caller); the right side is integrated by midpoint quadrature.
    """
    sums = np.empty(replicates)
    for r in range(replicates):
        c = simulate(seed + r)
        sums[r] = sum(h(p) for p in c.points)
    nodes, cellvol = _ground_quadrature(w, quad_res)
    rhs = float(sum(rhs_integrand(g) for g in nodes) * cellvol)
    lhs = float(np.mean(sums))
    se = float(np.std(sums, ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return CheckReport(lhs, rhs, se, 0.0, replicates)


def gnz_check(simulate: Callable, papangelou: Callable, h: Callable,
              w: Window, replicates: int = 200, seed: int = 0,
              quad_res: int = 32) -> CheckReport:
    """Conditional-intensity residual E[sum_y h(y, c-y)] - E[int h(u,c) lam(u;c) du].

    ``papangelou(u, c)`` and ``h(u, c)`` act on ground locations; the inner
    integral uses midpoint quadrature over the ground space.  The residual
    is zero in expectation under the true model; the report's lhs/rhs are
    the two Monte Carlo sides with the standard error of their difference.
    """
    nodes, cellvol = _ground_quadrature(w, quad_res)
    lhs_r = np.empty(replicates)
    rhs_r = np.empty(replicates)
    for r in range(replicates):
        c = simulate(seed + r)
        pts = ground_locations_array(c)
        total = 0.0
        for i in range(len(pts)):
            rest = np.delete(pts, i, axis=0)
            total += h(pts[i], rest)
        lhs_r[r] = total
        rhs_r[r] = sum(h(u, pts) * papangelou(u, pts) for u in nodes) * cellvol
    diff = lhs_r - rhs_r
    se = float(np.std(diff, ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return CheckReport(float(np.mean(lhs_r)), float(np.mean(rhs_r)), se, 0.0,
                       replicates)


def ground_locations_array(c: Configuration) -> np.ndarray:
    return c.locations()
