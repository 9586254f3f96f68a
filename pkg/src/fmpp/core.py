"""Core state spaces and geometric primitives.

Houses the observation window, grid-sampled cadlag paths, marked points,
finite configurations and their reference-measure descriptors, together
with the path metrics (time-warp metric and uniform metric), cylinder
neighbourhoods, ground/temporal projections, torus shifts and JSON/CSV
serialization.

All types are immutable after construction and every operation is a pure
function, so values can be shared freely across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "Window",
    "AuxMark",
    "CadlagPath",
    "MarkedPoint",
    "Configuration",
    "ReferenceSpec",
    "AuxMeasure",
    "SampleSchedule",
    "skorohod_distance",
    "uniform_distance",
    "cylinder_contains",
    "ground_projection",
    "temporal_projection",
    "shift",
    "configuration_to_json",
    "configuration_from_json",
    "configuration_to_csv_rows",
    "write_configuration_csv",
]


# ---------------------------------------------------------------------------
# Window
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Window:
    """Axis-aligned spatial box, optionally with a time interval [0, t_star].

    ``torus`` identifies opposite sides of the spatial box.  ``time_scale``
    is the factor applied to time differences when space and time enter a
    common ground metric (default 1, i.e. both measured on their own scale).
    """

    lo: tuple
    hi: tuple
    t_star: float | None = None
    torus: bool = False
    time_scale: float = 1.0

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValidationError("window lo/hi dimension mismatch")
        if not 1 <= len(lo) <= 3:
            raise ValidationError("spatial dimension must be 1, 2 or 3")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValidationError("spatial box must have positive volume")
        if self.t_star is not None and not self.t_star > 0:
            raise ValidationError("t_star must be positive when present")
        if self.time_scale <= 0:
            raise ValidationError("time_scale must be positive")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def ground_volume(self) -> float:
        """Volume of the ground space: spatial, times t_star if temporal."""
        v = self.volume
        return v * self.t_star if self.t_star is not None else v

    @property
    def is_temporal(self) -> bool:
        return self.t_star is not None

    def contains(self, x: Sequence[float], t: float | None = None) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValidationError(f"location must have dimension {self.dim}")
        ok = bool(np.all(x >= self.lo) and np.all(x <= self.hi))
        if self.is_temporal:
            if t is None:
                return False
            ok = ok and 0.0 <= t <= self.t_star
        return ok

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Wrap spatial coordinates onto the torus (requires torus flag)."""
        lo = np.asarray(self.lo)
        return lo + np.mod(np.asarray(x, dtype=float) - lo, self.sides)

    def spatial_distance(self, a, b) -> float:
        """Euclidean distance, with minimal-image convention on the torus."""
        d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        if self.torus:
            d = np.minimum(d, self.sides - d)
        return float(np.sqrt(np.sum(d * d)))

    def ground_distance(self, g1, g2) -> float:
        """Supremum ground metric max(spatial, time_scale * |dt|)."""
        (x1, t1), (x2, t2) = g1, g2
        ds = self.spatial_distance(x1, x2)
        if t1 is None or t2 is None:
            return ds
        return max(ds, self.time_scale * abs(t1 - t2))


# ---------------------------------------------------------------------------
# Marks
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AuxMark:
    """Auxiliary mark: a discrete type in {1..k} and/or a continuous vector."""

    discrete: int | None = None
    continuous: tuple | None = None

    def __post_init__(self):
        if self.discrete is None and self.continuous is None:
            raise ValidationError("auxiliary mark needs a discrete or continuous part")
        if self.discrete is not None and self.discrete < 1:
            raise ValidationError("discrete auxiliary mark must be >= 1")
        if self.continuous is not None:
            cont = tuple(float(v) for v in self.continuous)
            if not all(np.isfinite(cont)):
                raise ValidationError("continuous auxiliary mark must be finite")
            object.__setattr__(self, "continuous", cont)


class CadlagPath:
    """Right-continuous path sampled on a finite grid.

    The value at ``grid[j]`` holds on ``[grid[j], grid[j+1])`` in ``step``
    mode; ``linear`` mode interpolates between grid points.  Outside the
    half-open support interval ``[support[0], support[1])`` the path is
    identically zero; the degenerate support ``[a, a)`` is the zero path.
    """

    __slots__ = ("grid", "values", "support", "mode", "t_star")

    def __init__(self, grid, values, support=None, mode="step", t_star=None):
        grid = np.atleast_1d(np.asarray(grid, dtype=float))
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValidationError("grid and values must be 1-d arrays of equal length")
        if grid.size == 0:
            raise ValidationError("path grid must be non-empty")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("path grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("path values must be finite")
        if support is None:
            support = (float(grid[0]), np.inf)
        a, b = float(support[0]), float(support[1])
        if b < a:
            raise ValidationError("support end must be >= support start")
        if t_star is not None:
            t_star = float(t_star)
            if grid[-1] > t_star + 1e-12:
                raise ValidationError("path grid exceeds the ambient interval")
        self.grid = grid
        self.values = values
        self.support = (a, b)
        self.mode = str(mode)
        self.t_star = t_star
        if self.mode not in ("step", "linear"):
            raise ValidationError("mode must be 'step' or 'linear'")
        outside = (grid < a) | (grid >= b)
        if np.any(values[outside] != 0.0):
            raise ValidationError("path must be zero at grid times outside its support")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        if self.mode == "step":
            idx = np.searchsorted(self.grid, tt, side="right") - 1
            out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], 0.0)
        else:
            out = np.interp(tt, self.grid, self.values)
            out = np.where(tt < self.grid[0], 0.0, out)
        a, b = self.support
        out = np.where((tt >= a) & (tt < b), out, 0.0)
        return float(out[0]) if scalar else out

    @property
    def ambient_end(self) -> float:
        if self.t_star is not None:
            return self.t_star
        a, b = self.support
        return max(float(self.grid[-1]), b if np.isfinite(b) else float(self.grid[-1]))

    def __eq__(self, other):
        if not isinstance(other, CadlagPath):
            return NotImplemented
        return (
            np.array_equal(self.grid, other.grid)
            and np.array_equal(self.values, other.values)
            and self.support == other.support
            and self.mode == other.mode
            and self.t_star == other.t_star
        )

    def __repr__(self):
        return (
            f"CadlagPath(n={self.grid.size}, support={self.support!r}, "
            f"mode={self.mode!r})"
        )


@dataclass(frozen=True)
class MarkedPoint:
    """One point: spatial location, optional event time, aux and functional mark."""

    x: tuple
    t: float | None
    aux: AuxMark
    mark: CadlagPath

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if self.t is not None:
            object.__setattr__(self, "t", float(self.t))

    @property
    def location(self):
        return (self.x, self.t)


# ---------------------------------------------------------------------------
# Reference measures
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AuxMeasure:
    """Reference measure on the auxiliary-mark space.

    kind 'counting': counting measure on {1..k} (params = (k,));
    kind 'lebesgue': Lebesgue on an interval (params = (lo, hi), hi may be inf);
    kind 'expon': unit-rate exponential probability measure on [0, inf)
    (params = (rate,)); kind 'product': counting x continuous.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("counting", "lebesgue", "expon", "product"):
            raise ValidationError(f"unknown aux measure kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def mass(self) -> float:
        if self.kind == "counting":
            return float(self.params[0])
        if self.kind == "lebesgue":
            lo, hi = self.params
            return float(hi - lo)
        if self.kind == "expon":
            return 1.0
        k = float(self.params[0])
        return k * AuxMeasure(self.params[1], tuple(self.params[2:])).mass

    @property
    def finite(self) -> bool:
        return np.isfinite(self.mass)


@dataclass(frozen=True)
class ReferenceSpec:
    """Reference measure split: aux measure and functional-mark reference law."""

    aux: AuxMeasure = field(default_factory=lambda: AuxMeasure("counting", (1,)))
    mark_reference: tuple = ("wiener", 1.0)

    def __post_init__(self):
        kind = self.mark_reference[0]
        if kind not in ("wiener", "point_mass", "custom"):
            raise ValidationError(f"unknown mark reference {kind!r}")
        object.__setattr__(self, "mark_reference", tuple(self.mark_reference))


@dataclass(frozen=True)
class SampleSchedule:
    """The discrete mark-sampling times s_1 < ... < s_k."""

    times: tuple

    def __post_init__(self):
        times = tuple(float(s) for s in self.times)
        if len(times) == 0:
            raise ValidationError("sample schedule must be non-empty")
        if any(s < 0 for s in times):
            raise ValidationError("sample times must be nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    def validate_within(self, t_star: float):
        if self.times[-1] > t_star:
            raise ValidationError("sample times must lie within [0, t_star]")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
class Configuration:
    """A finite realization: marked points in a window plus reference spec.

    The ground locations must be pairwise distinct (simplicity of the ground
    measure); construction fails otherwise.
    """

    __slots__ = ("points", "window", "reference")

    def __init__(self, points: Iterable[MarkedPoint], window: Window,
                 reference: ReferenceSpec | None = None):
        points = tuple(points)
        seen = set()
        for p in points:
            if not isinstance(p, MarkedPoint):
                raise ValidationError("configuration points must be MarkedPoint")
            key = (p.x, p.t)
            if key in seen:
                raise ValidationError(f"duplicate ground location {key}")
            seen.add(key)
            if window.is_temporal and p.t is None:
                raise ValidationError("temporal window requires event times")
            if not window.contains(p.x, p.t):
                raise ValidationError(f"point {key} lies outside the window")
            if window.is_temporal and p.mark.support[0] < -1e-12:
                raise ValidationError("mark support must start at a nonnegative time")
        self.points = points
        self.window = window
        self.reference = reference if reference is not None else ReferenceSpec()

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def locations(self) -> np.ndarray:
        """Ground locations as an (n, d) or (n, d+1) array (time last)."""
        if not self.points:
            d = self.window.dim + (1 if self.window.is_temporal else 0)
            return np.empty((0, d))
        rows = []
        for p in self.points:
            rows.append(list(p.x) + ([p.t] if self.window.is_temporal else []))
        return np.asarray(rows, dtype=float)

    def spatial_locations(self) -> np.ndarray:
        if not self.points:
            return np.empty((0, self.window.dim))
        return np.asarray([p.x for p in self.points], dtype=float)


def ground_projection(c: Configuration) -> list:
    """Drop all marks: the ground locations, order preserved."""
    if c.window.is_temporal:
        return [(p.x, p.t) for p in c.points]
    return [p.x for p in c.points]


def temporal_projection(c: Configuration) -> list:
    """Event times of a temporally grounded configuration, order preserved."""
    if not c.window.is_temporal:
        raise ValidationError("configuration has no temporal component")
    return [p.t for p in c.points]


def shift(c: Configuration, z) -> Configuration:
    """Translate all ground locations by z, keeping marks unchanged.

    On a torus the spatial part wraps; otherwise every shifted point must
    stay inside the window.  For temporal windows z may carry a trailing
    time component, which never wraps.
    """
    z = np.asarray(z, dtype=float)
    d = c.window.dim
    if z.shape == (d,):
        zt = 0.0
    elif c.window.is_temporal and z.shape == (d + 1,):
        z, zt = z[:d], float(z[d])
    else:
        raise ValidationError("shift vector has the wrong dimension")
    new_points = []
    for p in c.points:
        x = np.asarray(p.x) + z
        if c.window.torus:
            x = c.window.wrap(x)
        t = p.t if p.t is None else p.t + zt
        if not c.window.contains(x, t):
            raise ValidationError("shift pushes a point outside the window")
        new_points.append(MarkedPoint(tuple(x), t, p.aux, p.mark))
    return Configuration(new_points, c.window, c.reference)


def cylinder_contains(center, u: float, v: float, query, window: Window | None = None) -> bool:
    """Closed space-time cylinder membership test.

    True iff the spatial distance between center and query is <= u and the
    absolute time difference is <= v.  Uses the torus metric when the given
    window has the torus flag.  Points are (x, t) pairs; if both times are
    None only the spatial condition applies.
    """
    if u < 0 or v < 0:
        raise ValidationError("cylinder radii must be nonnegative")
    (xc, tc), (xq, tq) = center, query
    xc = np.asarray(xc, dtype=float)
    xq = np.asarray(xq, dtype=float)
    dx = np.abs(xc - xq)
    if window is not None and window.torus:
        dx = np.minimum(dx, window.sides - dx)
    if float(np.sqrt(np.sum(dx * dx))) > u:
        return False
    if tc is None and tq is None:
        return True
    if tc is None or tq is None:
        raise ValidationError("cannot mix timed and untimed points")
    return abs(tc - tq) <= v


# ---------------------------------------------------------------------------
# Path metrics
# ---------------------------------------------------------------------------
def _common_ambient(f: CadlagPath, g: CadlagPath) -> float:
    if f.t_star is not None and g.t_star is not None and f.t_star != g.t_star:
        raise ValidationError("paths live on different ambient intervals")
    return max(f.ambient_end, g.ambient_end)


def _merged_grid(f: CadlagPath, g: CadlagPath, t_star: float) -> np.ndarray:
    pts = np.concatenate([
        f.grid, g.grid,
        np.asarray(f.support), np.asarray(g.support),
        np.asarray([0.0, t_star]),
    ])
    pts = pts[np.isfinite(pts)]
    pts = np.unique(np.clip(pts, 0.0, t_star))
    return pts


def uniform_distance(f: CadlagPath, g: CadlagPath) -> float:
    """Supremum distance over the merged grid of two paths."""
    t_star = _common_ambient(f, g)
    pts = _merged_grid(f, g, t_star)
    # midpoints catch the open step intervals, the points themselves the jumps
    mids = 0.5 * (pts[:-1] + pts[1:])
    sample = np.concatenate([pts, mids])
    return float(np.max(np.abs(f(sample) - g(sample))))


def skorohod_distance(f: CadlagPath, g: CadlagPath, warp_grid_resolution: int = 32) -> float:
    """Time-warp distance between two grid paths.

    Minimizes max(gamma(w), int e^{-u} sup_t min(|f(t^u) - g(w(t)^u)|, 1) du)
    over a finite family of piecewise-linear monotone surjective warps w built
    by dynamic programming on the warp lattice (plus the identity), where
    gamma(w) is the largest |log slope| over warp segments and ^ denotes
    truncation min(.,u).  The result upper-bounds the true infimum and is
    symmetric in (f, g).
    """
    from ._skorohod import skorohod_distance_impl

    if warp_grid_resolution < 2:
        raise ValidationError("warp_grid_resolution must be >= 2")
    t_star = _common_ambient(f, g)
    if t_star <= 0:
        raise ValidationError("degenerate ambient interval")
    return skorohod_distance_impl(f, g, t_star, int(warp_grid_resolution))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------
def _aux_to_obj(a: AuxMark) -> dict:
    out = {}
    if a.discrete is not None:
        out["discrete"] = int(a.discrete)
    if a.continuous is not None:
        out["continuous"] = list(a.continuous)
    return out


def _aux_from_obj(obj: dict) -> AuxMark:
    return AuxMark(
        discrete=obj.get("discrete"),
        continuous=tuple(obj["continuous"]) if "continuous" in obj else None,
    )


def configuration_to_json(c: Configuration) -> str:
    """Serialize a configuration; floats round-trip at full precision."""
    sup = lambda s: [s[0], None if np.isinf(s[1]) else s[1]]
    obj = {
        "window": {
            "lo": list(c.window.lo),
            "hi": list(c.window.hi),
            "t_star": c.window.t_star,
            "torus": c.window.torus,
            "time_scale": c.window.time_scale,
        },
        "reference": {
            "aux": {"kind": c.reference.aux.kind, "params": list(c.reference.aux.params)},
            "mark_reference": list(c.reference.mark_reference),
        },
        "points": [
            {
                "x": list(p.x),
                **({"t": p.t} if p.t is not None else {}),
                "aux": _aux_to_obj(p.aux),
                "mark": {
                    "grid": p.mark.grid.tolist(),
                    "values": p.mark.values.tolist(),
                    "support": sup(p.mark.support),
                    "mode": p.mark.mode,
                    "t_star": p.mark.t_star,
                },
            }
            for p in c.points
        ],
    }
    return json.dumps(obj)


def configuration_from_json(text: str) -> Configuration:
    obj = json.loads(text)
    w = obj["window"]
    window = Window(tuple(w["lo"]), tuple(w["hi"]), w.get("t_star"),
                    w.get("torus", False), w.get("time_scale", 1.0))
    r = obj.get("reference", {})
    aux_obj = r.get("aux", {"kind": "counting", "params": [1]})
    reference = ReferenceSpec(
        AuxMeasure(aux_obj["kind"], tuple(aux_obj["params"])),
        tuple(r.get("mark_reference", ("wiener", 1.0))),
    )
    points = []
    for po in obj["points"]:
        m = po["mark"]
        a, b = m["support"]
        path = CadlagPath(m["grid"], m["values"],
                          (a, np.inf if b is None else b),
                          m.get("mode", "step"), m.get("t_star"))
        points.append(MarkedPoint(tuple(po["x"]), po.get("t"),
                                  _aux_from_obj(po["aux"]), path))
    return Configuration(points, window, reference)


def configuration_to_csv_rows(c: Configuration) -> list:
    """Flat export: one row per (point, grid-time) pair."""
    header = ["point", *(f"x{i+1}" for i in range(c.window.dim)), "t",
              "aux_discrete", "aux_continuous", "grid_time", "value",
              "support_start", "support_end"]
    rows = [header]
    for i, p in enumerate(c.points):
        cont = "" if p.aux.continuous is None else ";".join(repr(v) for v in p.aux.continuous)
        disc = "" if p.aux.discrete is None else str(p.aux.discrete)
        tval = "" if p.t is None else repr(p.t)
        for tj, vj in zip(p.mark.grid, p.mark.values):
            rows.append([
                str(i), *(repr(v) for v in p.x), tval, disc, cont,
                repr(float(tj)), repr(float(vj)),
                repr(p.mark.support[0]), repr(p.mark.support[1]),
            ])
    return rows


def write_configuration_csv(c: Configuration, path, metadata: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in (metadata or {}).items():
            fh.write(f"# {k}={v}\n")
        for row in configuration_to_csv_rows(c):
            fh.write(",".join(row) + "\n")
