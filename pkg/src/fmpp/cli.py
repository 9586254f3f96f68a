"""Command-line entry point.

Subcommands: simulate, summarize, estimate, geometry, check.  A single JSON
config document drives every subcommand; registry names (ground families,
growth functions, kernels, variogram families) are strings resolved at load
time.  Outputs are CSV (comma separator, '.' decimal, '#' metadata lines
above the header) and JSON; replicate r uses seed + r, so reruns with the
same config and seed are byte-identical apart from the manifest timestamp.

Exit codes: 0 success/converged, 1 validation error, 2 runtime or numerical
error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import ground, infer, marks, stats
from .core import (
    AuxMark,
    AuxMeasure,
    Configuration,
    ReferenceSpec,
    SampleSchedule,
    Window,
    configuration_from_json,
    configuration_to_json,
    write_configuration_csv,
)
from .errors import NonConvergenceError, NumericalError, ValidationError

__all__ = ["main", "run_simulate", "run_summarize", "run_estimate",
           "run_geometry", "run_check"]


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------
def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"missing required config field '{path}.{key}'")
    return obj[key]


def _window_from(cfg: dict) -> Window:
    w = _require(cfg, "window", "")
    return Window(tuple(_require(w, "lo", "window")),
                  tuple(_require(w, "hi", "window")),
                  w.get("t_star"), w.get("torus", False),
                  w.get("time_scale", 1.0))


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _mark_grid(cfg: dict, window: Window) -> np.ndarray:
    dt = cfg.get("model", {}).get("mark_grid", {}).get("dt", 0.01)
    horizon = window.t_star if window.is_temporal else 1.0
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(horizon, 1.0):
        raise ValidationError("model.mark_grid.dt must divide the horizon")
    return np.arange(n + 1) * dt


def _csv_write(path: Path, metadata: dict, header: list, rows: list):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in metadata.items():
            fh.write(f"# {k}={v}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------
def _simulate_one(cfg: dict, window: Window, seed: int) -> Configuration:
    model = _require(cfg, "model", "")
    gspec = _require(model, "ground", "model")
    family = _require(gspec, "family", "model.ground")
    aux_spec = model.get("aux", {"kind": "none"})
    mark_spec = model.get("marks", {"model": "none"})
    grid = _mark_grid(cfg, window)
    t_star = window.t_star if window.is_temporal else float(grid[-1])
    rng = np.random.default_rng(seed)
    field = None
    births = lifetimes = None

    if family == "poisson":
        locs = ground.simulate_poisson(
            ground.HomogeneousPoisson(_require(gspec, "rate", "model.ground")),
            window, seed)
    elif family == "lgcp":
        field, locs = ground.simulate_lgcp(
            ground.LogGaussianCox(
                _require(gspec, "mean", "model.ground"),
                tuple(_require(gspec, "kernel", "model.ground")),
                tuple(_require(gspec, "grid", "model.ground"))),
            window, seed)
    elif family == "immigration-death":
        xs, births, lifetimes = ground.simulate_immigration_death(
            ground.ImmigrationDeath(
                _require(gspec, "arrival_rate", "model.ground"),
                _require(gspec, "death_rate", "model.ground")),
            window, seed)
        locs = np.hstack([xs, births[:, None]])
    elif family == "gibbs":
        locs = ground.simulate_gibbs(
            ground.PairwiseGibbs(
                _require(gspec, "beta", "model.ground"),
                _require(gspec, "gamma", "model.ground"),
                _require(gspec, "range", "model.ground"),
                gspec.get("temporal_range")),
            window, int(gspec.get("steps", 20000)), seed)
    elif family in ("poisson-t", "loglinear-t"):
        if not window.is_temporal:
            raise ValidationError("model.ground.family needs window.t_star")
        if family == "poisson-t":
            rate = float(_require(gspec, "rate", "model.ground"))
            tmodel = ground.HomogeneousPoisson(rate / window.volume)
            locs = ground.simulate_poisson(tmodel, window, seed)
        else:
            a = float(_require(gspec, "a", "model.ground"))
            b = float(_require(gspec, "b", "model.ground"))
            lam_max = max(np.exp(a), np.exp(a + b * window.t_star)) / window.volume
            imodel = ground.InhomogeneousPoisson(
                lambda g: np.exp(a + b * g[-1]) / window.volume, lam_max)
            locs = ground.simulate_poisson(imodel, window, seed)
    else:
        raise ValidationError(f"unknown ground family '{family}' in model.ground")

    n = len(locs)
    kind = aux_spec.get("kind", "none")
    if kind == "types":
        probs = np.asarray(_require(aux_spec, "probs", "model.aux"), dtype=float)
        draws = rng.choice(len(probs), size=n, p=probs / probs.sum()) + 1
        auxs = [AuxMark(discrete=int(d)) for d in draws]
        reference = ReferenceSpec(AuxMeasure("counting", (len(probs),)))
    elif kind == "lifetime":
        if lifetimes is None:
            rate = float(_require(aux_spec, "rate", "model.aux"))
            lifetimes = rng.exponential(1.0 / rate, size=n)
        auxs = [AuxMark(continuous=(float(l),)) for l in lifetimes]
        reference = ReferenceSpec(AuxMeasure("expon", (1.0,)))
    elif kind == "none":
        auxs = [AuxMark(discrete=1) for _ in range(n)]
        reference = ReferenceSpec(AuxMeasure("counting", (1,)))
    else:
        raise ValidationError(f"unknown aux kind '{kind}' in model.aux")

    mname = mark_spec.get("model", "none")
    ground_pairs = []
    for i in range(n):
        loc = locs[i]
        if window.is_temporal:
            ground_pairs.append(((tuple(loc[: window.dim]), float(loc[-1])), auxs[i]))
        else:
            ground_pairs.append(((tuple(loc), None), auxs[i]))
    if mname == "none":
        paths = marks.attach_marks(ground_pairs, marks.Deterministic(("constant", 1.0)),
                                   grid, seed, t_star)
    elif mname == "constant":
        paths = marks.attach_marks(
            ground_pairs,
            marks.Deterministic(("constant", float(_require(mark_spec, "value",
                                                            "model.marks")))),
            grid, seed, t_star)
    elif mname == "wiener":
        paths = marks.attach_marks(ground_pairs,
                                   marks.Wiener(float(mark_spec.get("scale", 1.0))),
                                   grid, seed, t_star)
    elif mname == "growth-interaction":
        gi = marks.GrowthInteraction(
            tuple(_require(mark_spec, "growth", "model.marks")),
            tuple(mark_spec.get("interaction", ("none",))),
            tuple(mark_spec.get("noise", ("zero",))),
            float(mark_spec.get("m0", 0.0)),
            mark_spec.get("negative_policy", "clamp"))
        paths = marks.attach_marks(ground_pairs, gi, grid, seed, t_star)
    elif mname == "geostatistical":
        gm = marks.Geostatistical(mark_spec.get("mean", 0.0),
                                  tuple(_require(mark_spec, "kernel", "model.marks")))
        paths = marks.attach_marks(ground_pairs, gm, grid, seed, t_star)
    elif mname == "intensity":
        if field is None:
            raise ValidationError("model.marks 'intensity' needs an lgcp ground")
        paths = marks.attach_marks(ground_pairs, marks.IntensityDependent(field),
                                   grid, seed, t_star)
    else:
        raise ValidationError(f"unknown mark model '{mname}' in model.marks")
    return marks.make_configuration(window, locs, auxs, paths, reference)


def run_simulate(cfg: dict, out: Path, seed: int, replicates: int) -> int:
    window = _window_from(cfg)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r in range(replicates):
        c = _simulate_one(cfg, window, seed + r)
        jpath = out / f"configuration_r{r:03d}.json"
        jpath.write_text(configuration_to_json(c), encoding="utf-8")
        cpath = out / f"marks_r{r:03d}.csv"
        write_configuration_csv(c, cpath, {"seed": seed + r, "replicate": r})
        files += [jpath.name, cpath.name]
        print(f"replicate {r}: {len(c)} points -> {jpath.name}")
    manifest = {
        "command": "simulate",
        "config_hash": _config_hash(cfg),
        "seed": seed,
        "replicates": replicates,
        "files": files,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1),
                                       encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------
def _load_replicates(cfg: dict, section: dict, out: Path) -> list:
    indir = Path(section.get("input", out))
    paths = sorted(indir.glob("configuration_r*.json"))
    if not paths:
        raise ValidationError(f"no configurations found under '{indir}'")
    return [configuration_from_json(p.read_text(encoding="utf-8")) for p in paths]


def run_summarize(cfg: dict, out: Path, seed: int) -> int:
    section = cfg.get("summarize", {})
    configs = _load_replicates(cfg, section, out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": _config_hash(cfg), "seed": seed,
            "replicates": len(configs)}

    if "intensity" in section:
        cells = section["intensity"].get("cells", 8)
        surfaces = [stats.intensity_estimate(c, cells) for c in configs]
        header = ["cell"] + [f"lambda_r{r:03d}" for r in range(len(configs))] + ["pooled"]
        vals = np.stack([s.values.ravel() for s in surfaces])
        rows = [[i, *[_fmt(v) for v in vals[:, i]], _fmt(vals[:, i].mean())]
                for i in range(vals.shape[1])]
        _csv_write(out / "intensity.csv", {**meta, "cells": cells}, header, rows)

    if "pcf" in section:
        psec = section["pcf"]
        lags = np.asarray(_require(psec, "lags", "summarize.pcf"), dtype=float)
        bw = psec.get("bandwidth")
        ests = []
        for c in configs:
            if len(c) < 2:
                raise ValidationError("summarize.pcf: no points in a replicate")
            ests.append(stats.pcf_ground(c, lags, bw))
        vals = np.stack([e.values for e in ests])
        header = ["r"] + [f"g_r{r:03d}" for r in range(len(configs))] + ["pooled"]
        rows = [[_fmt(lags[i]), *[_fmt(v) for v in vals[:, i]],
                 _fmt(vals[:, i].mean())] for i in range(len(lags))]
        _csv_write(out / "pcf.csv",
                   {**meta, "bandwidth": ests[0].bandwidth,
                    "edge_correction": ests[0].edge_correction}, header, rows)

    if "variogram" in section:
        bins = section["variogram"].get("bins", 15)
        ests = []
        for c in configs:
            curves = [(p.x, p.mark) for p in c.points]
            ests.append(stats.trace_variogram(curves, bins))
        centers = ests[0].bin_centers
        header = ["h"] + [f"gamma_r{r:03d}" for r in range(len(configs))] + ["pooled"]
        vals = np.stack([e.values for e in ests])
        rows = [[_fmt(centers[i]), *[_fmt(v) for v in vals[:, i]],
                 _fmt(vals[:, i].mean())] for i in range(len(centers))]
        _csv_write(out / "variogram.csv", {**meta, "bins": bins}, header, rows)

    if "coverage" in section:
        csec = section["coverage"]
        times = _require(csec, "times", "summarize.coverage")
        res = int(csec.get("resolution", 128))
        header = ["t"] + [f"fraction_r{r:03d}" for r in range(len(configs))] + ["pooled"]
        rows = []
        for t in times:
            fr = [geo.coverage_fraction(geo.section(c, t), c.window, res)
                  for c in configs]
            rows.append([_fmt(t), *[_fmt(v) for v in fr], _fmt(float(np.mean(fr)))])
        _csv_write(out / "coverage.csv", {**meta, "resolution": res}, header, rows)
    return 0


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------
def run_estimate(cfg: dict, out: Path, seed: int) -> int:
    section = _require(cfg, "estimate", "")
    scheme = _require(section, "scheme", "estimate")
    window = _window_from(cfg)
    gspec = _require(_require(cfg, "model", ""), "ground", "model")
    family = _require(gspec, "family", "model.ground")
    compatible = {"mle-temporal": ("poisson-t", "loglinear-t"),
                  "pseudo": ("gibbs",),
                  "mle-janossy": ("poisson",),
                  "least-squares": ("poisson", "immigration-death", "gibbs",
                                    "poisson-t", "loglinear-t", "lgcp")}
    if scheme not in compatible:
        raise ValidationError(f"unknown estimate.scheme '{scheme}'")
    if family not in compatible[scheme]:
        raise ValidationError(
            f"estimate.scheme '{scheme}' is incompatible with ground family "
            f"'{family}' (needs one of {compatible[scheme]})")
    configs = _load_replicates(cfg, section, out)
    rep = int(section.get("replicate", 0))
    if not 0 <= rep < len(configs):
        raise ValidationError("estimate.replicate out of range")
    c = configs[rep]
    schedule = (SampleSchedule(tuple(cfg["schedule"]))
                if cfg.get("schedule") else None)
    budget = int(section.get("budget", 500))

    if scheme == "mle-temporal":
        theta0 = section.get("theta0", [1.0] if family == "poisson-t" else [0.0, 0.0])
        bounds = section.get("bounds",
                             [[1e-9, 1e6]] if family == "poisson-t"
                             else [[-10.0, 10.0], [-10.0, 10.0]])
        model = infer.ParametricModel(family, theta0, window,
                                      tuple(tuple(b) for b in bounds))
        data = [infer.Observation(p.x, p.t) for p in c.points]
        fit = infer.fit_loglik_temporal(model, data, None, budget=budget)
    elif scheme == "pseudo":
        theta0 = section.get("theta0", [_require(gspec, "beta", "model.ground"),
                                        _require(gspec, "gamma", "model.ground")])
        bounds = section.get("bounds", [[1e-6, 1e6], [1e-6, 1.0]])
        model = infer.ParametricModel(
            "gibbs", theta0, window, tuple(tuple(b) for b in bounds),
            interaction_range=_require(gspec, "range", "model.ground"),
            temporal_range=gspec.get("temporal_range"))
        data = [infer.Observation(p.x, p.t) for p in c.points]
        fit = infer.fit_pseudolikelihood(model, data, None, budget=budget,
                                         quad_res=int(section.get("quad_res", 48)))
    elif scheme == "mle-janossy":
        theta0 = section.get("theta0", [1.0])
        bounds = section.get("bounds", [[1e-9, 1e6]])
        data = [infer.Observation(p.x, p.t) for p in c.points]

        def objective(theta):
            model = infer.ParametricModel("poisson", theta, window)
            val = infer.janossy_density(model, data).value
            if val <= 0:
                return 1e12
            return -float(np.log(val))

        fit = infer.optimize(objective, theta0,
                             [tuple(b) for b in bounds], budget, "mle-janossy")
    elif scheme == "least-squares":
        mspec = _require(cfg["model"], "marks", "model")
        if mspec.get("model") != "growth-interaction":
            raise ValidationError(
                "estimate.scheme 'least-squares' needs growth-interaction marks")
        if schedule is None:
            raise ValidationError("estimate 'least-squares' needs a schedule")
        growth_name = mspec["growth"][0]
        interaction = tuple(mspec.get("interaction", ("none",)))
        m0 = float(mspec.get("m0", 0.0))

        def family_fn(theta):
            return marks.GrowthInteraction((growth_name, *theta), interaction,
                                           ("zero",), m0)

        if not window.is_temporal:
            raise ValidationError(
                "estimate 'least-squares' needs window.t_star (birth times)")
        if any(p.aux.continuous is None for p in c.points):
            raise ValidationError(
                "estimate 'least-squares' needs lifetime aux marks "
                "(model.aux.kind = 'lifetime')")
        xs = c.spatial_locations()
        births = np.asarray([p.t for p in c.points])
        lifetimes = np.asarray([p.aux.continuous[0] for p in c.points])
        observed = np.asarray([[p.mark(s) for s in schedule.times]
                               for p in c.points])
        theta0 = _require(section, "theta0", "estimate")
        bounds = section.get("bounds")
        fit = infer.least_squares_marks(
            family_fn, (xs, births, lifetimes), observed, schedule, theta0,
            [tuple(b) for b in bounds] if bounds else None,
            dt=float(mspec.get("dt", 0.01)), t_star=window.t_star,
            budget=budget, seed=seed)
    else:
        raise ValidationError(f"unknown estimate.scheme '{scheme}'")

    out.mkdir(parents=True, exist_ok=True)
    report = {**fit.to_dict(), "seed": seed, "replicate": rep,
              "config_hash": _config_hash(cfg)}
    (out / "fit.json").write_text(json.dumps(report, indent=1), encoding="utf-8")
    print(json.dumps(report))
    if not fit.converged:
        raise NonConvergenceError(f"{scheme} fit did not converge")
    return 0


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------
def run_geometry(cfg: dict, out: Path, seed: int) -> int:
    section = cfg.get("geometry", {})
    times = _require(section, "times", "geometry")
    res = int(section.get("resolution", 128))
    configs = _load_replicates(cfg, section, out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": _config_hash(cfg), "resolution": res}
    sec_rows = []
    cov_rows = []
    for t in times:
        fracs = []
        for r, c in enumerate(configs):
            s = geo.section(c, t)
            for k in range(len(s)):
                sec_rows.append([r, _fmt(t), _fmt(s.centers[k, 0]),
                                 _fmt(s.centers[k, 1]), _fmt(s.radii[k])])
            fracs.append(geo.coverage_fraction(s, c.window, res))
        cov_rows.append([_fmt(t), *[_fmt(v) for v in fracs],
                         _fmt(float(np.mean(fracs)))])
    _csv_write(out / "sections.csv", meta,
               ["replicate", "t", "x", "y", "radius"], sec_rows)
    _csv_write(out / "coverage.csv", meta,
               ["t"] + [f"fraction_r{r:03d}" for r in range(len(configs))]
               + ["pooled"], cov_rows)
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------
def run_check(cfg: dict, out: Path, seed: int) -> int:
    section = _require(cfg, "check", "")
    names = section.get("checks", ["campbell", "gnz", "janossy"])
    replicates = int(section.get("replicates", 200))
    window = _window_from(cfg)
    gspec = _require(cfg, "model", "")["ground"]
    if gspec["family"] != "poisson":
        raise ValidationError("check needs the homogeneous poisson ground family")
    rate = float(gspec["rate"])
    box = section.get("box")
    if box is None:
        lo = np.asarray(window.lo)
        box = [list(lo), list(lo + 0.5 * window.sides)]
    blo = np.asarray(box[0], dtype=float)
    bhi = np.asarray(box[1], dtype=float)
    results = []

    def in_box(x):
        return bool(np.all(x >= blo) and np.all(x <= bhi))

    def simulate(s):
        locs = ground.simulate_poisson(ground.HomogeneousPoisson(rate), window, s)
        return marks.make_configuration(
            window, locs, [AuxMark(discrete=1)] * len(locs),
            marks.attach_marks([((tuple(x), None), AuxMark(discrete=1))
                                for x in locs],
                               marks.Deterministic(("constant", 1.0)),
                               np.linspace(0, 1, 3), s, 1.0))

    if "campbell" in names:
        rep = stats.campbell_check(
            simulate, lambda p: 1.0 if in_box(np.asarray(p.x)) else 0.0,
            lambda g: rate if in_box(np.asarray(g)) else 0.0,
            window, replicates, seed, quad_res=int(section.get("quad_res", 64)))
        results.append({"check": "campbell", "lhs": rep.lhs, "rhs": rep.rhs,
                        "se": rep.combined_se, "passed": rep.passed()})
    if "gnz" in names:
        lam_factor = float(section.get("lambda_factor", 1.0))
        rep = stats.gnz_check(
            simulate, lambda u, pts: rate * lam_factor,
            lambda u, pts: 1.0 if in_box(np.asarray(u)) else 0.0,
            window, replicates, seed, quad_res=int(section.get("quad_res", 32)))
        results.append({"check": "gnz", "lhs": rep.lhs, "rhs": rep.rhs,
                        "se": rep.combined_se, "passed": rep.passed()})
    if "janossy" in names:
        model = infer.ParametricModel("poisson", (rate,), window)
        mean = rate * window.ground_volume
        default_n = max(30, int(np.ceil(mean + 12.0 * np.sqrt(mean) + 12.0)))
        total = infer.janossy_total_mass(model, n_max=int(section.get("n_max",
                                                                      default_n)))
        ok = abs(total - 1.0) < 1e-6
        results.append({"check": "janossy", "lhs": total, "rhs": 1.0,
                        "se": 0.0, "passed": ok})
    out.mkdir(parents=True, exist_ok=True)
    (out / "checks.json").write_text(json.dumps(results, indent=1),
                                     encoding="utf-8")
    _csv_write(out / "checks.csv", {"config_hash": _config_hash(cfg),
                                    "seed": seed, "replicates": replicates},
               ["check", "lhs", "rhs", "se", "passed"],
               [[r["check"], _fmt(r["lhs"]), _fmt(r["rhs"]), _fmt(r["se"]),
                 r["passed"]] for r in results])
    for r in results:
        print(f"{r['check']}: lhs={r['lhs']:.6g} rhs={r['rhs']:.6g} "
              f"se={r['se']:.3g} passed={r['passed']}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------
def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fmpp",
        description="simulate, summarize, fit and check function-marked "
                    "point patterns")
    parser.add_argument("command",
                        choices=["simulate", "summarize", "estimate",
                                 "geometry", "check"])
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--replicates", type=int, default=None,
                        help="override the config replicate count")
    args = parser.parse_args(argv)

    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        replicates = (args.replicates if args.replicates is not None
                      else int(cfg.get("replicates", 1)))
        if replicates < 1:
            raise ValidationError("replicates must be >= 1")
        out = Path(args.out)
        if args.command == "simulate":
            return run_simulate(cfg, out, seed, replicates)
        if args.command == "summarize":
            return run_summarize(cfg, out, seed)
        if args.command == "estimate":
            return run_estimate(cfg, out, seed)
        if args.command == "geometry":
            return run_geometry(cfg, out, seed)
        return run_check(cfg, out, seed)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
