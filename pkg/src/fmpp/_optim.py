"""Derivative-free local minimizer shared by the fitting routines.

Projected Nelder-Mead simplex: candidate vertices are clipped into the
bound box, the returned point is never worse than the start, and the whole
run is deterministic given the start point and budget.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError

_REL_TOL = 1e-8


def nelder_mead(objective, theta0, bounds=None, budget: int = 500):
    """Minimize ``objective`` from ``theta0``.

    Returns (theta_best, f_best, evaluations, converged).  Convergence means
    the simplex's relative objective spread fell below 1e-8 within the
    evaluation budget; the best point found so far is returned either way.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    ndim = theta0.size
    if bounds is not None:
        lo = np.asarray([b[0] for b in bounds], dtype=float)
        hi = np.asarray([b[1] for b in bounds], dtype=float)
        if lo.size != ndim or np.any(lo > hi):
            raise ValidationError("invalid bounds")
        project = lambda x: np.clip(x, lo, hi)
    else:
        project = lambda x: x
    theta0 = project(theta0)

    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(objective(x))

    f0 = f(theta0)
    if not np.isfinite(f0):
        raise ValidationError("objective must be finite at the start point")

    # initial simplex: perturb each coordinate by 5% (or 0.05 when zero)
    verts = [theta0]
    for i in range(ndim):
        step = 0.05 * theta0[i] if theta0[i] != 0.0 else 0.05
        v = theta0.copy()
        v[i] += step
        verts.append(project(v))
    fvals = [f0] + [f(v) for v in verts[1:]]
    verts = np.asarray(verts)
    fvals = np.asarray(fvals)

    converged = False
    # absolute floor keeps the relative rule attainable when the minimum is
    # exactly zero (e.g. noiseless least squares)
    f_floor = _REL_TOL ** 2 * (1.0 + abs(f0))
    while evals < budget:
        order = np.argsort(fvals, kind="stable")
        verts = verts[order]
        fvals = fvals[order]
        spread = abs(fvals[-1] - fvals[0])
        scale = abs(fvals[0]) + abs(fvals[-1]) + 1e-300
        xspread = float(np.max(np.abs(verts - verts[0])))
        xscale = 1.0 + float(np.max(np.abs(verts[0])))
        if (spread <= _REL_TOL * scale + f_floor
                and xspread <= _REL_TOL * xscale):
            converged = True
            break
        centroid = np.mean(verts[:-1], axis=0)
        refl = project(centroid + (centroid - verts[-1]))
        fr = f(refl)
        if fr < fvals[0]:
            exp = project(centroid + 2.0 * (centroid - verts[-1]))
            fe = f(exp)
            if fe < fr:
                verts[-1], fvals[-1] = exp, fe
            else:
                verts[-1], fvals[-1] = refl, fr
        elif fr < fvals[-2]:
            verts[-1], fvals[-1] = refl, fr
        else:
            contr = project(centroid + 0.5 * (verts[-1] - centroid))
            fc = f(contr)
            if fc < fvals[-1]:
                verts[-1], fvals[-1] = contr, fc
            else:
                for i in range(1, len(verts)):
                    verts[i] = project(verts[0] + 0.5 * (verts[i] - verts[0]))
                    fvals[i] = f(verts[i])
                    if evals >= budget:
                        break

    best = int(np.argmin(fvals))
    if fvals[best] <= f0:
        return verts[best].copy(), float(fvals[best]), evals, converged
    return theta0.copy(), f0, evals, converged
