"""Time-warp (Skorohod-type) distance between grid paths.

The distance minimizes

    max( gamma(w),  int_0^{T*} e^{-u} sup_t min(|f(t^u) - g(w(t)^u)|, 1) du )

over piecewise-linear, strictly increasing, surjective warps w of [0, T*],
where gamma(w) is the largest |log slope| over warp segments and ^u denotes
truncation min(., u).  The infimum over all warps is not computable; we
minimize over a finite family of monotone lattice paths on a warp grid
(uniform fill of the requested resolution, merged with both paths' own grid
and support points) found by dynamic programming, always including the
identity warp.  The value is therefore an upper bound of the true infimum,
is exactly zero for equal paths, and is symmetric (both orientations are
searched and the functional itself is transpose-invariant).

Candidate warps from coarser lattices in the internal resolution ladder are
kept, so doubling the resolution never increases the result: the evaluated
family only grows, and the per-warp functional does not depend on the
lattice (its u-integration splits at all breakpoints of the integrand).
"""
from __future__ import annotations

import math

import numpy as np

from ._jit import njit

_BIG = 1e300


# ---------------------------------------------------------------------------
# jit-able primitives
# ---------------------------------------------------------------------------
@njit(cache=True)
def _path_eval(grid, vals, a, b, mode, t):
    if t < a or t >= b:
        return 0.0
    if mode == 0:  # right-continuous step
        idx = np.searchsorted(grid, t, side="right") - 1
        if idx < 0:
            return 0.0
        return vals[idx]
    # linear interpolation, zero before the first grid point
    if t < grid[0]:
        return 0.0
    if t >= grid[-1]:
        return vals[-1]
    j = np.searchsorted(grid, t, side="right") - 1
    w = (t - grid[j]) / (grid[j + 1] - grid[j])
    return vals[j] * (1.0 - w) + vals[j + 1] * w


@njit(cache=True)
def _warp_eval(kt, ks, t):
    """Piecewise-linear warp through knots (kt[i], ks[i])."""
    if t <= kt[0]:
        return ks[0]
    if t >= kt[-1]:
        return ks[-1]
    j = np.searchsorted(kt, t, side="right") - 1
    w = (t - kt[j]) / (kt[j + 1] - kt[j])
    return ks[j] * (1.0 - w) + ks[j + 1] * w


@njit(cache=True)
def _phi_at(u, fg, fv, fa, fb, fm, gg, gv, ga, gb, gm, kt, ks, tcand):
    """sup over t of min(|f(t^u) - g(w(t)^u)|, 1).

    ``tcand`` must contain every discontinuity point of the integrand in t
    (both grids, warp knots and preimages of the g-side breakpoints); the
    values between breakpoints are then attained at the breakpoints by
    right continuity (step mode) or convexity (linear mode).
    """
    best = 0.0
    for i in range(tcand.shape[0] + 2):
        if i < tcand.shape[0]:
            t = tcand[i]
        elif i == tcand.shape[0]:
            t = u
        else:
            t = _warp_eval(ks, kt, u)  # preimage of u under the warp
        a_t = t if t < u else u
        fval = _path_eval(fg, fv, fa, fb, fm, a_t)
        lt = _warp_eval(kt, ks, t)
        b_t = lt if lt < u else u
        gval = _path_eval(gg, gv, ga, gb, gm, b_t)
        v = abs(fval - gval)
        if v > 1.0:
            v = 1.0
        if v > best:
            best = v
            if best >= 1.0:
                return 1.0
    return best


@njit(cache=True)
def _warp_cost(fg, fv, fa, fb, fm, gg, gv, ga, gb, gm, kt, ks, ubreaks, tcand):
    """Exact lattice-functional value max(gamma, integral) for one warp.

    The integrand u -> phi(u) is right-continuous with breakpoints contained
    in ``ubreaks``; on each cell its sup is the cell value (step paths) or is
    attained at the cell ends (piecewise-affine pieces when either path is
    linearly interpolated, in which case the right endpoint is included).
    """
    gamma = 0.0
    for j in range(kt.shape[0] - 1):
        slope = (ks[j + 1] - ks[j]) / (kt[j + 1] - kt[j])
        g_abs = abs(math.log(slope))
        if g_abs > gamma:
            gamma = g_abs
    any_linear = fm == 1 or gm == 1
    integral = 0.0
    for j in range(ubreaks.shape[0] - 1):
        ua = ubreaks[j]
        ub = ubreaks[j + 1]
        if ub <= ua:
            continue
        sup = _phi_at(ua, fg, fv, fa, fb, fm, gg, gv, ga, gb, gm, kt, ks, tcand)
        p2 = _phi_at(0.5 * (ua + ub), fg, fv, fa, fb, fm, gg, gv, ga, gb, gm, kt, ks, tcand)
        if p2 > sup:
            sup = p2
        if any_linear:
            p3 = _phi_at(ub, fg, fv, fa, fb, fm, gg, gv, ga, gb, gm, kt, ks, tcand)
            if p3 > sup:
                sup = p3
        integral += (math.exp(-ua) - math.exp(-ub)) * sup
    return max(gamma, integral)


@njit(cache=True)
def _surrogate_dp(nodes, diag_mis, d_exp, mis, log_cap):
    """Min-cost monotone lattice path under a slope threshold.

    State (r, s) means the warp maps nodes[r] -> nodes[s].  Segment cost is
    the e^{-u}-weighted sum over its u-cells of max(diagonal frozen mismatch,
    local aligned mismatch); because an aligned mismatch persists in the sup
    for every later u, the segment's worst aligned mismatch is also charged
    over the remaining tail of the e^{-u} weight.  A small multiple of
    |log slope| resolves ties toward gentle warps.  Returns knot indices.
    """
    m = nodes.shape[0] - 1
    exp_end = math.exp(-nodes[m])
    tail = np.empty(m)
    for k in range(m):
        tail[k] = math.exp(-nodes[k + 1]) - exp_end
    best = np.full((m + 1, m + 1), _BIG)
    par_p = np.full((m + 1, m + 1), -1, dtype=np.int64)
    par_q = np.full((m + 1, m + 1), -1, dtype=np.int64)
    best[0, 0] = 0.0
    for r in range(1, m + 1):
        for s in range(1, m + 1):
            bcost = _BIG
            bp = -1
            bq = -1
            for p in range(r):
                dx = nodes[r] - nodes[p]
                for q in range(s):
                    prev = best[p, q]
                    if prev >= _BIG:
                        continue
                    dy = nodes[s] - nodes[q]
                    lg = abs(math.log(dy / dx))
                    if lg > log_cap:
                        continue
                    w = 1e-9 * lg
                    for k in range(p, r):
                        midk = 0.5 * (nodes[k] + nodes[k + 1])
                        lam = nodes[q] + (midk - nodes[p]) * dy / dx
                        kk = np.searchsorted(nodes, lam, side="right") - 1
                        if kk < 0:
                            kk = 0
                        if kk > m - 1:
                            kk = m - 1
                        a = mis[k, kk]
                        fr = diag_mis[k]
                        c = a if a > fr else fr
                        # aligned mismatch stays in the sup for all later u
                        w += d_exp[k] * c + a * tail[k]
                    tot = prev + w
                    if tot < bcost:
                        bcost = tot
                        bp = p
                        bq = q
            if bcost < _BIG:
                best[r, s] = bcost
                par_p[r, s] = bp
                par_q[r, s] = bq
    # walk back from (m, m)
    path_r = np.empty(2 * (m + 1), dtype=np.int64)
    path_s = np.empty(2 * (m + 1), dtype=np.int64)
    n_k = 0
    r = m
    s = m
    if best[m, m] >= _BIG:
        return path_r[:0], path_s[:0]
    while r >= 0:
        path_r[n_k] = r
        path_s[n_k] = s
        n_k += 1
        if r == 0 and s == 0:
            break
        rp = par_p[r, s]
        sp = par_q[r, s]
        r = rp
        s = sp
    return path_r[:n_k][::-1].copy(), path_s[:n_k][::-1].copy()


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------
def _arrays(path, t_star):
    a, b = path.support
    if not np.isfinite(b):
        b = t_star + 1.0
    mode = 0 if path.mode == "step" else 1
    return (np.ascontiguousarray(path.grid, dtype=np.float64),
            np.ascontiguousarray(path.values, dtype=np.float64),
            float(a), float(b), mode)


def _breakpoints(fdat, gdat, kt, ks, t_star):
    """Complete breakpoint sets in t and in u for one warp."""
    fg, _, fa, fb, _ = fdat
    gg, _, ga, gb, _ = gdat
    g_side = np.concatenate([gg, np.asarray([ga, gb])])
    inv = np.interp(g_side, ks, kt)
    fwd = np.interp(np.concatenate([fg, np.asarray([fa, fb])]), kt, ks)
    t_raw = np.concatenate([fg, np.asarray([fa, fb, 0.0, t_star]), kt, inv])
    tcand = np.unique(np.clip(t_raw[np.isfinite(t_raw)], 0.0, t_star))
    u_raw = np.concatenate([t_raw, g_side, fwd, ks])
    ubreaks = np.unique(np.clip(u_raw[np.isfinite(u_raw)], 0.0, t_star))
    return ubreaks, tcand


def _cost_of(fdat, gdat, kt, ks, t_star):
    ubreaks, tcand = _breakpoints(fdat, gdat, kt, ks, t_star)
    return float(_warp_cost(*fdat, *gdat, kt, ks, ubreaks, tcand))


def _node_set(fdat, gdat, t_star, resolution):
    """Warp lattice nodes: uniform fill merged with both paths' breakpoints.

    Very fine path grids are thinned to the largest value jumps so the DP
    lattice stays near the requested resolution.
    """
    def relevant(dat):
        grid, vals, a, b, _ = dat
        pts = [np.asarray([a, b])]
        if grid.size <= resolution:
            pts.append(grid)
        else:
            jumps = np.abs(np.diff(vals))
            top = np.argsort(jumps)[::-1][: resolution // 2]
            pts.append(grid[np.sort(top)])
            pts.append(grid[np.sort(top) + 1])
        return np.concatenate(pts)

    raw = np.concatenate([
        np.linspace(0.0, t_star, resolution + 1),
        relevant(fdat), relevant(gdat),
    ])
    nodes = np.unique(np.clip(raw[np.isfinite(raw)], 0.0, t_star))
    # drop near-duplicate nodes (degenerate DP segments)
    keep = np.concatenate([[True], np.diff(nodes) > 1e-12 * max(t_star, 1.0)])
    return np.ascontiguousarray(nodes[keep])


def _search_direction(fdat, gdat, t_star, resolution, thresholds):
    """DP candidates for one orientation; returns exact costs."""
    costs = []
    res = resolution
    while True:
        nodes = _node_set(fdat, gdat, t_star, res)
        m = nodes.size - 1
        if m >= 1:
            mids = 0.5 * (nodes[:-1] + nodes[1:])
            f_mid = np.array([_path_eval(*fdat, t) for t in mids])
            g_mid = np.array([_path_eval(*gdat, t) for t in mids])
            diag = np.minimum(np.abs(f_mid - g_mid), 1.0)
            d_exp = np.exp(-nodes[:-1]) - np.exp(-nodes[1:])
            mis = np.minimum(np.abs(f_mid[:, None] - g_mid[None, :]), 1.0)
            for cap in thresholds:
                kt_idx, ks_idx = _surrogate_dp(nodes, diag, d_exp, mis, cap)
                if kt_idx.size >= 2:
                    kt = nodes[kt_idx]
                    ks = nodes[ks_idx]
                    costs.append(_cost_of(fdat, gdat, kt, ks, t_star))
        if res <= 4:
            break
        res //= 2
    return costs


def skorohod_distance_impl(f, g, t_star, resolution):
    fdat = _arrays(f, t_star)
    gdat = _arrays(g, t_star)
    ident = np.asarray([0.0, t_star])
    cost_id = _cost_of(fdat, gdat, ident, ident, t_star)
    if cost_id == 0.0:
        return 0.0
    # log-slope caps: geometric ladder below the identity cost (a candidate
    # with gamma above the identity cost can never improve on it)
    thresholds = [cost_id * 0.5 ** j for j in range(9)]
    candidates = [cost_id]
    candidates += _search_direction(fdat, gdat, t_star, resolution, thresholds)
    candidates += _search_direction(gdat, fdat, t_star, resolution, thresholds)
    return float(min(candidates))
