"""The numba kernels and their NumPy fallbacks must agree numerically."""
import numpy as np
import pytest

from fmpp import _kernels as K


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def test_pair_stats_variants_agree(rng):
    pts = rng.random((80, 2))
    w = rng.random(80)
    v = rng.random(80)
    lags = np.linspace(0.05, 0.3, 6)
    sides = np.array([1.0, 1.0])
    for torus in (False, True):
        a_num, a_w = K.pair_stats_jit(pts, w, v, lags, 0.05, sides, torus)
        b_num, b_w = K.pair_stats_numpy(pts, w, v, lags, 0.05, sides, torus)
        np.testing.assert_allclose(a_num, b_num, rtol=1e-10)
        assert a_w == pytest.approx(b_w, rel=1e-12)


def test_gibbs_chain_variants_agree(rng):
    lo = np.array([0.0, 0.0])
    hi = np.array([1.0, 1.0])
    steps = 400
    args = (rng.random(steps), rng.random((steps, 2)), rng.random(steps),
            rng.random(steps))
    x0 = np.empty((0, 2))
    a = K.gibbs_chain_jit(x0, lo, hi, False, 40.0, 0.6, *args, 0.07, -1.0, 2)
    b = K.gibbs_chain_numpy(x0, lo, hi, False, 40.0, 0.6, *args, 0.07, -1.0, 2)
    np.testing.assert_allclose(np.sort(a, axis=0), np.sort(b, axis=0),
                               atol=1e-12)


def test_gi_integrate_variants_agree(rng):
    n = 6
    xs = rng.random((n, 2))
    births = rng.random(n) * 0.3
    deaths = births + 0.5 + rng.random(n)
    normals = rng.standard_normal((100, n))
    for scode, sp in ((0, np.zeros(1)), (1, np.array([0.2]))):
        a, na, da = K.gi_integrate_values_jit(
            xs, births, deaths.copy(), 0.1, 0.01, 100, 0, np.array([1.0, 1.0]),
            1, np.array([0.5, 0.3]), scode, sp, normals, 0, -1.0)
        b, nb, db = K.gi_integrate_values_numpy(
            xs, births, deaths.copy(), 0.1, 0.01, 100, 0, np.array([1.0, 1.0]),
            1, np.array([0.5, 0.3]), scode, sp, normals, 0, -1.0)
        np.testing.assert_allclose(a, b, atol=1e-10)
        assert na == nb
        np.testing.assert_allclose(da, db)


def test_coverage_count_variants_agree(rng):
    centers = rng.random((5, 2))
    radii = 0.05 + 0.1 * rng.random(5)
    lo = np.array([0.0, 0.0])
    hi = np.array([1.0, 1.0])
    for torus in (False, True):
        a = K.coverage_count_jit(centers, radii, lo, hi, 64, torus)
        b = K.coverage_count_numpy(centers, radii, lo, hi, 64, torus)
        assert a == b


def test_neighbour_counts_variants_agree(rng):
    queries = rng.random((30, 3))
    pts = rng.random((50, 3))
    sides = np.array([1.0, 1.0, 1.0])
    for torus in (False, True):
        for trad in (-1.0, 0.2):
            a = K.neighbour_counts_jit(queries, pts, sides, torus, 0.2,
                                       trad, 2)
            b = K.neighbour_counts_numpy(queries, pts, sides, torus, 0.2,
                                         trad, 2)
            np.testing.assert_array_equal(a, b)
