import itertools
import math

import numpy as np
import pytest

from fmpp.core import AuxMark, SampleSchedule, Window
from fmpp.errors import NumericalError, ValidationError
from fmpp.ground import HomogeneousPoisson, InhomogeneousPoisson, simulate_poisson
from fmpp.infer import (
    FitResult,
    Observation,
    ParametricModel,
    conditional_intensity,
    density_wrt_poisson,
    fit_loglik_temporal,
    fit_pseudolikelihood,
    intensity_functional,
    janossy_density,
    janossy_total_mass,
    least_squares_marks,
    loglik_temporal,
    optimize,
    papangelou,
    pseudolikelihood,
)
from fmpp.marks import (
    AuxDensitySpec,
    GrowthInteraction,
    brownian_fidi,
    deterministic_fidi,
    gi_integrate,
)

W = Window((0, 0), (1, 1))
WT = Window((0,), (1,), t_star=2.0)
PHI0 = 1.0 / math.sqrt(2 * math.pi)


class TestIntensityFunctional:
    def test_poisson_two_type_brownian(self):
        m = ParametricModel("poisson", (10.0,), W,
                            aux=AuxDensitySpec(discrete_probs=np.array([0.5, 0.5])),
                            fidi=brownian_fidi(1.0))
        val = intensity_functional(
            m, Observation((0.3, 0.4), None, AuxMark(discrete=1), (0.0,)),
            SampleSchedule((1.0,)))
        assert val == pytest.approx(10.0 * 0.5 * PHI0)

    def test_degenerate_marks_drop_factor(self):
        m = ParametricModel("poisson", (10.0,), W,
                            aux=AuxDensitySpec(discrete_probs=np.array([0.5, 0.5])),
                            fidi=deterministic_fidi())
        val = intensity_functional(
            m, Observation((0.3, 0.4), None, AuxMark(discrete=2), (123.0,)),
            SampleSchedule((1.0,)))
        assert val == pytest.approx(10.0 * 0.5)

    def test_zero_rate_region(self):
        m = ParametricModel("poisson", (0.0,), W)
        assert intensity_functional(m, Observation((0.5, 0.5))) == 0.0


class TestConditionalIntensity:
    def test_uniform_ground_part(self):
        m = ParametricModel("poisson-t", (3.0,), WT)
        val = conditional_intensity(m, (), Observation((0.5,), 1.0))
        assert val == pytest.approx(3.0 * 1.0)  # |W_S| = 1

    def test_loglinear_b_zero_reduces(self):
        m_const = ParametricModel("poisson-t", (math.exp(1.2),), WT)
        m_ll = ParametricModel("loglinear-t", (1.2, 0.0), WT)
        for t in (0.1, 0.9, 1.7):
            a = conditional_intensity(m_const, (), Observation((0.4,), t))
            b = conditional_intensity(m_ll, (), Observation((0.4,), t))
            assert a == pytest.approx(b)

    def test_history_must_be_sorted_and_past(self):
        m = ParametricModel("poisson-t", (3.0,), WT)
        with pytest.raises(ValidationError):
            conditional_intensity(m, (0.9, 0.4), Observation((0.5,), 1.0))
        with pytest.raises(ValidationError):
            conditional_intensity(m, (1.5,), Observation((0.5,), 1.0))

    def test_expectation_equals_intensity_functional(self):
        # the rate families are history-free, so the identity is exact
        # realization by realization; check it over simulated histories
        m = ParametricModel("loglinear-t", (0.5, 0.4), WT)
        rng = np.random.default_rng(0)
        t0 = 1.3
        target = intensity_functional(m, Observation((0.4,), t0))
        vals = []
        for _ in range(50):
            hist = np.sort(rng.random(5) * t0 * 0.99)
            vals.append(conditional_intensity(m, hist, Observation((0.4,), t0)))
        assert np.allclose(vals, target)


class TestLoglikTemporal:
    def test_homogeneous_closed_form(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            n = rng.poisson(12)
            data = [Observation((float(rng.random()),), float(rng.random() * 2.0))
                    for _ in range(n)]
            if n == 0:
                continue
            m = ParametricModel("poisson-t", (1.0,), WT, bounds=((1e-9, 1e4),))
            fit = fit_loglik_temporal(m, data, budget=600)
            assert fit.converged
            assert fit.theta[0] == pytest.approx(n / 2.0, rel=1e-6)

    def test_empty_data_is_minus_compensator(self):
        m = ParametricModel("poisson-t", (3.0,), WT)
        assert loglik_temporal(m, []) == pytest.approx(-3.0 * 2.0, rel=1e-9)

    def test_mark_factor_separability(self):
        # changing the (fixed) mark density leaves the rate maximizer alone
        rng = np.random.default_rng(1)
        data = [Observation((float(rng.random()),), float(rng.random() * 2.0),
                            None, (float(rng.standard_normal()),))
                for _ in range(15)]
        sched = SampleSchedule((0.5,))
        fits = []
        for scale in (1.0, 2.0):
            m = ParametricModel("poisson-t", (1.0,), WT,
                                bounds=((1e-9, 1e4),),
                                fidi=brownian_fidi(scale))
            fits.append(fit_loglik_temporal(m, data, sched, budget=600).theta[0])
        assert fits[0] == pytest.approx(fits[1], rel=1e-6)

    def test_zero_intensity_data_point_errors(self):
        m = ParametricModel("poisson-t", (0.0,), WT)
        with pytest.raises(NumericalError):
            loglik_temporal(m, [Observation((0.5,), 1.0)])

    def test_loglinear_recovery(self):
        a_true, b_true = 1.3, 0.6
        w = Window((0,), (1,), t_star=3.0)
        lam = lambda g: math.exp(a_true + b_true * g[-1])
        model = InhomogeneousPoisson(lam, math.exp(a_true + b_true * 3.0))
        locs = simulate_poisson(model, w, 7)
        data = [Observation((x[0],), x[1]) for x in locs]
        m = ParametricModel("loglinear-t", (0.0, 0.0), w,
                            bounds=((-8.0, 8.0), (-8.0, 8.0)))
        fit = fit_loglik_temporal(m, data, budget=900)
        assert fit.converged
        assert abs(fit.theta[1] - b_true) < 0.5  # single realization, loose

    def test_mle_invariance_under_rescaling(self):
        # x -> c x with rate -> rate / c^2 leaves the fit equivariant
        rng = np.random.default_rng(3)
        pts = rng.random((20, 2))
        c = 2.0
        w1 = Window((0, 0), (1, 1), t_star=1.0)
        w2 = Window((0, 0), (c, c), t_star=1.0)
        data1 = [Observation(tuple(x), float(rng.random())) for x in pts]
        data2 = [Observation(tuple(c * x), o.t) for x, o in
                 zip(pts, data1)]
        m1 = ParametricModel("poisson-t", (1.0,), w1, bounds=((1e-9, 1e5),))
        m2 = ParametricModel("poisson-t", (1.0,), w2, bounds=((1e-9, 1e5),))
        f1 = fit_loglik_temporal(m1, data1, budget=600)
        f2 = fit_loglik_temporal(m2, data2, budget=600)
        # the temporal rate is unchanged; the spatial density absorbs 1/c^2
        assert f1.theta[0] == pytest.approx(f2.theta[0], rel=1e-6)


class TestJanossy:
    def test_void_probability(self):
        m = ParametricModel("poisson", (1.0,), W)
        assert janossy_density(m, []).value == pytest.approx(math.exp(-1.0))

    def test_single_point_formula(self):
        lam = 1.7
        m = ParametricModel("poisson", (lam,), W)
        j = janossy_density(m, [Observation((0.5, 0.5))])
        assert j.value == pytest.approx(math.exp(-lam) * lam)
        assert j.normalized

    def test_normalization_series(self):
        for lam in (0.5, 1.0, 2.0):
            m = ParametricModel("poisson", (lam,), W)
            assert janossy_total_mass(m, 30) == pytest.approx(1.0, abs=1e-6)

    def test_normalization_with_mark_quadrature(self):
        m = ParametricModel("poisson", (1.0,), W, fidi=brownian_fidi(1.0))
        grid = np.linspace(-8, 8, 801)
        total = janossy_total_mass(m, 30, mark_grid=grid,
                                   schedule=SampleSchedule((1.0,)))
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_gibbs_unnormalized_flag(self):
        m = ParametricModel("gibbs", (50.0, 0.5), W, interaction_range=0.05)
        j = janossy_density(m, [Observation((0.5, 0.5))])
        assert not j.normalized
        with pytest.raises(ValidationError):
            janossy_total_mass(m)


class TestDensityWrtPoisson:
    def test_self_density_is_one(self):
        ref = ParametricModel("poisson", (3.0,), W)
        for data in ([], [Observation((0.5, 0.5))],
                     [Observation((0.2, 0.2)), Observation((0.8, 0.3))]):
            assert density_wrt_poisson(ref, data, ref) == pytest.approx(1.0)

    def test_doubled_intensity_empty_config(self):
        ref = ParametricModel("poisson", (3.0,), W)
        dbl = ParametricModel("poisson", (6.0,), W)
        assert density_wrt_poisson(dbl, [], ref) == pytest.approx(math.exp(-3.0))

    def test_unit_mean_under_reference(self):
        ref = ParametricModel("poisson", (2.0,), W)
        other = ParametricModel("poisson", (3.0,), W)
        vals = []
        for seed in range(5000):
            locs = simulate_poisson(HomogeneousPoisson(2.0), W, seed)
            data = [Observation(tuple(x)) for x in locs]
            vals.append(density_wrt_poisson(other, data, ref))
        se = np.std(vals) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - 1.0) < 3 * se

    def test_infinite_aux_measure_rejected(self):
        from fmpp.core import AuxMeasure
        spec = AuxDensitySpec(continuous_density=lambda loc, l: 1.0,
                              measure=AuxMeasure("lebesgue", (0.0, np.inf)))
        m = ParametricModel("poisson", (2.0,), W, aux=spec)
        with pytest.raises(ValidationError):
            density_wrt_poisson(m, [], ParametricModel("poisson", (2.0,), W))


class TestPapangelou:
    def test_poisson_configuration_free(self):
        m = ParametricModel("poisson", (7.0,), W)
        obs = Observation((0.3, 0.3))
        empty = papangelou(m, obs, [])
        full = papangelou(m, obs, [Observation((0.6, 0.6)),
                                   Observation((0.1, 0.9))])
        assert empty == full == 7.0

    def test_gibbs_counts_neighbours(self):
        m = ParametricModel("gibbs", (50.0, 0.5), W, interaction_range=0.05)
        cfg = [Observation((0.5, 0.5)), Observation((0.52, 0.5))]
        assert papangelou(m, Observation((0.1, 0.1)), cfg) == 50.0
        assert papangelou(m, Observation((0.51, 0.5)), cfg) == 50.0 * 0.25

    def test_candidate_in_configuration_zero(self):
        m = ParametricModel("gibbs", (50.0, 0.5), W, interaction_range=0.05)
        cfg = [Observation((0.5, 0.5))]
        assert papangelou(m, Observation((0.5, 0.5)), cfg) == 0.0

    def test_hereditarity_on_enumerated_configs(self):
        # if the density is positive on a configuration it is positive on
        # every sub-configuration
        m = ParametricModel("gibbs", (10.0, 0.3), W, interaction_range=0.2)
        pts = [Observation((0.1, 0.1)), Observation((0.2, 0.1)),
               Observation((0.8, 0.8))]
        for r in range(len(pts) + 1):
            for sub in itertools.combinations(pts, r):
                val = janossy_density(m, list(sub)).value
                assert val > 0.0
                for rr in range(r):
                    for subsub in itertools.combinations(sub, rr):
                        assert janossy_density(m, list(subsub)).value > 0.0


class TestPseudolikelihood:
    def test_poisson_equals_likelihood_shape(self):
        locs = simulate_poisson(HomogeneousPoisson(60.0), W, 3)
        data = [Observation(tuple(x)) for x in locs]
        n = len(data)
        for rho in (40.0, 60.0, 80.0):
            m = ParametricModel("poisson", (rho,), W)
            pl = pseudolikelihood(m, data, quad_res=16)
            ll = n * math.log(rho) - rho * W.volume
            assert pl == pytest.approx(ll, rel=1e-9)

    def test_temporal_poisson_pl_equals_loglik(self):
        # for Poisson models the Papangelou intensity is the intensity, so
        # the pseudo-likelihood IS the likelihood
        rng = np.random.default_rng(8)
        data = [Observation((float(rng.random()),), float(rng.random() * 2.0))
                for _ in range(14)]
        for rho in (3.0, 7.0, 11.0):
            m = ParametricModel("poisson-t", (rho,), WT)
            ll = loglik_temporal(m, data, quad_res=32)
            pl = pseudolikelihood(m, data, quad_res=32)
            assert pl == pytest.approx(ll, rel=1e-9)

    def test_gamma_fixed_one_recovers_poisson_rate(self):
        locs = simulate_poisson(HomogeneousPoisson(75.0), W, 5)
        data = [Observation(tuple(x)) for x in locs]

        def objective(th):
            m = ParametricModel("gibbs", (th[0], 1.0), W, interaction_range=0.05)
            return -pseudolikelihood(m, data, quad_res=16)

        fit = optimize(objective, [30.0], [(1e-3, 1e4)], budget=500)
        assert fit.theta[0] == pytest.approx(len(data) / W.volume, rel=1e-6)

    def test_vanishing_papangelou_errors(self):
        # hard core with a data pair closer than the range
        m = ParametricModel("gibbs", (10.0, 0.0), W, interaction_range=0.2)
        data = [Observation((0.5, 0.5)), Observation((0.55, 0.5))]
        with pytest.raises(NumericalError):
            pseudolikelihood(m, data, quad_res=8)


class TestLeastSquaresMarks:
    def test_one_point_constant_family(self):
        # constant trajectories f = theta (zero growth from m0 = theta):
        # the one-point one-time least-squares solution is the observation
        sched = SampleSchedule((0.5,))
        family = lambda th: GrowthInteraction(("linear", 0.0, 1.0), m0=th[0])
        pts = (np.array([[0.5, 0.5]]), np.array([0.0]), np.array([10.0]))
        fit = least_squares_marks(family, pts, np.array([[0.7]]), sched,
                                  [0.2], [(0.0, 5.0)], dt=0.005, t_star=1.0,
                                  budget=400)
        assert fit.theta[0] == pytest.approx(0.7, rel=1e-6)

    def test_noiseless_recovery(self):
        a_true, b_true = 1.5, 0.8
        rng = np.random.default_rng(2)
        n = 6
        pts = (rng.random((n, 2)), np.zeros(n), np.full(n, 10.0))
        model = GrowthInteraction(("linear", a_true, b_true))
        sched = SampleSchedule((0.25, 0.5, 0.75, 1.0))
        paths = gi_integrate(pts, model, 0.01, 0, 1.0)
        observed = np.array([[p(s) for s in sched.times] for p in paths])
        family = lambda th: GrowthInteraction(("linear", th[0], th[1]))
        fit = least_squares_marks(family, pts, observed, sched, [0.5, 0.5],
                                  [(0.01, 10.0), (0.01, 10.0)], dt=0.01,
                                  t_star=1.0, budget=800)
        assert fit.converged
        assert fit.theta[0] == pytest.approx(a_true, rel=1e-4)
        assert fit.theta[1] == pytest.approx(b_true, rel=1e-4)

    def test_torus_correction_round_runs(self):
        rng = np.random.default_rng(4)
        n = 4
        pts = (rng.random((n, 2)), np.zeros(n), np.full(n, 10.0))
        model = GrowthInteraction(("linear", 1.0, 0.5), ("gauss", 0.2, 0.3))
        sched = SampleSchedule((0.5, 1.0))
        paths = gi_integrate(pts, model, 0.01, 0, 1.0)
        observed = np.array([[p(s) for s in sched.times] for p in paths])
        family = lambda th: GrowthInteraction(("linear", th[0], th[1]),
                                              ("gauss", 0.2, 0.3))

        def torus_sim(theta, seed):
            r = np.random.default_rng(seed)
            k = 3
            return (r.random((k, 2)) + np.array([1.0, 0.0]),  # outside W
                    np.zeros(k), np.full(k, 10.0))

        fit = least_squares_marks(family, pts, observed, sched, [0.8, 0.6],
                                  [(0.01, 5.0), (0.01, 5.0)], dt=0.02,
                                  t_star=1.0, budget=300,
                                  edge_correction="torus-simulation",
                                  torus_simulator=torus_sim)
        assert isinstance(fit, FitResult)
        assert fit.scheme == "least-squares"


class TestOptimizer:
    def test_quadratic(self):
        fit = optimize(lambda th: (th[0] - 3.0) ** 2, [0.0], budget=500)
        assert fit.theta[0] == pytest.approx(3.0, abs=1e-6)
        assert fit.converged

    def test_constant_returns_start(self):
        fit = optimize(lambda th: 4.2, [1.7], budget=200)
        assert fit.theta[0] == 1.7

    def test_bound_active_optimum(self):
        fit = optimize(lambda th: (th[0] - 3.0) ** 2, [0.0],
                       bounds=[(-5.0, 2.0)], budget=500)
        assert fit.theta[0] == pytest.approx(2.0, abs=1e-6)

    def test_never_worse_than_start(self):
        # adversarial objective: better start than anything nearby
        fit = optimize(lambda th: 0.0 if th[0] == 1.0 else 5.0, [1.0],
                       budget=50)
        assert fit.theta[0] == 1.0 and fit.objective == 0.0

    def test_budget_exhaustion_flags_nonconvergence(self):
        fit = optimize(lambda th: (th[0] - 3.0) ** 2, [0.0], budget=4)
        assert not fit.converged

    def test_nonfinite_start_rejected(self):
        with pytest.raises(ValidationError):
            optimize(lambda th: float("nan"), [0.0], budget=10)


class TestSpatialDensityFamilies:
    def test_loglinear_x_normalizes(self):
        from fmpp.infer import _spatial_density
        m = ParametricModel("poisson-t", (2.0,), WT, spatial=("loglinear-x", 1.7))
        xs = np.linspace(0.0, 1.0, 2001)
        dens = np.asarray([_spatial_density(m, (x,)) for x in xs])
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-6)

    def test_loglinear_x_tilts_the_likelihood(self):
        data_right = [Observation((0.9,), 0.5), Observation((0.95,), 1.0)]
        flat = ParametricModel("poisson-t", (1.0,), WT)
        tilted = ParametricModel("poisson-t", (1.0,), WT,
                                 spatial=("loglinear-x", 3.0))
        assert (loglik_temporal(tilted, data_right)
                > loglik_temporal(flat, data_right))
