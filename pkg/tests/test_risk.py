"""Tests for exact risk formulas and the Monte Carlo risk harness.

Frozen reference values and their oracles:

* the equivariant-rule risks (1.095765562..., 1.518557096...,
  1.937761827..., 1.183207361...) were recomputed with standalone
  adaptive quadrature over inline densities (half-normal, half-normal
  difference, Laplace), agreeing with the library values to 2e-15;
* the James-Stein improvement is checked against a direct simulation of
  the shrinkage estimator's quadratic risk and against a numerical
  integral of the inverse noncentral chi-square moment;
* Monte Carlo estimates are compared with the closed results they are
  meant to reproduce, using the reported standard errors.

The harness tests lean on common random numbers: with a shared seed the
equivariant rule's log ratios are literally identical across locations,
so constancy checks can assert bitwise equality instead of tolerances.
"""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import ncx2, norm

from mmn_predict import mixing, mmn, predictive, risk
from mmn_predict.errors import (
    CapabilityError,
    ContaminatedEstimateError,
    DomainError,
    WindowError,
)

GAUSS_ENTROPY = 0.5 * (1.0 + math.log(2.0 * math.pi))

# equivariant-rule risks for sigma2_x=1, sigma2_y=2, a = 1_d, frozen from
# independent adaptive quadrature (inline densities, epsrel 1e-13)
MRE_RISK_SQRTCHISQ = {5: 1.095765562270262, 7: 1.5185570962648436, 9: 1.937761827334691}
MRE_RISK_EXP_D5 = 1.1832073611655753


def _sqrtchisq_problem(d):
    return predictive.PredictionProblem(
        np.ones(d), 1.0, 2.0, mixing.SqrtChiSq(1.0), mixing.SqrtChiSq(1.0)
    )


def _exp_problem(d):
    return predictive.PredictionProblem(
        np.ones(d), 1.0, 2.0, mixing.Gamma(1.0, 1.0), mixing.Gamma(1.0, 1.0)
    )


def _mre_factory(problem):
    return lambda x: predictive.mre(problem, x)


class TestRiskEstimate:
    def test_fields(self):
        est = risk.RiskEstimate(mean=1.5, std_error=0.01, n=100, seed=7)
        assert est.mean == 1.5 and est.std_error == 0.01
        assert est.n == 100 and est.seed == 7

    def test_frozen(self):
        est = risk.RiskEstimate(mean=0.0, std_error=0.0, n=1, seed=0)
        with pytest.raises(AttributeError):
            est.mean = 2.0

    def test_rejects_bad_values(self):
        with pytest.raises(DomainError):
            risk.RiskEstimate(mean=math.nan, std_error=0.0, n=1, seed=0)
        with pytest.raises(DomainError):
            risk.RiskEstimate(mean=0.0, std_error=-1e-3, n=1, seed=0)
        with pytest.raises(DomainError):
            risk.RiskEstimate(mean=0.0, std_error=0.0, n=0, seed=0)


class TestSweepPoint:
    def test_theta_is_frozen_copy(self):
        theta = np.array([1.0, 2.0])
        pt = risk.SweepPoint(t=2.0, theta=theta)
        theta[0] = 99.0
        assert pt.theta[0] == 1.0
        assert not pt.theta.flags.writeable

    def test_rejects_negative_t(self):
        with pytest.raises(DomainError):
            risk.SweepPoint(t=-0.5, theta=None)

    def test_default_maps_are_independent(self):
        a = risk.SweepPoint(t=0.0, theta=None)
        b = risk.SweepPoint(t=0.0, theta=None)
        a.estimates["x"] = 1
        assert b.estimates == {}


class TestNuisanceAbscissa:
    def test_univariate_is_zero(self):
        assert risk.nuisance_abscissa(np.array([2.0]), np.array([5.0])) == 0.0

    def test_orthogonal_part_only(self):
        a = np.array([1.0, 1.0, 1.0, 1.0])
        w = np.array([1.0, -1.0, 1.0, -1.0])  # orthogonal to a
        got = risk.nuisance_abscissa(a, 3.0 * a + 2.0 * w)
        assert got == pytest.approx(4.0 * 4.0 / 3.0, abs=1e-12)

    def test_zero_shape_vector_uses_full_norm(self):
        theta = np.array([3.0, 0.0, 4.0])
        got = risk.nuisance_abscissa(np.zeros(3), theta)
        assert got == pytest.approx(25.0 / 2.0, abs=1e-12)


class _TrueDensity:
    """Oracle estimator: the true sampling density, ignoring X."""

    def __init__(self, dist):
        self.dist = dist

    def log_density(self, y):
        return float(mmn.log_density_mmn(self.dist, np.atleast_2d(y))[0])


class _Halved:
    """Broken estimator assigning zero density to half the sample space."""

    def __init__(self, problem, x):
        self.inner = predictive.mre(problem, x)

    def log_density(self, y):
        y = np.asarray(y, dtype=float)
        if y.reshape(-1)[0] > 0.0:
            return -math.inf
        return self.inner.log_density(y)


class TestKlRiskMc:
    def test_oracle_estimator_has_zero_risk(self):
        problem = _sqrtchisq_problem(5)
        theta = np.array([0.3, -0.8, 1.1, 0.0, 0.5])
        truth = mmn.MmnDistribution(
            theta, problem.a, 2.0 * np.eye(5), mixing.SqrtChiSq(1.0)
        )
        est = risk.kl_risk_mc(problem, theta, lambda x: _TrueDensity(truth), 20_000, 17)
        # identical densities evaluated through two code paths: the log
        # ratios differ only by round-off, far below any statistical scale
        assert abs(est.mean) < 1e-12
        assert est.n == 20_000 and est.seed == 17

    def test_normal_case_matches_closed_risk(self):
        problem = predictive.PredictionProblem(
            np.zeros(4), 1.0, 2.0, mixing.Gamma(1.0, 1.0), mixing.Gamma(1.0, 1.0)
        )
        est = risk.kl_risk_mc(
            problem, np.zeros(4), _mre_factory(problem), 100_000, 3
        )
        assert abs(est.mean - 2.0 * math.log(1.5)) < 3.0 * est.std_error

    def test_matches_exact_risk(self):
        problem = _sqrtchisq_problem(5)
        est = risk.kl_risk_mc(
            problem, np.array([0.4, -1.0, 0.2, 2.5, 0.0]), _mre_factory(problem), 40_000, 11
        )
        assert abs(est.mean - MRE_RISK_SQRTCHISQ[5]) < 3.0 * est.std_error

    def test_same_seed_is_bitwise_reproducible(self):
        problem = _sqrtchisq_problem(5)
        theta = np.zeros(5)
        a = risk.kl_risk_mc(problem, theta, _mre_factory(problem), 8192, 5)
        b = risk.kl_risk_mc(problem, theta, _mre_factory(problem), 8192, 5)
        assert a.mean == b.mean and a.std_error == b.std_error

    def test_worker_count_does_not_change_the_estimate(self):
        problem = _sqrtchisq_problem(5)
        theta = np.zeros(5)
        seq = risk.kl_risk_mc(problem, theta, _mre_factory(problem), 12_288, 2, workers=1)
        par = risk.kl_risk_mc(problem, theta, _mre_factory(problem), 12_288, 2, workers=3)
        assert seq.mean == par.mean and seq.std_error == par.std_error

    def test_generic_adapter_matches_row_path(self):
        problem = _sqrtchisq_problem(5)
        theta = np.zeros(5)

        class Hide:
            def __init__(self, inner):
                self.inner = inner

            def log_density(self, y):
                return self.inner.log_density(y)

        fast = risk.kl_risk_mc(problem, theta, _mre_factory(problem), 4096, 5)
        slow = risk.kl_risk_mc(
            problem, theta, lambda x: Hide(predictive.mre(problem, x)), 4096, 5
        )
        assert fast.mean == slow.mean and fast.std_error == slow.std_error

    def test_replicates_need_not_fill_whole_chunks(self):
        problem = _sqrtchisq_problem(5)
        est = risk.kl_risk_mc(problem, np.zeros(5), _mre_factory(problem), 5000, 5)
        assert est.n == 5000

    def test_location_constancy_under_shared_seed(self):
        # the equivariant rule scores y - x and the truth scores y - theta,
        # so with common draws the log ratios agree across locations up to
        # the rounding of (theta + w) - theta
        problem = _sqrtchisq_problem(5)
        rng = np.random.default_rng(0)
        estimates = [
            risk.kl_risk_mc(problem, theta, _mre_factory(problem), 4096, 21)
            for theta in 3.0 * rng.standard_normal((5, 5))
        ]
        means = [e.mean for e in estimates]
        assert max(means) - min(means) < 1e-12

    def test_contamination_raises_with_diagnostics(self):
        problem = _sqrtchisq_problem(5)
        with pytest.raises(ContaminatedEstimateError, match=r"8192.*%"):
            risk.kl_risk_mc(
                problem, np.zeros(5), lambda x: _Halved(problem, x), 8192, 1
            )

    def test_failing_factory_counts_as_contamination(self):
        problem = _sqrtchisq_problem(5)

        def factory(x):
            raise DomainError("no estimate at this observation")

        with pytest.raises(ContaminatedEstimateError):
            risk.kl_risk_mc(problem, np.zeros(5), factory, 4096, 1)

    def test_rare_bad_rows_are_dropped(self):
        problem = _sqrtchisq_problem(5)
        calls = {"count": 0}

        class Sparse:
            def __init__(self, x):
                self.inner = predictive.mre(problem, x)

            def log_density(self, y):
                calls["count"] += 1
                if calls["count"] == 7:
                    return math.nan
                return self.inner.log_density(y)

        est = risk.kl_risk_mc(problem, np.zeros(5), Sparse, 20_000, 2)
        assert est.n == 19_999

    def test_rejects_bad_arguments(self):
        problem = _sqrtchisq_problem(5)
        fac = _mre_factory(problem)
        with pytest.raises(DomainError):
            risk.kl_risk_mc(problem, np.zeros(5), fac, 0, 1)
        with pytest.raises(DomainError):
            risk.kl_risk_mc(problem, np.zeros(4), fac, 100, 1)
        with pytest.raises(DomainError):
            risk.kl_risk_mc(problem, np.zeros(5), fac, 100, 1.5)
        with pytest.raises(DomainError):
            risk.kl_risk_mc(problem, np.zeros(5), "not callable", 100, 1)


class TestEntropy1d:
    def test_standard_normal(self):
        got = risk.entropy_1d(lambda y: float(norm.logpdf(y)), (-10.0, 10.0))
        assert got == pytest.approx(GAUSS_ENTROPY, abs=1e-9)

    def test_scale_adds_log_sigma(self):
        got = risk.entropy_1d(lambda y: float(norm.logpdf(y, 0.0, 2.0)), (-22.0, 22.0))
        assert got == pytest.approx(GAUSS_ENTROPY + math.log(2.0), abs=1e-9)

    def test_clipped_window_raises(self):
        with pytest.raises(WindowError, match="mass"):
            risk.entropy_1d(lambda y: float(norm.logpdf(y)), (-2.0, 2.0))

    def test_rejects_bad_windows(self):
        f = lambda y: float(norm.logpdf(y))
        with pytest.raises(DomainError):
            risk.entropy_1d(f, (1.0, 1.0))
        with pytest.raises(DomainError):
            risk.entropy_1d(f, (-math.inf, 10.0))
        with pytest.raises(DomainError):
            risk.entropy_1d("not callable", (-10.0, 10.0))


class TestMreRiskExact:
    def test_zero_shape_vector_is_the_normal_constant(self):
        problem = predictive.PredictionProblem(
            np.zeros(5), 1.0, 2.0, mixing.SqrtChiSq(1.0), mixing.SqrtChiSq(1.0)
        )
        assert risk.mre_risk_exact(problem) == 2.5 * math.log(1.5)

    @pytest.mark.parametrize("d", [5, 7, 9])
    def test_half_normal_mixing_values(self, d):
        got = risk.mre_risk_exact(_sqrtchisq_problem(d))
        assert got == pytest.approx(MRE_RISK_SQRTCHISQ[d], abs=1e-9)

    def test_exponential_mixing_value(self):
        got = risk.mre_risk_exact(_exp_problem(5))
        assert got == pytest.approx(MRE_RISK_EXP_D5, abs=1e-9)

    def test_one_degenerate_law_reduces_to_single_mixture(self):
        # with V2 a point mass the true density is a shifted normal and
        # the difference law inherits the remaining half-normal factor
        problem = predictive.PredictionProblem(
            np.array([0.9, 0.4]),
            1.0,
            2.0,
            mixing.TruncatedNormal(0.0, 1.0),
            mixing.Degenerate(0.7),
        )
        got = risk.mre_risk_exact(problem)
        b = math.hypot(0.9, 0.4) / math.sqrt(3.0)
        dist = mmn.MmnDistribution([0.0], [b], [[1.0]], mixing.TruncatedNormal(0.0, 1.0))
        h_pred = risk.entropy_1d(
            lambda y: float(mmn.log_density_mmn(dist, np.array([y]))), (-10.0, 14.0)
        )
        assert got == pytest.approx(h_pred - GAUSS_ENTROPY + math.log(1.5), abs=1e-9)
        assert got == pytest.approx(0.4609122680891413, abs=1e-9)

    def test_two_degenerate_laws_give_the_normal_constant(self):
        problem = predictive.PredictionProblem(
            np.array([0.9, 0.4]), 1.0, 2.0, mixing.Degenerate(0.3), mixing.Degenerate(0.7)
        )
        assert risk.mre_risk_exact(problem) == math.log(1.5)

    def test_monte_carlo_bridge(self):
        problem = _exp_problem(5)
        est = risk.kl_risk_mc(problem, np.zeros(5), _mre_factory(problem), 60_000, 29)
        assert abs(est.mean - MRE_RISK_EXP_D5) < 3.0 * est.std_error

    def test_sampler_only_law_is_rejected(self):
        class SamplerOnly(mixing.MixingLaw):
            def support(self):
                return (0.0, math.inf)

            def window(self):
                return (0.0, 40.0)

            def mean(self):
                return 1.0

            def sample(self, count, rng):
                return rng.exponential(size=count)

            def log_density(self, v):
                raise CapabilityError("this law only provides samples")

        # the density is needed as soon as the mixing pair is combined,
        # so the refusal may come from problem formation itself
        with pytest.raises(CapabilityError):
            risk.mre_risk_exact(
                predictive.PredictionProblem(
                    np.ones(2), 1.0, 2.0, SamplerOnly(), SamplerOnly()
                )
            )

    def test_rejects_non_problem(self):
        with pytest.raises(DomainError):
            risk.mre_risk_exact("nope")


class TestEntropyDecomposition:
    def test_bivariate_entropy_splits_into_axis_and_gaussian_parts(self):
        # grid entropy of a correlated bivariate mixture against the
        # one-dimensional tilted entropy plus Gaussian complement
        law = mixing.TruncatedNormal(0.0, 1.0)
        a = np.array([1.0, 0.5])
        cov = np.array([[1.3, 0.4], [0.4, 0.9]])
        dist = mmn.MmnDistribution(np.zeros(2), a, cov, law)
        grid = np.linspace(-9.5, 10.5, 401)
        xx, yy = np.meshgrid(grid, grid, indexing="ij")
        logf = mmn.log_density_mmn(
            dist, np.column_stack([xx.ravel(), yy.ravel()])
        ).reshape(xx.shape)
        f = np.exp(logf)
        h_grid = np.trapezoid(
            np.trapezoid(np.where(f > 0.0, -f * logf, 0.0), grid, axis=1), grid
        )

        b = math.sqrt(float(a @ np.linalg.solve(cov, a)))
        axis_dist = mmn.MmnDistribution([0.0], [b], [[1.0]], law)
        h_axis = risk.entropy_1d(
            lambda y: float(mmn.log_density_mmn(axis_dist, np.array([y]))),
            (-10.0, b * 9.0 + 10.0),
        )
        want = h_axis + GAUSS_ENTROPY + 0.5 * math.log(np.linalg.det(cov))
        assert h_grid == pytest.approx(want, abs=1e-4)


class TestJsRiskDifferenceExact:
    def test_central_value(self):
        assert risk.js_risk_difference_exact(5, 1.0, 2.0, 0.0) == pytest.approx(
            1.0 / 3.0, abs=1e-14
        )

    def test_vanishes_at_infinity(self):
        assert risk.js_risk_difference_exact(5, 1.0, 2.0, math.inf) == 0.0

    def test_decreasing_in_the_nuisance_norm(self):
        vals = [
            risk.js_risk_difference_exact(5, 1.0, 2.0, z)
            for z in (0.0, 0.5, 2.0, 8.0, 32.0, 128.0)
        ]
        assert all(a > b > 0.0 for a, b in zip(vals, vals[1:]))

    def test_matches_inverse_moment_integral(self):
        # E[1/W] for W noncentral chi-square, by direct integration
        for d, z2 in ((5, 4.0), (7, 1.5), (4, 9.0)):
            nu, lam = d - 1, z2 / 1.0
            inv_moment, _ = integrate.quad(
                lambda w: ncx2.pdf(w, nu, lam) / w, 0.0, np.inf, limit=200
            )
            want = (d - 3) ** 2 * 1.0 / (2.0 * 3.0) * inv_moment
            got = risk.js_risk_difference_exact(d, 1.0, 2.0, z2)
            assert got == pytest.approx(want, rel=1e-9)

    def test_matches_simulated_quadratic_risk(self):
        # the improvement equals the shrinkage estimator's quadratic-risk
        # gain over the identity, scaled by 1/(2 sigma2_s)
        rng = np.random.default_rng(31)
        nu = 4
        zeta = np.zeros(nu)
        zeta[0] = 2.0
        z = zeta + rng.standard_normal((400_000, nu))
        norms2 = np.sum(z * z, axis=1)
        shrunk = (1.0 - 2.0 / norms2)[:, None] * z
        loss = np.sum((shrunk - zeta) ** 2, axis=1)
        diff = -(loss.mean() - nu) / (2.0 * 3.0)
        se = loss.std() / math.sqrt(loss.size) / 6.0
        got = risk.js_risk_difference_exact(5, 1.0, 2.0, 4.0)
        assert abs(got - diff) < 3.0 * se

    def test_rejects_low_dimensions_and_bad_arguments(self):
        with pytest.raises(DomainError):
            risk.js_risk_difference_exact(3, 1.0, 2.0, 0.0)
        with pytest.raises(DomainError):
            risk.js_risk_difference_exact(5.0, 1.0, 2.0, 0.0)
        with pytest.raises(DomainError):
            risk.js_risk_difference_exact(5, -1.0, 2.0, 0.0)
        with pytest.raises(DomainError):
            risk.js_risk_difference_exact(5, 1.0, 2.0, -0.1)


class TestRiskSweep:
    def test_sweep_records_estimates_and_paired_differences(self):
        problem = _sqrtchisq_problem(5)
        points = risk.risk_sweep(
            problem, ["mre", "harmonic_bayes"], [0.0, 1.0], n=8192, seed=23
        )
        assert [pt.t for pt in points] == [0.0, 1.0]
        for pt in points:
            assert not pt.errors
            assert set(pt.estimates) == {"mre", "harmonic_bayes"}
            diff = pt.differences[("mre", "harmonic_bayes")]
            # the Bayes rule dominates; paired errors make this sharp
            assert diff.mean - 3.0 * diff.std_error > 0.0

    def test_default_locations_realize_the_abscissa(self):
        problem = _sqrtchisq_problem(5)
        points = risk.risk_sweep(problem, ["mre"], [0.0, 0.5, 4.0], n=4096, seed=1)
        for pt in points:
            assert abs(risk.nuisance_abscissa(problem.a, pt.theta) - pt.t) <= 1e-10
            assert float(problem.a @ pt.theta) == pytest.approx(0.0, abs=1e-12)

    def test_equivariant_risk_constant_across_abscissas(self):
        problem = _sqrtchisq_problem(5)
        points = risk.risk_sweep(problem, ["mre"], [0.0, 2.0, 16.0], n=4096, seed=9)
        means = {pt.estimates["mre"].mean for pt in points}
        assert len(means) == 1  # common draws make the constancy bitwise

    def test_shares_draws_with_single_point_estimates(self):
        problem = _sqrtchisq_problem(5)
        [point] = risk.risk_sweep(problem, ["mre"], [1.0], n=8192, seed=41)
        direct = risk.kl_risk_mc(
            problem, point.theta, _mre_factory(problem), 8192, 41
        )
        assert direct.mean == point.estimates["mre"].mean

    def test_worker_count_does_not_change_results(self):
        problem = _sqrtchisq_problem(5)
        one = risk.risk_sweep(problem, ["mre"], [0.0, 1.0], n=12_288, seed=2, workers=1)
        many = risk.risk_sweep(problem, ["mre"], [0.0, 1.0], n=12_288, seed=2, workers=3)
        for a, b in zip(one, many):
            ea, eb = a.estimates["mre"], b.estimates["mre"]
            assert ea.mean == eb.mean and ea.std_error == eb.std_error

    def test_custom_estimators_and_builder(self):
        problem = _sqrtchisq_problem(5)
        theta = np.array([2.0, -2.0, 0.0, 0.0, 0.0])
        t = risk.nuisance_abscissa(problem.a, theta)
        points = risk.risk_sweep(
            problem,
            [("equivariant", _mre_factory(problem))],
            [t],
            theta_builder=lambda _:  theta,
            n=4096,
            seed=3,
        )
        assert set(points[0].estimates) == {"equivariant"}
        np.testing.assert_array_equal(points[0].theta, theta)

    def test_builder_mismatch_is_recorded_not_fatal(self):
        problem = _sqrtchisq_problem(5)
        points = risk.risk_sweep(
            problem,
            ["mre"],
            [1.0, 0.0],
            theta_builder=lambda t: np.zeros(5),
            n=4096,
            seed=1,
        )
        assert "point" in points[0].errors and points[0].theta is None
        assert not points[0].estimates
        assert not points[1].errors  # t = 0 is realized by the zero vector

    def test_failing_estimator_is_recorded_not_fatal(self):
        problem = _sqrtchisq_problem(5)

        def broken(x):
            raise DomainError("no estimate at this observation")

        points = risk.risk_sweep(
            problem,
            {"mre": _mre_factory(problem), "broken": broken},
            [0.0],
            n=4096,
            seed=3,
        )
        pt = points[0]
        assert "broken" in pt.errors
        assert "mre" in pt.estimates
        assert pt.differences == {}

    def test_rejects_bad_specifications(self):
        problem = _sqrtchisq_problem(5)
        with pytest.raises(DomainError, match="mre.*plugin_js"):
            risk.risk_sweep(problem, ["unknown_name"], [0.0], n=64, seed=0)
        with pytest.raises(DomainError):
            risk.risk_sweep(problem, ["mre", "mre"], [0.0], n=64, seed=0)
        with pytest.raises(DomainError):
            risk.risk_sweep(problem, [], [0.0], n=64, seed=0)
        with pytest.raises(DomainError):
            risk.risk_sweep(problem, ["mre"], [], n=64, seed=0)
        with pytest.raises(DomainError):
            risk.risk_sweep(problem, ["mre"], [-1.0], n=64, seed=0)
        with pytest.raises(DomainError):
            risk.risk_sweep(problem, ["mre"], [0.0], n=64, seed=0, workers=0)


class TestDominance:
    """Paired Monte Carlo comparisons against the closed improvements."""

    def test_harmonic_gain_positive_and_decreasing(self):
        problem = _sqrtchisq_problem(5)
        points = risk.risk_sweep(
            problem, ["mre", "harmonic_bayes"], [0.0, 2.0, 8.0], n=20_000, seed=7
        )
        gains = [pt.differences[("mre", "harmonic_bayes")] for pt in points]
        for gain in gains:
            assert gain.mean - 2.326 * gain.std_error > 0.0
        assert gains[0].mean > gains[1].mean > gains[2].mean

    @pytest.mark.parametrize("factory", [_sqrtchisq_problem, _exp_problem])
    def test_james_stein_gain_matches_exact_difference(self, factory):
        problem = factory(5)
        points = risk.risk_sweep(
            problem, ["mre", "plugin_js"], [1.0], n=60_000, seed=13
        )
        gain = points[0].differences[("mre", "plugin_js")]
        want = risk.js_risk_difference_exact(5, 1.0, 2.0, 4.0)
        assert abs(gain.mean - want) < 3.0 * gain.std_error

    def test_gain_does_not_depend_on_the_mixing_pair(self):
        # risks depend on the mixing laws but paired differences do not
        gains = []
        for factory in (_sqrtchisq_problem, _exp_problem):
            problem = factory(5)
            points = risk.risk_sweep(
                problem, ["mre", "harmonic_bayes"], [1.0], n=40_000, seed=19
            )
            gains.append(points[0].differences[("mre", "harmonic_bayes")])
        a, b = gains
        assert abs(a.mean - b.mean) < 3.0 * math.hypot(a.std_error, b.std_error)
