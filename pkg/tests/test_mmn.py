"""Tests for the mean-mixture distribution layer.

Log-density reference values were frozen from a 50-digit
arbitrary-precision run of the defining mixture integral with
peak-aware breakpoints; everything else checks structure, closed
special cases, or Monte Carlo moments under fixed seeds.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.linalg import solve_triangular

from mmn_predict import mixing, mmn
from mmn_predict.errors import CapabilityError, DomainError

THETA2 = np.array([0.4, -0.7])
A2 = np.array([1.0, 0.5])
SIG2 = np.array([[1.3, 0.4], [0.4, 0.9]])

X_MID = np.array([1.3, -0.2])
X_UP = THETA2 + 15.0 * A2
X_DOWN = THETA2 - 15.0 * A2


def _dist(law, theta=THETA2, a=A2, sigma=SIG2):
    return mmn.MmnDistribution(theta=theta, a=a, sigma=sigma, law=law)


class TestMmnDistribution:
    def test_valid_construction(self):
        d = _dist(mixing.Gamma(alpha=1.0, beta=1.0))
        assert d.d == 2
        np.testing.assert_allclose(d.cholesky @ d.cholesky.T, SIG2, atol=1e-14)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(DomainError):
            mmn.MmnDistribution(
                theta=[0.0, 0.0, 0.0], a=[1.0, 0.0], sigma=SIG2,
                law=mixing.Gamma(alpha=1.0, beta=1.0),
            )

    def test_rejects_indefinite_sigma(self):
        with pytest.raises(DomainError):
            mmn.MmnDistribution(
                theta=[0.0, 0.0], a=[1.0, 0.0],
                sigma=[[1.0, 2.0], [2.0, 1.0]],
                law=mixing.Gamma(alpha=1.0, beta=1.0),
            )

    def test_rejects_asymmetric_sigma(self):
        with pytest.raises(DomainError):
            mmn.MmnDistribution(
                theta=[0.0, 0.0], a=[1.0, 0.0],
                sigma=[[1.0, 0.5], [0.1, 1.0]],
                law=mixing.Gamma(alpha=1.0, beta=1.0),
            )

    def test_rejects_non_law(self):
        with pytest.raises(DomainError):
            mmn.MmnDistribution(theta=[0.0], a=[1.0], sigma=[[1.0]], law="gamma")

    def test_fields_are_read_only(self):
        d = _dist(mixing.Gamma(alpha=1.0, beta=1.0))
        with pytest.raises(ValueError):
            d.theta[0] = 5.0


class TestTwoDirectionMmn:
    def test_valid_construction(self):
        t = mmn.TwoDirectionMmn(
            theta=[0.0, 0.0], a1=[1.0, 0.0], a2=[0.0, 1.0], sigma=np.eye(2),
            joint_law=(mixing.Gamma(alpha=1.0, beta=1.0), mixing.SqrtChiSq(k=1.0)),
        )
        assert t.d == 2
        assert len(t.joint_law) == 2

    def test_rejects_bad_joint_law(self):
        with pytest.raises(DomainError):
            mmn.TwoDirectionMmn(
                theta=[0.0], a1=[1.0], a2=[1.0], sigma=[[1.0]],
                joint_law=(mixing.Gamma(alpha=1.0, beta=1.0),),
            )


class TestSampleMmn:
    def test_no_shift_reduces_to_gaussian(self):
        d = mmn.MmnDistribution(
            theta=[1.0, -2.0, 0.5], a=[0.0, 0.0, 0.0],
            sigma=np.diag([1.0, 2.0, 0.5]), law=mixing.Degenerate(v0=0.0),
        )
        draws = mmn.sample_mmn(d, 100_000, np.random.default_rng(5))
        tol = 3.0 * math.sqrt(3.5) / math.sqrt(100_000)
        assert float(np.max(np.abs(draws.mean(axis=0) - d.theta))) < tol
        assert float(np.max(np.abs(np.cov(draws.T) - d.sigma))) < 0.05

    def test_half_normal_shift_mean(self):
        d = mmn.MmnDistribution(
            theta=[0.0], a=[1.0], sigma=[[1.0]],
            law=mixing.TruncatedNormal(mu=0.0, sigma=1.0),
        )
        draws = mmn.sample_mmn(d, 400_000, np.random.default_rng(6))
        want = math.sqrt(2.0 / math.pi)
        sd = math.sqrt(2.0 - want * want)
        assert abs(float(draws.mean()) - want) < 3.0 * sd / math.sqrt(400_000)

    def test_variance_decomposition(self):
        law = mixing.Gamma(alpha=2.0, beta=1.5)
        d = _dist(law, theta=[0.2, 0.1], a=[0.8, -0.3])
        draws = mmn.sample_mmn(d, 500_000, np.random.default_rng(7))
        want = SIG2[0, 0] + 0.8 ** 2 * 2.0 * 1.5 ** 2
        assert abs(float(np.var(draws[:, 0])) - want) / want < 0.05

    def test_deterministic_given_seed(self):
        d = _dist(mixing.Gamma(alpha=2.0, beta=1.5))
        a = mmn.sample_mmn(d, 32, np.random.default_rng(11))
        b = mmn.sample_mmn(d, 32, np.random.default_rng(11))
        np.testing.assert_array_equal(a, b)


class TestLogDensityClosedForm:
    # Frozen high-precision values of the defining mixture integral.
    FROZEN = {
        mixing.TruncatedNormal(mu=0.0, sigma=1.0): {
            "mid": -1.9799460655769408,
            "up": -52.027271200172144,
            "down": -96.47969218648966,
        },
        mixing.Gamma(alpha=2.0, beta=1.1): {
            "mid": -2.392073183969123,
            "up": -11.51289436376172,
            "down": -99.09555843860214,
        },
        mixing.Gamma(alpha=3.0, beta=0.6): {
            "mid": -2.230951985647479,
            "up": -18.152150327432192,
            "down": -100.12856711637491,
        },
        mixing.SqrtChiSq(k=3.0): {
            "mid": -2.1230337789171205,
            "up": -48.1979739179892,
            "down": -100.85525138019129,
        },
    }
    POINTS = {"mid": X_MID, "up": X_UP, "down": X_DOWN}

    @pytest.mark.parametrize("law", list(FROZEN), ids=lambda l: type(l).__name__)
    def test_frozen_values(self, law):
        d = _dist(law)
        for key, want in self.FROZEN[law].items():
            got = mmn.log_density_mmn(d, self.POINTS[key])
            np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_exponential_mixing_explicit_formula(self):
        # With a unit-shape Gamma mixing value the density is the Gaussian
        # part divided by the reverse Mills ratio at the tilt argument.
        from mmn_predict import specfn

        beta = 0.9
        d = _dist(mixing.Gamma(alpha=1.0, beta=beta))
        x = np.array([1.3, -0.2])
        sinv = np.linalg.inv(SIG2)
        s2 = float(A2 @ sinv @ A2)
        delta = (float((x - THETA2) @ sinv @ A2) - 1.0 / beta) / math.sqrt(s2)
        want = (
            stats.multivariate_normal(mean=THETA2, cov=SIG2).logpdf(x)
            - math.log(beta * math.sqrt(s2))
            - specfn.log_reverse_mills(delta)
        )
        np.testing.assert_allclose(mmn.log_density_mmn(d, x), want, rtol=1e-13)

    def test_half_normal_mixing_at_center(self):
        d = _dist(mixing.TruncatedNormal(mu=0.0, sigma=1.0))
        want = stats.multivariate_normal(
            mean=np.zeros(2), cov=SIG2 + np.outer(A2, A2)
        ).logpdf(np.zeros(2))
        np.testing.assert_allclose(mmn.log_density_mmn(d, THETA2), want, rtol=1e-13)

    def test_degenerate_is_shifted_gaussian(self):
        d = _dist(mixing.Degenerate(v0=0.7))
        x = np.array([0.9, 0.3])
        want = stats.multivariate_normal(mean=THETA2 + 0.7 * A2, cov=SIG2).logpdf(x)
        np.testing.assert_allclose(mmn.log_density_mmn(d, x), want, rtol=1e-13)

    def test_zero_direction_is_plain_gaussian(self):
        d = _dist(mixing.Gamma(alpha=2.0, beta=1.0), a=[0.0, 0.0])
        x = np.array([1.1, -0.9])
        want = stats.multivariate_normal(mean=THETA2, cov=SIG2).logpdf(x)
        np.testing.assert_allclose(mmn.log_density_mmn(d, x), want, rtol=1e-13)

    def test_batch_matches_scalar(self):
        d = _dist(mixing.SqrtChiSq(k=2.0))
        xs = np.array([X_MID, X_UP, THETA2])
        batch = mmn.log_density_mmn(d, xs)
        singles = [mmn.log_density_mmn(d, x) for x in xs]
        np.testing.assert_array_equal(batch, singles)

    def test_location_invariance_is_exact(self):
        # Binary-exact inputs shift without rounding, so the two
        # evaluations must agree bit for bit.
        law = mixing.Gamma(alpha=2.0, beta=1.0)
        theta = np.array([0.5, -0.75])
        delta = np.array([4.0, -2.5])
        x = np.array([0.875, 1.25])
        lhs = mmn.log_density_mmn(_dist(law, theta=theta), x)
        rhs = mmn.log_density_mmn(_dist(law, theta=theta + delta), x + delta)
        assert lhs == rhs

    def test_rejects_wrong_dimension(self):
        d = _dist(mixing.Gamma(alpha=1.0, beta=1.0))
        with pytest.raises(DomainError):
            mmn.log_density_mmn(d, [1.0, 2.0, 3.0])


class TestLogDensityQuadraturePath:
    FROZEN = {
        mixing.Gamma(alpha=2.5, beta=1.2): {
            "mid": -2.7331540662679146,
            "up": -9.679386146595215,
            "down": -100.64152588407751,
        },
        mixing.KummerII(a=1.0, b=1.0, c=1.0, sigma=1.0): {
            "mid": -2.019903993042293,
            "up": -19.67224102624221,
            "down": -95.54978988831063,
        },
    }
    POINTS = {"mid": X_MID, "up": X_UP, "down": X_DOWN}

    @pytest.mark.parametrize("law", list(FROZEN), ids=lambda l: type(l).__name__)
    def test_frozen_values(self, law):
        d = _dist(law)
        for key, want in self.FROZEN[law].items():
            got = mmn.log_density_mmn(d, self.POINTS[key])
            np.testing.assert_allclose(got, want, atol=1e-8, rtol=0)

    @pytest.mark.parametrize(
        "law",
        [
            mixing.TruncatedNormal(mu=0.0, sigma=1.0),
            mixing.Gamma(alpha=1.0, beta=1.0),
            mixing.Gamma(alpha=2.0, beta=1.0),
            mixing.SqrtChiSq(k=1.0),
            mixing.SqrtChiSq(k=2.0),
        ],
        ids=lambda l: type(l).__name__ + str(getattr(l, "alpha", getattr(l, "k", ""))),
    )
    def test_closed_form_agrees_with_quadrature(self, law):
        d = _dist(law)
        rng = np.random.default_rng(123)
        xs = THETA2 + rng.normal(scale=2.5, size=(50, 2))
        closed = mmn.log_density_mmn(d, xs)
        w_a = solve_triangular(d.cholesky, d.a, lower=True)
        s2 = float(w_a @ w_a)
        b = solve_triangular(d.cholesky, (xs - THETA2).T, lower=True).T @ w_a
        quad = mmn._log_gauss_rows(xs - THETA2, d.cholesky) + mmn._log_tilt_integral(
            law, s2, b
        )
        np.testing.assert_allclose(closed, quad, atol=1e-8, rtol=0)


class TestDensityNormalization:
    CLOSED = [
        mixing.TruncatedNormal(mu=0.0, sigma=1.0),
        mixing.TruncatedNormal(mu=-1.0, sigma=2.0),
        mixing.Gamma(alpha=1.0, beta=1.0),
        mixing.Gamma(alpha=2.0, beta=0.8),
        mixing.Gamma(alpha=3.0, beta=0.5),
        mixing.SqrtChiSq(k=1.0),
        mixing.SqrtChiSq(k=2.0),
        mixing.SqrtChiSq(k=3.0),
    ]

    @pytest.mark.parametrize(
        "law", CLOSED, ids=lambda l: type(l).__name__ + repr(l)[:22]
    )
    def test_unit_mass_d1(self, law):
        d = mmn.MmnDistribution(theta=[0.3], a=[1.2], sigma=[[0.8]], law=law)
        center = 0.3 + 1.2 * law.mean()
        width = 12.0 * math.sqrt(0.8 + 1.44 * 4.0)
        total, _ = integrate.quad(
            lambda t: math.exp(mmn.log_density_mmn(d, [t])),
            center - width,
            center + width,
            limit=400,
        )
        np.testing.assert_allclose(total, 1.0, atol=1e-6)

    def test_unit_mass_d1_quadrature_path(self):
        law = mixing.Gamma(alpha=2.5, beta=1.2)
        d = mmn.MmnDistribution(theta=[0.3], a=[1.2], sigma=[[0.8]], law=law)
        hi = law.window()[1]
        total, _ = integrate.quad(
            lambda t: math.exp(mmn.log_density_mmn(d, [t])),
            0.3 - 12.0,
            0.3 + 1.2 * hi + 12.0,
            limit=400,
        )
        np.testing.assert_allclose(total, 1.0, atol=1e-6)

    def test_unit_mass_d2_tensor_grid(self):
        d = mmn.MmnDistribution(
            theta=[0.0, 0.0], a=[1.0, 0.5], sigma=[[1.0, 0.2], [0.2, 1.0]],
            law=mixing.SqrtChiSq(k=2.0),
        )
        g1 = np.linspace(-9.0, 12.0, 141)
        g2 = np.linspace(-8.0, 10.0, 121)
        xx, yy = np.meshgrid(g1, g2, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        vals = np.exp(mmn.log_density_mmn(d, pts)).reshape(xx.shape)
        total = np.trapezoid(np.trapezoid(vals, g2, axis=1), g1)
        np.testing.assert_allclose(total, 1.0, atol=1e-4)


class TestSkewNormal:
    def test_matches_half_normal_mixture(self):
        d = _dist(mixing.TruncatedNormal(mu=0.0, sigma=1.0))
        rng = np.random.default_rng(21)
        xs = np.vstack(
            [rng.normal(scale=3.0, size=(40, 2)), [X_UP, X_DOWN, 2.5 * X_UP]]
        )
        got = mmn.skew_normal_log_density(THETA2, A2, SIG2, xs)
        want = mmn.log_density_mmn(d, xs)
        np.testing.assert_allclose(got, want, atol=1e-10, rtol=0)

    def test_scalar_example(self):
        got = mmn.skew_normal_log_density([0.0], [1.0], [[1.0]], [1.0])
        want = (
            math.log(2.0)
            + stats.norm.logpdf(1.0, scale=math.sqrt(2.0))
            + stats.norm.logcdf(1.0 / math.sqrt(2.0))
        )
        np.testing.assert_allclose(got, want, rtol=1e-13)

    def test_no_skew_is_gaussian(self):
        got = mmn.skew_normal_log_density([0.5, -1.0], [0.0, 0.0], SIG2, [0.1, 0.2])
        want = stats.multivariate_normal(mean=[0.5, -1.0], cov=SIG2).logpdf([0.1, 0.2])
        np.testing.assert_allclose(got, want, rtol=1e-13)

    def test_center_is_wide_gaussian(self):
        got = mmn.skew_normal_log_density(THETA2, A2, SIG2, THETA2)
        want = stats.multivariate_normal(
            mean=np.zeros(2), cov=SIG2 + np.outer(A2, A2)
        ).logpdf(np.zeros(2))
        np.testing.assert_allclose(got, want, rtol=1e-13)


class TestCanonicalFrame:
    def test_orthogonality_and_mapping(self):
        frame = mmn.canonical_frame([1.0, 1.0, 1.0, 1.0], np.eye(4))
        h = frame.h_matrix
        assert float(np.max(np.abs(h @ h.T - np.eye(4)))) < 1e-14
        mapped = h @ (np.array([1.0, 1.0, 1.0, 1.0]) / 2.0)
        np.testing.assert_allclose(mapped, [1.0, 0.0, 0.0, 0.0], atol=1e-12)
        assert frame.a_norm == pytest.approx(2.0)

    def test_diagonal_covariance_norm(self):
        frame = mmn.canonical_frame([0.0, 2.0], np.diag([1.0, 4.0]))
        assert frame.a_norm == pytest.approx(1.0, rel=1e-14)

    def test_axis_aligned_special_cases(self):
        assert np.array_equal(
            mmn.canonical_frame([3.0, 0.0], np.eye(2)).h_matrix, np.eye(2)
        )
        assert np.array_equal(
            mmn.canonical_frame([-3.0, 0.0], np.eye(2)).h_matrix,
            np.diag([-1.0, 1.0]),
        )

    def test_rejects_zero_direction(self):
        with pytest.raises(DomainError):
            mmn.canonical_frame([0.0, 0.0], np.eye(2))


class TestToCanonical:
    SIG3 = np.array([[2.0, 0.5, 0.1], [0.5, 1.5, -0.2], [0.1, -0.2, 1.0]])
    A3 = np.array([0.7, -1.1, 0.4])

    def _setup(self, law):
        d = mmn.MmnDistribution(
            theta=[0.5, -0.3, 1.2], a=self.A3, sigma=self.SIG3, law=law
        )
        frame = mmn.canonical_frame(self.A3, self.SIG3)
        return d, frame, mmn.to_canonical(d, frame)

    def test_canonical_shape(self):
        _, frame, can = self._setup(mixing.Gamma(alpha=2.0, beta=1.0))
        np.testing.assert_allclose(can.sigma, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(can.a[1:], 0.0, atol=1e-14)
        assert can.a[0] == pytest.approx(frame.a_norm)

    def test_density_splits_into_coordinates(self):
        law = mixing.Gamma(alpha=2.0, beta=1.0)
        _, frame, can = self._setup(law)
        one_d = mmn.MmnDistribution(
            theta=[can.theta[0]], a=[frame.a_norm], sigma=[[1.0]], law=law
        )
        rng = np.random.default_rng(31)
        for _ in range(20):
            z = can.theta + rng.normal(scale=2.0, size=3)
            whole = mmn.log_density_mmn(can, z)
            split = mmn.log_density_mmn(one_d, [z[0]]) + float(
                np.sum(stats.norm.logpdf(z[1:], loc=can.theta[1:]))
            )
            np.testing.assert_allclose(whole, split, atol=1e-10, rtol=0)

    def test_transformed_samples_decorrelate(self):
        law = mixing.Gamma(alpha=2.0, beta=1.0)
        d, frame, _ = self._setup(law)
        draws = mmn.sample_mmn(d, 100_000, np.random.default_rng(8))
        mapped = (
            frame.h_matrix @ solve_triangular(d.cholesky, draws.T, lower=True)
        ).T
        corr = np.corrcoef(mapped.T)
        assert float(np.max(np.abs(corr[0, 1:]))) < 0.01

    def test_rejects_mismatched_frame(self):
        d, _, _ = self._setup(mixing.Gamma(alpha=2.0, beta=1.0))
        other = mmn.canonical_frame([1.0, 0.0, 0.0], np.eye(3))
        with pytest.raises(DomainError):
            mmn.to_canonical(d, other)


class TestWhitenProblem:
    LAW = mixing.Gamma(alpha=2.0, beta=1.0)
    SX = np.array([[1.0, 0.3], [0.3, 2.0]])

    def _pair(self):
        dx = mmn.MmnDistribution(
            theta=[0.3, -0.1], a=[1.0, 0.4], sigma=self.SX, law=self.LAW
        )
        dy = mmn.MmnDistribution(
            theta=[0.3, -0.1], a=[0.5, 0.2], sigma=2.0 * self.SX,
            law=mixing.SqrtChiSq(k=1.0),
        )
        return dx, dy

    def test_unit_covariances(self):
        dx, dy = self._pair()
        (ux, uy), _ = mmn.whiten_problem(dx, dy)
        np.testing.assert_allclose(ux.sigma, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(uy.sigma, 2.0 * np.eye(2), atol=1e-12)

    def test_change_of_variables(self):
        dx, dy = self._pair()
        (_, uy), log_jac = mmn.whiten_problem(dx, dy)
        rng = np.random.default_rng(17)
        for y in rng.normal(scale=2.0, size=(10, 2)):
            orig = mmn.log_density_mmn(dy, y)
            mapped = solve_triangular(dx.cholesky, y, lower=True)
            np.testing.assert_allclose(
                mmn.log_density_mmn(uy, mapped) + log_jac, orig, atol=1e-10
            )

    def test_scaled_identity_jacobian(self):
        dxi = mmn.MmnDistribution(
            theta=[0.0, 0.0], a=[1.0, 0.0], sigma=4.0 * np.eye(2), law=self.LAW
        )
        dyi = mmn.MmnDistribution(
            theta=[0.0, 0.0], a=[1.0, 0.0], sigma=8.0 * np.eye(2), law=self.LAW
        )
        _, log_jac = mmn.whiten_problem(dxi, dyi)
        assert log_jac == pytest.approx(-2.0 * math.log(2.0), rel=1e-13)

    def test_rejects_non_proportional(self):
        dx, _ = self._pair()
        other = mmn.MmnDistribution(
            theta=[0.0, 0.0], a=[1.0, 0.0], sigma=np.diag([1.0, 3.0]), law=self.LAW
        )
        with pytest.raises(CapabilityError):
            mmn.whiten_problem(dx, other)


class TestAggregateIid:
    def test_identity_at_one(self):
        d = mmn.MmnDistribution(
            theta=[0.1], a=[1.0], sigma=[[1.0]], law=mixing.Gamma(alpha=1.0, beta=1.0)
        )
        assert mmn.aggregate_iid(d, 1) is d

    def test_gamma_additivity(self):
        d = mmn.MmnDistribution(
            theta=[0.1], a=[1.0], sigma=[[1.0]], law=mixing.Gamma(alpha=1.0, beta=1.0)
        )
        agg = mmn.aggregate_iid(d, 2)
        assert isinstance(agg.law, mixing.Gamma)
        assert agg.law.alpha == pytest.approx(2.0)
        assert agg.law.beta == pytest.approx(0.5)
        assert agg.sigma[0][0] == pytest.approx(0.5)

    def test_point_mass_stays_put(self):
        d = mmn.MmnDistribution(
            theta=[0.1], a=[1.0], sigma=[[1.0]], law=mixing.Degenerate(v0=0.7)
        )
        agg = mmn.aggregate_iid(d, 5)
        assert isinstance(agg.law, mixing.Degenerate)
        assert agg.law.v0 == 0.7

    def test_grid_mean_law_density(self):
        # Mean of two standard half-normals, frozen from a
        # high-precision convolution.
        d = mmn.MmnDistribution(
            theta=[0.0], a=[1.0], sigma=[[1.0]],
            law=mixing.TruncatedNormal(mu=0.0, sigma=1.0),
        )
        agg = mmn.aggregate_iid(d, 2)
        frozen = {
            0.2: 0.4828792482828077,
            0.6: 0.9507634824413912,
            1.2: 0.4867345921559917,
            2.0: 0.04114062134749685,
        }
        for t, want in frozen.items():
            np.testing.assert_allclose(agg.law.density(t), want, atol=5e-6)

    def test_rejects_bad_count(self):
        d = mmn.MmnDistribution(
            theta=[0.1], a=[1.0], sigma=[[1.0]], law=mixing.Gamma(alpha=1.0, beta=1.0)
        )
        with pytest.raises(DomainError):
            mmn.aggregate_iid(d, 0)
