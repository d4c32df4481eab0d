"""Posterior analysis of mean-mixture models under normal location priors.

Observing ``x`` from ``MMN_d(theta, a, sigma, law)`` with the prior
``theta ~ N(mu, delta)`` leaves ``theta | x`` again a mean mixture: the
Gaussian part shrinks toward the prior mean while the mixing value is
re-weighted by a Gaussian tilt.  The same machinery yields the Bayes
predictive density of a second, independent mean-mixture observation as
a two-direction mean mixture.  The flat (improper uniform) prior is the
infinite-variance limit and is supported directly.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate
from scipy.linalg import cho_factor, cho_solve

from .errors import CapabilityError, DensityUnderflowWarning, DomainError
from .mixing import (
    Degenerate,
    DifferenceLaw,
    Gamma,
    KummerII,
    MixingLaw,
    SqrtChiSq,
    TruncatedNormal,
    difference_law,
    difference_law_mean_shifted,
    posterior_mixing,
)
from .mmn import (
    MmnDistribution,
    TwoDirectionMmn,
    _check_spd,
    _check_vector,
    _frozen,
    _log_gauss_rows,
    log_density_mmn,
)

__all__ = [
    "NormalPrior",
    "PosteriorMmn",
    "posterior",
    "posterior_mean",
    "predictive_normal_prior",
    "collapse_two_direction",
    "two_direction_log_density",
]


@dataclass(frozen=True, eq=False)
class NormalPrior:
    """Location prior: ``N(mu, delta)``, or the flat prior ``pi = 1``.

    Pass ``uniform=True`` (and nothing else) for the flat prior; otherwise
    both ``mu`` and ``delta`` are required and ``delta`` must be SPD.
    """

    mu: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    uniform: bool = False

    def __post_init__(self):
        if self.uniform:
            if self.mu is not None or self.delta is not None:
                raise DomainError("the uniform prior takes no mu or delta")
            return
        if self.mu is None or self.delta is None:
            raise DomainError("a proper prior needs both mu and delta")
        mu = _check_vector(self.mu, "mu")
        delta, _ = _check_spd(self.delta, mu.size)
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "delta", _frozen(delta))

    @property
    def d(self) -> Optional[int]:
        return None if self.uniform else self.mu.size


@dataclass(frozen=True, eq=False)
class PosteriorMmn:
    """The law of ``theta | x``: a mean mixture around the shrunk location.

    ``location`` is ``(I - P) x + P mu`` with ``P = sigma (sigma+delta)^-1``;
    the perturbation direction is ``a_star = -(I - P) a`` and the Gaussian
    part has covariance ``(I - P) sigma``.  ``tilt_a`` / ``tilt_b`` are the
    quadratic and linear coefficients of the Gaussian tilt that turns the
    prior mixing law into ``law_star``.
    """

    location: np.ndarray
    a_star: np.ndarray
    sigma_post: np.ndarray
    law_star: MixingLaw
    p_matrix: np.ndarray
    tilt_a: float
    tilt_b: float

    def __post_init__(self):
        location = _check_vector(self.location, "location")
        a_star = _check_vector(self.a_star, "a_star")
        d = location.size
        if a_star.size != d:
            raise DomainError("location and a_star must have equal length")
        sigma_post, _ = _check_spd(self.sigma_post, d)
        p_matrix = np.asarray(self.p_matrix, dtype=np.float64)
        if p_matrix.shape != (d, d):
            raise DomainError(f"p_matrix must be a {d}x{d} matrix")
        if not (math.isfinite(self.tilt_a) and self.tilt_a >= 0.0):
            raise DomainError("tilt_a must be finite and nonnegative")
        if not math.isfinite(self.tilt_b):
            raise DomainError("tilt_b must be finite")
        object.__setattr__(self, "location", _frozen(location))
        object.__setattr__(self, "a_star", _frozen(a_star))
        object.__setattr__(self, "sigma_post", _frozen(sigma_post))
        object.__setattr__(self, "p_matrix", _frozen(p_matrix))
        object.__setattr__(self, "tilt_a", float(self.tilt_a))
        object.__setattr__(self, "tilt_b", float(self.tilt_b))
        object.__setattr__(
            self,
            "_mmn",
            MmnDistribution(location, a_star, sigma_post, self.law_star),
        )

    @property
    def d(self) -> int:
        return self.location.size

    def as_mmn(self) -> MmnDistribution:
        """The posterior as a plain distribution object."""
        return self._mmn

    def log_density(self, theta) -> Union[float, np.ndarray]:
        """Posterior log density at ``theta`` (vector or rows of vectors)."""
        return log_density_mmn(self._mmn, theta)


def posterior(dist: MmnDistribution, prior: NormalPrior, x) -> PosteriorMmn:
    """The law of ``theta | x`` for an observation of ``dist`` at ``x``."""
    if not isinstance(dist, MmnDistribution):
        raise DomainError("dist must be an MmnDistribution")
    if not isinstance(prior, NormalPrior):
        raise DomainError("prior must be a NormalPrior")
    if not isinstance(dist.law, MixingLaw):
        raise DomainError("posterior requires a one-sided mixing law")
    x = _check_vector(x, "x")
    d = dist.d
    if x.size != d:
        raise DomainError(f"x must have dimension {d}")

    if prior.uniform:
        return PosteriorMmn(
            location=x,
            a_star=-dist.a,
            sigma_post=dist.sigma,
            law_star=dist.law,
            p_matrix=np.zeros((d, d)),
            tilt_a=0.0,
            tilt_b=0.0,
        )

    if prior.d != d:
        raise DomainError(f"prior must have dimension {d}")
    total = dist.sigma + prior.delta
    factor = cho_factor(total, lower=True)
    # P = sigma (sigma + delta)^-1; the product of symmetric matrices is
    # taken as ((sigma+delta)^-1 sigma)^T to reuse the factorization.
    p_matrix = cho_solve(factor, dist.sigma).T
    total_inv_a = cho_solve(factor, dist.a)
    tilt_a = float(dist.a @ total_inv_a)
    tilt_b = float((x - prior.mu) @ total_inv_a)
    law_star = posterior_mixing(dist.law, tilt_a, tilt_b)

    complement = np.eye(d) - p_matrix
    location = complement @ x + p_matrix @ prior.mu
    sigma_post = complement @ dist.sigma
    sigma_post = 0.5 * (sigma_post + sigma_post.T)
    return PosteriorMmn(
        location=location,
        a_star=-(complement @ dist.a),
        sigma_post=sigma_post,
        law_star=law_star,
        p_matrix=p_matrix,
        tilt_a=tilt_a,
        tilt_b=tilt_b,
    )


def _mixing_mean(law) -> float:
    """Mean of a mixing law, by closed form or adaptive quadrature."""
    if isinstance(law, KummerII) and law.c == 0.0 and law.b <= 1.0:
        raise DomainError("mixing law has no finite mean (algebraic tail)")
    if isinstance(law, (Degenerate, Gamma, SqrtChiSq, TruncatedNormal, KummerII)):
        return float(law.mean())
    lo, hi = law.window()

    def weighted(v: float, power: int) -> float:
        g = float(np.asarray(law.log_density(np.array([v])))[0])
        return (v**power) * math.exp(g) if g > -745.0 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        mass, _ = integrate.quad(
            lambda v: weighted(v, 0), lo, hi, limit=200, epsrel=1e-9
        )
        first, _ = integrate.quad(
            lambda v: weighted(v, 1), lo, hi, limit=200, epsrel=1e-9
        )
    if not (mass > 0.0 and math.isfinite(first)):
        raise DomainError("mixing mean quadrature failed to converge")
    return first / mass


def posterior_mean(post: PosteriorMmn) -> np.ndarray:
    """``E(theta | x)``: the shrunk location plus the mean mixing shift."""
    if not isinstance(post, PosteriorMmn):
        raise DomainError("post must be a PosteriorMmn")
    mean_k = _mixing_mean(post.law_star)
    if not math.isfinite(mean_k):
        raise DomainError("posterior mixing law has no finite mean")
    return post.location + mean_k * post.a_star


def _scaled_identity(mat: np.ndarray, name: str) -> float:
    """The scalar ``s`` with ``mat = s I``, or a capability error."""
    mat = np.asarray(mat, dtype=np.float64)
    d = mat.shape[0]
    scale = float(np.trace(mat)) / d
    if float(np.max(np.abs(mat - scale * np.eye(d)))) > 1e-10 * max(scale, 1.0):
        raise CapabilityError(
            f"{name} must be a scaled identity matrix; whiten the problem first"
        )
    return scale


def predictive_normal_prior(
    dist_x: MmnDistribution,
    dist_y: MmnDistribution,
    prior: NormalPrior,
    x,
) -> TwoDirectionMmn:
    """Bayes predictive law of the second observation given the first.

    Both sampling covariances and the prior covariance must be scaled
    identities.  The result mixes two independent directions: the tilted
    ``dist_x`` mixing value pulls along ``-omega a_X`` and the untouched
    ``dist_y`` mixing value pushes along ``a_Y``, around the shrunk
    location ``omega x + (1 - omega) mu``.  The flat prior gives
    ``omega = 1`` and leaves the first mixing law untilted.
    """
    for dist, name in ((dist_x, "dist_x"), (dist_y, "dist_y")):
        if not isinstance(dist, MmnDistribution):
            raise DomainError(f"{name} must be an MmnDistribution")
    if not isinstance(prior, NormalPrior):
        raise DomainError("prior must be a NormalPrior")
    if not isinstance(dist_x.law, MixingLaw):
        raise DomainError("dist_x must carry a one-sided mixing law")
    d = dist_x.d
    if dist_y.d != d:
        raise DomainError("dist_x and dist_y must share one dimension")
    if not np.array_equal(dist_x.theta, dist_y.theta):
        raise DomainError("dist_x and dist_y must share the location")
    x = _check_vector(x, "x")
    if x.size != d:
        raise DomainError(f"x must have dimension {d}")
    s2_x = _scaled_identity(dist_x.sigma, "dist_x.sigma")
    s2_y = _scaled_identity(dist_y.sigma, "dist_y.sigma")

    if prior.uniform:
        omega = 1.0
        mu = np.zeros(d)
        k_law: MixingLaw = dist_x.law
    else:
        if prior.d != d:
            raise DomainError(f"prior must have dimension {d}")
        tau2 = _scaled_identity(prior.delta, "prior.delta")
        mu = prior.mu
        denom = s2_x + tau2
        omega = tau2 / denom
        tilt_a = float(dist_x.a @ dist_x.a) / denom
        tilt_b = float((x - mu) @ dist_x.a) / denom
        k_law = posterior_mixing(dist_x.law, tilt_a, tilt_b)

    theta_star = omega * x + (1.0 - omega) * mu
    sigma_star = (omega * s2_x + s2_y) * np.eye(d)
    return TwoDirectionMmn(
        theta=theta_star,
        a1=-omega * dist_x.a,
        a2=dist_y.a,
        sigma=sigma_star,
        joint_law=(k_law, dist_y.law),
    )


def collapse_two_direction(tdm: TwoDirectionMmn) -> MmnDistribution:
    """Fold collinear directions into a single-direction mean mixture.

    With ``a2 = r a1`` the combined shift is ``a1 (W1 + r W2)``, so the
    pair of laws collapses to the law of that weighted sum.  Directions
    that are not collinear (or laws that are already two-sided) cannot be
    collapsed.
    """
    if not isinstance(tdm, TwoDirectionMmn):
        raise DomainError("tdm must be a TwoDirectionMmn")
    law1, law2 = tdm.joint_law
    n1 = float(tdm.a1 @ tdm.a1)
    n2 = float(tdm.a2 @ tdm.a2)
    if n1 == 0.0 and n2 == 0.0:
        return MmnDistribution(tdm.theta, tdm.a1, tdm.sigma, Degenerate(0.0))
    if n1 == 0.0:
        return MmnDistribution(tdm.theta, tdm.a2, tdm.sigma, law2)
    if n2 == 0.0:
        return MmnDistribution(tdm.theta, tdm.a1, tdm.sigma, law1)
    if not (isinstance(law1, MixingLaw) and isinstance(law2, MixingLaw)):
        raise CapabilityError("two-sided component laws cannot be combined")
    ratio = float(tdm.a2 @ tdm.a1) / n1
    residual = tdm.a2 - ratio * tdm.a1
    if float(np.max(np.abs(residual))) > 1e-10 * (1.0 + math.sqrt(n2)):
        raise CapabilityError("directions are not collinear")
    if ratio == -1.0:
        combined: DifferenceLaw = difference_law(law2, law1)
    else:
        combined = difference_law_mean_shifted([law1, law2], [1.0, ratio])
    return MmnDistribution(tdm.theta, tdm.a1, tdm.sigma, combined)


def two_direction_log_density(
    tdm: TwoDirectionMmn, y
) -> Union[float, np.ndarray]:
    """Log density of a two-direction mean mixture at ``y`` (or rows).

    The second direction is integrated in closed form whenever its law
    admits one; the first direction is then handled by adaptive
    quadrature over its density.  Degenerate or zero directions reduce to
    the single-direction density.
    """
    if not isinstance(tdm, TwoDirectionMmn):
        raise DomainError("tdm must be a TwoDirectionMmn")
    arr = np.asarray(y, dtype=np.float64)
    scalar = arr.ndim == 1
    rows = arr[None, :] if scalar else arr
    if rows.ndim != 2 or rows.shape[1] != tdm.d:
        raise DomainError(f"y must have dimension {tdm.d}")
    if not np.all(np.isfinite(rows)):
        raise DomainError("y must be finite")

    law1, law2 = tdm.joint_law
    n1 = float(tdm.a1 @ tdm.a1)
    n2 = float(tdm.a2 @ tdm.a2)
    if n1 == 0.0 and n2 == 0.0:
        out = _log_gauss_rows(rows - tdm.theta, tdm.cholesky)
        return float(out[0]) if scalar else out
    if n1 == 0.0:
        dist = MmnDistribution(tdm.theta, tdm.a2, tdm.sigma, law2)
        return log_density_mmn(dist, y)
    if n2 == 0.0:
        dist = MmnDistribution(tdm.theta, tdm.a1, tdm.sigma, law1)
        return log_density_mmn(dist, y)
    if isinstance(law1, Degenerate):
        dist = MmnDistribution(
            tdm.theta + law1.v0 * tdm.a1, tdm.a2, tdm.sigma, law2
        )
        return log_density_mmn(dist, y)
    if isinstance(law2, Degenerate):
        dist = MmnDistribution(
            tdm.theta + law2.v0 * tdm.a2, tdm.a1, tdm.sigma, law1
        )
        return log_density_mmn(dist, y)

    inner = MmnDistribution(np.zeros(tdm.d), tdm.a2, tdm.sigma, law2)
    lo, hi = law1.window()
    if isinstance(law1, MixingLaw):
        lo = max(float(law1.support()[0]), 0.0)

    out = np.empty(rows.shape[0])
    probe_w = np.linspace(lo, hi, 513)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        probe_log_w = np.asarray(law1.log_density(probe_w))
    for i, row in enumerate(rows):
        shifted = row - tdm.theta - probe_w[:, None] * tdm.a1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DensityUnderflowWarning)
            probe_inner = np.asarray(log_density_mmn(inner, shifted))
        logs = probe_log_w + probe_inner
        finite = np.isfinite(logs)
        if not finite.any():
            warnings.warn(
                "two-direction integrand underflowed everywhere",
                DensityUnderflowWarning,
            )
            out[i] = -np.inf
            continue
        peak = float(np.max(logs[finite]))
        w_peak = float(probe_w[np.argmax(np.where(finite, logs, -np.inf))])

        def integrand(w, _row=row, _peak=peak):
            shifted_one = (_row - tdm.theta - w * tdm.a1)[None, :]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DensityUnderflowWarning)
                g = float(np.asarray(law1.log_density(np.array([w])))[0])
                g += float(np.asarray(log_density_mmn(inner, shifted_one))[0])
            g -= _peak
            return math.exp(g) if g > -745.0 else 0.0

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(
                integrand,
                lo,
                hi,
                points=[w_peak],
                limit=200,
                epsabs=1e-300,
                epsrel=1e-10,
            )
        if not (val > 0.0) or not math.isfinite(val):
            warnings.warn(
                "two-direction mixing integral underflowed",
                DensityUnderflowWarning,
            )
            out[i] = -np.inf
        else:
            out[i] = peak + math.log(val)
    return float(out[0]) if scalar else out
