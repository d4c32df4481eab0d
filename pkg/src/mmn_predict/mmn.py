"""Mean-mixture-of-normals distributions on R^d.

A distribution here is a location vector plus a Gaussian term and a
random shift of size V along a fixed direction: ``X = theta + L Z + V a``
with ``Z ~ N(0, I)``, ``V`` drawn from a scalar mixing law, and ``L`` the
lower Cholesky factor of sigma.  The module provides sampling, log
densities (closed form where the mixing law admits one, quadrature
otherwise), the orthogonal change of frame that concentrates the shift
direction on the first coordinate, whitening for proportional-covariance
pairs, and i.i.d.-mean aggregation.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate
from scipy.linalg import solve_triangular

from . import specfn
from .errors import CapabilityError, DensityUnderflowWarning, DomainError
from .mixing import (
    Degenerate,
    DifferenceLaw,
    Gamma,
    GridDifference,
    MixingLaw,
    Tabulated,
    difference_law_mean_shifted,
)

__all__ = [
    "MmnDistribution",
    "CanonicalFrame",
    "TwoDirectionMmn",
    "sample_mmn",
    "log_density_mmn",
    "skew_normal_log_density",
    "canonical_frame",
    "to_canonical",
    "whiten_problem",
    "aggregate_iid",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _check_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a nonempty one-dimensional vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _check_spd(sigma, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate a symmetric positive-definite matrix; return (sigma, chol)."""
    arr = np.asarray(sigma, dtype=np.float64)
    if arr.shape != (d, d):
        raise DomainError(f"sigma must be a {d}x{d} matrix")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sigma must be finite")
    scale = float(np.max(np.abs(arr))) or 1.0
    if float(np.max(np.abs(arr - arr.T))) > 1e-10 * scale:
        raise DomainError("sigma must be symmetric")
    arr = 0.5 * (arr + arr.T)
    try:
        chol = np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise DomainError("sigma must be positive definite") from exc
    return arr, chol


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MmnDistribution:
    """Location theta, shift direction a, Gaussian covariance sigma, mixing law."""

    theta: np.ndarray
    a: np.ndarray
    sigma: np.ndarray
    law: MixingLaw

    def __post_init__(self):
        theta = _check_vector(self.theta, "theta")
        a = _check_vector(self.a, "a")
        if a.size != theta.size:
            raise DomainError("theta and a must have equal length")
        sigma, chol = _check_spd(self.sigma, theta.size)
        if not isinstance(self.law, (MixingLaw, DifferenceLaw)):
            raise DomainError("law must be a mixing or difference law")
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "_chol", _frozen(chol))

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of sigma."""
        return self._chol


@dataclass(frozen=True, eq=False)
class CanonicalFrame:
    """Orthogonal frame whose first row picks out the shift direction.

    ``h_matrix`` maps the whitened direction ``sigma^{-1/2} a`` (unit
    normalized) to the first axis; ``a_norm`` is ``sqrt(a' sigma^{-1} a)``.
    """

    h_matrix: np.ndarray
    a_norm: float

    def __post_init__(self):
        h = np.asarray(self.h_matrix, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DomainError("h_matrix must be square")
        if float(np.max(np.abs(h @ h.T - np.eye(h.shape[0])))) > 1e-12:
            raise DomainError("h_matrix must be orthogonal")
        if not (np.isfinite(self.a_norm) and self.a_norm > 0.0):
            raise DomainError("a_norm must be positive")
        object.__setattr__(self, "h_matrix", _frozen(h))
        object.__setattr__(self, "a_norm", float(self.a_norm))

    @property
    def d(self) -> int:
        return self.h_matrix.shape[0]

    @property
    def first_row(self) -> np.ndarray:
        return self.h_matrix[0]

    @property
    def complement_rows(self) -> np.ndarray:
        return self.h_matrix[1:]


@dataclass(frozen=True, eq=False)
class TwoDirectionMmn:
    """Normal mean mixture with two independent random shift directions.

    ``X = theta + L Z + W1 a1 + W2 a2`` where ``(W1, W2)`` are independent
    draws from the two component laws in ``joint_law``.
    """

    theta: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    sigma: np.ndarray
    joint_law: tuple

    def __post_init__(self):
        theta = _check_vector(self.theta, "theta")
        a1 = _check_vector(self.a1, "a1")
        a2 = _check_vector(self.a2, "a2")
        if a1.size != theta.size or a2.size != theta.size:
            raise DomainError("theta, a1, a2 must have equal length")
        sigma, chol = _check_spd(self.sigma, theta.size)
        if len(self.joint_law) != 2:
            raise DomainError("joint_law must hold exactly two laws")
        for law in self.joint_law:
            if not isinstance(law, (MixingLaw, DifferenceLaw)):
                raise DomainError("joint_law entries must be sampleable laws")
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "a1", _frozen(a1))
        object.__setattr__(self, "a2", _frozen(a2))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "joint_law", tuple(self.joint_law))
        object.__setattr__(self, "_chol", _frozen(chol))

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol


def sample_mmn(dist: MmnDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` rows of ``theta + L Z + V a``.

    The mixing value is drawn before the Gaussian block, so a fixed seed
    pins down the entire draw.
    """
    if not isinstance(dist, MmnDistribution):
        raise DomainError("dist must be an MmnDistribution")
    n = int(count)
    if n < 0:
        raise DomainError("count must be nonnegative")
    v = np.asarray(dist.law.sample(n, rng), dtype=np.float64)
    z = rng.standard_normal((n, dist.d))
    return dist.theta + z @ dist.cholesky.T + v[:, None] * dist.a


def _log_gauss_rows(diff: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Row-wise log N(0, L L') density of ``diff``."""
    d = chol.shape[0]
    w = solve_triangular(chol, diff.T, lower=True).T
    logdet = float(np.sum(np.log(np.diag(chol))))
    return -0.5 * d * _LOG_2PI - logdet - 0.5 * np.einsum("ij,ij->i", w, w)


def _closed_order(law) -> Optional[int]:
    """Monomial order for the closed-form density, or None for quadrature.

    Closed evaluation is kept to truncated-moment orders 0..2: the
    truncated-normal family, Gamma with integer shape up to 3, and
    chi-type laws with integer degree up to 3.
    """
    if not isinstance(law, MixingLaw):
        return None
    tf = law.tilt_form()
    if tf is None or not tf.monomial:
        return None
    p = round(tf.power)
    if abs(tf.power - p) > 1e-12 or p < 0 or p > 2:
        return None
    return int(p)


def log_density_mmn(dist: MmnDistribution, x) -> Union[float, np.ndarray]:
    """Log density at ``x`` (one vector, or a matrix of row vectors).

    Dispatch: degenerate mixing gives a shifted Gaussian; monomial tilt
    forms of order at most two go through the truncated-moment closed
    form; everything else integrates the Gaussian tilt of the mixing
    density by adaptive quadrature on its support window.
    """
    if not isinstance(dist, MmnDistribution):
        raise DomainError("dist must be an MmnDistribution")
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 1
    rows = arr[None, :] if scalar else arr
    if rows.ndim != 2 or rows.shape[1] != dist.d:
        raise DomainError(f"x must have dimension {dist.d}")
    if not np.all(np.isfinite(rows)):
        raise DomainError("x must be finite")

    chol = dist.cholesky
    diff = rows - dist.theta

    if isinstance(dist.law, Degenerate):
        out = _log_gauss_rows(diff - dist.law.v0 * dist.a, chol)
        return float(out[0]) if scalar else out

    w_a = solve_triangular(chol, dist.a, lower=True)
    s2 = float(w_a @ w_a)
    base = _log_gauss_rows(diff, chol)
    if s2 == 0.0:
        # No shift direction: the mixture collapses to the Gaussian part.
        out = base
        return float(out[0]) if scalar else out

    b = solve_triangular(chol, diff.T, lower=True).T @ w_a

    order = _closed_order(dist.law)
    if order is not None:
        tf = dist.law.tilt_form()
        c1p = math.sqrt(tf.c1 + s2)
        delta = (b - tf.c2) / c1p
        moment = specfn.truncated_normal_moment(delta, order)
        out = (
            base
            + tf.log_coeff
            - (order + 1.0) * math.log(c1p)
            + 0.5 * delta * delta
            + 0.5 * _LOG_2PI
            + specfn.std_normal_log_cdf(delta)
            + np.log(moment)
        )
        return float(out[0]) if scalar else out

    out = base + _log_tilt_integral(dist.law, s2, b)
    return float(out[0]) if scalar else out


def _log_tilt_integral(law, s2: float, b: np.ndarray) -> np.ndarray:
    """log E_V[exp(b V - s2 V^2 / 2)] for each entry of ``b``, by quadrature."""
    lo_w, hi = law.window()
    # Integrate from the true support edge: when the mass hugs zero (a far
    # down-tail tilt) even the sliver below the numeric window matters.
    # Difference-type laws live on the whole line, so their lower limit
    # follows the tilt peak instead of clamping at zero.
    one_sided = isinstance(law, MixingLaw)
    if one_sided:
        lo = max(float(law.support()[0]), 0.0)
    s = math.sqrt(s2)
    out = np.empty(b.shape)
    for i, bi in enumerate(np.atleast_1d(b)):
        hi_i = max(hi, bi / s2 + 12.0 / s)
        if not one_sided:
            lo = min(lo_w, bi / s2 - 12.0 / s)
        probe = np.linspace(lo, hi_i, 1025)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            logs = np.asarray(law.log_density(probe)) - 0.5 * s2 * probe * probe + bi * probe
        finite = np.isfinite(logs)
        if not finite.any():
            warnings.warn(
                "tilted mixing integrand underflowed everywhere",
                DensityUnderflowWarning,
            )
            out[i] = -np.inf
            continue
        peak = float(np.max(logs[finite]))
        v_peak = float(probe[np.argmax(np.where(finite, logs, -np.inf))])

        def integrand(v, _peak=peak, _bi=bi):
            g = float(law.log_density(v)) - 0.5 * s2 * v * v + _bi * v - _peak
            return math.exp(g) if g > -745.0 else 0.0

        with warnings.catch_warnings():
            # Tabulated laws are piecewise linear in the log, which trips the
            # adaptive rule's roundoff heuristics well past the accuracy we
            # need; the result is still validated below.
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(
                integrand,
                lo,
                hi_i,
                points=[v_peak],
                limit=200,
                epsabs=1e-300,
                epsrel=1e-10,
            )
        if not (val > 0.0) or not math.isfinite(val):
            warnings.warn(
                "tilted mixing integral underflowed", DensityUnderflowWarning
            )
            out[i] = -np.inf
        else:
            out[i] = peak + math.log(val)
    return out


def skew_normal_log_density(theta, a, sigma, x) -> Union[float, np.ndarray]:
    """Log density of the skew-normal law at ``x``.

    ``log[2 phi_d(x - theta; sigma + a a') Phi((x - theta)' sigma^{-1} a
    / sqrt(1 + a' sigma^{-1} a))]``; equals the mixture density under a
    standard half-normal mixing value.
    """
    theta = _check_vector(theta, "theta")
    a = _check_vector(a, "a")
    d = theta.size
    if a.size != d:
        raise DomainError("theta and a must have equal length")
    sigma, chol = _check_spd(sigma, d)
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 1
    rows = arr[None, :] if scalar else arr
    if rows.ndim != 2 or rows.shape[1] != d:
        raise DomainError(f"x must have dimension {d}")
    if not np.all(np.isfinite(rows)):
        raise DomainError("x must be finite")

    _, chol_wide = _check_spd(sigma + np.outer(a, a), d)
    diff = rows - theta
    w_a = solve_triangular(chol, a, lower=True)
    s2 = float(w_a @ w_a)
    b = solve_triangular(chol, diff.T, lower=True).T @ w_a
    skew_arg = b / math.sqrt(1.0 + s2)
    out = (
        math.log(2.0)
        + _log_gauss_rows(diff, chol_wide)
        + specfn.std_normal_log_cdf(skew_arg)
    )
    return float(out[0]) if scalar else out


def canonical_frame(a, sigma) -> CanonicalFrame:
    """Deterministic orthogonal frame sending ``sigma^{-1/2} a`` to axis 1.

    Uses the Householder reflection through ``u - e1`` (identity when the
    whitened direction already is ``e1``, a first-row sign flip when it is
    ``-e1``).
    """
    a = _check_vector(a, "a")
    sigma, chol = _check_spd(sigma, a.size)
    w = solve_triangular(chol, a, lower=True)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise DomainError("a must be nonzero to define a shift direction")
    u = w / norm
    d = a.size
    e1 = np.zeros(d)
    e1[0] = 1.0
    if abs(u[0] - 1.0) < 1e-14 and np.all(np.abs(u[1:]) < 1e-14):
        h = np.eye(d)
    elif abs(u[0] + 1.0) < 1e-14 and np.all(np.abs(u[1:]) < 1e-14):
        h = np.eye(d)
        h[0, 0] = -1.0
    else:
        vvec = u - e1
        h = np.eye(d) - 2.0 * np.outer(vvec, vvec) / float(vvec @ vvec)
    return CanonicalFrame(h_matrix=h, a_norm=norm)


def to_canonical(dist: MmnDistribution, frame: CanonicalFrame) -> MmnDistribution:
    """Rewrite the distribution in the frame's coordinates.

    The transformed variable ``H sigma^{-1/2} X`` has identity Gaussian
    covariance and shift direction ``(a_norm, 0, ..., 0)``.
    """
    if not isinstance(dist, MmnDistribution):
        raise DomainError("dist must be an MmnDistribution")
    if not isinstance(frame, CanonicalFrame):
        raise DomainError("frame must be a CanonicalFrame")
    if frame.d != dist.d:
        raise DomainError("frame dimension does not match the distribution")
    chol = dist.cholesky
    mapped_a = frame.h_matrix @ solve_triangular(chol, dist.a, lower=True)
    target = np.zeros(dist.d)
    target[0] = frame.a_norm
    if float(np.max(np.abs(mapped_a - target))) > 1e-10 * (1.0 + frame.a_norm):
        raise DomainError("frame was not built from this distribution's (a, sigma)")
    theta = frame.h_matrix @ solve_triangular(chol, dist.theta, lower=True)
    return MmnDistribution(theta=theta, a=target, sigma=np.eye(dist.d), law=dist.law)


def whiten_problem(
    dist_x: MmnDistribution, dist_y: MmnDistribution
) -> tuple[tuple[MmnDistribution, MmnDistribution], float]:
    """Rescale a proportional-covariance pair to unit X covariance.

    Returns the transformed pair under ``x -> sigma_X^{-1/2} x`` together
    with the log-Jacobian ``log|sigma_X^{-1/2}|`` that converts densities
    on the whitened scale back to the original scale.
    """
    for dist in (dist_x, dist_y):
        if not isinstance(dist, MmnDistribution):
            raise DomainError("whiten_problem expects MmnDistribution values")
    if dist_x.d != dist_y.d:
        raise DomainError("the two distributions must share a dimension")
    c = float(np.trace(dist_y.sigma) / np.trace(dist_x.sigma))
    resid = float(np.max(np.abs(dist_y.sigma - c * dist_x.sigma)))
    if resid > 1e-8 * max(1.0, float(np.max(np.abs(dist_y.sigma)))):
        raise CapabilityError(
            "covariances must be proportional to whiten the pair jointly"
        )
    chol = dist_x.cholesky
    log_jacobian = -float(np.sum(np.log(np.diag(chol))))

    def _map(dist: MmnDistribution, cov: np.ndarray) -> MmnDistribution:
        return MmnDistribution(
            theta=solve_triangular(chol, dist.theta, lower=True),
            a=solve_triangular(chol, dist.a, lower=True),
            sigma=cov,
            law=dist.law,
        )

    d = dist_x.d
    unit_x = _map(dist_x, np.eye(d))
    unit_y = _map(dist_y, c * np.eye(d))
    return (unit_x, unit_y), log_jacobian


def aggregate_iid(dist: MmnDistribution, n: int) -> MmnDistribution:
    """Distribution of the mean of ``n`` i.i.d. copies.

    The Gaussian covariance shrinks to ``sigma/n`` and the mixing value
    becomes the mean of ``n`` draws: Gamma laws stay Gamma, a point mass
    stays put, and other laws fall back to a convolution grid.
    """
    if not isinstance(dist, MmnDistribution):
        raise DomainError("dist must be an MmnDistribution")
    n = int(n)
    if n < 1:
        raise DomainError("n must be a positive integer")
    if n == 1:
        return dist
    law = dist.law
    if isinstance(law, Degenerate):
        mean_law: MixingLaw = law
    elif isinstance(law, Gamma):
        mean_law = Gamma(alpha=n * law.alpha, beta=law.beta / n)
    else:
        combined = difference_law_mean_shifted([law] * n, [1.0 / n] * n)
        if not isinstance(combined, GridDifference):
            raise CapabilityError("mean law is not representable on a grid")
        mean_law = Tabulated(combined.grid, combined.density_values)
    return MmnDistribution(
        theta=dist.theta, a=dist.a, sigma=dist.sigma / n, law=mean_law
    )
