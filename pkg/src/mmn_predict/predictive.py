"""Predictive density estimators for the two-observation mean-mixture model.

The model: ``X = theta + V1 a + sigma_X Z_X`` and ``Y = theta + V2 a +
sigma_Y Z_Y`` with independent mixing draws ``V1 ~ law1``, ``V2 ~ law2``
and spherical Gaussian noise.  After observing ``X = x`` the task is to
estimate the density of ``Y``.  Estimators:

- ``mre``: the best location-equivariant rule (flat-prior Bayes), a mean
  mixture around ``x`` under the difference law of ``V2 - V1``.  Closed
  forms cover degenerate, i.i.d. exponential, and i.i.d. half-normal
  mixing; everything else integrates the difference law numerically.
- ``harmonic_bayes``: Bayes under a prior that is flat along ``a`` and
  harmonic-type in the orthogonal complement; improves on ``mre`` by
  shrinking the nuisance projection.
- ``plugin_js``: the axis block keeps the equivariant rule while the
  orthogonal Gaussian block is recentred at a James-Stein estimate.
- ``restricted_interval`` / ``restricted_cylinder``: Bayes under flat
  priors supported on a constrained nuisance projection; the density is
  the equivariant rule times a ratio of conditioning probabilities.
- ``normal_prior_bayes``: proper normal location prior, delegated to the
  posterior machinery.

Log densities are evaluated in log space throughout and vectorize over
rows of ``y``.  The row helpers also broadcast over rows of ``x`` so that
paired Monte Carlo risk evaluation can reuse them wholesale.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import special as sp

from . import specfn
from .errors import CapabilityError, DensityUnderflowWarning, DomainError
from .mixing import (
    Degenerate,
    DifferenceLaw,
    Gamma,
    MixingLaw,
    SqrtChiSq,
    TruncatedNormal,
    difference_law,
)
from .mmn import (
    CanonicalFrame,
    MmnDistribution,
    _check_vector,
    _frozen,
    canonical_frame,
    log_density_mmn,
)
from .posterior import (
    NormalPrior,
    collapse_two_direction,
    predictive_normal_prior,
)

__all__ = [
    "PredictionProblem",
    "PredictiveDensity",
    "mre",
    "harmonic_marginal",
    "bayes_ratio_log_density",
    "harmonic_bayes",
    "plugin_js",
    "restricted_interval",
    "restricted_cylinder",
    "normal_prior_bayes",
    "sample_predictive",
]

_LOG_2PI = math.log(2.0 * math.pi)

TAG_MRE = "mre"
TAG_HARMONIC = "harmonic_bayes"
TAG_PLUGIN_JS = "plugin_js"
TAG_INTERVAL = "restricted_interval"
TAG_CYLINDER = "restricted_cylinder"
TAG_NORMAL_PRIOR = "normal_prior_bayes"
_TAGS = (
    TAG_MRE,
    TAG_HARMONIC,
    TAG_PLUGIN_JS,
    TAG_INTERVAL,
    TAG_CYLINDER,
    TAG_NORMAL_PRIOR,
)


def _half_normal_scale(law: MixingLaw) -> Optional[float]:
    """``s`` when the law equals ``s * |N(0,1)|`` in distribution, else None."""
    if isinstance(law, TruncatedNormal) and law.mu == 0.0:
        return law.sigma
    if isinstance(law, SqrtChiSq) and law.k == 1.0:
        return 1.0
    return None


@dataclass(frozen=True, eq=False)
class PredictionProblem:
    """The fixed ingredients of a prediction task.

    ``a`` is the common shift direction (zero allowed, giving a pure
    Gaussian model), ``sigma2_x`` / ``sigma2_y`` the spherical noise
    variances, and ``law1`` / ``law2`` the mixing laws of the observed and
    predicted coordinates.  The combined noise variance ``sigma2_s`` and
    the difference mixing law ``law3`` (of ``V2 - V1``) are derived here
    once and shared by every estimator.
    """

    a: np.ndarray
    sigma2_x: float
    sigma2_y: float
    law1: MixingLaw
    law2: MixingLaw

    def __post_init__(self):
        a = _check_vector(self.a, "a")
        for name in ("sigma2_x", "sigma2_y"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise DomainError(f"{name} must be a positive finite number")
        if not isinstance(self.law1, MixingLaw) or not isinstance(self.law2, MixingLaw):
            raise DomainError("law1 and law2 must be one-sided mixing laws")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "sigma2_x", float(self.sigma2_x))
        object.__setattr__(self, "sigma2_y", float(self.sigma2_y))
        object.__setattr__(self, "_law3", difference_law(self.law1, self.law2))
        object.__setattr__(self, "_axis", None)
        self._classify()

    def _classify(self) -> None:
        """Choose the equivariant-rule evaluation path once per problem."""
        a = self.a
        s2s = self.sigma2_s
        d = a.size
        base: Optional[MmnDistribution] = None
        offset = np.zeros(d)
        scale = 0.0
        if float(a @ a) == 0.0:
            kind = "gaussian"
        elif isinstance(self.law1, Degenerate) and isinstance(self.law2, Degenerate):
            kind = "gaussian"
            offset = a * (self.law2.v0 - self.law1.v0)
        elif isinstance(self.law1, Degenerate):
            kind = "shifted"
            base = MmnDistribution(np.zeros(d), a, s2s * np.eye(d), self.law2)
            offset = a * self.law1.v0
        elif isinstance(self.law2, Degenerate):
            kind = "shifted"
            base = MmnDistribution(np.zeros(d), -a, s2s * np.eye(d), self.law1)
            offset = -a * self.law2.v0
        elif (
            isinstance(self.law1, Gamma)
            and isinstance(self.law2, Gamma)
            and self.law1.alpha == 1.0
            and self.law2.alpha == 1.0
            and self.law1.beta == self.law2.beta
        ):
            kind = "laplace"
            scale = self.law1.beta
        else:
            hs1 = _half_normal_scale(self.law1)
            hs2 = _half_normal_scale(self.law2)
            if hs1 is not None and hs1 == hs2:
                kind = "half_normal"
                scale = hs1
            else:
                kind = "generic"
                base = MmnDistribution(np.zeros(d), a, s2s * np.eye(d), self._law3)
        object.__setattr__(self, "_kind", kind)
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_offset", _frozen(offset))
        object.__setattr__(self, "_scale", scale)

    @property
    def d(self) -> int:
        return self.a.size

    @property
    def sigma2_s(self) -> float:
        """Total noise variance of ``Y - X``."""
        return self.sigma2_x + self.sigma2_y

    @property
    def law3(self) -> DifferenceLaw:
        """Law of ``V2 - V1``."""
        return self._law3

    def axis_problem(self) -> "PredictionProblem":
        """The univariate problem along the shift axis (direction ``|a|``)."""
        if self._axis is None:
            reduced = PredictionProblem(
                np.array([float(np.linalg.norm(self.a))]),
                self.sigma2_x,
                self.sigma2_y,
                self.law1,
                self.law2,
            )
            object.__setattr__(self, "_axis", reduced)
        return self._axis


def _gauss_rows(u: np.ndarray, s2: float) -> np.ndarray:
    return -0.5 * u.shape[1] * (_LOG_2PI + math.log(s2)) - np.sum(u * u, axis=1) / (
        2.0 * s2
    )


def _mre_log_density_u(problem: PredictionProblem, u: np.ndarray) -> np.ndarray:
    """Equivariant-rule log density as a function of ``u = y - x`` rows."""
    s2s = problem.sigma2_s
    kind = problem._kind
    if kind == "gaussian":
        return _gauss_rows(u - problem._offset, s2s)
    if kind == "shifted":
        return log_density_mmn(problem._base, u + problem._offset)
    if kind == "laplace":
        ae = problem._scale * problem.a
        cap = s2s / float(ae @ ae)
        root = math.sqrt(cap)
        m = u @ ae / s2s
        b_up = m - 1.0
        b_dn = -m - 1.0
        lse = np.logaddexp(
            0.5 * cap * b_up * b_up + sp.log_ndtr(b_up * root),
            0.5 * cap * b_dn * b_dn + sp.log_ndtr(b_dn * root),
        )
        return (
            _gauss_rows(u, s2s)
            - math.log(2.0)
            + 0.5 * (_LOG_2PI + math.log(cap))
            + lse
        )
    if kind == "half_normal":
        ae = problem._scale * problem.a
        f2sq = s2s + 2.0 * float(ae @ ae)
        cap = 2.0 * s2s / f2sq
        m = u @ ae / s2s
        c = -1.0 / math.sqrt(2.0)
        lse = np.logaddexp(
            specfn.log_probit_gaussian_integral(cap, m, c),
            specfn.log_probit_gaussian_integral(cap, -m, c),
        )
        return _gauss_rows(u, s2s) + math.log(2.0) - 0.5 * math.log(math.pi) + lse


    return log_density_mmn(problem._base, u)


def _log_harmonic_marginal(s, sigma2: float, d: int) -> np.ndarray:
    """Log of the harmonic-prior marginal as a function of ``s = |z|^2``.

    The marginal is ``sigma^(3-d) E[T^((3-d)/2)]`` for a noncentral
    chi-square ``T`` with ``d - 1`` degrees of freedom and noncentrality
    ``s / sigma2``.  Odd ``d`` collapses to an incomplete-gamma closed
    form; even ``d`` sums the Poisson mixture of central inverse moments
    until the neglected tail mass is below 1e-14.
    """
    s = np.asarray(s, dtype=np.float64)
    out = np.empty(s.shape)
    half_shift = 0.5 * (3.0 - d)
    lam_half = s / (2.0 * sigma2)
    zero = s <= 0.0
    out[zero] = half_shift * (math.log(sigma2) + math.log(2.0)) - sp.gammaln(
        (d - 1) / 2.0
    )
    active = ~zero
    if not active.any():
        return out
    if d % 2 == 1:
        n = (d - 3) / 2.0
        with np.errstate(divide="ignore"):
            out[active] = half_shift * np.log(s[active]) + np.log(
                sp.gammainc(n, lam_half[active])
            )
        return out
    lam = lam_half[active]
    kmax = int(np.ceil(np.max(lam) + 10.0 * math.sqrt(np.max(lam) + 1.0) + 45.0))
    ks = np.arange(kmax + 1, dtype=np.float64)
    log_terms = ks[None, :] * np.log(lam)[:, None] - sp.gammaln(
        (d - 1) / 2.0 + ks
    )[None, :]
    out[active] = (
        half_shift * math.log(2.0 * sigma2)
        - lam
        + sp.logsumexp(log_terms, axis=1)
    )
    return out


def harmonic_marginal(z, sigma2: float, d: int) -> float:
    """Marginal density of the nuisance projection under the harmonic prior.

    ``z`` is the ``(d-1)``-vector orthogonal projection and ``sigma2`` the
    variance of its Gaussian noise.  Defined for ``d >= 4`` (below that the
    defining moment diverges); the ``z = 0`` limit is finite and handled.
    """
    if not isinstance(d, (int, np.integer)) or d < 4:
        raise DomainError("the harmonic marginal requires integer d >= 4")
    if not (isinstance(sigma2, (int, float)) and math.isfinite(sigma2) and sigma2 > 0):
        raise DomainError("sigma2 must be a positive finite number")
    z = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    if not np.all(np.isfinite(z)):
        raise DomainError("z must be finite")
    if z.size != d - 1:
        raise DomainError(f"z must have length {d - 1}")
    return float(np.exp(_log_harmonic_marginal(np.array([float(z @ z)]), float(sigma2), int(d))[0]))


def _pooled(problem: PredictionProblem):
    """Reverse-weighted location ``w`` ingredients: weights and variance."""
    s2x, s2y, s2s = problem.sigma2_x, problem.sigma2_y, problem.sigma2_s
    return s2x / s2s, s2y / s2s, s2x * s2y / s2s


def _nuisance_norm2(t: np.ndarray, a_hat: np.ndarray) -> np.ndarray:
    """Rows of ``|t|^2 - (t . a_hat)^2``, clipped at zero.

    Overflowing rows propagate as inf/nan rather than warn; callers treat
    them as unusable (constructors reject, risk loops count contamination).
    """
    with np.errstate(over="ignore", invalid="ignore"):
        proj = t @ a_hat
        return np.maximum(np.sum(t * t, axis=-1) - proj * proj, 0.0)


def _harmonic_log_rows(
    problem: PredictionProblem, x_arr: np.ndarray, y: np.ndarray
) -> np.ndarray:
    wx, wy, s2w = _pooled(problem)
    a_hat = problem.a / np.linalg.norm(problem.a)
    u = y - x_arr
    w = wx * y + wy * x_arr
    s_w = _nuisance_norm2(w, a_hat)
    s_x = _nuisance_norm2(np.atleast_2d(x_arr), a_hat)
    d = problem.d
    num = _log_harmonic_marginal(s_w, s2w, d)
    den = _log_harmonic_marginal(s_x, problem.sigma2_x, d)
    return _mre_log_density_u(problem, u) + num - den


def _plugin_log_rows(
    problem: PredictionProblem,
    frame: CanonicalFrame,
    x_arr: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    d = problem.d
    s2s = problem.sigma2_s
    h1 = frame.first_row
    h2 = frame.complement_rows
    u1 = (y @ h1) - (x_arr @ h1)
    block1 = _mre_log_density_u(problem.axis_problem(), u1[:, None])
    z_x = np.atleast_2d(x_arr) @ h2.T
    norm2 = np.sum(z_x * z_x, axis=-1)
    # a projection at rounding level (|z| <= ~1e-13 |x|) is a genuine zero:
    # feeding it to the shrink factor would blow the centre up instead of
    # taking the documented zero-projection branch
    tiny = 1e-26 * np.sum(np.atleast_2d(x_arr) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(
            norm2 > tiny, 1.0 - (d - 3) * problem.sigma2_x / norm2, 0.0
        )
    center = shrink[..., None] * z_x
    resid = (y @ h2.T) - center
    block2 = -0.5 * (d - 1) * (_LOG_2PI + math.log(s2s)) - np.sum(
        resid * resid, axis=-1
    ) / (2.0 * s2s)
    return block1 + block2


def _interval_log_rows(
    problem: PredictionProblem,
    frame: CanonicalFrame,
    c_lo: float,
    c_hi: float,
    x_arr: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    wx, wy, s2w = _pooled(problem)
    h2 = frame.complement_rows[0]
    z_lo = c_lo / math.sqrt(2.0)
    z_hi = c_hi / math.sqrt(2.0)
    sd_w = math.sqrt(s2w)
    sd_x = math.sqrt(problem.sigma2_x)
    z_w = (wx * y + wy * x_arr) @ h2
    z_x = x_arr @ h2
    num = specfn.log_normal_interval((z_lo - z_w) / sd_w, (z_hi - z_w) / sd_w)
    den = specfn.log_normal_interval((z_lo - z_x) / sd_x, (z_hi - z_x) / sd_x)
    return _mre_log_density_u(problem, y - x_arr) + num - den


def _cylinder_log_rows(
    problem: PredictionProblem,
    m: float,
    x_arr: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    wx, wy, s2w = _pooled(problem)
    a_hat = problem.a / np.linalg.norm(problem.a)
    s2x = problem.sigma2_x
    nu = problem.d - 1
    s_w = _nuisance_norm2(wx * y + wy * x_arr, a_hat)
    s_x = _nuisance_norm2(np.atleast_2d(x_arr), a_hat)
    if math.isinf(m):
        num = np.zeros(s_w.shape)
        den = np.zeros(np.shape(s_x))
    else:
        with np.errstate(divide="ignore"):
            num = np.log(specfn.noncentral_chisq_cdf(nu, s_w / s2w, m * m / s2w))
            den = np.log(specfn.noncentral_chisq_cdf(nu, s_x / s2x, m * m / s2x))
    return _mre_log_density_u(problem, y - x_arr) + num - den


@dataclass(frozen=True, eq=False)
class PredictiveDensity:
    """A fitted predictive density: estimator tag plus captured observation.

    Build these through the factory functions (:func:`mre`,
    :func:`harmonic_bayes`, ...), which validate preconditions and
    precompute what the tag needs.  ``log_density`` accepts a single
    ``y`` vector or rows of vectors.
    """

    tag: str
    x: np.ndarray
    problem: PredictionProblem
    frame: Optional[CanonicalFrame] = None
    c_lo: Optional[float] = None
    c_hi: Optional[float] = None
    m: Optional[float] = None
    prior: Optional[NormalPrior] = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise DomainError(f"unknown estimator tag {self.tag!r}")
        if not isinstance(self.problem, PredictionProblem):
            raise DomainError("problem must be a PredictionProblem")
        x = _check_vector(self.x, "x")
        if x.size != self.problem.d:
            raise DomainError(f"x must have dimension {self.problem.d}")
        object.__setattr__(self, "x", _frozen(x))
        if not hasattr(self, "_collapsed"):
            object.__setattr__(self, "_collapsed", None)
            object.__setattr__(self, "_two_direction", None)

    @property
    def d(self) -> int:
        return self.problem.d

    def log_density(self, y) -> Union[float, np.ndarray]:
        y = np.asarray(y, dtype=np.float64)
        scalar = y.ndim == 1
        rows = np.atleast_2d(y)
        if rows.shape[-1] != self.d:
            raise DomainError(f"y must have dimension {self.d}")
        if not np.all(np.isfinite(rows)):
            raise DomainError("y must be finite")
        if self.tag == TAG_NORMAL_PRIOR:
            if self._collapsed is None:
                raise CapabilityError(
                    "normal-prior densities must be built by normal_prior_bayes()"
                )
            out = np.asarray(log_density_mmn(self._collapsed, rows))
        else:
            out = _predictive_log_rows(self, self.x, rows)
        return float(out[0]) if scalar else out


def _predictive_log_rows(
    pd: PredictiveDensity, x_arr: np.ndarray, y: np.ndarray
) -> np.ndarray:
    """Tag dispatch shared by point evaluation and paired-row evaluation.

    ``x_arr`` may be a single vector or rows aligned with ``y``, which is
    what lets Monte Carlo risk loops evaluate every replicate pair in one
    vectorized call.
    """
    tag = pd.tag
    if tag == TAG_MRE:
        return _mre_log_density_u(pd.problem, y - x_arr)
    if tag == TAG_HARMONIC:
        return _harmonic_log_rows(pd.problem, x_arr, y)
    if tag == TAG_PLUGIN_JS:
        return _plugin_log_rows(pd.problem, pd.frame, x_arr, y)
    if tag == TAG_INTERVAL:
        return _interval_log_rows(pd.problem, pd.frame, pd.c_lo, pd.c_hi, x_arr, y)
    if tag == TAG_CYLINDER:
        return _cylinder_log_rows(pd.problem, pd.m, x_arr, y)
    raise CapabilityError(f"estimator tag {tag!r} has no paired evaluation path")


def _check_x(problem: PredictionProblem, x) -> np.ndarray:
    x = _check_vector(x, "x")
    if x.size != problem.d:
        raise DomainError(f"x must have dimension {problem.d}")
    return x


def _require_direction(problem: PredictionProblem, what: str) -> CanonicalFrame:
    if float(problem.a @ problem.a) == 0.0:
        raise DomainError(f"{what} requires a nonzero shift direction")
    return canonical_frame(problem.a, np.eye(problem.d))


def mre(problem: PredictionProblem, x) -> PredictiveDensity:
    """Best equivariant predictive density given the observation ``x``."""
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    x = _check_x(problem, x)
    frame = None
    if float(problem.a @ problem.a) > 0.0:
        frame = canonical_frame(problem.a, np.eye(problem.d))
    return PredictiveDensity(tag=TAG_MRE, x=x, problem=problem, frame=frame)


def bayes_ratio_log_density(
    problem: PredictionProblem, x, y, marginal: Callable[[np.ndarray, float], float]
) -> float:
    """Log density of a Bayes rule given its nuisance-marginal function.

    For priors that are flat along ``a``, the Bayes predictive density is
    the equivariant rule times a ratio of nuisance marginals: the marginal
    at the reverse-variance-weighted location ``w = (sigma2_x y +
    sigma2_y x) / sigma2_s`` (noise variance ``sigma2_x sigma2_y /
    sigma2_s``) over the marginal at ``x``.  ``marginal(z, sigma2)`` must
    return the prior-predictive density of the projection ``z``.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    frame = _require_direction(problem, "the marginal-ratio form")
    x = _check_x(problem, x)
    y = _check_vector(y, "y")
    if y.size != problem.d:
        raise DomainError(f"y must have dimension {problem.d}")
    wx, wy, s2w = _pooled(problem)
    h2 = frame.complement_rows
    m_num = float(marginal(h2 @ (wx * y + wy * x), s2w))
    m_den = float(marginal(h2 @ x, problem.sigma2_x))
    base = float(_mre_log_density_u(problem, (y - x)[None, :])[0])
    for name, val in (("numerator", m_num), ("denominator", m_den)):
        if math.isnan(val) or val < 0.0:
            raise DomainError(f"marginal {name} must be a nonnegative number")
    if m_num == 0.0 or math.isinf(m_den):
        warnings.warn(
            "marginal ratio underflowed; log density is -inf",
            DensityUnderflowWarning,
            stacklevel=2,
        )
        return -math.inf
    if math.isinf(m_num) or m_den == 0.0:
        warnings.warn(
            "marginal ratio overflowed; log density is +inf",
            RuntimeWarning,
            stacklevel=2,
        )
        return math.inf
    return base + math.log(m_num) - math.log(m_den)


def harmonic_bayes(problem: PredictionProblem, x) -> PredictiveDensity:
    """Bayes rule under the harmonic-type prior on the nuisance projection.

    Flat along ``a``, density ``|proj|^(3-d)`` orthogonal to it.  Needs
    ``d >= 4`` for the marginal to exist.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    if problem.d < 4:
        raise DomainError("the harmonic-prior rule requires d >= 4")
    frame = _require_direction(problem, "the harmonic-prior rule")
    x = _check_x(problem, x)
    return PredictiveDensity(tag=TAG_HARMONIC, x=x, problem=problem, frame=frame)


def plugin_js(problem: PredictionProblem, x) -> PredictiveDensity:
    """Plug-in rule: equivariant along ``a``, James-Stein recentred across.

    The orthogonal block is the Gaussian density centred at
    ``(1 - (d-3) sigma2_x / |z|^2) z`` with ``z`` the projection of ``x``;
    at ``z = 0`` (a measure-zero event) the centre is taken to be the
    origin.  Needs ``d >= 4``.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    if problem.d < 4:
        raise DomainError("the James-Stein plug-in rule requires d >= 4")
    frame = _require_direction(problem, "the James-Stein plug-in rule")
    x = _check_x(problem, x)
    return PredictiveDensity(tag=TAG_PLUGIN_JS, x=x, problem=problem, frame=frame)


def restricted_interval(
    problem: PredictionProblem, c_lo: float, c_hi: float, x
) -> PredictiveDensity:
    """Bayes rule when the coordinate difference is known to be bounded.

    For ``d = 2`` with direction proportional to ``(1, 1)``, the nuisance
    projection is ``(theta_1 - theta_2) / sqrt(2)``; the prior is flat on
    ``c_lo <= theta_1 - theta_2 <= c_hi`` (and along ``a``), so the
    density is the equivariant rule times a ratio of normal interval
    probabilities.  Infinite endpoints recover the unrestricted rule.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    if problem.d != 2:
        raise DomainError("the interval restriction is defined for d = 2")
    a = problem.a
    if not (a[0] == a[1] and a[0] > 0.0):
        raise DomainError(
            "the interval restriction requires a direction proportional to (1, 1)"
        )
    for name, val in (("c_lo", c_lo), ("c_hi", c_hi)):
        if not isinstance(val, (int, float)) or math.isnan(val):
            raise DomainError(f"{name} must be a number")
    if not c_lo < c_hi:
        raise DomainError("c_lo must be strictly below c_hi")
    frame = canonical_frame(a, np.eye(2))
    x = _check_x(problem, x)
    sd_x = math.sqrt(problem.sigma2_x)
    z_x = float(x @ frame.complement_rows[0])
    den = specfn.log_normal_interval(
        (c_lo / math.sqrt(2.0) - z_x) / sd_x, (c_hi / math.sqrt(2.0) - z_x) / sd_x
    )
    if not math.isfinite(den):
        raise DomainError(
            "the conditioning probability at x underflowed; the observation "
            "is incompatible with the stated restriction"
        )
    return PredictiveDensity(
        tag=TAG_INTERVAL,
        x=x,
        problem=problem,
        frame=frame,
        c_lo=float(c_lo),
        c_hi=float(c_hi),
    )


def restricted_cylinder(problem: PredictionProblem, m: float, x) -> PredictiveDensity:
    """Bayes rule when the nuisance projection lies inside a ball.

    The prior is flat along ``a`` and on ``|proj| <= m`` across it; the
    density is the equivariant rule times a ratio of noncentral
    chi-square probabilities.  ``m = inf`` recovers the unrestricted rule.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    if problem.d < 2:
        raise DomainError("the cylinder restriction requires d >= 2")
    frame = _require_direction(problem, "the cylinder restriction")
    if not isinstance(m, (int, float)) or math.isnan(m) or m <= 0.0:
        raise DomainError("m must be a positive radius")
    x = _check_x(problem, x)
    if not math.isinf(m):
        a_hat = problem.a / np.linalg.norm(problem.a)
        s_x = float(_nuisance_norm2(x[None, :], a_hat)[0])
        if not math.isfinite(s_x):
            raise DomainError(
                "the conditioning probability at x underflowed; the observation "
                "is incompatible with the stated restriction"
            )
        den = float(
            specfn.noncentral_chisq_cdf(
                problem.d - 1, s_x / problem.sigma2_x, m * m / problem.sigma2_x
            )
        )
        if not den > 0.0:
            raise DomainError(
                "the conditioning probability at x underflowed; the observation "
                "is incompatible with the stated restriction"
            )
    return PredictiveDensity(
        tag=TAG_CYLINDER, x=x, problem=problem, frame=frame, m=float(m)
    )


def normal_prior_bayes(
    problem: PredictionProblem, prior: NormalPrior, x
) -> PredictiveDensity:
    """Bayes predictive density under a proper (or flat) normal prior.

    Delegates to the posterior machinery: the predictive law is a
    two-direction mean mixture which collapses (the directions are
    collinear here) to a single mean mixture whose density is evaluated
    directly.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    if not isinstance(prior, NormalPrior):
        raise DomainError("prior must be a NormalPrior")
    x = _check_x(problem, x)
    d = problem.d
    eye = np.eye(d)
    dist_x = MmnDistribution(np.zeros(d), problem.a, problem.sigma2_x * eye, problem.law1)
    dist_y = MmnDistribution(np.zeros(d), problem.a, problem.sigma2_y * eye, problem.law2)
    two_dir = predictive_normal_prior(dist_x, dist_y, prior, x)
    collapsed = collapse_two_direction(two_dir)
    frame = None
    if float(problem.a @ problem.a) > 0.0:
        frame = canonical_frame(problem.a, eye)
    out = PredictiveDensity(
        tag=TAG_NORMAL_PRIOR, x=x, problem=problem, frame=frame, prior=prior
    )
    object.__setattr__(out, "_collapsed", collapsed)
    object.__setattr__(out, "_two_direction", two_dir)
    return out


def sample_predictive(
    pd: PredictiveDensity, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw rows from a predictive density.

    Only the mixture-form tags can be sampled: the equivariant rule draws
    ``V3`` from the difference law then adds Gaussian noise, and the
    normal-prior rule draws the two mixture components of its
    two-direction representation (order: tilted ``W1``, then ``W2``, then
    the Gaussian block).  Ratio-form tags have no sampler.
    """
    if not isinstance(pd, PredictiveDensity):
        raise DomainError("pd must be a PredictiveDensity")
    if not isinstance(rng, np.random.Generator):
        raise DomainError("rng must be a numpy Generator")
    if pd.tag == TAG_MRE:
        v3 = pd.problem.law3.sample(count, rng)
        noise = rng.standard_normal((count, pd.d))
        return (
            pd.x
            + np.outer(v3, pd.problem.a)
            + math.sqrt(pd.problem.sigma2_s) * noise
        )
    if pd.tag == TAG_NORMAL_PRIOR:
        two_dir = pd._two_direction
        if two_dir is None:
            raise CapabilityError(
                "normal-prior densities must be built by normal_prior_bayes()"
            )
        w1 = two_dir.joint_law[0].sample(count, rng)
        w2 = two_dir.joint_law[1].sample(count, rng)
        noise = rng.standard_normal((count, pd.d))
        return (
            two_dir.theta
            + np.outer(w1, two_dir.a1)
            + np.outer(w2, two_dir.a2)
            + math.sqrt(float(two_dir.sigma[0, 0])) * noise
        )
    raise CapabilityError(f"estimator tag {pd.tag!r} is density-only")
