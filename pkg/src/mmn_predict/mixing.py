"""Mixing laws for mean-mixture-of-normals models.

A mixing law is the distribution of the scalar latent factor ``V`` in
``X = theta + Sigma^{1/2} Z + a V``.  This module provides the supported
law families, their densities/samplers/CDFs, the law of a difference
``V2 - V1`` (which drives the equivariant predictive density), exponential
tilting (which drives posterior calculations), and laws of general linear
combinations ``sum_i b_i V_i``.

Most laws factor their density on ``(0, inf)`` as

    density(v) = h(v) * exp(-c2 * v - c1 * v^2 / 2)

with ``h`` a monomial for the core families.  That factorization, exposed
through :meth:`MixingLaw.tilt_form`, is what closed-form downstream
formulas dispatch on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy import signal
from scipy import special as sp
from scipy import stats

from . import specfn
from .errors import CapabilityError, DomainError, NonNormalizableError

__all__ = [
    "MixingLaw",
    "Degenerate",
    "Gamma",
    "SqrtChiSq",
    "TruncatedNormal",
    "KummerII",
    "Tabulated",
    "TiltForm",
    "DifferenceLaw",
    "LaplaceDifference",
    "HalfNormalDifference",
    "ShiftedNegated",
    "GridDifference",
    "sample_mixing",
    "mixing_density",
    "difference_law",
    "posterior_mixing",
    "difference_law_mean_shifted",
]

_LOG_2PI = float(np.log(2.0 * np.pi))
_TRIM_LOG = 46.0  # grid windows keep points with log-density above max - this

# 16-point Gauss-Legendre rule on [0, 1], used for per-segment moments of
# grid-represented densities.
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)
_GL16_X = 0.5 * (_GL16_X + 1.0)
_GL16_W = 0.5 * _GL16_W


@dataclass(frozen=True)
class TiltForm:
    """Exponential-polynomial factorization of a mixing density.

    ``density(v) = h(v) * exp(-c2*v - c1*v^2/2)`` on ``(0, inf)``.  When
    ``monomial`` is true, ``h(v) = exp(log_coeff) * v**power`` exactly and
    closed-form mixture densities apply; otherwise only ``(c1, c2)`` are
    meaningful and ``h`` stays implicit.
    """

    c1: float
    c2: float
    monomial: bool
    power: float = 0.0
    log_coeff: float = 0.0


class _LogLinearGrid:
    """Density on a finite grid, log-linearly interpolated between knots.

    Shared backend for tabulated mixing laws and numeric difference laws.
    The interpolant is treated as the exact density: normalization, CDF,
    inverse-CDF sampling, and moments are all closed-form per segment (a
    segment of log-linear density is an exponential arc).
    """

    def __init__(self, grid: np.ndarray, log_values: np.ndarray):
        grid = np.asarray(grid, dtype=np.float64)
        log_values = np.asarray(log_values, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2:
            raise DomainError("grid must be one-dimensional with at least 2 points")
        if not np.all(np.isfinite(grid)):
            raise DomainError("grid must be finite")
        if np.any(np.diff(grid) <= 0.0):
            raise DomainError("grid must be strictly increasing")
        if log_values.shape != grid.shape:
            raise DomainError("log_values must match the grid shape")
        if np.any(np.isnan(log_values)) or np.any(log_values == np.inf):
            raise DomainError("log density values must be finite or -inf")
        self.grid = grid
        masses = self._segment_masses(grid, log_values)
        total = float(masses.sum())
        if not (total > 0.0) or not np.isfinite(total):
            raise DomainError("grid density has no finite positive mass")
        self.log_values = log_values - math.log(total)
        self._masses = masses / total
        self._cum = np.concatenate([[0.0], np.cumsum(self._masses)])
        # Guard the final entry against cumulative roundoff.
        self._cum[-1] = 1.0

    @staticmethod
    def _segment_masses(grid: np.ndarray, logv: np.ndarray) -> np.ndarray:
        h = np.diff(grid)
        l0 = logv[:-1]
        l1 = logv[1:]
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            d = l1 - l0
            safe_d = np.where(np.abs(d) > 1e-12, d, 1.0)
            ratio = np.where(np.abs(d) > 1e-12, np.expm1(safe_d) / safe_d, 1.0 + 0.5 * d)
            m = h * np.exp(l0) * ratio
        m[~np.isfinite(l0) | ~np.isfinite(l1)] = 0.0
        return m

    def log_density(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        out = np.full(v.shape, -np.inf)
        inside = (v >= self.grid[0]) & (v <= self.grid[-1])
        if inside.any():
            vi = v[inside]
            idx = np.clip(np.searchsorted(self.grid, vi, side="right") - 1, 0, self.grid.size - 2)
            g0 = self.grid[idx]
            h = self.grid[idx + 1] - g0
            t = (vi - g0) / h
            l0 = self.log_values[idx]
            l1 = self.log_values[idx + 1]
            with np.errstate(invalid="ignore"):
                val = l0 + t * (l1 - l0)
            # 0 * inf from zero-density knots resolves to the knot value.
            val = np.where(np.isnan(val), np.where(t > 0.0, l1, l0), val)
            out[inside] = val
        return out

    def cdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        out = np.empty(v.shape)
        out[v <= self.grid[0]] = 0.0
        out[v >= self.grid[-1]] = 1.0
        inside = (v > self.grid[0]) & (v < self.grid[-1])
        if inside.any():
            vi = v[inside]
            idx = np.clip(np.searchsorted(self.grid, vi, side="right") - 1, 0, self.grid.size - 2)
            g0 = self.grid[idx]
            h = self.grid[idx + 1] - g0
            t = (vi - g0) / h
            l0 = self.log_values[idx]
            d = self.log_values[idx + 1] - l0
            safe_d = np.where(np.abs(d) > 1e-12, d, 1.0)
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                part = np.where(
                    np.abs(d) > 1e-12,
                    np.expm1(safe_d * t) / safe_d,
                    t * (1.0 + 0.5 * d * t),
                )
                part = h * np.exp(l0) * part
            part[~np.isfinite(l0)] = 0.0
            out[inside] = self._cum[idx] + part
        return np.clip(out, 0.0, 1.0)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(count)
        idx = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self._masses.size - 1)
        rem = u - self._cum[idx]
        g0 = self.grid[idx]
        h = self.grid[idx + 1] - g0
        l0 = self.log_values[idx]
        d = self.log_values[idx + 1] - l0
        safe_d = np.where(np.abs(d) > 1e-12, d, 1.0)
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            base = np.exp(l0) * h
            t = np.where(
                np.abs(d) > 1e-12,
                np.log1p(rem * safe_d / base) / safe_d,
                rem / base,
            )
        t = np.clip(np.nan_to_num(t, nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0)
        return g0 + t * h

    def moment(self, power: int) -> float:
        g0 = self.grid[:-1]
        h = np.diff(self.grid)
        l0 = self.log_values[:-1]
        d = self.log_values[1:] - l0
        v = g0[:, None] + h[:, None] * _GL16_X[None, :]
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            f = np.exp(l0[:, None] + d[:, None] * _GL16_X[None, :])
        f = np.where(np.isfinite(f), f, 0.0)
        return float(np.sum(h[:, None] * _GL16_W[None, :] * (v ** power) * f))


class MixingLaw:
    """Base class for the latent-factor distributions.

    Concrete laws are immutable dataclasses.  All continuous laws supply
    ``log_density``/``density``/``cdf``; every law supplies ``sample``,
    ``mean``, ``support`` and a finite numeric ``window``.
    """

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def window(self) -> tuple[float, float]:
        """Finite interval outside which the density is negligible."""
        raise NotImplementedError

    def log_density(self, v):
        raise NotImplementedError

    def density(self, v):
        out = np.exp(self.log_density(np.asarray(v, dtype=np.float64)))
        return float(out) if np.ndim(v) == 0 else out

    def cdf(self, v):
        raise NotImplementedError

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def tilt_form(self) -> Optional[TiltForm]:
        """Exponential-polynomial factorization, or None if unavailable."""
        return None

    def is_standard_half_normal(self) -> bool:
        return False


def _check_count(count) -> int:
    if not isinstance(count, (int, np.integer)) or isinstance(count, bool) or count <= 0:
        raise DomainError("count must be a positive integer")
    return int(count)


@dataclass(frozen=True)
class Degenerate(MixingLaw):
    """Point mass at ``v0``; the Gaussian and skew-free limiting cases."""

    v0: float

    def __post_init__(self):
        if not np.isfinite(self.v0):
            raise DomainError("v0 must be finite")

    def support(self):
        return (self.v0, self.v0)

    def window(self):
        return (self.v0, self.v0)

    def log_density(self, v):
        raise CapabilityError("a point mass has no density; branch on the tag")

    def density(self, v):
        raise CapabilityError("a point mass has no density; branch on the tag")

    def cdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = np.where(v >= self.v0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        return np.full(_check_count(count), self.v0)

    def mean(self):
        return float(self.v0)


@dataclass(frozen=True)
class Gamma(MixingLaw):
    """Gamma law with shape ``alpha`` and scale ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError("alpha must be positive")
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise DomainError("beta must be positive")

    def support(self):
        return (0.0, np.inf)

    def window(self):
        dist = stats.gamma(a=self.alpha, scale=self.beta)
        return (float(dist.ppf(1e-12)), float(dist.isf(1e-13)))

    def log_density(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = np.full(v.shape, -np.inf)
        pos = v > 0.0
        with np.errstate(divide="ignore"):
            out[pos] = (
                (self.alpha - 1.0) * np.log(v[pos])
                - v[pos] / self.beta
                - sp.gammaln(self.alpha)
                - self.alpha * math.log(self.beta)
            )
        if self.alpha == 1.0:
            out[v == 0.0] = -math.log(self.beta)
        elif self.alpha < 1.0:
            out[v == 0.0] = np.inf
        return float(out) if out.ndim == 0 else out

    def cdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = sp.gammainc(self.alpha, np.maximum(v, 0.0) / self.beta)
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        return rng.gamma(self.alpha, self.beta, size=_check_count(count))

    def mean(self):
        return self.alpha * self.beta

    def tilt_form(self):
        return TiltForm(
            c1=0.0,
            c2=1.0 / self.beta,
            monomial=True,
            power=self.alpha - 1.0,
            log_coeff=-float(sp.gammaln(self.alpha)) - self.alpha * math.log(self.beta),
        )


@dataclass(frozen=True)
class SqrtChiSq(MixingLaw):
    """Law of the square root of a chi-square variable with ``k`` degrees."""

    k: float

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0.0):
            raise DomainError("k must be positive")

    def support(self):
        return (0.0, np.inf)

    def window(self):
        dist = stats.chi(df=self.k)
        return (float(dist.ppf(1e-12)), float(dist.isf(1e-13)))

    def log_density(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = np.full(v.shape, -np.inf)
        pos = v > 0.0
        out[pos] = (
            (1.0 - 0.5 * self.k) * math.log(2.0)
            - sp.gammaln(0.5 * self.k)
            + (self.k - 1.0) * np.log(v[pos])
            - 0.5 * v[pos] ** 2
        )
        if self.k == 1.0:
            out[v == 0.0] = 0.5 * math.log(2.0 / math.pi)
        elif self.k < 1.0:
            out[v == 0.0] = np.inf
        return float(out) if out.ndim == 0 else out

    def cdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = sp.chdtr(self.k, np.maximum(v, 0.0) ** 2)
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        return np.sqrt(rng.chisquare(self.k, size=_check_count(count)))

    def mean(self):
        return math.sqrt(2.0) * math.exp(
            float(sp.gammaln(0.5 * (self.k + 1.0)) - sp.gammaln(0.5 * self.k))
        )

    def tilt_form(self):
        return TiltForm(
            c1=1.0,
            c2=0.0,
            monomial=True,
            power=self.k - 1.0,
            log_coeff=(1.0 - 0.5 * self.k) * math.log(2.0) - float(sp.gammaln(0.5 * self.k)),
        )

    def is_standard_half_normal(self):
        return self.k == 1.0


@dataclass(frozen=True)
class TruncatedNormal(MixingLaw):
    """Normal(mu, sigma^2) conditioned on ``(0, inf)``.

    The no-argument form is the standard lower-truncated normal (the
    half-normal); the parametric form arises as the exact exponential tilt
    of any constant-``h`` law.
    """

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise DomainError("mu must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError("sigma must be positive")

    def support(self):
        return (0.0, np.inf)

    def window(self):
        lo = max(0.0, self.mu - 9.0 * self.sigma)
        hi = max(self.mu, 0.0) + 9.0 * self.sigma
        return (lo, hi)

    def _log_norm(self) -> float:
        # log P(N(mu, sigma^2) > 0)
        return float(sp.log_ndtr(self.mu / self.sigma))

    def log_density(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = np.full(v.shape, -np.inf)
        pos = v >= 0.0
        z = (v[pos] - self.mu) / self.sigma
        out[pos] = (
            -0.5 * z * z - 0.5 * _LOG_2PI - math.log(self.sigma) - self._log_norm()
        )
        out[v < 0.0] = -np.inf
        return float(out) if out.ndim == 0 else out

    def cdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        alpha = -self.mu / self.sigma
        z = (v - self.mu) / self.sigma
        out = np.exp(specfn.log_normal_interval(alpha, np.maximum(z, alpha)) - self._log_norm())
        out = np.where(v <= 0.0, 0.0, np.clip(out, 0.0, 1.0))
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        u = rng.random(_check_count(count))
        with np.errstate(divide="ignore"):
            z = -sp.ndtri_exp(np.log(u) + self._log_norm())
        return self.mu + self.sigma * z

    def mean(self):
        ratio = self.mu / self.sigma
        return self.mu + self.sigma * float(specfn.reverse_mills(ratio))

    def tilt_form(self):
        s2 = self.sigma * self.sigma
        return TiltForm(
            c1=1.0 / s2,
            c2=-self.mu / s2,
            monomial=True,
            power=0.0,
            log_coeff=-0.5 * self.mu * self.mu / s2
            - math.log(self.sigma)
            - self._log_norm()
            - 0.5 * _LOG_2PI,
        )

    def is_standard_half_normal(self):
        return self.mu == 0.0 and self.sigma == 1.0


@dataclass(frozen=True)
class KummerII(MixingLaw):
    """Law with density proportional to ``v^(a-1) (v+sigma)^(-a-b) e^(-c v/sigma)``.

    The normalizer is evaluated by adaptive quadrature of its integral
    definition.  ``c = 0`` requires ``b > 0`` for integrability.
    """

    a: float
    b: float
    c: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0.0):
            raise DomainError("a must be positive")
        if not np.isfinite(self.b):
            raise DomainError("b must be finite")
        if not (np.isfinite(self.c) and self.c >= 0.0):
            raise DomainError("c must be nonnegative")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError("sigma must be positive")
        if self.c == 0.0 and self.b <= 0.0:
            raise DomainError("c = 0 requires b > 0 for an integrable density")

    @cached_property
    def _log_norm(self) -> float:
        # log integral of t^(a-1) (1+t)^(-a-b) e^(-c t); the scale sigma
        # contributes sigma^(-b) handled in log_density.
        a, b, c = self.a, self.b, self.c

        def f(t):
            return t ** (a - 1.0) * (1.0 + t) ** (-a - b) * math.exp(-c * t)

        head, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
        if c > 0.0:
            tail, _ = integrate.quad(f, 1.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        else:
            # Substitute w = 1/t to tame the algebraic tail.
            def g(w):
                return w ** (b - 1.0) * (1.0 + w) ** (-a - b)

            tail, _ = integrate.quad(g, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
        return math.log(head + tail)

    def support(self):
        return (0.0, np.inf)

    def log_density(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = np.full(v.shape, -np.inf)
        pos = v > 0.0
        with np.errstate(divide="ignore"):
            out[pos] = (
                (self.a - 1.0) * np.log(v[pos])
                - (self.a + self.b) * np.log(v[pos] + self.sigma)
                - self.c * v[pos] / self.sigma
                + self.b * math.log(self.sigma)
                - self._log_norm
            )
        if self.a < 1.0:
            out[v == 0.0] = np.inf
        elif self.a == 1.0:
            out[v == 0.0] = -(1.0 + self.b) * math.log(self.sigma) + self.b * math.log(
                self.sigma
            ) - self._log_norm
        return float(out) if out.ndim == 0 else out

    @cached_property
    def _grid(self) -> _LogLinearGrid:
        # Locate the numeric window on a coarse probe, then lay geometric
        # grids below and above sigma.  The log-density is close to linear
        # in log(v) both near zero (the v^(a-1) factor) and in an algebraic
        # tail (c = 0), so geometric knots keep the interpolation tight even
        # when the window spans many decades.
        lo = self.sigma * (1e-9) ** (1.0 / self.a)
        probe = self.sigma * np.logspace(-9.0, 16.0, 600)
        logs = self.log_density(probe)
        top = np.max(logs)
        hi_idx = np.nonzero(logs > top - 85.0)[0][-1]
        hi = probe[min(hi_idx + 1, probe.size - 1)]
        geo_lo = np.geomspace(min(lo, self.sigma * 1e-4), self.sigma, 2048)
        geo_hi = np.geomspace(self.sigma, hi, 8192 + 1)[1:]
        grid = np.concatenate([geo_lo, geo_hi])
        return _LogLinearGrid(grid, self.log_density(grid))

    def cdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = self._grid.cdf(v)
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        return self._grid.sample(_check_count(count), rng)

    def mean(self):
        if self.c == 0.0 and self.b <= 1.0:
            return np.inf
        a, b, c = self.a, self.b, self.c

        def f(t):
            return t ** a * (1.0 + t) ** (-a - b) * math.exp(-c * t)

        head, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
        tail, _ = integrate.quad(f, 1.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        return self.sigma * (head + tail) * math.exp(-self._log_norm)

    def window(self):
        return (float(self._grid.grid[0]), float(self._grid.grid[-1]))

    def tilt_form(self):
        return TiltForm(c1=0.0, c2=self.c / self.sigma, monomial=False)


@dataclass(frozen=True)
class Tabulated(MixingLaw):
    """Density given by values on a finite grid in ``[0, inf)``.

    Log-density is interpolated linearly between knots and clamped to zero
    outside the grid; the law is renormalized at construction, so the
    supplied values only need to be proportional to a density.
    """

    grid: tuple
    density_values: tuple

    def __init__(self, grid, density_values):
        grid_arr = np.asarray(grid, dtype=np.float64)
        vals = np.asarray(density_values, dtype=np.float64)
        if grid_arr.ndim != 1 or grid_arr.size < 2:
            raise DomainError("grid must be one-dimensional with at least 2 points")
        if grid_arr[0] < 0.0:
            raise DomainError("mixing grids must live in [0, inf)")
        if vals.shape != grid_arr.shape:
            raise DomainError("density_values must match the grid shape")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0):
            raise DomainError("density_values must be finite and nonnegative")
        with np.errstate(divide="ignore"):
            backend = _LogLinearGrid(grid_arr, np.log(vals))
        object.__setattr__(self, "grid", tuple(float(g) for g in grid_arr))
        object.__setattr__(
            self, "density_values", tuple(float(x) for x in np.exp(backend.log_values))
        )
        object.__setattr__(self, "_backend", backend)

    def support(self):
        return (self.grid[0], self.grid[-1])

    def window(self):
        return (self.grid[0], self.grid[-1])

    def log_density(self, v):
        out = self._backend.log_density(np.asarray(v, dtype=np.float64))
        return float(out) if out.ndim == 0 else out

    def cdf(self, v):
        out = self._backend.cdf(np.asarray(v, dtype=np.float64))
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        return self._backend.sample(_check_count(count), rng)

    def mean(self):
        return self._backend.moment(1)


# ---------------------------------------------------------------------------
# Difference laws: distributions of V2 - V1 and of linear combinations.
# ---------------------------------------------------------------------------


class DifferenceLaw:
    """Law of a scalar combination of independent mixing draws."""

    def log_density(self, t):
        raise NotImplementedError

    def density(self, t):
        out = np.exp(self.log_density(np.asarray(t, dtype=np.float64)))
        return float(out) if np.ndim(t) == 0 else out

    def cdf(self, t):
        raise NotImplementedError

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def window(self) -> tuple[float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class LaplaceDifference(DifferenceLaw):
    """Difference of two i.i.d. exponentials: Laplace with the same scale."""

    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise DomainError("scale must be positive")

    def log_density(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = -np.abs(t) / self.scale - math.log(2.0 * self.scale)
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.where(
            t < 0.0, 0.5 * np.exp(t / self.scale), 1.0 - 0.5 * np.exp(-t / self.scale)
        )
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        n = _check_count(count)
        return rng.exponential(self.scale, size=n) - rng.exponential(self.scale, size=n)

    def mean(self):
        return 0.0

    def window(self):
        w = self.scale * 34.0
        return (-w, w)


@dataclass(frozen=True)
class HalfNormalDifference(DifferenceLaw):
    """Difference of two i.i.d. standard half-normals.

    Density ``2*sqrt(2)*phi(t/sqrt(2))*Phi(-|t|/sqrt(2))`` with closed CDF
    ``2*Phi(t/sqrt(2))^2`` on ``t <= 0`` (and its reflection above zero).
    """

    def log_density(self, t):
        t = np.asarray(t, dtype=np.float64)
        z = t / math.sqrt(2.0)
        out = (
            1.5 * math.log(2.0)
            - 0.5 * z * z
            - 0.5 * _LOG_2PI
            + sp.log_ndtr(-np.abs(z))
        )
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        z = t / math.sqrt(2.0)
        neg = 2.0 * sp.ndtr(z) ** 2
        pos = 1.0 - 2.0 * sp.ndtr(-z) ** 2
        out = np.where(t <= 0.0, neg, pos)
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        n = _check_count(count)
        return np.abs(rng.standard_normal(n)) - np.abs(rng.standard_normal(n))

    def mean(self):
        return 0.0

    def window(self):
        return (-13.0, 13.0)


@dataclass(frozen=True)
class ShiftedNegated(DifferenceLaw):
    """``W = +-V + shift`` for a single mixing draw ``V``."""

    base: MixingLaw
    shift: float = 0.0
    negate: bool = False

    def __post_init__(self):
        if not np.isfinite(self.shift):
            raise DomainError("shift must be finite")

    def _sign(self) -> float:
        return -1.0 if self.negate else 1.0

    def log_density(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = self.base.log_density(self._sign() * (t - self.shift))
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.negate:
            out = 1.0 - np.asarray(self.base.cdf(self.shift - t))
            if isinstance(self.base, Degenerate):
                out = np.where(self.shift - t <= self.base.v0, 1.0, 0.0)
        else:
            out = np.asarray(self.base.cdf(t - self.shift))
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        return self._sign() * self.base.sample(count, rng) + self.shift

    def mean(self):
        return self._sign() * self.base.mean() + self.shift

    def window(self):
        lo, hi = self.base.window()
        a = self._sign() * lo + self.shift
        b = self._sign() * hi + self.shift
        return (min(a, b), max(a, b))


class GridDifference(DifferenceLaw):
    """Difference/combination law represented on a numeric grid.

    The grid density comes from trapezoidal convolution of the component
    densities; sampling prefers the exact component sampler when one was
    recorded at construction.
    """

    def __init__(self, grid, density_values, sampler=None, mean_value=None):
        grid = np.asarray(grid, dtype=np.float64)
        vals = np.asarray(density_values, dtype=np.float64)
        if np.any(vals < 0.0) or np.any(~np.isfinite(vals)):
            raise DomainError("density_values must be finite and nonnegative")
        with np.errstate(divide="ignore"):
            self._backend = _LogLinearGrid(grid, np.log(vals))
        self._sampler: Optional[Callable[[int, np.random.Generator], np.ndarray]] = sampler
        self._mean = mean_value

    @property
    def grid(self) -> np.ndarray:
        return self._backend.grid

    @property
    def density_values(self) -> np.ndarray:
        return np.exp(self._backend.log_values)

    def log_density(self, t):
        out = self._backend.log_density(np.asarray(t, dtype=np.float64))
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        out = self._backend.cdf(np.asarray(t, dtype=np.float64))
        return float(out) if out.ndim == 0 else out

    def sample(self, count, rng):
        n = _check_count(count)
        if self._sampler is not None:
            return self._sampler(n, rng)
        return self._backend.sample(n, rng)

    def mean(self):
        if self._mean is not None:
            return float(self._mean)
        return self._backend.moment(1)

    def window(self):
        return (float(self.grid[0]), float(self.grid[-1]))


def _gridded_density(law: MixingLaw, scale: float, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Component density of ``scale * V`` on a trimmed uniform grid."""
    lo, hi = law.window()
    a, b = sorted((scale * lo, scale * hi))
    if b - a <= 0.0:
        raise DomainError("component law has a degenerate window")
    v = np.linspace(a, b, n_points)
    with np.errstate(over="ignore", under="ignore"):
        logf = np.asarray(law.log_density(v / scale)) - math.log(abs(scale))
    # Trim dead tails so convolution grids stay sharp.
    finite = logf > (np.nanmax(logf[np.isfinite(logf)]) - _TRIM_LOG)
    idx = np.nonzero(finite)[0]
    lo_i, hi_i = idx[0], idx[-1]
    v = v[lo_i : hi_i + 1]
    logf = logf[lo_i : hi_i + 1]
    f = np.exp(np.where(np.isfinite(logf), logf, -np.inf))
    f[~np.isfinite(f)] = np.nanmax(f[np.isfinite(f)])  # clip singular spikes
    return v, f


def _convolve_components(
    components: Sequence[tuple[MixingLaw, float]], n_points: int = 32768
) -> tuple[np.ndarray, np.ndarray]:
    """Density grid of ``sum_i scale_i * V_i`` by uniform-step convolution."""
    grids = []
    spans = []
    for law, scale in components:
        g, f = _gridded_density(law, scale, n_points)
        grids.append((g, f))
        spans.append(g[-1] - g[0])
    step = max(spans) / (n_points - 1)
    if len(grids) == 1:
        return grids[0]
    cur_g = None
    cur_f = None
    for g, f in grids:
        # Resample onto a grid with exactly the common step so successive
        # convolutions stay aligned; half-weight the end samples (trapezoid
        # rule) so densities with a jump at a window edge -- an exponential
        # at zero, say -- do not leave an O(step) error behind.
        n = max(int(np.ceil((g[-1] - g[0]) / step)) + 1, 8)
        gu = g[0] + step * np.arange(n)
        fu = np.interp(gu, g, f, left=0.0, right=0.0)
        fu[0] *= 0.5
        fu[-1] *= 0.5
        if cur_g is None:
            cur_g, cur_f = gu, fu
            continue
        conv = np.maximum(signal.fftconvolve(cur_f, fu), 0.0) * step
        start = cur_g[0] + gu[0]
        cur_g = start + step * np.arange(conv.size)
        cur_f = conv
    return cur_g, cur_f


def sample_mixing(law: MixingLaw, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. values from the law using the supplied stream."""
    if not isinstance(law, MixingLaw):
        raise DomainError("law must be a MixingLaw")
    return law.sample(count, rng)


def mixing_density(law: MixingLaw, v):
    """Density of a continuous law at ``v`` (zero outside the support)."""
    if not isinstance(law, MixingLaw):
        raise DomainError("law must be a MixingLaw")
    return law.density(v)


def difference_law(l1: MixingLaw, l2: MixingLaw) -> DifferenceLaw:
    """Law of ``V2 - V1`` for independent draws from ``l1`` and ``l2``.

    Closed-form tags cover an i.i.d. exponential pair (Laplace), an i.i.d.
    standard half-normal pair, and one-sided point masses; every other pair
    falls back to numeric convolution of the component densities.
    """
    if not isinstance(l1, MixingLaw) or not isinstance(l2, MixingLaw):
        raise DomainError("difference_law expects two MixingLaw values")
    if isinstance(l2, Degenerate):
        return ShiftedNegated(base=l1, shift=l2.v0, negate=True)
    if isinstance(l1, Degenerate):
        return ShiftedNegated(base=l2, shift=-l1.v0, negate=False)
    if (
        isinstance(l1, Gamma)
        and isinstance(l2, Gamma)
        and l1.alpha == 1.0
        and l2.alpha == 1.0
        and l1.beta == l2.beta
    ):
        return LaplaceDifference(scale=l1.beta)
    if l1.is_standard_half_normal() and l2.is_standard_half_normal():
        return HalfNormalDifference()
    grid, vals = _convolve_components([(l1, -1.0), (l2, 1.0)])

    def sampler(n: int, rng: np.random.Generator) -> np.ndarray:
        v1 = l1.sample(n, rng)
        v2 = l2.sample(n, rng)
        return v2 - v1

    mean_value = l2.mean() - l1.mean()
    return GridDifference(grid, vals, sampler=sampler, mean_value=mean_value)


def posterior_mixing(law: MixingLaw, A: float, B: float) -> MixingLaw:
    """Exponential tilt of ``law`` by ``exp(-A*k^2/2 + B*k)``, normalized.

    Constant-``h`` laws tilt exactly to a parametric truncated normal (or
    remain Gamma/Kummer when ``A = 0``); other laws tilt on a numeric grid.
    A tilt that fails to be integrable raises ``NonNormalizableError``.
    """
    if not isinstance(law, MixingLaw):
        raise DomainError("law must be a MixingLaw")
    if not (np.isfinite(A) and A >= 0.0):
        raise DomainError("A must be finite and nonnegative")
    if not np.isfinite(B):
        raise DomainError("B must be finite")
    if isinstance(law, Degenerate):
        return law
    if A == 0.0 and B == 0.0:
        return law

    tf = law.tilt_form()
    if tf is not None and tf.monomial and tf.power == 0.0:
        # Constant h: the tilted density is Gaussian-shaped on (0, inf).
        c1 = tf.c1 + A
        c2 = tf.c2 - B
        if c1 > 0.0:
            return TruncatedNormal(mu=-c2 / c1, sigma=1.0 / math.sqrt(c1))
        if c2 > 0.0:
            return Gamma(alpha=1.0, beta=1.0 / c2)
        raise NonNormalizableError(
            "tilt exp(%.6g*k) does not decay against an exponential law" % B
        )
    if isinstance(law, Gamma) and A == 0.0:
        c2 = 1.0 / law.beta - B
        if c2 <= 0.0:
            raise NonNormalizableError("tilt rate exceeds the Gamma decay rate")
        return Gamma(alpha=law.alpha, beta=1.0 / c2)
    if isinstance(law, KummerII) and A == 0.0:
        c_new = law.c - law.sigma * B
        if c_new > 0.0 or (c_new == 0.0 and law.b > 0.0):
            return KummerII(a=law.a, b=law.b, c=c_new, sigma=law.sigma)
        raise NonNormalizableError("tilt rate exceeds the Kummer decay rate")

    return _tilt_on_grid(law, A, B)


def _tilt_on_grid(law: MixingLaw, A: float, B: float) -> Tabulated:
    lo, hi = law.window()
    lo = max(lo, 0.0)
    if A > 0.0:
        hi = max(hi, B / A + 12.0 / math.sqrt(A))
    tf = law.tilt_form()
    singular = tf is not None and tf.monomial and tf.power < 0.0

    def _mesh(a: float, b: float, n_geo: int, n_lin: int):
        # Hybrid mesh: geometric knots while the window hugs zero (monomial
        # factors are log-linear in log v there), uniform knots after.
        v_break = 0.05 * b
        if a < 0.5 * v_break:
            if singular and a <= 0.0:
                a_pos = b * (1e-15) ** (1.0 / (tf.power + 1.0))
            else:
                a_pos = a if a > 0.0 else b * 1e-12
            a_pos = min(a_pos, 0.5 * v_break)
            return np.concatenate(
                [
                    np.geomspace(a_pos, v_break, n_geo),
                    np.linspace(v_break, b, n_lin)[1:],
                ]
            )
        return np.linspace(a, b, n_geo + n_lin)

    def _tilted_logs(grid: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return np.asarray(law.log_density(grid)) - 0.5 * A * grid * grid + B * grid

    # Coarse pass: find the window the tilt actually leaves alive, so the
    # fine knots are not wasted on a region the trim would discard anyway.
    probe = _mesh(lo, hi, 512, 1024)
    logs_p = _tilted_logs(probe)
    finite_p = np.isfinite(logs_p)
    if not finite_p.any():
        raise NonNormalizableError("tilted density vanished on the entire window")
    alive = np.nonzero(logs_p > np.max(logs_p[finite_p]) - (_TRIM_LOG + 6.0))[0]
    lo_eff = lo if alive[0] == 0 else float(probe[alive[0] - 1])
    hi_eff = hi if alive[-1] == probe.size - 1 else float(probe[alive[-1] + 1])

    grid = _mesh(lo_eff, hi_eff, 1536, 6656)
    logs = _tilted_logs(grid)
    finite = np.isfinite(logs)
    top = np.max(logs[finite])
    keep = np.nonzero(logs > top - _TRIM_LOG)[0]
    i0, i1 = int(keep[0]), int(keep[-1])
    i1 = max(i1, i0 + 8)
    grid = grid[i0 : i1 + 1]
    logs = logs[i0 : i1 + 1]
    vals = np.exp(logs - top)
    vals[~np.isfinite(vals)] = np.max(vals[np.isfinite(vals)])
    return Tabulated(grid, vals)


def difference_law_mean_shifted(
    laws: Sequence[MixingLaw], weights: Sequence[float]
) -> DifferenceLaw:
    """Law of ``sum_i weights[i] * V_i`` over independent mixing draws."""
    laws = list(laws)
    weights = [float(w) for w in weights]
    if len(laws) != len(weights):
        raise DomainError("laws and weights must have equal length")
    if len(laws) == 0:
        raise DomainError("at least one law is required")
    for law in laws:
        if not isinstance(law, MixingLaw):
            raise DomainError("laws must be MixingLaw values")
    for w in weights:
        if not np.isfinite(w):
            raise DomainError("weights must be finite")

    shift = 0.0
    continuous: list[tuple[MixingLaw, float]] = []
    for law, w in zip(laws, weights):
        if w == 0.0:
            continue
        if isinstance(law, Degenerate):
            shift += w * law.v0
        else:
            continuous.append((law, w))

    if not continuous:
        return ShiftedNegated(base=Degenerate(shift), shift=0.0, negate=False)
    if len(continuous) == 1 and abs(continuous[0][1]) == 1.0:
        law, w = continuous[0]
        return ShiftedNegated(base=law, shift=shift, negate=(w < 0.0))

    grid, vals = _convolve_components(continuous)
    grid = grid + shift
    comps = list(continuous)
    base_shift = shift

    def sampler(n: int, rng: np.random.Generator) -> np.ndarray:
        total = np.full(n, base_shift)
        for law, w in comps:
            total = total + w * law.sample(n, rng)
        return total

    mean_value = base_shift + sum(w * law.mean() for law, w in comps)
    return GridDifference(grid, vals, sampler=sampler, mean_value=mean_value)
