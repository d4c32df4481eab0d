"""Kullback-Leibler risk measurement for predictive density estimators.

Three layers: exact results (the equivariant rule's constant risk
assembled from one-dimensional entropies, and the analytic James-Stein
risk difference, which holds for any mixing pair), seeded Monte Carlo
risk for arbitrary estimator factories, and a sweep driver tabulating
risks plus paired differences over a grid of nuisance magnitudes.

Monte Carlo replicates are organized in fixed chunks of 4096 with one
derived seed per chunk (draw order within a chunk: V1, V2, then the two
Gaussian blocks), and chunk results are merged in index order, so a run
is bitwise reproducible for a given seed regardless of worker count.
Estimators built from this package's factory functions are recognized
and evaluated through their vectorized row forms; anything else falls
back to one factory call per replicate.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from mmn_predict.errors import (
    ContaminatedEstimateError,
    DomainError,
    WindowError,
)
from mmn_predict.mixing import (
    Degenerate,
    HalfNormalDifference,
    LaplaceDifference,
    ShiftedNegated,
)
from mmn_predict.mmn import MmnDistribution, _check_vector, _frozen, log_density_mmn
from mmn_predict import predictive
from mmn_predict.predictive import PredictionProblem, PredictiveDensity

__all__ = [
    "RiskEstimate",
    "SweepPoint",
    "kl_risk_mc",
    "entropy_1d",
    "mre_risk_exact",
    "js_risk_difference_exact",
    "nuisance_abscissa",
    "risk_sweep",
]

CHUNK_SIZE = 4096
_CONTAMINATION_LIMIT = 1e-4
_GAUSS_ENTROPY = 0.5 * (1.0 + math.log(2.0 * math.pi))
_ROW_TAGS = frozenset(
    {
        predictive.TAG_MRE,
        predictive.TAG_HARMONIC,
        predictive.TAG_PLUGIN_JS,
        predictive.TAG_INTERVAL,
        predictive.TAG_CYLINDER,
    }
)

Factory = Callable[[np.ndarray], object]


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo risk: mean and standard error of the log-ratio terms.

    ``n`` counts the replicates actually averaged (non-finite terms below
    the contamination limit are dropped); ``seed`` is the stream seed the
    estimate was produced from.
    """

    mean: float
    std_error: float
    n: int
    seed: int

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise DomainError("mean must be finite")
        if not (math.isfinite(self.std_error) and self.std_error >= 0.0):
            raise DomainError("std_error must be a nonnegative finite number")
        if not (isinstance(self.n, (int, np.integer)) and self.n > 0):
            raise DomainError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True, eq=False)
class SweepPoint:
    """One abscissa of a risk sweep.

    ``estimates`` maps estimator name to its risk, ``differences`` maps
    ordered name pairs to the paired (common-random-number) risk
    difference ``first - second``, and ``errors`` records estimators (or
    the point itself, under the key ``"point"``) that failed here.
    ``theta`` is the parameter realizing the abscissa, or None when the
    point could not be built.
    """

    t: float
    theta: Optional[np.ndarray]
    estimates: Dict[str, RiskEstimate] = field(default_factory=dict)
    differences: Dict[Tuple[str, str], RiskEstimate] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not (
            isinstance(self.t, (int, float))
            and math.isfinite(self.t)
            and self.t >= 0.0
        ):
            raise DomainError("t must be a nonnegative finite number")
        object.__setattr__(self, "t", float(self.t))
        if self.theta is not None:
            object.__setattr__(self, "theta", _frozen(_check_vector(self.theta, "theta")))


def nuisance_abscissa(a, theta) -> float:
    """``|theta - proj_a theta|^2 / (d - 1)``: squared nuisance size per axis.

    With ``a = 0`` the projection is taken to be zero, and in one
    dimension (no nuisance space) the value is defined as zero.
    """
    a = _check_vector(a, "a")
    theta = _check_vector(theta, "theta")
    if theta.size != a.size:
        raise DomainError("theta and a must have the same dimension")
    if a.size == 1:
        return 0.0
    norm2 = float(a @ a)
    if norm2 > 0.0:
        resid = theta - (float(a @ theta) / norm2) * a
    else:
        resid = theta
    return float(resid @ resid) / (a.size - 1)


# --------------------------------------------------------------------------
# Monte Carlo core


def _chunk_sizes(n: int) -> List[int]:
    sizes = [CHUNK_SIZE] * (n // CHUNK_SIZE)
    if n % CHUNK_SIZE:
        sizes.append(n % CHUNK_SIZE)
    return sizes


def _draw_chunk(problem: PredictionProblem, theta: np.ndarray, size: int, rng):
    v1 = problem.law1.sample(size, rng)
    v2 = problem.law2.sample(size, rng)
    zx = rng.standard_normal((size, problem.d))
    zy = rng.standard_normal((size, problem.d))
    x = theta + np.outer(v1, problem.a) + math.sqrt(problem.sigma2_x) * zx
    y = theta + np.outer(v2, problem.a) + math.sqrt(problem.sigma2_y) * zy
    return x, y


def _row_template(factory: Factory, x0: np.ndarray, x1: np.ndarray):
    """A PredictiveDensity usable for whole-chunk row evaluation, or None.

    The factory contract is that only the captured observation varies
    with ``x``; we check it at two probe points and additionally verify
    one replicate per chunk against a direct factory call.
    """
    try:
        p0 = factory(x0)
        p1 = factory(x1)
    except Exception:
        return None
    if not (isinstance(p0, PredictiveDensity) and isinstance(p1, PredictiveDensity)):
        return None
    if p0.tag not in _ROW_TAGS or p1.tag != p0.tag:
        return None
    if p0.problem is not p1.problem:
        return None
    for name in ("c_lo", "c_hi", "m"):
        if getattr(p0, name) != getattr(p1, name):
            return None
    return p0


def _factory_log_density(factory: Factory, x: np.ndarray, y: np.ndarray) -> float:
    try:
        est = factory(x)
        return float(est.log_density(y))
    except DomainError:
        return math.nan


def _factory_rows(
    factory: Factory,
    template: Optional[PredictiveDensity],
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    if template is not None:
        with np.errstate(all="ignore"):
            out = predictive._predictive_log_rows(template, x, y)
        # spot-check the row form against a direct factory call; mismatch
        # means the factory does not follow the fixed-estimator contract
        probe = _factory_log_density(factory, x[0], y[0])
        ok = (probe == out[0]) or (not math.isfinite(probe) and not np.isfinite(out[0]))
        if ok:
            return out
    return np.array([_factory_log_density(factory, xi, yi) for xi, yi in zip(x, y)])


# shared state for fork-based workers (factories may close over objects
# that cannot be pickled, so they are inherited through fork instead)
_FORK_STATE: Optional[dict] = None


def _run_chunk_index(index: int):
    state = _FORK_STATE
    return _chunk_terms(
        state["problem"],
        state["theta"],
        state["truth"],
        state["factories"],
        state["templates"],
        state["sizes"][index],
        state["children"][index],
    )


def _chunk_terms(
    problem: PredictionProblem,
    theta: np.ndarray,
    truth: MmnDistribution,
    factories: Dict[str, Factory],
    templates: Dict[str, Optional[PredictiveDensity]],
    size: int,
    child_seed,
) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(child_seed)
    x, y = _draw_chunk(problem, theta, size, rng)
    true_rows = log_density_mmn(truth, y)
    out = {}
    for name, factory in factories.items():
        with np.errstate(all="ignore"):
            out[name] = true_rows - _factory_rows(factory, templates[name], x, y)
    return out


def _point_terms(
    problem: PredictionProblem,
    theta: np.ndarray,
    factories: Dict[str, Factory],
    n: int,
    seed: int,
    workers: int = 1,
) -> Dict[str, np.ndarray]:
    """Per-replicate log-ratio terms for every estimator on shared draws."""
    sizes = _chunk_sizes(n)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    truth = MmnDistribution(
        theta, problem.a, problem.sigma2_y * np.eye(problem.d), problem.law2
    )
    probe_rng = np.random.default_rng(children[0])
    probe_x, _ = _draw_chunk(problem, theta, min(2, sizes[0]), probe_rng)
    x0 = probe_x[0]
    x1 = probe_x[1] if len(probe_x) > 1 else probe_x[0]
    templates = {name: _row_template(f, x0, x1) for name, f in factories.items()}

    if workers > 1 and len(sizes) > 1:
        import multiprocessing

        global _FORK_STATE
        _FORK_STATE = {
            "problem": problem,
            "theta": theta,
            "truth": truth,
            "factories": factories,
            "templates": templates,
            "sizes": sizes,
            "children": children,
        }
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(min(workers, len(sizes))) as pool:
                chunks = pool.map(_run_chunk_index, range(len(sizes)))
        finally:
            _FORK_STATE = None
    else:
        chunks = [
            _chunk_terms(problem, theta, truth, factories, templates, sizes[i], children[i])
            for i in range(len(sizes))
        ]
    return {
        name: np.concatenate([c[name] for c in chunks]) for name in factories
    }


def _estimate_from_terms(terms: np.ndarray, seed: int, label: str) -> RiskEstimate:
    finite = np.isfinite(terms)
    bad = int(terms.size - finite.sum())
    if bad > _CONTAMINATION_LIMIT * terms.size:
        raise ContaminatedEstimateError(
            f"{label}: {bad} of {terms.size} replicates "
            f"({bad / terms.size:.4%}) produced non-finite log ratios "
            f"(limit {_CONTAMINATION_LIMIT:.2%})"
        )
    vals = terms[finite]
    if vals.size == 0:
        raise ContaminatedEstimateError(f"{label}: no finite replicates")
    if not math.isfinite(float(vals.mean())):
        raise ContaminatedEstimateError(f"{label}: replicate mean overflowed")
    spread = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return RiskEstimate(
        mean=float(vals.mean()),
        std_error=spread / math.sqrt(vals.size),
        n=int(vals.size),
        seed=seed,
    )


def _check_mc_args(problem, theta, n, seed):
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    theta = _check_vector(theta, "theta")
    if theta.size != problem.d:
        raise DomainError(f"theta must have dimension {problem.d}")
    if not (isinstance(n, (int, np.integer)) and n > 0):
        raise DomainError("n must be a positive integer")
    if not isinstance(seed, (int, np.integer)):
        raise DomainError("seed must be an integer")
    return theta, int(n), int(seed)


def kl_risk_mc(
    problem: PredictionProblem,
    theta,
    estimator: Factory,
    n: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Monte Carlo Kullback-Leibler risk of one estimator at ``theta``.

    Averages ``log q(Y_i | theta) - log q_hat(Y_i; X_i)`` over ``n``
    independent replicate pairs drawn from the model.  ``estimator`` maps
    an observation to an object with ``log_density``; replicates where
    construction raises a domain error count as non-finite.  Two calls
    with the same seed see identical ``(X_i, Y_i)`` streams, so risks of
    different estimators can be differenced pairwise; the result does
    not depend on ``workers``.
    """
    theta, n, seed = _check_mc_args(problem, theta, n, seed)
    if not callable(estimator):
        raise DomainError("estimator must be callable")
    if not (isinstance(workers, (int, np.integer)) and workers >= 1):
        raise DomainError("workers must be a positive integer")
    terms = _point_terms(
        problem, theta, {"estimator": estimator}, n, seed, int(workers)
    )["estimator"]
    return _estimate_from_terms(terms, seed, "estimator")


# --------------------------------------------------------------------------
# Exact results


def entropy_1d(log_density: Callable[[float], float], window: Tuple[float, float]) -> float:
    """Differential entropy ``-int f log f`` over a finite window.

    ``log_density`` must be the log of a normalized density; the window
    must carry all but at most 1e-9 of its mass, or the computation is
    refused rather than silently truncated.  Absolute quadrature error is
    kept below 1e-7.
    """
    if not callable(log_density):
        raise DomainError("log_density must be callable")
    try:
        lo, hi = float(window[0]), float(window[1])
    except (TypeError, ValueError, IndexError):
        raise DomainError("window must be a (lo, hi) pair") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise DomainError("window must be a finite interval with lo < hi")

    mass, _ = integrate.quad(
        lambda y: math.exp(log_density(y)), lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10
    )
    if 1.0 - mass > 1e-9:
        raise WindowError(
            f"window ({lo:g}, {hi:g}) captures mass {mass:.12f}; "
            f"clipping exceeds 1e-9"
        )

    def integrand(y):
        ld = log_density(y)
        if ld == -math.inf:
            return 0.0
        return -math.exp(ld) * ld

    val, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-9, epsrel=1e-9)
    return float(val)


def _shift_entropy(b: float, law, problem: Optional[PredictionProblem]) -> float:
    """Entropy of the unit-noise density of ``b V + Z`` for ``V ~ law``."""
    if isinstance(law, Degenerate):
        return _GAUSS_ENTROPY
    if isinstance(law, ShiftedNegated):
        # shifting or reflecting the mixing draw does not change entropy
        return _shift_entropy(b, law.base, None)
    if isinstance(law, (LaplaceDifference, HalfNormalDifference)) and problem is not None:
        # closed evaluator: a unit problem with the same mixing pair has
        # combined noise variance one and the same difference law
        unit = PredictionProblem(
            np.array([b]), 0.5, 0.5, problem.law1, problem.law2
        )
        est = predictive.mre(unit, np.array([0.0]))
        log_f = lambda y: float(est.log_density(np.array([y])))
    else:
        dist = MmnDistribution([0.0], [b], [[1.0]], law)
        log_f = lambda y: float(log_density_mmn(dist, np.array([y])))
    w_lo, w_hi = law.window()
    lo = min(b * w_lo, b * w_hi) - 9.5
    hi = max(b * w_lo, b * w_hi) + 9.5
    return entropy_1d(log_f, (lo, hi))


def mre_risk_exact(problem: PredictionProblem) -> float:
    """Exact (theta-free) risk of the best equivariant predictive density.

    The risk is the entropy gap between the predictive and true densities
    reduced to one dimension along the shift axis, plus the Gaussian
    variance-ratio term; both entropies are evaluated by quadrature on
    the corresponding unit-variance univariate densities.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    base = 0.5 * problem.d * math.log(problem.sigma2_s / problem.sigma2_y)
    a_norm = float(np.linalg.norm(problem.a))
    if a_norm == 0.0:
        return base
    h_pred = _shift_entropy(a_norm / math.sqrt(problem.sigma2_s), problem.law3, problem)
    h_true = _shift_entropy(a_norm / math.sqrt(problem.sigma2_y), problem.law2, None)
    return h_pred - h_true + base


def js_risk_difference_exact(
    d: int, sigma2_x: float, sigma2_y: float, zeta2_norm2: float
) -> float:
    """Exact risk improvement of the James-Stein plug-in over the
    equivariant rule, as a function of the nuisance norm.

    The improvement is ``(d-3)^2 sigma2_x / (2 sigma2_s)`` times the
    expected inverse of a noncentral chi-square with ``d - 1`` degrees of
    freedom and noncentrality ``zeta2_norm2 / sigma2_x`` (Poisson series);
    it is positive everywhere, maximal at zero, and independent of the
    mixing laws.
    """
    if not (isinstance(d, (int, np.integer)) and d >= 4):
        raise DomainError("the James-Stein risk difference requires integer d >= 4")
    for name, val in (("sigma2_x", sigma2_x), ("sigma2_y", sigma2_y)):
        if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
            raise DomainError(f"{name} must be a positive finite number")
    if not (isinstance(zeta2_norm2, (int, float)) and zeta2_norm2 >= 0.0):
        raise DomainError("zeta2_norm2 must be nonnegative")
    if math.isinf(zeta2_norm2):
        return 0.0
    nu = d - 1
    lam_half = zeta2_norm2 / (2.0 * sigma2_x)
    kmax = int(math.ceil(lam_half + 10.0 * math.sqrt(lam_half + 1.0) + 45.0))
    ks = np.arange(kmax + 1, dtype=np.float64)
    if lam_half > 0.0:
        log_w = ks * math.log(lam_half) - lam_half - gammaln(ks + 1.0)
        inv_moment = float(np.sum(np.exp(log_w) / (nu + 2.0 * ks - 2.0)))
    else:
        inv_moment = 1.0 / (nu - 2.0)
    scale = (d - 3) ** 2 * sigma2_x / (2.0 * (sigma2_x + sigma2_y))
    return scale * inv_moment


# --------------------------------------------------------------------------
# Sweep driver


def _default_theta_builder(problem: PredictionProblem) -> Callable[[float], np.ndarray]:
    """theta(t) = sqrt((d-1) t) u for a fixed unit u orthogonal to a."""
    d = problem.d
    a = problem.a
    norm2 = float(a @ a)
    u = None
    for axis in (1, 0):
        if axis >= d:
            continue
        e = np.zeros(d)
        e[axis] = 1.0
        cand = e - (float(a @ e) / norm2) * a if norm2 > 0.0 else e
        length = float(np.linalg.norm(cand))
        if length > 1e-12:
            u = cand / length
            break

    def build(t: float) -> np.ndarray:
        if t == 0.0:
            return np.zeros(d)
        if u is None:
            raise DomainError(
                "no direction orthogonal to a is available for t > 0"
            )
        return math.sqrt((d - 1) * t) * u

    return build


def _resolve_estimators(
    problem: PredictionProblem, estimators
) -> Dict[str, Factory]:
    """Accept a name->factory mapping, or names of the parameter-free tags."""
    standard = {
        predictive.TAG_MRE: lambda x: predictive.mre(problem, x),
        predictive.TAG_HARMONIC: lambda x: predictive.harmonic_bayes(problem, x),
        predictive.TAG_PLUGIN_JS: lambda x: predictive.plugin_js(problem, x),
    }
    out: Dict[str, Factory] = {}
    if isinstance(estimators, Mapping):
        items = estimators.items()
    else:
        items = []
        for entry in estimators:
            if isinstance(entry, str):
                if entry not in standard:
                    known = ", ".join(sorted(standard))
                    raise DomainError(
                        f"estimator {entry!r} is not one of the standard names"
                        f" ({known}); pass a (name, factory) pair instead"
                    )
                items.append((entry, standard[entry]))
            else:
                items.append(tuple(entry))
    for name, factory in items:
        if not isinstance(name, str) or not name:
            raise DomainError("estimator names must be nonempty strings")
        if name in out:
            raise DomainError(f"duplicate estimator name {name!r}")
        if not callable(factory):
            raise DomainError(f"estimator {name!r} factory must be callable")
        out[name] = factory
    if not out:
        raise DomainError("at least one estimator is required")
    return out


def risk_sweep(
    problem: PredictionProblem,
    estimators,
    t_grid: Sequence[float],
    theta_builder: Optional[Callable[[float], np.ndarray]] = None,
    n: int = 200_000,
    seed: int = 0,
    workers: int = 1,
) -> List[SweepPoint]:
    """Paired Monte Carlo risks for several estimators over a grid of
    nuisance magnitudes.

    Every abscissa reuses the same replicate streams (same seed), and all
    estimators at one abscissa share draws, so differences between grid
    rows and between estimators are both variance-reduced.  A failing
    estimator or abscissa is recorded in the point's ``errors`` map
    rather than aborting the sweep.
    """
    if not isinstance(problem, PredictionProblem):
        raise DomainError("problem must be a PredictionProblem")
    factories = _resolve_estimators(problem, estimators)
    if not (isinstance(n, (int, np.integer)) and n > 0):
        raise DomainError("n must be a positive integer")
    if not isinstance(seed, (int, np.integer)):
        raise DomainError("seed must be an integer")
    if not (isinstance(workers, (int, np.integer)) and workers >= 1):
        raise DomainError("workers must be a positive integer")
    if theta_builder is None:
        theta_builder = _default_theta_builder(problem)
    t_values = [float(t) for t in t_grid]
    if not t_values:
        raise DomainError("t_grid must be nonempty")
    if any(not math.isfinite(t) or t < 0.0 for t in t_values):
        raise DomainError("t_grid values must be nonnegative finite numbers")

    points: List[SweepPoint] = []
    names = list(factories)
    for t in t_values:
        try:
            theta = _check_vector(theta_builder(t), "theta")
            if theta.size != problem.d:
                raise DomainError(f"theta must have dimension {problem.d}")
            realized = nuisance_abscissa(problem.a, theta)
            if abs(realized - t) > 1e-10:
                raise DomainError(
                    f"theta_builder realized t = {realized!r} instead of {t!r}"
                )
        except DomainError as exc:
            points.append(SweepPoint(t=t, theta=None, errors={"point": str(exc)}))
            continue

        terms = _point_terms(problem, theta, factories, int(n), int(seed), int(workers))
        estimates: Dict[str, RiskEstimate] = {}
        errors: Dict[str, str] = {}
        for name in names:
            try:
                estimates[name] = _estimate_from_terms(terms[name], int(seed), name)
            except ContaminatedEstimateError as exc:
                errors[name] = str(exc)
        differences: Dict[Tuple[str, str], RiskEstimate] = {}
        for i, first in enumerate(names):
            for second in names[i + 1 :]:
                if first not in estimates or second not in estimates:
                    continue
                pair = f"{first}-{second}"
                try:
                    differences[(first, second)] = _estimate_from_terms(
                        terms[first] - terms[second], int(seed), pair
                    )
                except ContaminatedEstimateError as exc:
                    errors[pair] = str(exc)
        points.append(
            SweepPoint(
                t=t,
                theta=theta,
                estimates=estimates,
                differences=differences,
                errors=errors,
            )
        )
    return points
