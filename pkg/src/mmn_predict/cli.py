"""Command-line front end: JSON configs in, CSV/JSON artifacts out.

Five subcommands wrap the library: ``density`` tabulates a predictive
log-density on a grid, ``sample`` draws from a mean-mixture model,
``posterior`` reports the conjugate update, ``mre-risk`` prints the
exact equivariant risk, and ``risk-sweep`` runs the paired Monte Carlo
comparison and writes the two CSV schemas described in docs/csv.md.

Configs are strict: every object is checked against its schema and
unknown keys are rejected before any computation starts.  Seeds resolve
as flag, then config, then the MMN_PREDICT_SEED environment variable,
then zero; with a fixed seed every command's output is byte-identical
across runs and worker counts.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 requested
computation unavailable for the model, 4 contaminated Monte Carlo
estimate.
"""

import argparse
import json
import math
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import mixing, mmn, posterior, predictive, risk
from .errors import (
    CapabilityError,
    ConfigError,
    ContaminatedEstimateError,
    DomainError,
    NonNormalizableError,
    WindowError,
)

__all__ = ["main"]

_STANDARD_TAGS = (
    predictive.TAG_MRE,
    predictive.TAG_HARMONIC,
    predictive.TAG_PLUGIN_JS,
)


# --------------------------------------------------------------------------
# Strict config parsing


def _check_keys(obj, where: str, required: Sequence[str], optional: Sequence[str] = ()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(map(repr, missing))}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    return value


def _vector(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where} must be a nonempty array of numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


def _matrix_or_scalar(value, d: int, where: str) -> np.ndarray:
    """A covariance entry: a scalar multiple of the identity, or full rows."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value) * np.eye(d)
    if isinstance(value, list):
        return np.array([list(_vector(row, f"{where}[{i}]")) for i, row in enumerate(value)])
    raise ConfigError(f"{where} must be a number or an array of rows")


_LAW_SCHEMAS = {
    "degenerate": (mixing.Degenerate, ("v0",), ()),
    "gamma": (mixing.Gamma, ("alpha", "beta"), ()),
    "sqrt_chi_sq": (mixing.SqrtChiSq, ("k",), ()),
    "truncated_normal": (mixing.TruncatedNormal, (), ("mu", "sigma")),
    "kummer_ii": (mixing.KummerII, ("a", "b", "c"), ("sigma",)),
}


def _parse_law(obj, where: str) -> mixing.MixingLaw:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{where} must be an object with a 'kind' key")
    kind = obj["kind"]
    if kind == "tabulated":
        _check_keys(obj, where, ("kind", "grid", "density_values"))
        return mixing.Tabulated(
            list(_vector(obj["grid"], f"{where}.grid")),
            list(_vector(obj["density_values"], f"{where}.density_values")),
        )
    if kind not in _LAW_SCHEMAS:
        known = ", ".join(sorted([*_LAW_SCHEMAS, "tabulated"]))
        raise ConfigError(f"{where}.kind: unknown law kind {kind!r} (known: {known})")
    cls, required, optional = _LAW_SCHEMAS[kind]
    _check_keys(obj, where, ("kind", *required), optional)
    params = {
        key: _number(obj[key], f"{where}.{key}")
        for key in (*required, *optional)
        if key in obj
    }
    return cls(**params)


def _parse_problem(obj, where: str) -> predictive.PredictionProblem:
    _check_keys(obj, where, ("a", "sigma2_x", "sigma2_y", "law1", "law2"))
    return predictive.PredictionProblem(
        _vector(obj["a"], f"{where}.a"),
        _number(obj["sigma2_x"], f"{where}.sigma2_x"),
        _number(obj["sigma2_y"], f"{where}.sigma2_y"),
        _parse_law(obj["law1"], f"{where}.law1"),
        _parse_law(obj["law2"], f"{where}.law2"),
    )


def _parse_model(obj, where: str) -> mmn.MmnDistribution:
    _check_keys(obj, where, ("theta", "a", "sigma", "law"))
    theta = _vector(obj["theta"], f"{where}.theta")
    return mmn.MmnDistribution(
        theta,
        _vector(obj["a"], f"{where}.a"),
        _matrix_or_scalar(obj["sigma"], theta.size, f"{where}.sigma"),
        _parse_law(obj["law"], f"{where}.law"),
    )


def _parse_prior(obj, where: str) -> posterior.NormalPrior:
    if isinstance(obj, dict) and "uniform" in obj:
        _check_keys(obj, where, ("uniform",))
        if obj["uniform"] is not True:
            raise ConfigError(f"{where}.uniform must be true when present")
        return posterior.NormalPrior(uniform=True)
    _check_keys(obj, where, ("mu", "delta"))
    mu = _vector(obj["mu"], f"{where}.mu")
    return posterior.NormalPrior(
        mu=mu, delta=_matrix_or_scalar(obj["delta"], mu.size, f"{where}.delta")
    )


def _estimator_entry(
    problem: predictive.PredictionProblem, spec, where: str
) -> Tuple[str, Callable]:
    """A (name, factory) pair from a tag string or parameterized object."""
    if isinstance(spec, str):
        spec = {"tag": spec}
    if not isinstance(spec, dict) or "tag" not in spec:
        raise ConfigError(f"{where} must be a tag string or an object with 'tag'")
    tag = spec["tag"]
    if tag in _STANDARD_TAGS:
        _check_keys(spec, where, ("tag",), ("name",))
        builder = {
            predictive.TAG_MRE: predictive.mre,
            predictive.TAG_HARMONIC: predictive.harmonic_bayes,
            predictive.TAG_PLUGIN_JS: predictive.plugin_js,
        }[tag]
        factory = lambda x, _b=builder: _b(problem, x)
    elif tag == predictive.TAG_INTERVAL:
        _check_keys(spec, where, ("tag", "c_lo", "c_hi"), ("name",))
        c_lo = _number(spec["c_lo"], f"{where}.c_lo")
        c_hi = _number(spec["c_hi"], f"{where}.c_hi")
        factory = lambda x: predictive.restricted_interval(problem, c_lo, c_hi, x)
    elif tag == predictive.TAG_CYLINDER:
        _check_keys(spec, where, ("tag", "m"), ("name",))
        m = _number(spec["m"], f"{where}.m")
        factory = lambda x: predictive.restricted_cylinder(problem, m, x)
    else:
        known = ", ".join([*_STANDARD_TAGS, predictive.TAG_INTERVAL, predictive.TAG_CYLINDER])
        raise ConfigError(f"{where}.tag: unknown estimator {tag!r} (known: {known})")
    name = spec.get("name", tag)
    if not isinstance(name, str) or not name or any(c in name for c in ",\r\n"):
        raise ConfigError(f"{where}.name must be a nonempty string without commas")
    return name, factory


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            cfg = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _resolve_seed(flag_value: Optional[int], cfg: dict) -> int:
    if flag_value is not None:
        return int(flag_value)
    if "seed" in cfg:
        return _integer(cfg["seed"], "config.seed")
    env = os.environ.get("MMN_PREDICT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(
                f"MMN_PREDICT_SEED must be an integer, got {env!r}"
            ) from None
    return 0


def _parse_point_list(text: str, where: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")])
    except ValueError:
        raise ConfigError(f"{where} must be comma-separated numbers") from None


def _parse_grid(text, where: str) -> np.ndarray:
    """Axis values from an inclusive ``lo:hi:step`` specification."""
    if not isinstance(text, str):
        raise ConfigError(f"{where} must be a 'lo:hi:step' string")
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{where} must have the form lo:hi:step")
    try:
        lo, hi, step = (float(part) for part in parts)
    except ValueError:
        raise ConfigError(f"{where} must contain three numbers") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise ConfigError(f"{where} must be finite")
    if step <= 0.0 or hi < lo:
        raise ConfigError(f"{where} needs step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


# --------------------------------------------------------------------------
# Output helpers


def _fmt(value: float) -> str:
    """Shortest exact decimal form, for byte-stable numeric output."""
    return repr(float(value))


def _csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _emit(out_path: Optional[str], text: str) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


# --------------------------------------------------------------------------
# Subcommands


def cmd_density(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, "config", ("problem",), ("estimator", "x", "grid"))
    problem = _parse_problem(cfg["problem"], "config.problem")

    spec = args.estimator if args.estimator is not None else cfg.get("estimator", "mre")
    name, factory = _estimator_entry(problem, spec, "estimator")

    if args.x is not None:
        x = _parse_point_list(args.x, "--x")
    elif "x" in cfg:
        x = _vector(cfg["x"], "config.x")
    else:
        raise ConfigError("an observation is required (--x or config.x)")

    grid_spec = args.grid if args.grid is not None else cfg.get("grid")
    if grid_spec is None:
        raise ConfigError("a grid is required (--grid or config.grid)")
    axis = _parse_grid(grid_spec, "config.grid")

    density = factory(x)
    d = problem.d
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    rows = np.column_stack([m.ravel() for m in mesh])
    logs = np.asarray(density.log_density(rows))

    if args.format == "json":
        payload = {
            "estimator": name,
            "rows": [
                {"y": [float(v) for v in row], "log_density": float(value)}
                for row, value in zip(rows, logs)
            ],
        }
        _emit(args.out, _json_text(payload))
    else:
        header = [f"y{i + 1}" for i in range(d)] + ["log_density"]
        body = [
            [_fmt(v) for v in row] + [_fmt(value)] for row, value in zip(rows, logs)
        ]
        _emit(args.out, _csv(header, body))
    return 0


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, "config", ("model",), ("n", "seed"))
    dist = _parse_model(cfg["model"], "config.model")
    if args.n is not None:
        n = int(args.n)
    elif "n" in cfg:
        n = _integer(cfg["n"], "config.n")
    else:
        raise ConfigError("a draw count is required (--n or config.n)")
    seed = _resolve_seed(args.seed, cfg)

    draws = mmn.sample_mmn(dist, n, np.random.default_rng(seed))
    if args.format == "json":
        payload = {
            "seed": seed,
            "rows": [[float(v) for v in row] for row in draws],
        }
        _emit(args.out, _json_text(payload))
    else:
        header = [f"x{i + 1}" for i in range(dist.d)]
        _emit(args.out, _csv(header, [[_fmt(v) for v in row] for row in draws]))
    return 0


def cmd_posterior(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, "config", ("model", "prior", "x"))
    dist = _parse_model(cfg["model"], "config.model")
    prior = _parse_prior(cfg["prior"], "config.prior")
    x = _vector(cfg["x"], "config.x")

    post = posterior.posterior(dist, prior, x)
    mean = posterior.posterior_mean(post)
    report = {
        "location": [float(v) for v in post.location],
        "a_star": [float(v) for v in post.a_star],
        "A": float(post.tilt_a),
        "B": float(post.tilt_b),
        "posterior_mean": [float(v) for v in mean],
    }
    if args.format == "csv":
        rows = [[key, json.dumps(value)] for key, value in report.items()]
        _emit(args.out, _csv(["field", "value"], rows))
    else:
        _emit(args.out, _json_text(report))
    return 0


def cmd_mre_risk(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, "config", ("problem",))
    problem = _parse_problem(cfg["problem"], "config.problem")
    value = risk.mre_risk_exact(problem)
    if args.format == "json":
        _emit(args.out, _json_text({"risk": value}))
    elif args.format == "csv":
        _emit(args.out, _csv(["risk"], [[_fmt(value)]]))
    else:
        _emit(args.out, _fmt(value) + "\n")
    return 0


def _summary_table(points: List[risk.SweepPoint], names: List[str]) -> str:
    header = ("t", "estimator", "risk", "stderr", "errors")
    body = []
    for point in points:
        if "point" in point.errors:
            body.append((f"{point.t:g}", "-", "", "", point.errors["point"]))
            continue
        for name in names:
            if name in point.estimates:
                est = point.estimates[name]
                body.append(
                    (f"{point.t:g}", name, f"{est.mean:.6f}", f"{est.std_error:.6f}",
                     point.errors.get(name, ""))
                )
            else:
                body.append((f"{point.t:g}", name, "", "", point.errors.get(name, "")))
    widths = [
        max(len(header[col]), *(len(row[col]) for row in body)) if body else len(header[col])
        for col in range(len(header))
    ]
    lines = [
        "  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip()
        for row in (header, *body)
    ]
    return "\n".join(lines) + "\n"


def cmd_risk_sweep(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(
        cfg,
        "config",
        ("problem", "estimators", "t_grid"),
        ("n", "seed", "workers", "out"),
    )
    problem = _parse_problem(cfg["problem"], "config.problem")
    if not isinstance(cfg["estimators"], list) or not cfg["estimators"]:
        raise ConfigError("config.estimators must be a nonempty array")
    entries = [
        _estimator_entry(problem, spec, f"config.estimators[{i}]")
        for i, spec in enumerate(cfg["estimators"])
    ]
    names = [name for name, _ in entries]
    if not isinstance(cfg["t_grid"], list) or not cfg["t_grid"]:
        raise ConfigError("config.t_grid must be a nonempty array of numbers")
    t_grid = [_number(t, f"config.t_grid[{i}]") for i, t in enumerate(cfg["t_grid"])]

    n = int(args.n) if args.n is not None else (
        _integer(cfg["n"], "config.n") if "n" in cfg else 200_000
    )
    seed = _resolve_seed(args.seed, cfg)
    workers = int(args.workers) if args.workers is not None else (
        _integer(cfg["workers"], "config.workers") if "workers" in cfg else 1
    )
    out_base = args.out if args.out is not None else cfg.get("out")
    if out_base is None:
        raise ConfigError("an output base path is required (--out or config.out)")

    points = risk.risk_sweep(problem, entries, t_grid, n=n, seed=seed, workers=workers)
    if all(not point.estimates for point in points):
        sys.stdout.write(_summary_table(points, names))
        print("error: every sweep point failed; no output written", file=sys.stderr)
        return 4

    risk_rows = []
    diff_rows = []
    for point in points:
        for name in names:
            if name in point.estimates:
                est = point.estimates[name]
                risk_rows.append(
                    [_fmt(point.t), name, _fmt(est.mean), _fmt(est.std_error),
                     str(est.n), str(est.seed)]
                )
        for (first, second), diff in point.differences.items():
            diff_rows.append(
                [_fmt(point.t), first, second, _fmt(diff.mean), _fmt(diff.std_error)]
            )

    if args.format == "json":
        risks_path = f"{out_base}_risks.json"
        diffs_path = f"{out_base}_differences.json"
        keys = ("t", "estimator", "risk", "stderr", "n", "seed")
        _emit(risks_path, _json_text([
            {"t": float(r[0]), "estimator": r[1], "risk": float(r[2]),
             "stderr": float(r[3]), "n": int(r[4]), "seed": int(r[5])}
            for r in risk_rows
        ]))
        _emit(diffs_path, _json_text([
            {"t": float(r[0]), "estimator_a": r[1], "estimator_b": r[2],
             "diff": float(r[3]), "diff_stderr": float(r[4])}
            for r in diff_rows
        ]))
    else:
        risks_path = f"{out_base}_risks.csv"
        diffs_path = f"{out_base}_differences.csv"
        _emit(risks_path, _csv(["t", "estimator", "risk", "stderr", "n", "seed"], risk_rows))
        _emit(
            diffs_path,
            _csv(["t", "estimator_a", "estimator_b", "diff", "diff_stderr"], diff_rows),
        )

    sys.stdout.write(_summary_table(points, names))
    sys.stdout.write(f"wrote {risks_path} and {diffs_path}\n")
    return 0


# --------------------------------------------------------------------------
# Argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmn-predict",
        description="Predictive densities and risks for mean-mixture-of-normals models.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", help="path to a JSON configuration file")
        sub.add_argument("--out", help="output path (default: stdout)")
        sub.set_defaults(func=func)
        return sub

    sub = add("density", cmd_density, "tabulate a predictive log-density on a grid")
    sub.add_argument("--estimator", help="estimator tag (default mre)")
    sub.add_argument("--x", help="observation, comma-separated")
    sub.add_argument("--grid", help="axis grid as lo:hi:step, shared by all axes")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")

    sub = add("sample", cmd_sample, "draw rows from a mean-mixture model")
    sub.add_argument("--n", type=int, help="number of draws")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")

    sub = add("posterior", cmd_posterior, "report the location posterior given x")
    sub.add_argument("--format", choices=("csv", "json"), default="json")

    sub = add("mre-risk", cmd_mre_risk, "print the exact equivariant-rule risk")
    sub.add_argument("--format", choices=("csv", "json"), default=None)

    sub = add("risk-sweep", cmd_risk_sweep, "paired Monte Carlo risks over a t grid")
    sub.add_argument("--n", type=int, help="replicates per grid point")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--workers", type=int, help="worker processes for chunk evaluation")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")

    return parser


def _join_value_flags(argv: Sequence[str]) -> List[str]:
    """Fuse ``--x``/``--grid`` with their values so leading minus signs in
    coordinates (``--x -1,0``, ``--grid -3:3:0.5``) are not read as flags."""
    out: List[str] = []
    i = 0
    while i < len(argv):
        if argv[i] in ("--x", "--grid") and i + 1 < len(argv):
            out.append(argv[i] + "=" + argv[i + 1])
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = _build_parser().parse_args(_join_value_flags(list(argv)))
    try:
        return args.func(args)
    except (ConfigError, DomainError, NonNormalizableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CapabilityError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ContaminatedEstimateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
