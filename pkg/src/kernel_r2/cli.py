"""Command-line interface: ``kernel-r2 {estimate,test,power,bench,oracle}``.

Reports are JSON (sorted keys) that embed the resolved configuration, so a
report is enough to rerun the computation. Failures exit non-zero and print
a JSON error object on stderr.
"""
import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import (ConstantColumn, KernelR2Error, MissingValue, ParseError,
                     ValidationError)
from .estimators import METHODS, SampleSet, estimate, make_statistic
from .kernels import REAL, ROTATION
from .oracle import (load_joint, population_d_alt_discrete, population_d_discrete,
                     population_eta_discrete, sample_from_joint)
from .permtest import permutation_tests, power_curve
from .simgen import SCENARIOS, ScenarioConfig

SUBCOMMANDS = ("estimate", "test", "power", "bench", "oracle")
SCENARIO_CHOICES = tuple(SCENARIOS) + ("joint",)
_MISSING = {"", "na", "nan", "null", "none"}


# --------------------------------------------------------------------------
# CSV ingestion

def _select(header, spec, what):
    if spec is None:
        return None
    out = []
    for token in (t.strip() for t in spec.split(",") if t.strip()):
        if token in header:
            out.append(header.index(token))
        elif token.lstrip("-").isdigit() and 0 <= int(token) < len(header):
            out.append(int(token))
        else:
            raise ValidationError(f"unknown {what} column {token!r}")
    if not out:
        raise ValidationError(f"no {what} columns selected")
    return out


def load_csv(path, x_columns=None, y_columns=None, standardize=False, y_kind=REAL):
    """Read a comma-separated file with a header row into a SampleSet.

    Columns are selected by name or 0-based index; by default Y is the last
    column and X every other one. ``standardize`` rescales each real column to
    mean 0 and population variance 1. Rotation-valued Y takes 9 columns in
    row-major order and is never standardised.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file", row=1)
    header = [h.strip() for h in rows[0]]
    ycols = _select(header, y_columns, "y") or [len(header) - 1]
    xcols = _select(header, x_columns, "x") or [i for i in range(len(header)) if i not in ycols]
    if y_kind == ROTATION and len(ycols) != 9:
        raise ValidationError(f"rotation-valued y needs exactly 9 columns, got {len(ycols)}")
    if not rows[1:]:
        raise ParseError(f"{path}: no data rows", row=2)
    data = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"line {r}: expected {len(header)} fields, got {len(row)}", row=r)
        for c in xcols + ycols:
            cell = row[c].strip()
            if cell.lower() in _MISSING:
                raise MissingValue(f"line {r}, column {header[c]!r}: missing value",
                                   row=r, column=header[c])
            try:
                data[r - 2, c] = float(cell)
            except ValueError:
                raise ParseError(f"line {r}, column {header[c]!r}: cannot parse {cell!r}",
                                 row=r, column=header[c]) from None
    x = data[:, xcols]
    y = data[:, ycols]
    if standardize:
        x = _standardize(x, [header[c] for c in xcols])
        if y_kind == REAL:
            y = _standardize(y, [header[c] for c in ycols])
    return SampleSet(x, y, REAL, y_kind)


def _standardize(a, names):
    sd = a.std(axis=0)
    bad = np.flatnonzero(sd == 0)
    if bad.size:
        raise ConstantColumn(f"column {names[bad[0]]!r} is constant and cannot be standardised")
    return (a - a.mean(axis=0)) / sd


def write_csv(path, sample):
    """Inverse of :func:`load_csv` for real X and real or rotation Y (no standardisation)."""
    x = sample.x.reshape(sample.n, -1)
    y = sample.y.reshape(sample.n, -1)
    header = [f"x{i}" for i in range(x.shape[1])] + [f"y{i}" for i in range(y.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.hstack([x, y]):
            w.writerow([repr(float(v)) for v in row])
    return ",".join(header[:x.shape[1]]), ",".join(header[x.shape[1]:])


# --------------------------------------------------------------------------
# configuration

def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()] if text else []


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()] if text else []


@dataclass
class RunConfig:
    subcommand: str
    input: Optional[str] = None
    scenario: Optional[str] = None
    joint: Optional[str] = None
    x_cols: Optional[str] = None
    y_cols: Optional[str] = None
    y_kind: str = "real"
    method: List[str] = field(default_factory=lambda: ["knn"])
    kernel_x: Optional[str] = None
    kernel_y: Optional[str] = None
    bandwidth: str = "median"
    k: int = 5
    epsilon: float = 1e-4
    permutations: int = 1000
    replications: int = 500
    alpha: float = 0.05
    lam: float = 0.0
    lambda_grid: List[float] = field(default_factory=list)
    n: int = 100
    n_grid: List[int] = field(default_factory=list)
    repeats: int = 3
    seed: int = 0
    standardize: bool = False
    output: Optional[str] = None
    format: str = "json"
    # execution details; excluded from reports because results do not depend on them
    workers: int = 1

    def to_dict(self):
        out = asdict(self)
        out.pop("workers")
        out.pop("output")
        out["lambda"] = out.pop("lam")
        return out

    def validate(self):
        sc = self.subcommand
        if sc not in SUBCOMMANDS:
            raise ValidationError(f"unknown subcommand {sc!r}")
        if sc == "oracle":
            if not self.input:
                raise ValidationError("oracle needs --input pointing at a joint JSON file")
        elif sc != "bench" and (self.input is None) == (self.scenario is None):
            raise ValidationError("give exactly one of --input or --scenario")
        if self.input is not None and self.scenario is not None:
            raise ValidationError("--input and --scenario are mutually exclusive")
        if self.scenario is not None and self.scenario not in SCENARIO_CHOICES:
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "joint" and not self.joint:
            raise ValidationError("--scenario joint needs --joint FILE")
        if self.y_kind not in ("real", "so3"):
            raise ValidationError("--y-kind must be real or so3")
        for m in self.method:
            if m not in METHODS:
                raise ValidationError(f"unknown method {m!r}; expected one of {METHODS}")
        if sc in ("estimate", "bench") and len(self.method) != 1:
            raise ValidationError(f"{sc} takes a single --method")
        if self.bandwidth != "median":
            try:
                bw = float(self.bandwidth)
            except ValueError:
                raise ValidationError("--bandwidth must be 'median' or a positive number") from None
            if not bw > 0:
                raise ValidationError("--bandwidth must be positive")
        checks = [(self.k >= 1, "--k must be >= 1"),
                  (self.epsilon > 0, "--epsilon must be > 0"),
                  (self.permutations >= 1, "--permutations must be >= 1"),
                  (self.replications >= 1, "--replications must be >= 1"),
                  (0 < self.alpha < 1, "--alpha must lie in (0, 1)"),
                  (0 <= self.lam <= 1, "--lambda must lie in [0, 1]"),
                  (all(0 <= v <= 1 for v in self.lambda_grid), "--lambda-grid values must lie in [0, 1]"),
                  (self.n >= 1, "--n must be >= 1"),
                  (all(v >= 3 for v in self.n_grid), "--n-grid values must be >= 3"),
                  (self.repeats >= 1, "--repeats must be >= 1"),
                  (self.workers >= 1, "--workers must be >= 1"),
                  (self.format in ("json", "csv"), "--format must be json or csv")]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)
        return self


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser():
    parser = _Parser(prog="kernel-r2", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = _Parser(add_help=False)
    a = common.add_argument
    a("--input", help="CSV data file (oracle: joint JSON file)")
    a("--scenario", choices=SCENARIO_CHOICES, help="generate data instead of reading --input")
    a("--joint", help="joint JSON file for --scenario joint")
    a("--x-cols", help="comma-separated X column names or indices")
    a("--y-cols", help="comma-separated Y column names or indices")
    a("--y-kind", default="real", choices=("real", "so3"))
    a("--method", default="knn", help=f"one of {', '.join(METHODS)}; test/power accept a comma list")
    a("--kernel-x", choices=("gaussian", "brownian", "so3"))
    a("--kernel-y", choices=("gaussian", "brownian", "so3"))
    a("--bandwidth", default="median", help="'median' or a positive number")
    a("--k", type=int, default=5)
    a("--epsilon", type=float, default=1e-4)
    a("--permutations", type=int, default=1000)
    a("--replications", type=int, default=500)
    a("--alpha", type=float, default=0.05)
    a("--lambda", dest="lam", type=float, default=0.0)
    a("--lambda-grid", type=_floats, default=[])
    a("--n", type=int, default=100)
    a("--n-grid", type=_ints, default=[])
    a("--repeats", type=int, default=3, help="timed repetitions per n (bench)")
    a("--seed", type=int, default=0)
    a("--standardize", action="store_true")
    a("--output", help="write the report here instead of stdout")
    a("--format", default="json", choices=("json", "csv"))
    a("--workers", type=int, default=1)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(argv):
    ns = build_parser().parse_args(argv)
    kw = vars(ns)
    kw["method"] = [m.strip() for m in kw["method"].split(",") if m.strip()]
    return RunConfig(**kw).validate()


# --------------------------------------------------------------------------
# data and statistics

def _y_kind(config):
    return ROTATION if config.y_kind == "so3" else REAL


def load_sample(config, n=None):
    n = config.n if n is None else n
    if config.input is not None:
        return load_csv(config.input, config.x_cols, config.y_cols, config.standardize,
                        _y_kind(config))
    scenario = config.scenario or "heteroscedastic"
    if scenario == "joint":
        return sample_from_joint(load_joint(config.joint, _y_kind(config)), n, config.seed)
    return ScenarioConfig(scenario, n, config.lam, config.seed).generate()


def _options(config):
    return {"kernel_x": config.kernel_x, "kernel_y": config.kernel_y,
            "bandwidth": config.bandwidth, "k": config.k, "epsilon": config.epsilon,
            "seed": config.seed}


def _statistics(config):
    return {m: make_statistic(m, **_options(config)) for m in config.method}


# --------------------------------------------------------------------------
# subcommands

def run_estimate(config):
    sample = load_sample(config)
    method = config.method[0]
    result = estimate(sample, method, **_options(config))
    body = {"method": method, "d_hat": float(result)} if method == "xi" else result.to_dict()
    return {"command": "estimate", "config": config.to_dict(), "n": sample.n, "result": body}


def run_test(config):
    sample = load_sample(config)
    results = permutation_tests(_statistics(config), sample, config.permutations,
                                config.seed, config.workers)
    return {"command": "test", "config": config.to_dict(), "n": sample.n,
            "results": {m: r.to_dict() for m, r in results.items()}}


def run_power(config):
    if config.scenario in (None, "joint"):
        raise ValidationError("power needs a generated --scenario (heteroscedastic, so3 or song)")
    grid = config.lambda_grid or [config.lam]
    estimates = power_curve(config.scenario, _statistics(config), config.n, grid,
                            config.replications, config.permutations, config.alpha,
                            config.seed, config.workers)
    return {"command": "power", "config": config.to_dict(),
            "power": [e.to_dict() for e in estimates]}


BENCH_GRIDS = {"knn": [500, 1000, 2000], "rkhs": [200, 400, 800]}


def run_bench(config):
    """Wall time of one estimator call per n; the log-log slope estimates the cost exponent."""
    method = config.method[0]
    grid = config.n_grid or BENCH_GRIDS.get(method, [200, 400, 800])
    opts = _options(config)
    rows = []
    for n in grid:
        sample = load_sample(config, n)
        if config.input is not None:
            sample = sample.take(np.arange(min(n, sample.n)))
        estimate(sample, method, **opts)  # warm-up (includes JIT compilation)
        times = []
        for _ in range(config.repeats):
            start = time.perf_counter()
            estimate(sample, method, **opts)
            times.append(time.perf_counter() - start)
        rows.append({"n": int(sample.n), "seconds": min(times), "all_seconds": times})
    ns = np.log([r["n"] for r in rows])
    ts = np.log([r["seconds"] for r in rows])
    slope = float(np.polyfit(ns, ts, 1)[0]) if len(rows) > 1 else None
    return {"command": "bench", "config": config.to_dict(), "method": method,
            "timings": rows, "slope": slope}


def run_oracle(config):
    from .estimators import resolve_kernel
    joint = load_joint(config.input, _y_kind(config))
    kernel = resolve_kernel(config.kernel_y, joint.y_points, joint.y_kind, config.bandwidth)
    return {"command": "oracle", "config": config.to_dict(), "kernel_y": kernel.to_dict(),
            "d": population_d_discrete(joint, kernel),
            "d_alt": population_d_alt_discrete(joint, kernel),
            "eta": population_eta_discrete(joint, kernel)}


RUNNERS = {"estimate": run_estimate, "test": run_test, "power": run_power,
           "bench": run_bench, "oracle": run_oracle}


# --------------------------------------------------------------------------
# output

def power_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "statistic", "power", "se"])
    for row in report["power"]:
        w.writerow([repr(row["lambda"]), row["statistic"], repr(row["power"]), repr(row["se"])])
    return buf.getvalue()


def render(report, fmt):
    if fmt == "csv":
        if report["command"] != "power":
            raise ValidationError("--format csv is only available for power")
        return power_csv(report)
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _error_payload(err):
    out = {"error": type(err).__name__, "message": str(err)}
    for attr in ("row", "column", "y"):
        val = getattr(err, attr, None)
        if val is not None:
            out[attr] = val
    return out


def main(argv=None):
    try:
        config = config_from_args(sys.argv[1:] if argv is None else argv)
        report = RUNNERS[config.subcommand](config)
        text = render(report, config.format)
    except SystemExit:
        raise
    except (KernelR2Error, ValueError, OSError) as err:
        sys.stderr.write(json.dumps(_error_payload(err), sort_keys=True) + "\n")
        return 2 if isinstance(err, ValidationError) else 1
    if config.output:
        with open(config.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
