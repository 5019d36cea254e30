"""Benchmark harness: ``dfopt run | compare | replay | functions``.

Exit status: 0 on success, 2 on a usage or configuration error, 3 on a
numerical failure. ``replay`` exits with 1 when a report disagrees with its
trace.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from . import benchmarks
from .acquisition import EI, MPI, UCB, BayesOptConfig, bayesopt_run
from .core import DfoptError, NoiseModel, NumericalError, Sense, Trace, to_jsonable
from .direct import DEFAULT_EPSILON, direct_run
from .gp import Kernel, Matern, SquaredExponential, SquaredExponentialARD, SquaredExponentialWidth
from .lipo import adalipo_run, lipo_run
from .mcs import mcs_run
from .shubert import shubert_run

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
ALGORITHMS = ("bayes-mpi", "bayes-ei", "bayes-ucb", "shubert", "direct", "lipo", "adalipo", "mcs")
ORACLE_POINTS = 10**6


class UsageError(DfoptError, ValueError):
    pass


@dataclass
class RunConfig:
    algorithm: str
    function: str
    budget: int = 100
    seed: int = 0
    dim: int | None = None
    lipschitz: float | None = None
    xi: float = 0.0
    nu: float = 1.0
    delta: float = 0.1
    p: float | None = None
    alpha: float | None = None
    epsilon: float = DEFAULT_EPSILON
    tolerance: float = 1e-4
    smax: int | None = None
    kernel: str = "se"
    noise: float = 0.0
    init_samples: int | None = None
    inner_budget: int = 200
    out: str | None = None

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.budget < 1:
            raise UsageError("--budget must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.algorithm in ("shubert", "lipo") and self.lipschitz is None:
            raise UsageError(f"{self.algorithm} requires --lipschitz")
        if self.algorithm == "adalipo" and (self.p is None or self.alpha is None):
            raise UsageError("adalipo requires --p and --alpha")
        if self.noise < 0:
            raise UsageError("--noise must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


@dataclass
class RunReport:
    algorithm: str
    function: str
    seed: int
    budget: int
    evaluations: int
    incumbent_value: float
    incumbent_point: list[float]
    wall_time: float
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))


def parse_kernel(spec: str, dim: int) -> Kernel:
    """``se``, ``se-width:BETA``, ``ard:B1,B2,...``, ``matern:ORDER`` (0.5, 1.5 or 2.5)."""
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    try:
        if name == "se":
            return SquaredExponential()
        if name in ("se-width", "sew"):
            return SquaredExponentialWidth(float(arg))
        if name == "ard":
            beta = tuple(float(b) for b in arg.split(","))
            if len(beta) == 1:
                beta = beta * dim
            return SquaredExponentialARD(beta)
        if name == "matern":
            return Matern(float(arg) if arg else 2.5)
    except ValueError as exc:
        raise UsageError(f"bad kernel {spec!r}: {exc}") from None
    raise UsageError(f"unknown kernel {spec!r}")


def _resolve_function(config: RunConfig) -> benchmarks.TestFunction:
    try:
        return benchmarks.get_function(config.function, config.dim)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from None


def execute(config: RunConfig) -> tuple[Trace, benchmarks.TestFunction]:
    """Run one configuration and return its trace."""
    config.validate()
    fn = _resolve_function(config)
    try:
        return _dispatch(config, fn), fn
    except ValueError as exc:
        # parameter checks inside the algorithms surface as plain ValueError
        if isinstance(exc, DfoptError):
            raise
        raise UsageError(str(exc)) from None


def _dispatch(config: RunConfig, fn: benchmarks.TestFunction) -> Trace:
    alg = config.algorithm
    domain = fn.domain
    if alg.startswith("bayes-"):
        acq = {"bayes-mpi": lambda: MPI(config.xi), "bayes-ei": EI, "bayes-ucb": lambda: UCB(config.nu, config.delta)}
        bo = BayesOptConfig(
            kernel=parse_kernel(config.kernel, fn.dim),
            acquisition=acq[alg](),
            init_samples=config.init_samples,
            budget=config.budget,
            inner_budget=config.inner_budget,
            noise=NoiseModel(config.noise),
            seed=config.seed,
        )
        return bayesopt_run(fn, domain, bo)
    if alg == "shubert":
        if fn.dim != 1:
            raise UsageError(f"shubert needs a 1-d function, {fn.name} has dim {fn.dim}")
        return shubert_run(fn, domain.lower[0], domain.upper[0], config.lipschitz, config.tolerance, config.budget)
    if alg == "direct":
        return direct_run(fn, domain, config.budget, config.epsilon)
    if alg == "lipo":
        return lipo_run(fn, domain, config.lipschitz, config.budget, config.seed, sense=Sense.MINIMIZE)
    if alg == "adalipo":
        return adalipo_run(fn, domain, config.p, config.alpha, config.budget, config.seed, sense=Sense.MINIMIZE)
    if alg == "mcs":
        return mcs_run(fn, domain, config.budget, config.smax)
    raise UsageError(f"unknown algorithm {alg!r}")


def report_from_trace(config: RunConfig, trace: Trace, wall_time: float = 0.0) -> RunReport:
    return RunReport(
        algorithm=config.algorithm,
        function=config.function,
        seed=config.seed,
        budget=config.budget,
        evaluations=len(trace),
        incumbent_value=trace.best_value,
        incumbent_point=[float(v) for v in trace.best_point],
        wall_time=wall_time,
        extras=to_jsonable(trace.extras),
    )


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def run_benchmark(config: RunConfig) -> RunReport:
    """Execute ``config``; if ``config.out`` is set, write ``trace.csv``, ``trace.json`` and ``report.json`` there."""
    start = time.perf_counter()
    trace, _ = execute(config)
    report = report_from_trace(config, trace, time.perf_counter() - start)
    if config.out:
        out = Path(config.out)
        _atomic_write(out / "trace.csv", trace.to_csv())
        _atomic_write(out / "trace.json", trace.to_json(config.to_dict(), config.seed) + "\n")
        _atomic_write(out / "report.json", json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    return report


def replay(trace_doc: dict, report_doc: dict, trace_csv: str | None = None) -> list[str]:
    """Differences between a report and what its trace implies (empty when consistent)."""
    trace = Trace.from_dict(trace_doc)
    problems = []
    if trace_csv is not None and trace_csv != trace.to_csv():
        problems.append("trace.csv and trace.json disagree")
    if len(trace) != report_doc["evaluations"]:
        problems.append(f"evaluations: trace has {len(trace)}, report says {report_doc['evaluations']}")
    if len(trace):
        if trace.best_value != report_doc["incumbent_value"]:
            problems.append(f"incumbent value: trace gives {trace.best_value!r}, report says {report_doc['incumbent_value']!r}")
        if trace.best_point.tolist() != report_doc["incumbent_point"]:
            problems.append("incumbent point differs")
    return problems


@dataclass
class ComparisonRow:
    algorithm: str
    seed: int
    incumbent: float
    oracle_min: float
    error: float
    evaluations: int


def oracle_min(fn: benchmarks.TestFunction) -> float:
    resolution = max(2, min(201, int(math.floor(ORACLE_POINTS ** (1.0 / fn.dim) + 1e-9))))
    return benchmarks.grid_oracle(fn, resolution)[0]


def compare(configs: Sequence[RunConfig]) -> tuple[list[ComparisonRow], dict[str, float]]:
    """Run every config on a common function; returns rows and the per-algorithm median error."""
    if len(configs) < 2:
        raise UsageError("compare needs at least two runs")
    fns: set[str] = set()
    resolved = []
    for c in configs:
        fn = _resolve_function(c)
        fns.add(fn.name)
        resolved.append(fn)
    if len(fns) != 1:
        raise UsageError(f"compare needs a single function, got {sorted(fns)}")
    floor = oracle_min(resolved[0])
    rows = []
    for c in configs:
        trace, _ = execute(c)
        rows.append(ComparisonRow(c.algorithm, c.seed, trace.best_value, floor, trace.best_value - floor, len(trace)))
    medians = {}
    for alg in dict.fromkeys(r.algorithm for r in rows):
        medians[alg] = statistics.median(r.error for r in rows if r.algorithm == alg)
    return rows, medians


def comparison_csv(rows: Sequence[ComparisonRow], medians: dict[str, float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "seed", "incumbent", "oracle_min", "error", "evaluations", "median_error"])
    for r in rows:
        w.writerow([r.algorithm, r.seed, repr(r.incumbent), repr(r.oracle_min), repr(r.error), r.evaluations, repr(medians[r.algorithm])])
    return buf.getvalue()


def comparison_text(rows: Sequence[ComparisonRow], medians: dict[str, float]) -> str:
    lines = [f"{'algorithm':<10} {'seed':>6} {'incumbent':>14} {'error':>12} {'evals':>6} {'median err':>12}"]
    for r in rows:
        lines.append(
            f"{r.algorithm:<10} {r.seed:>6} {r.incumbent:>14.6g} {r.error:>12.4g} {r.evaluations:>6} {medians[r.algorithm]:>12.4g}"
        )
    return "\n".join(lines)


# -- argument handling --------------------------------------------------

_FLAG_TYPES = {
    "function": str, "dim": int, "budget": int, "seed": int, "lipschitz": float, "xi": float, "nu": float,
    "delta": float, "p": float, "alpha": float, "epsilon": float, "tolerance": float, "smax": int,
    "kernel": str, "noise": float, "init_samples": int, "inner_budget": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    for name, typ in _FLAG_TYPES.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--config", type=Path, help="JSON file with run settings; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one algorithm on one test function")
    run.add_argument("--algorithm", choices=ALGORITHMS, default=None)
    _add_run_flags(run)
    run.add_argument("--out", type=str, default=None, help="directory for trace.csv, trace.json, report.json")

    cmp_ = sub.add_parser("compare", help="compare algorithms on one function across seeds")
    cmp_.add_argument("--algorithms", required=True, help="comma-separated algorithm names")
    cmp_.add_argument("--seeds", default=None, help="comma-separated seeds (default: --seed)")
    _add_run_flags(cmp_)
    cmp_.add_argument("--out", type=str, default=None, help="write comparison.csv here")

    rep = sub.add_parser("replay", help="check that a report is reconstructible from its trace")
    rep.add_argument("directory", type=Path)

    sub.add_parser("functions", help="list the shipped test functions")
    return parser


def _settings(args: argparse.Namespace) -> dict:
    settings: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in known:
                raise UsageError(f"unknown config key {k!r}")
            settings[key] = v
    for name in list(_FLAG_TYPES) + ["algorithm", "out"]:
        v = getattr(args, name, None)
        if v is not None:
            settings[name] = v
    if "seed" not in settings:
        env = os.environ.get("DFOPT_SEED")
        if env is not None:
            try:
                settings["seed"] = int(env)
            except ValueError:
                raise UsageError(f"DFOPT_SEED must be an integer, got {env!r}") from None
    return settings


def _make_config(settings: dict) -> RunConfig:
    for required in ("algorithm", "function"):
        if settings.get(required) is None:
            raise UsageError(f"--{required} is required")
    try:
        return RunConfig(**settings)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "functions":
            for name in benchmarks.available():
                fn = benchmarks.get_function(name)
                print(f"{name:<16} {fn.description}")
            return EXIT_OK
        if args.command == "replay":
            trace_doc = json.loads((args.directory / "trace.json").read_text())
            report_doc = json.loads((args.directory / "report.json").read_text())
            csv_path = args.directory / "trace.csv"
            problems = replay(trace_doc, report_doc, csv_path.read_text() if csv_path.exists() else None)
            for p in problems:
                print(p, file=sys.stderr)
            print("consistent" if not problems else "MISMATCH")
            return EXIT_OK if not problems else EXIT_MISMATCH
        settings = _settings(args)
        if args.command == "run":
            report = run_benchmark(_make_config(settings))
            print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
            return EXIT_OK
        # compare
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [settings.get("seed", 0)]
        out = settings.pop("out", None)
        configs = []
        for alg in args.algorithms.split(","):
            for seed in seeds:
                configs.append(_make_config({**settings, "algorithm": alg.strip(), "seed": seed}))
        rows, medians = compare(configs)
        print(comparison_text(rows, medians))
        if out:
            _atomic_write(Path(out) / "comparison.csv", comparison_csv(rows, medians))
        return EXIT_OK
    except UsageError as exc:
        print(f"dfopt: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"dfopt: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DfoptError as exc:
        print(f"dfopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"dfopt: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
