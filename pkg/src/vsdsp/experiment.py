"""Repeated optimization runs, convergence traces and their summaries."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .benchmarks import PROBLEMS, generate_doe
from .design_space import DesignSpaceError, ProblemDefinition
from .ga import GAConfig
from .problem_file import load_problem_file
from .strategies import RunRecord, run_io, run_somvsp, run_vskernel_bo

__all__ = [
    "TRACE_HEADER",
    "ConfigError",
    "ExperimentConfig",
    "RepetitionSummary",
    "ResultSummary",
    "compare_runs",
    "emit_traces",
    "load_problem",
    "read_traces",
    "run_experiment",
    "run_repetition",
    "summarize",
    "trace_rows",
]

METHODS = ("io", "ba", "spw", "dvw")
KERNELS = ("cs", "lv")
TRACE_HEADER = (
    "method,kernel,a,rep,iteration,evaluations,objective,feasible,"
    "best_feasible,sub_problem,remaining_sub_problems"
).split(",")


class ConfigError(ValueError):
    pass


def load_problem(problem: str) -> ProblemDefinition:
    if problem in PROBLEMS:
        return PROBLEMS[problem]()
    if Path(problem).is_file():
        return load_problem_file(problem)
    raise ConfigError(f"unknown problem {problem!r}: expected one of {sorted(PROBLEMS)} or a problem file")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    method: str
    kernel: str = "cs"
    a: float = 2.0
    init_size: int | None = None  # default: one sample per sub-problem dimension
    budget: int = 0
    repetitions: int = 1
    seed: int = 0
    thresholds: Mapping[str, float] = field(default_factory=dict)
    ga_pop: int | None = None
    ga_gens: int = 50
    out: str | None = None
    jobs: int = 1

    def validate(self, problem: ProblemDefinition) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.budget < 0:
            raise ConfigError("budget must be non-negative")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.init_size is not None and self.init_size < problem.n_sub_problems:
            raise ConfigError(f"init size must be at least the number of sub-problems ({problem.n_sub_problems})")
        if self.method == "ba" and not self.a > 0:
            raise ConfigError("a must be positive")
        known = {c.name for c in problem.constraints}
        unknown = set(self.thresholds) - known
        if unknown:
            raise ConfigError(f"thresholds given for unknown constraints {sorted(unknown)}")
        if any(not (t >= 0) for t in self.thresholds.values()):
            raise ConfigError("EV thresholds must be non-negative")
        if self.ga_pop is not None and self.ga_pop < 2 or self.ga_gens < 0:
            raise ConfigError("GA population must be >= 2 and generations >= 0")

    def ga(self) -> GAConfig:
        return GAConfig(pop_size=self.ga_pop, generations=self.ga_gens)

    def init(self, problem: ProblemDefinition) -> int:
        return self.init_size if self.init_size is not None else sum(sp.dim for sp in problem.sub_problems)

    @property
    def label(self) -> str:
        return f"{self.method}_{self.kernel}" + (f"_a{self.a:g}" if self.method == "ba" else "")


def run_repetition(config: ExperimentConfig, rep: int, problem: ProblemDefinition | None = None) -> RunRecord:
    """One repetition: the generator seeded with ``seed + rep`` drives the
    DoE first, then every model fit and acquisition search in order."""
    problem = problem or load_problem(config.problem)
    rng = np.random.default_rng(config.seed + rep)
    doe = generate_doe(problem, config.init(problem), rng)
    ga, t = config.ga(), dict(config.thresholds)
    if config.method == "io":
        return run_io(problem, doe.points, config.budget, config.kernel, rng, ga, t)
    if config.method == "ba":
        return run_somvsp(problem, doe.points, config.budget, config.kernel, config.a, rng, ga, t)
    return run_vskernel_bo(problem, doe.points, config.budget, config.method, config.kernel, rng, ga, t)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def trace_rows(record: RunRecord, config: ExperimentConfig, rep: int) -> list[list[str]]:
    a = _fmt(config.a) if config.method == "ba" else ""
    return [
        [
            config.method,
            config.kernel,
            a,
            str(rep),
            str(r.iteration),
            str(r.evaluations),
            _fmt(r.objective),
            str(int(r.feasible)),
            _fmt(r.best_feasible),
            str(r.sub_problem),
            str(r.remaining_sub_problems),
        ]
        for r in record.rows
    ]


def emit_traces(records: Sequence[RunRecord], config: ExperimentConfig, out: str | Path) -> list[Path]:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for rep, record in enumerate(records):
            path = out / f"{config.label}_rep{rep:02d}.csv"
            with path.open("w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TRACE_HEADER)
                w.writerows(trace_rows(record, config, rep))
            paths.append(path)
    except OSError as exc:
        raise OSError(f"cannot write traces to {out}: {exc}") from exc
    return paths


# -- summaries -----------------------------------------------------------------


@dataclass(frozen=True)
class RepetitionSummary:
    rep: int
    final_best: float
    evals_to_first_feasible: float
    converged_sub_problem: int | None


@dataclass(frozen=True)
class ResultSummary:
    label: str
    reps: tuple[RepetitionSummary, ...]
    median: float
    q1: float
    q3: float
    outliers: tuple[int, ...]  # repetitions outside 1.5 IQR of the quartiles

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    def to_json(self) -> dict:
        d = asdict(self)
        d["iqr"] = self.iqr
        return d


def _rep_summary(rep: int, rows: list[dict]) -> RepetitionSummary:
    final = float(rows[-1]["best_feasible"])
    first = next((int(r["evaluations"]) for r in rows if r["feasible"] == "1"), math.inf)
    best_sp, best_val = None, math.inf
    for r in rows:
        if r["feasible"] == "1" and float(r["objective"]) < best_val:
            best_val, best_sp = float(r["objective"]), int(r["sub_problem"])
    return RepetitionSummary(rep, final, first, best_sp)


def summarize(label: str, traces: Mapping[int, list[dict]]) -> ResultSummary:
    """Aggregate per-repetition trace rows (as read back from CSV)."""
    reps = tuple(_rep_summary(rep, rows) for rep, rows in sorted(traces.items()))
    finals = np.array([r.final_best for r in reps])
    q1, med, q3 = (float(v) for v in np.percentile(finals, [25, 50, 75]))
    lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
    finite = np.isfinite(q1) and np.isfinite(q3)
    outliers = tuple(r.rep for r in reps if finite and not lo <= r.final_best <= hi)
    return ResultSummary(label, reps, med, q1, q3, outliers)


def _record_dicts(record: RunRecord, config: ExperimentConfig, rep: int) -> list[dict]:
    return [dict(zip(TRACE_HEADER, row)) for row in trace_rows(record, config, rep)]


def _worker(args):
    config, rep = args
    return run_repetition(config, rep)


def run_experiment(config: ExperimentConfig) -> tuple[ResultSummary, list[RunRecord]]:
    problem = load_problem(config.problem)
    config.validate(problem)
    reps = range(config.repetitions)
    if config.jobs > 1 and config.repetitions > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_worker, [(config, r) for r in reps]))
    else:
        records = [run_repetition(config, r, problem) for r in reps]
    summary = summarize(config.label, {r: _record_dicts(rec, config, r) for r, rec in zip(reps, records)})
    if config.out:
        out = Path(config.out)
        emit_traces(records, config, out)
        meta = {
            "problem": problem.name,
            "method": config.method,
            "kernel": config.kernel,
            "a": config.a,
            "init_size": config.init(problem),
            "budget": config.budget,
            "repetitions": config.repetitions,
            "seed": config.seed,
            "thresholds": dict(config.thresholds),
            "ga_pop": config.ga_pop,
            "ga_gens": config.ga_gens,
        }
        (out / f"{config.label}_config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / f"{config.label}_summary.json").write_text(
            json.dumps(summary.to_json(), indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8"
        )
    return summary, records


def _json_default(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    raise TypeError(type(x))


# -- comparison ---------------------------------------------------------------


def read_traces(directory: str | Path) -> dict[str, dict[int, list[dict]]]:
    """Trace rows grouped by run label then repetition."""
    out: dict[str, dict[int, list[dict]]] = {}
    for path in sorted(Path(directory).glob("*_rep*.csv")):
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != TRACE_HEADER:
                raise ConfigError(f"{path}: unexpected trace header")
            rows = list(reader)
        if not rows:
            continue
        label = path.name.rsplit("_rep", 1)[0]
        out.setdefault(label, {})[int(rows[0]["rep"])] = rows
    return out


def _configs(directory: Path) -> list[dict]:
    return [json.loads(p.read_text(encoding="utf-8")) for p in sorted(directory.glob("*_config.json"))]


def evaluations_to_within(rows: list[dict], target: float, rel: float = 0.05) -> float:
    """First evaluation count whose incumbent is within ``rel`` of ``target`` (inf if never)."""
    bound = target + rel * abs(target)
    for r in rows:
        if float(r["best_feasible"]) <= bound:
            return int(r["evaluations"])
    return math.inf


def compare_runs(dirs: Iterable[str | Path], reference: float | None = None) -> dict:
    """Rank methods by the mean of their median best-feasible curve (lower is better)."""
    groups: dict[str, dict[int, list[dict]]] = {}
    shared = None
    for d in dirs:
        d = Path(d)
        for cfg in _configs(d):
            key = (cfg["problem"], cfg["init_size"], cfg["budget"])
            if shared is None:
                shared = key
            elif key != shared:
                raise ConfigError(f"traces in {d} do not share problem/init/budget {shared}")
        for label, reps in read_traces(d).items():
            if label in groups:
                raise ConfigError(f"run {label!r} appears in several directories")
            groups[label] = reps
    if not groups:
        raise ConfigError("no traces found")
    lengths = {len(rows) for reps in groups.values() for rows in reps.values()}
    if len(lengths) != 1:
        raise ConfigError("traces differ in length (problem, init size or budget mismatch)")
    n = lengths.pop()
    # evaluation count at each 10% of the trace (ceil so 100% is the last row)
    deciles = {f"{10 * k}%": max(1, math.ceil(n * k / 10)) for k in range(1, 11)}
    report = {}
    for label, reps in groups.items():
        curves = np.array([[float(r["best_feasible"]) for r in rows] for rows in reps.values()])
        median_curve = np.median(curves, axis=0)
        summary = summarize(label, reps)
        conv: dict[str, int] = {}
        for r in summary.reps:
            key = str(r.converged_sub_problem)
            conv[key] = conv.get(key, 0) + 1
        finite = median_curve[np.isfinite(median_curve)]
        entry = {
            "median_curve": {p: {"evaluations": k, "best_feasible": float(median_curve[k - 1])} for p, k in deciles.items()},
            # evaluations spent without a feasible median incumbent count first
            "infeasible_prefix": int(np.sum(~np.isfinite(median_curve))),
            "score": float(np.mean(finite)) if len(finite) else math.inf,
            "final_quartiles": [summary.q1, summary.median, summary.q3],
            "converged_sub_problems": conv,
        }
        if reference is not None:
            hits = [evaluations_to_within(rows, reference) for rows in reps.values()]
            entry["median_evals_to_within_5pct"] = float(np.median(hits))
        report[label] = entry
    ranking = sorted(report, key=lambda k: (report[k]["infeasible_prefix"], report[k]["score"], k))
    return {"ranking": ranking, "methods": report}
