"""Synthetic benchmark protocol: simulated judge, traces, summary statistics.

Each run initializes with a 2D+1 Latin-hypercube design fed through a
simulated preference judge, then alternates proposal and comparison for a
fixed number of iterations.  The judge compares true objective values with
an equivalence tolerance ``eps`` (minimization: lower is preferred).
Traces record the true objective at the incumbent after every step;
repeats use independently derived seeds and are summarized by median and
interquartile range.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .acquisition import AcquisitionKind, ProposalConfig
from .experiment import ExperimentConfig, PreferenceExperiment
from .model import Outcome
from .vi import FitConfig

__all__ = [
    "TestFunction",
    "TEST_FUNCTIONS",
    "TraceRow",
    "SummaryRow",
    "simulated_pref",
    "run_benchmark",
    "summarize",
    "write_trace_csv",
    "read_trace_csv",
    "write_summary_csv",
]


@dataclass(frozen=True)
class TestFunction:
    """A bounded synthetic objective with an optionally known minimum."""

    name: str
    dim: int
    box: tuple
    fn: Callable[[np.ndarray], float]
    minimum: float | None = None

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise ValueError(f"{self.name} expects {self.dim} coordinates")
        return float(self.fn(x))


def _branin(x: np.ndarray) -> float:
    a, b, c = 1.0, 5.1 / (4.0 * np.pi**2), 5.0 / np.pi
    r, s, t = 6.0, 10.0, 1.0 / (8.0 * np.pi)
    return (a * (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2
            + s * (1.0 - t) * np.cos(x[0]) + s)


def _six_hump_camel(x: np.ndarray) -> float:
    x1, x2 = x
    return ((4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2
            + x1 * x2 + (-4.0 + 4.0 * x2**2) * x2**2)


_H3_A = np.array([
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
])
_H3_P = 1e-4 * np.array([
    [3689.0, 1170.0, 2673.0],
    [4699.0, 4387.0, 7470.0],
    [1091.0, 8732.0, 5547.0],
    [381.0, 5743.0, 8828.0],
])
_H3_C = np.array([1.0, 1.2, 3.0, 3.2])


def _hartmann3(x: np.ndarray) -> float:
    inner = np.sum(_H3_A * (x - _H3_P) ** 2, axis=1)
    return -float(np.sum(_H3_C * np.exp(-inner)))


_SPHERE_SHIFT = np.array([0.5, -0.3])


def _shifted_sphere(x: np.ndarray) -> float:
    return float(np.sum((x - _SPHERE_SHIFT) ** 2))


TEST_FUNCTIONS: dict[str, TestFunction] = {
    f.name: f
    for f in [
        TestFunction("branin", 2, ((-5.0, 10.0), (0.0, 15.0)), _branin,
                     minimum=0.397887),
        TestFunction("camel", 2, ((-3.0, 3.0), (-2.0, 2.0)), _six_hump_camel,
                     minimum=-1.0316),
        TestFunction("hartmann3", 3, ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)),
                     _hartmann3, minimum=-3.86278),
        TestFunction("sphere", 2, ((-2.0, 2.0), (-2.0, 2.0)), _shifted_sphere,
                     minimum=0.0),
    ]
}


def simulated_pref(f_test, x1, x2, eps: float) -> Outcome:
    """Judge x1 against x2 by true objective values (lower preferred).

    Equivalent when |f(x1) - f(x2)| <= eps; otherwise the smaller value
    wins.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    v1, v2 = f_test(x1), f_test(x2)
    if abs(v1 - v2) <= eps:
        return Outcome.EQUIVALENT
    if v1 < v2:
        return Outcome.FIRST_BETTER
    return Outcome.FIRST_WORSE


@dataclass(frozen=True)
class TraceRow:
    strategy: str
    function: str
    eps: float
    repeat: int
    iteration: int
    best_value: float


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    function: str
    eps: float
    iteration: int
    median: float
    q25: float
    q75: float


#: fit effort used by benchmark runs; warm starts keep this adequate
BENCH_FIT = FitConfig(mc_samples=8, max_steps=300, step_size=0.05,
                      convergence_window=40, convergence_tol=1e-3)
BENCH_PROPOSAL = ProposalConfig(posterior_samples=32, candidate_count=512,
                                local_refinement_steps=32)


def run_benchmark(function: TestFunction | str, strategy, eps: float,
                  iterations: int, repeats: int, seed: int,
                  fit_config: FitConfig | None = None,
                  proposal_config: ProposalConfig | None = None) -> list[TraceRow]:
    """Run the full protocol and return one trace row per step per repeat.

    Rows per repeat: 2D+1 covering initialization (iterations 0..2D) plus
    ``iterations`` proposal steps.  Per-repeat seeds derive from ``seed``
    through a spawned seed sequence, so repeats are independent and
    individually reproducible.
    """
    if isinstance(function, str):
        function = TEST_FUNCTIONS[function]
    strategy = AcquisitionKind(strategy)
    fit_config = fit_config or BENCH_FIT
    proposal_config = proposal_config or BENCH_PROPOSAL
    refit = "never" if strategy is AcquisitionKind.RANDOM_SEARCH else "always"
    config = ExperimentConfig(acquisition=strategy, fit=fit_config,
                              proposal=proposal_config, refit=refit)
    children = np.random.SeedSequence(seed).spawn(repeats)
    rows: list[TraceRow] = []
    for repeat, child in enumerate(children):
        rows.extend(_run_repeat(function, strategy, eps, iterations, repeat,
                                child, config))
    return rows


def _run_repeat(function: TestFunction, strategy: AcquisitionKind, eps: float,
                iterations: int, repeat: int, seed_seq, config) -> list[TraceRow]:
    exp = PreferenceExperiment(
        np.asarray(function.box, dtype=float), config=config,
        seed=np.random.default_rng(seed_seq),
    )
    rows: list[TraceRow] = []

    def emit(iteration: int, value: float):
        rows.append(TraceRow(strategy=strategy.value, function=function.name,
                             eps=eps, repeat=repeat, iteration=iteration,
                             best_value=value))

    # bootstrap: the first pair covers design points 0 and 1
    x1, x2 = exp.find_next()
    emit(0, function(x1))
    exp.prefer(x1, x2, simulated_pref(function, x1, x2, eps))
    emit(1, function(exp.best))
    n_init = 2 * function.dim + 1
    for k in range(2, n_init):
        x1, x2 = exp.find_next()
        exp.prefer(x1, x2, simulated_pref(function, x1, x2, eps))
        emit(k, function(exp.best))
    for k in range(iterations):
        x1, x2 = exp.find_next()
        exp.prefer(x1, x2, simulated_pref(function, x1, x2, eps))
        emit(n_init + k, function(exp.best))
    return rows


def summarize(rows: list[TraceRow]) -> list[SummaryRow]:
    """Per-iteration median and quartiles over repeats, per trace group.

    Groups are (strategy, function, eps); every repeat in a group must
    cover the same iteration set.  Quartiles use linear interpolation.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict[tuple, dict[int, list[float]]] = {}
    iter_sets: dict[tuple, dict[int, set]] = {}
    for row in rows:
        key = (row.strategy, row.function, row.eps)
        groups.setdefault(key, {}).setdefault(row.iteration, []).append(row.best_value)
        iter_sets.setdefault(key, {}).setdefault(row.repeat, set()).add(row.iteration)
    out: list[SummaryRow] = []
    for key in sorted(groups):
        per_repeat = iter_sets[key]
        reference = next(iter(per_repeat.values()))
        if any(s != reference for s in per_repeat.values()):
            raise ValueError(f"repeats in group {key} cover different iterations")
        for iteration in sorted(groups[key]):
            values = np.array(groups[key][iteration])
            q25, med, q75 = np.percentile(values, [25.0, 50.0, 75.0])
            out.append(SummaryRow(strategy=key[0], function=key[1], eps=key[2],
                                  iteration=iteration, median=float(med),
                                  q25=float(q25), q75=float(q75)))
    return out


_TRACE_FIELDS = ["strategy", "function", "eps", "repeat", "iteration", "best_value"]
_SUMMARY_FIELDS = ["strategy", "function", "eps", "iteration", "median", "q25", "q75"]


def _format(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_trace_csv(rows: list[TraceRow], path) -> None:
    """Trace CSV: header row, UTF-8, LF endings, round-trip float precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_TRACE_FIELDS)
    for r in rows:
        writer.writerow([r.strategy, r.function, _format(r.eps), r.repeat,
                         r.iteration, _format(r.best_value)])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_trace_csv(path) -> list[TraceRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _TRACE_FIELDS:
            raise ValueError(f"unexpected trace header: {reader.fieldnames}")
        return [
            TraceRow(strategy=row["strategy"], function=row["function"],
                     eps=float(row["eps"]), repeat=int(row["repeat"]),
                     iteration=int(row["iteration"]),
                     best_value=float(row["best_value"]))
            for row in reader
        ]


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SUMMARY_FIELDS)
        for r in rows:
            writer.writerow([r.strategy, r.function, _format(r.eps), r.iteration,
                             _format(r.median), _format(r.q25), _format(r.q75)])
