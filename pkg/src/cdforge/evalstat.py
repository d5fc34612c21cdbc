"""Evaluation protocol: mean-max checkpoint selection, paired bootstrap,
confidence intervals, one-sided p-values, and the aggregate relative-gain
metric.

Per (method, task, run-seed) the best saved checkpoint is selected first
(argmax, argmin for lower-is-better). The paired bootstrap then draws one
index multiset per (task, run-seed, draw) from a stream keyed on exactly
those labels and applies it to all methods, so draws are worker-count
invariant and method differences are computed on matched resamples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from cdforge.errors import ConfigurationError, PairingError
from cdforge.rng import RandomStream

HIGHER = "higher"
LOWER = "lower"
AGGREGATIONS: dict[str, Callable[[np.ndarray], float]] = {
    "mean": lambda v: float(np.mean(v)),
    "exp_mean": lambda v: float(np.exp(np.mean(v))),
}


@dataclass(frozen=True)
class TaskInfo:
    """How one task's per-example outcomes aggregate and compare."""

    name: str
    direction: str = HIGHER
    aggregation: str = "mean"
    in_rel_mean: bool = True  # perplexity-like tasks are excluded from the aggregate

    def __post_init__(self):
        if self.direction not in (HIGHER, LOWER):
            raise ConfigurationError(f"direction must be higher|lower, got {self.direction}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigurationError(f"unknown aggregation {self.aggregation!r}")

    def aggregate(self, values: np.ndarray) -> float:
        return AGGREGATIONS[self.aggregation](values)


def mean_max_select(scores: dict[int, float], direction: str) -> int:
    """Best checkpoint step for one (method, task, seed); ties -> earliest step."""
    if not scores:
        raise ValueError("mean_max_select requires at least one scored checkpoint")
    steps = sorted(scores)
    values = [scores[s] for s in steps]
    best = max(values) if direction == HIGHER else min(values)
    return steps[values.index(best)]


class OutcomeMatrix:
    """Per-example outcomes indexed by (method, task, seed, checkpoint step)."""

    def __init__(self):
        self._data: dict[tuple[str, str, int, int], np.ndarray] = {}
        self._tasks: dict[str, TaskInfo] = {}

    def add_task(self, info: TaskInfo) -> None:
        self._tasks[info.name] = info

    def task(self, name: str) -> TaskInfo:
        return self._tasks[name]

    def tasks(self) -> list[str]:
        return list(self._tasks)

    def add(self, method: str, task: str, seed: int, checkpoint: int,
            values: Sequence[float]) -> None:
        if task not in self._tasks:
            raise ConfigurationError(f"unknown task {task!r}; add_task() first")
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError(f"non-finite outcomes for {method}/{task}")
        self._data[(method, task, seed, checkpoint)] = arr

    def get(self, method: str, task: str, seed: int, checkpoint: int) -> np.ndarray:
        return self._data[(method, task, seed, checkpoint)]

    def methods(self) -> list[str]:
        seen = []
        for method, _, _, _ in self._data:
            if method not in seen:
                seen.append(method)
        return seen

    def seeds(self, method: str, task: str) -> list[int]:
        return sorted({s for m, t, s, _ in self._data if m == method and t == task})

    def checkpoints(self, method: str, task: str, seed: int) -> list[int]:
        return sorted({c for m, t, s, c in self._data
                       if m == method and t == task and s == seed})

    # -- persistence: one line per (method, task, seed, checkpoint, example) --

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "task", "seed", "checkpoint", "example", "value"])
            for (method, task, seed, ckpt) in sorted(self._data):
                for i, value in enumerate(self._data[(method, task, seed, ckpt)]):
                    writer.writerow([method, task, seed, ckpt, i, repr(float(value))])

    @classmethod
    def read(cls, path: str | Path, tasks: Sequence[TaskInfo]) -> "OutcomeMatrix":
        matrix = cls()
        for info in tasks:
            matrix.add_task(info)
        rows: dict[tuple[str, str, int, int], list[float]] = {}
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                key = (rec["method"], rec["task"], int(rec["seed"]), int(rec["checkpoint"]))
                rows.setdefault(key, []).append(float(rec["value"]))
        for key, values in rows.items():
            matrix.add(*key, values)
        return matrix


def select_checkpoints(matrix: OutcomeMatrix) -> dict[tuple[str, str, int], int]:
    """Mean-max selection for every (method, task, seed) in the matrix."""
    selected = {}
    for method in matrix.methods():
        for task in matrix.tasks():
            info = matrix.task(task)
            for seed in matrix.seeds(method, task):
                scores = {
                    ckpt: info.aggregate(matrix.get(method, task, seed, ckpt))
                    for ckpt in matrix.checkpoints(method, task, seed)
                }
                selected[(method, task, seed)] = mean_max_select(scores, info.direction)
    return selected


@dataclass
class BootstrapDraws:
    """Per (method, task) vectors of bootstrap aggregate draws."""

    draws: dict[tuple[str, str], np.ndarray]
    point: dict[tuple[str, str], float]  # full-sample (non-resampled) estimates
    n_samples: int
    seed: int
    methods: list[str] = field(default_factory=list)
    tasks: list[str] = field(default_factory=list)
    task_info: dict[str, TaskInfo] = field(default_factory=dict)


def paired_bootstrap(matrix: OutcomeMatrix, n_samples: int, seed: int,
                     selected: dict[tuple[str, str, int], int] | None = None) -> BootstrapDraws:
    """Bootstrap aggregates with index sets shared across methods (pairing)."""
    if n_samples < 1:
        raise ConfigurationError("bootstrap requires at least one resample")
    if selected is None:
        selected = select_checkpoints(matrix)
    methods = matrix.methods()
    draws: dict[tuple[str, str], np.ndarray] = {}
    point: dict[tuple[str, str], float] = {}
    for task in matrix.tasks():
        info = matrix.task(task)
        seed_lists = {m: matrix.seeds(m, task) for m in methods}
        run_seeds = seed_lists[methods[0]]
        for m in methods:
            if seed_lists[m] != run_seeds:
                raise PairingError(f"methods disagree on run seeds for task {task!r}")
        per_method = {
            m: [matrix.get(m, task, s, selected[(m, task, s)]) for s in run_seeds]
            for m in methods
        }
        n_examples = None
        for m in methods:
            for values in per_method[m]:
                if n_examples is None:
                    n_examples = len(values)
                elif len(values) != n_examples:
                    raise PairingError(
                        f"task {task!r} has misaligned example counts; pairing impossible"
                    )
        sums = {m: np.zeros(n_samples) for m in methods}
        for s_pos, run_seed in enumerate(run_seeds):
            idx = np.empty((n_samples, n_examples), dtype=np.int64)
            for b in range(n_samples):
                stream = RandomStream(seed, "bootstrap", task, run_seed, b)
                idx[b] = stream.indices(n_examples, n_examples)
            for m in methods:
                resampled = per_method[m][s_pos][idx]  # (B, N)
                if info.aggregation == "mean":
                    agg = np.mean(resampled, axis=1)
                else:
                    agg = np.exp(np.mean(resampled, axis=1))
                sums[m] += agg
        n_seeds = len(run_seeds)
        for m in methods:
            draws[(m, task)] = sums[m] / n_seeds
            full = [info.aggregate(values) for values in per_method[m]]
            point[(m, task)] = float(np.mean(full))
    return BootstrapDraws(draws=draws, point=point, n_samples=n_samples, seed=seed,
                          methods=methods, tasks=matrix.tasks(),
                          task_info={t: matrix.task(t) for t in matrix.tasks()})


@dataclass(frozen=True)
class Comparison:
    delta_hat: float
    ci_low: float
    ci_high: float
    significant: bool
    p_value: float


def compare(draws: BootstrapDraws, method_a: str, method_b: str, task: str) -> Comparison:
    """Paired difference of `method_a` minus `method_b` on one task.

    CI95 is the percentile interval of the draw differences; the one-sided
    p-value counts draws contradicting the sign of the observed difference,
    with the +1/(B+1) estimator. A zero observed difference reports p=1.
    """
    d = draws.draws[(method_a, task)] - draws.draws[(method_b, task)]
    delta_hat = draws.point[(method_a, task)] - draws.point[(method_b, task)]
    ci_low, ci_high = (float(x) for x in np.percentile(d, [2.5, 97.5]))
    significant = not (ci_low <= 0.0 <= ci_high)
    b = draws.n_samples
    if delta_hat > 0:
        violations = int(np.sum(d <= 0.0))
        p = (1 + violations) / (b + 1)
    elif delta_hat < 0:
        violations = int(np.sum(d >= 0.0))
        p = (1 + violations) / (b + 1)
    else:
        p, significant = 1.0, False
    return Comparison(delta_hat=float(delta_hat), ci_low=ci_low, ci_high=ci_high,
                      significant=significant, p_value=p)


@dataclass(frozen=True)
class CellSummary:
    mean: float
    se: float
    rel_delta_pct: float | None
    significant: bool


def summarize_cell(draw_vector: np.ndarray, se_mode: str = "se") -> tuple[float, float]:
    """Bootstrap mean and its standard error (sigma of draws over sqrt(B))."""
    if len(draw_vector) < 2:
        raise ValueError("summaries need at least two bootstrap draws")
    mean = float(np.mean(draw_vector))
    sigma = float(np.std(draw_vector, ddof=1))
    if se_mode == "se":
        return mean, sigma / np.sqrt(len(draw_vector))
    if se_mode == "bootstrap-sd":
        return mean, sigma
    raise ConfigurationError(f"unknown se_mode {se_mode!r}")


def relative_delta_pct(mean: float, baseline_mean: float, direction: str) -> float:
    """Signed relative change vs baseline, positive = improvement."""
    if direction == HIGHER:
        return 100.0 * (mean - baseline_mean) / baseline_mean
    return 100.0 * (baseline_mean - mean) / baseline_mean


def mu_delta_rel(rel_deltas: Sequence[float]) -> float:
    """Mean relative improvement vs baseline across non-perplexity tasks."""
    if len(rel_deltas) == 0:
        raise ValueError("mu_delta_rel requires at least one non-perplexity task")
    return float(np.mean(np.asarray(rel_deltas, dtype=np.float64)))


def summarize(draws: BootstrapDraws, baseline: str,
              se_mode: str = "se") -> dict:
    """Per-(method, task) summary cells plus per-method aggregate gains."""
    cells: dict[tuple[str, str], CellSummary] = {}
    for method in draws.methods:
        for task in draws.tasks:
            mean, se = summarize_cell(draws.draws[(method, task)], se_mode=se_mode)
            base_mean, _ = summarize_cell(draws.draws[(baseline, task)], se_mode=se_mode)
            rel = None
            significant = False
            if method != baseline:
                rel = relative_delta_pct(mean, base_mean, draws.task_info[task].direction)
                significant = compare(draws, method, baseline, task).significant
            cells[(method, task)] = CellSummary(mean=mean, se=se, rel_delta_pct=rel,
                                                significant=significant)
    aggregates: dict[str, float | None] = {}
    rel_tasks = [t for t in draws.tasks if draws.task_info[t].in_rel_mean]
    for method in draws.methods:
        if method == baseline or not rel_tasks:
            aggregates[method] = None
        else:
            aggregates[method] = mu_delta_rel(
                [cells[(method, t)].rel_delta_pct for t in rel_tasks]
            )
    return {"cells": cells, "mu_delta_rel": aggregates, "baseline": baseline,
            "methods": draws.methods, "tasks": draws.tasks,
            "task_info": dict(draws.task_info)}


def run_protocol(matrix: OutcomeMatrix, n_samples: int, seed: int,
                 baseline: str, se_mode: str = "se") -> dict:
    """Mean-max selection, paired bootstrap, and summary in one call."""
    draws = paired_bootstrap(matrix, n_samples, seed)
    return summarize(draws, baseline=baseline, se_mode=se_mode)


# -- good-model selection ------------------------------------------------------


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def within_task_percentiles(scores: np.ndarray, direction: str) -> np.ndarray:
    """Percentile of each candidate within one task (100 = best)."""
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if n == 1:
        return np.array([100.0])
    oriented = scores if direction == HIGHER else -scores
    ranks = average_ranks(oriented)
    return 100.0 * (ranks - 1.0) / (n - 1.0)


def select_good_model(candidates: Sequence[tuple[int, object]],
                      task_scores: dict[str, Sequence[float]],
                      directions: dict[str, str]) -> tuple[int, object]:
    """Pick the candidate with the highest average within-task percentile.

    `candidates` pairs each run seed with its lowest-perplexity checkpoint;
    `task_scores[task][i]` scores candidate i. Ties break to the lowest
    run seed.
    """
    if not candidates:
        raise ConfigurationError("good-model selection requires at least one candidate")
    n = len(candidates)
    percentile_sum = np.zeros(n)
    for task, scores in task_scores.items():
        if len(scores) != n:
            raise PairingError(f"task {task!r} scored {len(scores)} of {n} candidates")
        percentile_sum += within_task_percentiles(np.asarray(scores), directions[task])
    avg = percentile_sum / max(len(task_scores), 1)
    best = 0
    for i in range(1, n):
        if avg[i] > avg[best] or (avg[i] == avg[best] and candidates[i][0] < candidates[best][0]):
            best = i
    return candidates[best]
