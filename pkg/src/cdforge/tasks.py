"""Built-in task adapters: eval-split perplexity and minimal-pair preference.

A task adapter scores one model snapshot into per-example outcomes; the
statistics layer never sees model internals. External metrics enter the
same way, as per-example outcome files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from cdforge.errors import ConfigurationError
from cdforge.evalstat import HIGHER, LOWER, TaskInfo
from cdforge.lm import CheckpointedModel, sequence_nll


@dataclass(frozen=True)
class TaskAdapter:
    info: TaskInfo
    scorer: Callable[[CheckpointedModel], np.ndarray]

    @property
    def name(self) -> str:
        return self.info.name


def segment_eval_stream(tokens: Sequence[int], window: int) -> np.ndarray:
    """Cut an eval token stream into fixed windows (tail dropped)."""
    arr = np.asarray(tokens, dtype=np.int64)
    n_full = len(arr) // window
    if n_full == 0:
        raise ConfigurationError(
            f"eval stream of {len(arr)} tokens is shorter than one window of {window}"
        )
    return arr[: n_full * window].reshape(n_full, window)


def perplexity_task(eval_tokens: Sequence[int], window: int = 128,
                    name: str = "perplexity") -> TaskAdapter:
    """Per-window mean NLL outcomes; aggregation exp(mean) = stream perplexity."""
    windows = segment_eval_stream(eval_tokens, window)

    def scorer(model: CheckpointedModel) -> np.ndarray:
        out = np.empty(len(windows), dtype=np.float64)
        for i, row in enumerate(windows):
            out[i] = -np.mean(model.log_probs(row))
        return out

    info = TaskInfo(name=name, direction=LOWER, aggregation="exp_mean",
                    in_rel_mean=False)
    return TaskAdapter(info=info, scorer=scorer)


def minimal_pair_task(pairs: Sequence[tuple[str, str]], tokenizer,
                      name: str = "minimal_pairs") -> TaskAdapter:
    """Accuracy at giving the acceptable sentence the lower NLL (strict)."""
    if not pairs:
        raise ConfigurationError("minimal-pair task needs at least one pair")
    encoded = []
    for good_text, bad_text in pairs:
        good_ids = tokenizer.encode(good_text)
        bad_ids = tokenizer.encode(bad_text)
        if not good_ids or not bad_ids:
            raise ConfigurationError("minimal pairs must tokenize to non-empty sequences")
        encoded.append((good_ids, bad_ids))

    def scorer(model: CheckpointedModel) -> np.ndarray:
        out = np.empty(len(encoded), dtype=np.float64)
        for i, (good_ids, bad_ids) in enumerate(encoded):
            out[i] = 1.0 if sequence_nll(model, good_ids) < sequence_nll(model, bad_ids) else 0.0
        return out

    info = TaskInfo(name=name, direction=HIGHER, aggregation="mean")
    return TaskAdapter(info=info, scorer=scorer)


def read_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Minimal-pair file: one JSON object {"good": ..., "bad": ...} per line."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                pairs.append((rec["good"], rec["bad"]))
    if not pairs:
        raise ConfigurationError(f"{path}: no pairs found")
    return pairs


def write_pairs(pairs: Sequence[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for good_text, bad_text in pairs:
            fh.write(json.dumps({"good": good_text, "bad": bad_text},
                                ensure_ascii=False) + "\n")
