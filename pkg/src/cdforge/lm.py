"""Language-model contract, checkpoint identity, and perplexity.

A backend is anything with `vocab_size`, `max_context`, and
`next_dist(context) -> probs`, where probs is a strictly positive float64
vector summing to 1. Snapshots are immutable after load and addressed by
(family, step) in a directory-backed registry with a JSON index.

All log-probabilities are natural-log; perplexity is exp of the mean NLL.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from cdforge.errors import ContractError, RegistryError

DIST_SUM_TOL = 1e-9


@runtime_checkable
class LmBackend(Protocol):
    vocab_size: int
    max_context: int

    def next_dist(self, context: Sequence[int]) -> np.ndarray: ...


def validate_dist(dist: np.ndarray, vocab_size: int) -> None:
    """Raise ContractError unless `dist` is a valid next-token distribution."""
    if dist.shape != (vocab_size,):
        raise ContractError(f"distribution length {dist.shape} != vocab size {vocab_size}")
    if not np.all(dist > 0.0):
        raise ContractError("distribution has non-positive entries")
    total = float(np.add.reduce(dist))
    if abs(total - 1.0) > DIST_SUM_TOL:
        raise ContractError(f"distribution sums to {total!r}, outside 1 +/- {DIST_SUM_TOL}")


@dataclass(frozen=True)
class CheckpointedModel:
    """A trained backend snapshot addressable by (family, step)."""

    family: str
    step: int
    backend: LmBackend
    meta: dict = field(default_factory=dict)

    @property
    def ref(self) -> str:
        return f"{self.family}@{self.step}"

    @property
    def vocab_size(self) -> int:
        return self.backend.vocab_size

    def next_dist(self, context: Sequence[int]) -> np.ndarray:
        limit = self.backend.max_context
        if limit >= 0 and len(context) > limit:
            context = context[len(context) - limit :]
        return self.backend.next_dist(context)

    def log_probs(self, tokens: Sequence[int]) -> np.ndarray:
        """Per-token ln p(x_i | x_<i) over a token stream."""
        arr = np.asarray(tokens, dtype=np.int64)
        fast = getattr(self.backend, "log_prob_stream", None)
        if fast is not None:
            return fast(arr)
        out = np.empty(len(arr), dtype=np.float64)
        for i in range(len(arr)):
            dist = self.next_dist(arr[:i])
            out[i] = np.log(dist[arr[i]])
        return out


def sequence_nll(model: CheckpointedModel, tokens: Sequence[int]) -> float:
    """Total negative log probability of `tokens` in nats."""
    if len(tokens) == 0:
        raise ValueError("sequence_nll requires at least one token")
    return float(-np.add.reduce(model.log_probs(tokens)))


def perplexity(model: CheckpointedModel, eval_stream: Sequence[int]) -> float:
    """exp(mean per-token NLL); lower is better."""
    if len(eval_stream) == 0:
        raise ValueError("perplexity requires a non-empty eval stream")
    return float(np.exp(sequence_nll(model, eval_stream) / len(eval_stream)))


class CheckpointRegistry:
    """Directory of snapshot files plus an index listing (family, step) entries.

    The index and all snapshot formats are written deterministically
    (no timestamps), so identical trainings produce bit-identical files.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path = self.root / "index.json"
        if self._index_path.exists():
            self._index = json.loads(self._index_path.read_text(encoding="utf-8"))
        else:
            self._index = {"version": 1, "snapshots": []}

    # -- bookkeeping -------------------------------------------------------

    def _write_index(self) -> None:
        payload = json.dumps(self._index, indent=2, sort_keys=True, ensure_ascii=False)
        self._index_path.write_text(payload + "\n", encoding="utf-8")

    def _find(self, family: str, step: int) -> dict | None:
        for entry in self._index["snapshots"]:
            if entry["family"] == family and entry["step"] == step:
                return entry
        return None

    def families(self) -> list[str]:
        return sorted({e["family"] for e in self._index["snapshots"]})

    def steps(self, family: str) -> list[int]:
        return sorted(e["step"] for e in self._index["snapshots"] if e["family"] == family)

    def has(self, family: str, step: int) -> bool:
        return self._find(family, step) is not None

    def entry(self, family: str, step: int) -> dict:
        found = self._find(family, step)
        if found is None:
            raise RegistryError(f"no snapshot {family}@{step} in registry at {self.root}")
        return found

    def _record(self, family: str, step: int, rel_file: str, fmt: str,
                backend_kind: str, meta: dict) -> dict:
        digest = hashlib.sha256((self.root / rel_file).read_bytes()).hexdigest()
        entry = {
            "family": family,
            "step": step,
            "file": rel_file,
            "format": fmt,
            "backend": backend_kind,
            "digest": digest,
            "meta": meta,
        }
        existing = self._find(family, step)
        if existing is not None:
            self._index["snapshots"].remove(existing)
        self._index["snapshots"].append(entry)
        self._index["snapshots"].sort(key=lambda e: (e["family"], e["step"]))
        self._write_index()
        return entry

    # -- save / load -------------------------------------------------------

    def save_ngram(self, family: str, step: int, model, meta: dict | None = None,
                   fmt: str = "binary") -> CheckpointedModel:
        from cdforge import ngram

        meta = dict(meta or {})
        suffix = {"binary": "bin", "text": "txt"}[fmt]
        rel = f"{family}/step-{step:06d}.{suffix}"
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "binary":
            ngram.save_model_binary(model, path)
        else:
            ngram.save_model_text(model, path)
        self._record(family, step, rel, fmt, "ngram", meta)
        return CheckpointedModel(family=family, step=step, backend=model, meta=meta)

    def save_noisy_ref(self, family: str, step: int, base_family: str, base_step: int,
                       rate: float, seed: int, meta: dict | None = None) -> CheckpointedModel:
        meta = dict(meta or {})
        rel = f"{family}/step-{step:06d}.ref.json"
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "base_family": base_family,
            "base_step": base_step,
            "rate": rate,
            "seed": seed,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._record(family, step, rel, "noisy-ref", "ngram-noisy", meta)
        return self.load(family, step)

    def load(self, family: str, step: int) -> CheckpointedModel:
        from cdforge import ngram

        entry = self.entry(family, step)
        path = self.root / entry["file"]
        if entry["format"] == "binary":
            backend = ngram.load_model_binary(path)
        elif entry["format"] == "text":
            backend = ngram.load_model_text(path)
        elif entry["format"] == "noisy-ref":
            ref = json.loads(path.read_text(encoding="utf-8"))
            base = self.load(ref["base_family"], ref["base_step"])
            backend = ngram.NoisyNgram(base.backend, rate=ref["rate"], seed=ref["seed"])
        else:
            raise RegistryError(f"unknown snapshot format {entry['format']!r}")
        return CheckpointedModel(family=family, step=step, backend=backend,
                                 meta=dict(entry["meta"]))
