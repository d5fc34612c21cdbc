"""Interpolated add-k n-gram backend with snapshots and amateur derivation.

Counts for every order are stored as sorted arrays of packed integer keys
(`context * V + token`), merged incrementally during training. The
next-token distribution mixes per-order add-k estimates with fixed
interpolation weights; strict positivity of add_k guarantees valid
distributions everywhere. Contexts shorter than an order's window fall
back to the longest available order (deterministic clamping).

Amateur ("deliberately worse") variants of a trained model:
  * earlier_checkpoint -- a stored snapshot from fewer training tokens,
  * smaller            -- count entries pruned to ~1/factor of the original,
  * noisy              -- inference-time stochastic masking of count rows,
                          seeded per (context, seed) so it is a pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cdforge import _kernels
from cdforge.errors import ConfigurationError, ContractError, RegistryError
from cdforge.lm import CheckpointedModel, CheckpointRegistry
from cdforge.rng import RandomStream

DEFAULT_ADD_K = 0.01
DEFAULT_MAX_ORDER = 8
DEFAULT_REDUCTION_FACTORS = (10, 20, 50, 100)

_BINARY_MAGIC = b"CDFNGRAM1\n"
_TEXT_HEADER = "cdforge-ngram v1"

_EMPTY_I64 = np.zeros(0, dtype=np.int64)
_EMPTY_F64 = np.zeros(0, dtype=np.float64)


def _packable(vocab_size: int, digits: int) -> bool:
    return vocab_size**digits <= 2**63 - 1


def build_gram_keys(tokens: np.ndarray, order: int, vocab_size: int) -> np.ndarray:
    """Packed key of every `order`-gram in `tokens` (positional base-V digits)."""
    n = len(tokens)
    width = n - order + 1
    if width <= 0:
        return np.zeros(0, dtype=np.uint64 if _packable(vocab_size, order) else object)
    if _packable(vocab_size, order):
        v = np.uint64(vocab_size)
        keys = tokens[:width].astype(np.uint64)
        for d in range(1, order):
            keys = keys * v + tokens[d : width + d].astype(np.uint64)
        return keys
    out = np.empty(width, dtype=object)
    ints = [int(t) for t in tokens]
    for i in range(width):
        key = 0
        for d in range(order):
            key = key * vocab_size + ints[i + d]
        out[i] = key
    return out


def pack_context(context: Sequence[int], vocab_size: int) -> int:
    key = 0
    for t in context:
        key = key * vocab_size + int(t)
    return key


def _unique_counts(sorted_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(sorted_keys) == 0:
        return sorted_keys, _EMPTY_I64
    new_mask = np.empty(len(sorted_keys), dtype=bool)
    new_mask[0] = True
    new_mask[1:] = sorted_keys[1:] != sorted_keys[:-1]
    starts = np.flatnonzero(new_mask)
    counts = np.diff(np.append(starts, len(sorted_keys))).astype(np.int64)
    return sorted_keys[new_mask], counts


def _merge_counted(keys_a, counts_a, keys_b, counts_b):
    """Merge two sorted unique (keys, counts) tables, summing duplicates."""
    if len(keys_a) == 0:
        return keys_b, counts_b
    if len(keys_b) == 0:
        return keys_a, counts_a
    keys = np.concatenate([keys_a, keys_b])
    counts = np.concatenate([counts_a, counts_b])
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    counts = counts[order]
    new_mask = np.empty(len(keys), dtype=bool)
    new_mask[0] = True
    new_mask[1:] = keys[1:] != keys[:-1]
    starts = np.flatnonzero(new_mask)
    summed = np.add.reduceat(counts, starts)
    return keys[new_mask], summed


class _OrderTable:
    """Frozen per-order table: sorted packed (context, token) keys + counts."""

    def __init__(self, keys: np.ndarray, counts: np.ndarray, vocab_size: int):
        self.keys = keys
        self.counts = counts
        self.vocab_size = vocab_size
        self.counts_f8 = counts.astype(np.float64)
        if len(keys) == 0:
            self.ctx_keys = keys[:0]
            self.entry_tokens = _EMPTY_I64
            self.offsets = np.zeros(1, dtype=np.int64)
            self.totals = _EMPTY_I64
            self.totals_f8 = _EMPTY_F64
            return
        if keys.dtype == object:
            ctx = np.array([k // vocab_size for k in keys], dtype=object)
            self.entry_tokens = np.array([int(k % vocab_size) for k in keys], dtype=np.int64)
        else:
            ctx = keys // np.uint64(vocab_size)
            self.entry_tokens = (keys % np.uint64(vocab_size)).astype(np.int64)
        new_mask = np.empty(len(keys), dtype=bool)
        new_mask[0] = True
        new_mask[1:] = ctx[1:] != ctx[:-1]
        starts = np.flatnonzero(new_mask)
        self.ctx_keys = ctx[new_mask]
        self.offsets = np.append(starts, len(keys)).astype(np.int64)
        self.totals = np.add.reduceat(counts, starts).astype(np.int64)
        self.totals_f8 = self.totals.astype(np.float64)

    def __len__(self) -> int:
        return len(self.keys)

    def _ctx_index(self, ctx_key: int) -> int:
        if len(self.ctx_keys) == 0:
            return -1
        if self.ctx_keys.dtype == object:
            i = int(np.searchsorted(self.ctx_keys, ctx_key))
        else:
            i = int(np.searchsorted(self.ctx_keys, np.uint64(ctx_key)))
        if i < len(self.ctx_keys) and int(self.ctx_keys[i]) == ctx_key:
            return i
        return -1

    def row(self, ctx_key: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """(tokens, counts_f8, counts_int, total) for one context; empty on miss."""
        i = self._ctx_index(ctx_key)
        if i < 0:
            return _EMPTY_I64, _EMPTY_F64, _EMPTY_I64, 0
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return (
            self.entry_tokens[lo:hi],
            self.counts_f8[lo:hi],
            self.counts[lo:hi],
            int(self.totals[i]),
        )

    def lookup_many(self, gram_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (count_f8, total_f8) per query key; zeros on miss."""
        n = len(gram_keys)
        if len(self.keys) == 0 or n == 0:
            return np.zeros(n), np.zeros(n)
        idx = np.searchsorted(self.keys, gram_keys)
        idx_c = np.minimum(idx, len(self.keys) - 1)
        hit = self.keys[idx_c] == gram_keys
        counts = np.where(hit, self.counts_f8[idx_c], 0.0)
        if self.keys.dtype == object:
            ctx_q = np.array([k // self.vocab_size for k in gram_keys], dtype=object)
        else:
            ctx_q = gram_keys // np.uint64(self.vocab_size)
        jdx = np.searchsorted(self.ctx_keys, ctx_q)
        jdx_c = np.minimum(jdx, len(self.ctx_keys) - 1)
        hit2 = self.ctx_keys[jdx_c] == ctx_q
        totals = np.where(hit2, self.totals_f8[jdx_c], 0.0)
        return counts.astype(np.float64), totals.astype(np.float64)


class FrozenNgramModel:
    """Immutable n-gram backend implementing the LmBackend contract."""

    def __init__(self, order: int, vocab_size: int, add_k: float,
                 weights: np.ndarray, tables: list[_OrderTable]):
        if len(weights) != order or len(tables) != order:
            raise ContractError("per-order weights/tables must match the model order")
        self.order = order
        self.vocab_size = vocab_size
        self.add_k = float(add_k)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.tables = tables
        self.max_context = order - 1
        self._fill = _kernels.fill_interpolated

    def n_entries(self) -> int:
        return sum(len(t) for t in self.tables)

    def entries_by_order(self) -> list[int]:
        return [len(t) for t in self.tables]

    # -- probability construction ------------------------------------------

    def _segments(self, context: Sequence[int]):
        """Per-order (totals, concatenated sparse rows) for one context.

        Orders whose window exceeds the available context clamp to the
        longest satisfiable order, each still contributing its own weight.
        """
        ctx = [int(t) for t in context]
        if len(ctx) > self.max_context:
            ctx = ctx[len(ctx) - self.max_context :]
        totals = np.empty(self.order, dtype=np.float64)
        bounds = np.empty(self.order + 1, dtype=np.int64)
        bounds[0] = 0
        tok_segs = []
        cnt_segs = []
        rows = []
        for o in range(1, self.order + 1):
            eff = min(o, len(ctx) + 1)
            tail = ctx[len(ctx) - (eff - 1) :] if eff > 1 else []
            key = pack_context(tail, self.vocab_size)
            tokens, counts_f8, counts_int, total = self.tables[eff - 1].row(key)
            totals[o - 1] = float(total)
            tok_segs.append(tokens)
            cnt_segs.append(counts_f8)
            rows.append((eff, key, tokens, counts_f8, counts_int, total))
            bounds[o] = bounds[o - 1] + len(tokens)
        tok_cat = np.concatenate(tok_segs) if bounds[-1] else _EMPTY_I64
        cnt_cat = np.concatenate(cnt_segs) if bounds[-1] else _EMPTY_F64
        return totals, tok_cat, cnt_cat, bounds, rows

    def next_dist(self, context: Sequence[int]) -> np.ndarray:
        totals, tok_cat, cnt_cat, bounds, _ = self._segments(context)
        out = np.empty(self.vocab_size, dtype=np.float64)
        self._fill(out, self.add_k, self.weights, totals, tok_cat, cnt_cat, bounds)
        return out

    def prob_of(self, context: Sequence[int], token: int) -> float:
        """Single-token probability; bit-identical to next_dist(context)[token]."""
        totals, tok_cat, cnt_cat, bounds, _ = self._segments(context)
        alpha_mass = self.add_k * self.vocab_size
        p = 0.0
        for o in range(self.order):
            denom = totals[o] + alpha_mass
            p += self.weights[o] * (self.add_k / denom)
        for o in range(self.order):
            lo, hi = bounds[o], bounds[o + 1]
            seg = tok_cat[lo:hi]
            j = int(np.searchsorted(seg, token))
            if j < len(seg) and seg[j] == token:
                denom = totals[o] + alpha_mass
                p += self.weights[o] * (cnt_cat[lo + j] / denom)
        return float(p)

    def log_prob_stream(self, tokens: np.ndarray) -> np.ndarray:
        """Vectorized ln p(x_i | x_<i) over a stream; matches next_dist bitwise."""
        t = np.asarray(tokens, dtype=np.int64)
        n = len(t)
        if n == 0:
            return np.zeros(0, dtype=np.float64)
        if t.min() < 0 or t.max() >= self.vocab_size:
            raise ContractError("token stream contains ids outside the vocabulary")
        cnt = np.zeros((self.order, n), dtype=np.float64)
        tot = np.zeros((self.order, n), dtype=np.float64)
        for o in range(1, self.order + 1):
            if n >= o:
                q = build_gram_keys(t, o, self.vocab_size)
                c, ttl = self.tables[o - 1].lookup_many(q)
                cnt[o - 1, o - 1 :] = c
                tot[o - 1, o - 1 :] = ttl
        # Head positions lack full context; clamp to the longest usable order.
        for o in range(2, self.order + 1):
            for i in range(min(o - 1, n)):
                cnt[o - 1, i] = cnt[i, i]
                tot[o - 1, i] = tot[i, i]
        alpha_mass = self.add_k * self.vocab_size
        p = np.zeros(n, dtype=np.float64)
        for o in range(self.order):
            p += self.weights[o] * (self.add_k / (tot[o] + alpha_mass))
        for o in range(self.order):
            p += self.weights[o] * (cnt[o] / (tot[o] + alpha_mass))
        return np.log(p)


class NoisyNgram:
    """Inference-time amateur: randomly zeroes count-table rows per query.

    Each count entry survives with probability 1-rate, decided by a stream
    keyed on (seed, effective order, context), so repeated calls agree
    bit-exactly and the wrapper carries no mutable state.
    """

    def __init__(self, base: FrozenNgramModel, rate: float, seed: int):
        if not (0.0 <= rate < 1.0):
            raise ConfigurationError(f"noise rate must lie in [0, 1), got {rate}")
        self.base = base
        self.rate = float(rate)
        self.seed = int(seed)
        self.vocab_size = base.vocab_size
        self.max_context = base.max_context
        self.order = base.order

    def next_dist(self, context: Sequence[int]) -> np.ndarray:
        base = self.base
        totals, _, _, _, rows = base._segments(context)
        bounds = np.empty(base.order + 1, dtype=np.int64)
        bounds[0] = 0
        tok_segs = []
        cnt_segs = []
        for o, (eff, key, tokens, counts_f8, counts_int, _total) in enumerate(rows, start=1):
            if len(tokens):
                stream = RandomStream("noisy-amateur", self.seed, eff, key)
                keep = stream.uniforms(len(tokens)) >= self.rate
                tokens = tokens[keep]
                counts_f8 = counts_f8[keep]
                totals[o - 1] = float(int(counts_int[keep].sum()))
            tok_segs.append(tokens)
            cnt_segs.append(counts_f8)
            bounds[o] = bounds[o - 1] + len(tokens)
        tok_cat = np.concatenate(tok_segs) if bounds[-1] else _EMPTY_I64
        cnt_cat = np.concatenate(cnt_segs) if bounds[-1] else _EMPTY_F64
        out = np.empty(base.vocab_size, dtype=np.float64)
        base._fill(out, base.add_k, base.weights, totals, tok_cat, cnt_cat, bounds)
        return out


class NgramTrainer:
    """Accumulates n-gram counts from token sequences; snapshots are frozen views."""

    def __init__(self, order: int, vocab_size: int, add_k: float = DEFAULT_ADD_K,
                 weights: Sequence[float] | None = None,
                 max_order: int = DEFAULT_MAX_ORDER):
        if order < 1:
            raise ConfigurationError(f"order must be >= 1, got {order}")
        if order > max_order:
            raise ConfigurationError(f"order {order} exceeds configured maximum {max_order}")
        if add_k <= 0:
            raise ConfigurationError("add_k must be strictly positive")
        if weights is None:
            weights = np.full(order, 1.0 / order)
        weights = np.asarray(weights, dtype=np.float64)
        if len(weights) != order or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ConfigurationError("interpolation weights must be nonnegative and sum to 1")
        self.order = order
        self.vocab_size = vocab_size
        self.add_k = float(add_k)
        self.weights = weights
        self.tokens_seen = 0
        self._keys = [None] * order
        self._counts = [_EMPTY_I64] * order
        self._pending: list[list[np.ndarray]] = [[] for _ in range(order)]

    def add_sequence(self, seq: Sequence[int]) -> None:
        arr = np.asarray(seq, dtype=np.int64)
        if len(arr) == 0:
            return
        if arr.min() < 0 or arr.max() >= self.vocab_size:
            raise ContractError("sequence contains token ids outside the vocabulary")
        for o in range(1, self.order + 1):
            if len(arr) >= o:
                self._pending[o - 1].append(build_gram_keys(arr, o, self.vocab_size))
        self.tokens_seen += len(arr)

    def _consolidate(self) -> None:
        for o in range(self.order):
            if not self._pending[o]:
                continue
            fresh = np.concatenate(self._pending[o])
            self._pending[o] = []
            fresh = np.sort(fresh, kind="stable")
            keys, counts = _unique_counts(fresh)
            if self._keys[o] is None:
                self._keys[o], self._counts[o] = keys, counts
            else:
                self._keys[o], self._counts[o] = _merge_counted(
                    self._keys[o], self._counts[o], keys, counts
                )

    def snapshot(self) -> FrozenNgramModel:
        self._consolidate()
        tables = []
        for o in range(self.order):
            keys = self._keys[o]
            if keys is None:
                keys = np.zeros(0, dtype=np.uint64 if _packable(self.vocab_size, o + 1) else object)
            tables.append(_OrderTable(keys, self._counts[o], self.vocab_size))
        return FrozenNgramModel(self.order, self.vocab_size, self.add_k,
                                self.weights.copy(), tables)


def train_ngram(sequences: Iterable[Sequence[int]], *, order: int, vocab_size: int,
                snapshot_every: int, add_k: float = DEFAULT_ADD_K,
                weights: Sequence[float] | None = None,
                max_order: int = DEFAULT_MAX_ORDER,
                family: str = "ngram", registry: CheckpointRegistry | None = None,
                meta: dict | None = None, fmt: str = "binary") -> list[CheckpointedModel]:
    """Train on a token-sequence stream, snapshotting every `snapshot_every` tokens.

    Snapshot steps are 1..S; if the stream ends between marks a final
    snapshot is taken so the last step has seen the whole corpus.
    """
    if snapshot_every <= 0:
        raise ConfigurationError("snapshot_every must be positive")
    trainer = NgramTrainer(order, vocab_size, add_k=add_k, weights=weights,
                           max_order=max_order)
    base_meta = dict(meta or {})

    snaps: list[CheckpointedModel] = []

    def take(step: int) -> None:
        model = trainer.snapshot()
        snap_meta = dict(base_meta, tokens_seen=trainer.tokens_seen)
        if registry is not None:
            snaps.append(registry.save_ngram(family, step, model, snap_meta, fmt=fmt))
        else:
            snaps.append(CheckpointedModel(family=family, step=step, backend=model,
                                           meta=snap_meta))

    step = 0
    next_mark = snapshot_every
    for seq in sequences:
        trainer.add_sequence(seq)
        while trainer.tokens_seen >= next_mark:
            step += 1
            take(step)
            next_mark += snapshot_every
    if trainer.tokens_seen == 0:
        raise ConfigurationError("cannot train on an empty corpus")
    if trainer.tokens_seen > step * snapshot_every:
        step += 1
        take(step)
    return snaps


# -- amateur derivation ------------------------------------------------------


@dataclass(frozen=True)
class AmateurSpec:
    """One recipe for deriving a deliberately worse model from a good one."""

    kind: str  # earlier_checkpoint | smaller | noisy
    step: int | None = None
    factor: int | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.kind == "earlier_checkpoint":
            if self.step is None or self.step < 1:
                raise ConfigurationError("earlier_checkpoint requires a positive step")
        elif self.kind == "smaller":
            if self.factor is None or self.factor < 2:
                raise ConfigurationError("smaller requires a reduction factor >= 2")
        elif self.kind == "noisy":
            if self.rate is None or not (0.0 <= self.rate < 1.0):
                raise ConfigurationError("noisy requires a rate in [0, 1)")
        else:
            raise ConfigurationError(f"unknown amateur kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "earlier_checkpoint":
            return f"early-{self.step}"
        if self.kind == "smaller":
            return f"small-{self.factor}"
        return f"noisy-{self.rate:g}"


def prune_to_fraction(model: FrozenNgramModel, factor: int) -> FrozenNgramModel:
    """Shrink a model to ~1/factor of its stored count entries.

    Whole top orders are dropped while the remainder still meets the
    target; then the lowest-count entries are removed first, ties broken
    by (higher order first, lexicographic context, token).
    """
    total = model.n_entries()
    target = int(np.floor(total / factor + 0.5))
    if total == 0 or target < 1:
        raise ConfigurationError(
            f"model with {total} entries cannot be reduced by factor {factor}"
        )
    per_order = model.entries_by_order()
    new_order = model.order
    while new_order > 1 and sum(per_order[: new_order - 1]) >= target:
        new_order -= 1

    kept_tables = []
    remaining = sum(per_order[:new_order])
    to_remove = remaining - target
    if to_remove > 0:
        counts_all = np.concatenate([model.tables[o].counts for o in range(new_order)])
        order_all = np.concatenate(
            [np.full(per_order[o], o, dtype=np.int64) for o in range(new_order)]
        )
        pos_all = np.concatenate(
            [np.arange(per_order[o], dtype=np.int64) for o in range(new_order)]
        )
        # lexsort: last key is primary -> (count asc, order desc, position asc)
        victims = np.lexsort((pos_all, -order_all, counts_all))[:to_remove]
        drop_mask = np.zeros(remaining, dtype=bool)
        drop_mask[victims] = True
        start = 0
        for o in range(new_order):
            table = model.tables[o]
            keep = ~drop_mask[start : start + per_order[o]]
            start += per_order[o]
            kept_tables.append(_OrderTable(table.keys[keep], table.counts[keep],
                                           model.vocab_size))
    else:
        kept_tables = [
            _OrderTable(model.tables[o].keys, model.tables[o].counts, model.vocab_size)
            for o in range(new_order)
        ]
    weights = np.full(new_order, 1.0 / new_order)
    return FrozenNgramModel(new_order, model.vocab_size, model.add_k, weights, kept_tables)


def derive_amateur(good: CheckpointedModel, spec: AmateurSpec, rng_seed: int,
                   registry: CheckpointRegistry | None = None,
                   fmt: str = "binary") -> CheckpointedModel:
    """Materialize one BAD-model variant of `good` per the spec."""
    if spec.kind == "earlier_checkpoint":
        if spec.step >= good.step:
            raise ConfigurationError(
                f"earlier checkpoint step {spec.step} must precede good step {good.step}"
            )
        if registry is None:
            raise RegistryError("earlier_checkpoint derivation requires a registry")
        if not registry.has(good.family, spec.step):
            raise RegistryError(f"no snapshot {good.family}@{spec.step} in registry")
        return registry.load(good.family, spec.step)

    if spec.kind == "smaller":
        pruned = prune_to_fraction(good.backend, spec.factor)
        family = f"{good.family}-small{spec.factor}"
        meta = dict(good.meta, derived_from=good.ref, amateur=spec.label)
        if registry is not None:
            return registry.save_ngram(family, good.step, pruned, meta, fmt=fmt)
        return CheckpointedModel(family=family, step=good.step, backend=pruned, meta=meta)

    # noisy
    family = f"{good.family}-noisy{spec.rate:g}"
    meta = dict(good.meta, derived_from=good.ref, amateur=spec.label, rng_seed=rng_seed)
    if registry is not None:
        return registry.save_noisy_ref(family, good.step, good.family, good.step,
                                       spec.rate, rng_seed, meta)
    backend = NoisyNgram(good.backend, rate=spec.rate, seed=rng_seed)
    return CheckpointedModel(family=family, step=good.step, backend=backend, meta=meta)


# -- serialization -----------------------------------------------------------


def _float_hex(x: float) -> str:
    return float(x).hex()


def save_model_binary(model: FrozenNgramModel, path: str | Path) -> None:
    """Deterministic binary dump: JSON header + raw little-endian arrays."""
    header = {
        "order": model.order,
        "vocab_size": model.vocab_size,
        "add_k": _float_hex(model.add_k),
        "weights": [_float_hex(w) for w in model.weights],
        "nnz": model.entries_by_order(),
    }
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for o, table in enumerate(model.tables, start=1):
            grams = _keys_to_grams(table.keys, o, model.vocab_size)
            fh.write(grams.astype("<i4").tobytes())
            fh.write(table.counts.astype("<i8").tobytes())


def load_model_binary(path: str | Path) -> FrozenNgramModel:
    with open(path, "rb") as fh:
        if fh.read(len(_BINARY_MAGIC)) != _BINARY_MAGIC:
            raise ConfigurationError(f"{path}: not an n-gram snapshot")
        header = json.loads(fh.readline().decode("utf-8"))
        order = header["order"]
        vocab_size = header["vocab_size"]
        tables = []
        for o in range(1, order + 1):
            nnz = header["nnz"][o - 1]
            grams = np.frombuffer(fh.read(nnz * o * 4), dtype="<i4").reshape(nnz, o)
            counts = np.frombuffer(fh.read(nnz * 8), dtype="<i8").astype(np.int64)
            keys = _grams_to_keys(grams.astype(np.int64), vocab_size)
            tables.append(_OrderTable(keys, counts, vocab_size))
    weights = np.array([float.fromhex(w) for w in header["weights"]])
    return FrozenNgramModel(order, vocab_size, float.fromhex(header["add_k"]),
                            weights, tables)


def save_model_text(model: FrozenNgramModel, path: str | Path) -> None:
    """Line-oriented count dump; reloads bit-exactly (floats stored as hex)."""
    lines = [
        _TEXT_HEADER,
        f"order {model.order}",
        f"vocab_size {model.vocab_size}",
        f"add_k {_float_hex(model.add_k)}",
        "weights " + " ".join(_float_hex(w) for w in model.weights),
    ]
    for o, table in enumerate(model.tables, start=1):
        grams = _keys_to_grams(table.keys, o, model.vocab_size)
        for row, count in zip(grams, table.counts):
            lines.append(f"gram {o} " + " ".join(str(t) for t in row) + f" {int(count)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model_text(path: str | Path) -> FrozenNgramModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _TEXT_HEADER:
        raise ConfigurationError(f"{path}: not an n-gram text snapshot")
    order = int(lines[1].split(" ")[1])
    vocab_size = int(lines[2].split(" ")[1])
    add_k = float.fromhex(lines[3].split(" ")[1])
    weights = np.array([float.fromhex(w) for w in lines[4].split(" ")[1:]])
    grams_per_order: list[list[list[int]]] = [[] for _ in range(order)]
    counts_per_order: list[list[int]] = [[] for _ in range(order)]
    for line in lines[5:]:
        if not line:
            continue
        parts = line.split(" ")
        if parts[0] != "gram":
            raise ConfigurationError(f"{path}: unexpected record {parts[0]!r}")
        o = int(parts[1])
        grams_per_order[o - 1].append([int(t) for t in parts[2 : 2 + o]])
        counts_per_order[o - 1].append(int(parts[2 + o]))
    tables = []
    for o in range(1, order + 1):
        grams = np.array(grams_per_order[o - 1], dtype=np.int64).reshape(-1, o)
        counts = np.array(counts_per_order[o - 1], dtype=np.int64)
        keys = _grams_to_keys(grams, vocab_size)
        tables.append(_OrderTable(keys, counts, vocab_size))
    return FrozenNgramModel(order, vocab_size, add_k, weights, tables)


def _keys_to_grams(keys: np.ndarray, order: int, vocab_size: int) -> np.ndarray:
    """Unpack sorted keys into an (nnz, order) token matrix."""
    grams = np.empty((len(keys), order), dtype=np.int64)
    if len(keys) == 0:
        return grams
    if keys.dtype == object:
        for i, key in enumerate(keys):
            k = int(key)
            for d in range(order - 1, -1, -1):
                grams[i, d] = k % vocab_size
                k //= vocab_size
    else:
        rest = keys.copy()
        v = np.uint64(vocab_size)
        for d in range(order - 1, -1, -1):
            grams[:, d] = (rest % v).astype(np.int64)
            rest //= v
    return grams


def _grams_to_keys(grams: np.ndarray, vocab_size: int) -> np.ndarray:
    """Pack an (nnz, order) token matrix back into sorted keys."""
    nnz, order = grams.shape
    if _packable(vocab_size, order):
        keys = np.zeros(nnz, dtype=np.uint64)
        v = np.uint64(vocab_size)
        for d in range(order):
            keys = keys * v + grams[:, d].astype(np.uint64)
        return keys
    out = np.empty(nnz, dtype=object)
    for i in range(nnz):
        key = 0
        for d in range(order):
            key = key * vocab_size + int(grams[i, d])
        out[i] = key
    return out
