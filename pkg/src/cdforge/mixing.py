"""Fixed-ratio real/synthetic training batches with regrouping.

Each corpus is independently shuffled, tokenized, and cut into fixed-length
sequences (documents joined by EOS, tail dropped). When a corpus runs out
it is reshuffled with a fresh epoch permutation and re-segmented before
batching resumes, so sequence boundaries drift between epochs. A ratio of
zero yields a stream bit-identical to a pure-real baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from cdforge.errors import ConfigurationError
from cdforge.rng import RandomStream


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class MixtureConfig:
    synth_ratio: float
    batch_sequences: int
    seq_len: int
    reshuffle_seed: int

    def __post_init__(self):
        if not (0.0 <= self.synth_ratio < 1.0):
            raise ConfigurationError(f"synth_ratio must lie in [0, 1), got {self.synth_ratio}")
        if self.batch_sequences < 1 or self.seq_len < 1:
            raise ConfigurationError("batch_sequences and seq_len must be positive")

    @property
    def synth_per_batch(self) -> int:
        return round_half_up(self.synth_ratio * self.batch_sequences)


class _SegmentedCorpus:
    """Infinite sequence source over one corpus with per-epoch regrouping."""

    def __init__(self, texts: Sequence[str], tokenizer, seq_len: int,
                 stream_tag: tuple, eos_id: int):
        self._encoded = [np.asarray(tokenizer.encode(t) + [eos_id], dtype=np.int64)
                         for t in texts]
        self._seq_len = seq_len
        self._tag = stream_tag
        self._epoch = 0
        self._windows = self._segment()
        self._cursor = 0

    def _segment(self) -> np.ndarray:
        perm = RandomStream(*self._tag, self._epoch).permutation(len(self._encoded))
        flat = np.concatenate([self._encoded[i] for i in perm])
        n_full = len(flat) // self._seq_len
        if n_full == 0:
            raise ConfigurationError(
                f"corpus too small: {len(flat)} tokens cannot fill one "
                f"sequence of length {self._seq_len}"
            )
        return flat[: n_full * self._seq_len].reshape(n_full, self._seq_len)

    def epoch_windows(self) -> np.ndarray:
        return self._windows

    def take(self, n: int) -> np.ndarray:
        rows = []
        while n > 0:
            available = len(self._windows) - self._cursor
            if available == 0:
                self._epoch += 1
                self._windows = self._segment()
                self._cursor = 0
                continue
            grab = min(n, available)
            rows.append(self._windows[self._cursor : self._cursor + grab])
            self._cursor += grab
            n -= grab
        return np.concatenate(rows) if len(rows) > 1 else rows[0]


def build_stream(real_texts: Sequence[str], synth_texts: Sequence[str] | None,
                 tokenizer, config: MixtureConfig,
                 with_origin: bool = False) -> Iterator:
    """Infinite stream of (batch_sequences, seq_len) token batches.

    Every batch holds exactly `round(q * batch_sequences)` synthetic
    sequences (placed after the real ones). With `with_origin` each batch
    is paired with a 0/1 row-origin vector (1 = synthetic) for auditing.
    """
    if not real_texts:
        raise ConfigurationError("real corpus is empty")
    n_synth = config.synth_per_batch
    n_real = config.batch_sequences - n_synth
    if n_synth > 0 and not synth_texts:
        raise ConfigurationError("synth_ratio > 0 requires a synthetic corpus")

    real = _SegmentedCorpus(real_texts, tokenizer, config.seq_len,
                            ("mix", config.reshuffle_seed, "real"), tokenizer.eos_id)
    synth = None
    if n_synth > 0:
        synth = _SegmentedCorpus(synth_texts, tokenizer, config.seq_len,
                                 ("mix", config.reshuffle_seed, "synth"), tokenizer.eos_id)

    origin = np.concatenate([
        np.zeros(n_real, dtype=np.int64),
        np.ones(n_synth, dtype=np.int64),
    ])
    while True:
        parts = [real.take(n_real)] if n_real else []
        if n_synth:
            parts.append(synth.take(n_synth))
        batch = np.concatenate(parts) if len(parts) > 1 else parts[0]
        yield (batch, origin.copy()) if with_origin else batch
