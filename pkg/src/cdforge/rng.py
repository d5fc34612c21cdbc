"""Named, counter-based random streams.

Every random decision in the pipeline draws from a stream addressed by a
path of labels, e.g. ``RandomStream(master_seed, "generate", seed_id, 3)``.
Streams are backed by the counter-based Philox generator keyed through
SHA-256 of the label path, so any worker can open any stream independently
and replay is exact regardless of scheduling or worker count.

Only raw Philox output is consumed (``random_raw``); uniforms, index draws
and shuffles are derived here with fixed arithmetic, keeping the byte-level
behaviour independent of numpy's higher-level Generator methods.
"""

from __future__ import annotations

import hashlib

import numpy as np

_INV_2_53 = 1.0 / (1 << 53)


def stream_key(*parts) -> np.ndarray:
    """128-bit Philox key derived from a label path."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def derive_seed(*parts) -> int:
    """Stable 63-bit integer derived from a label path."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


class RandomStream:
    """Stream of uniform doubles in [0, 1) with a stable, named identity."""

    def __init__(self, *parts):
        self.parts = parts
        self._bits = np.random.Philox(key=stream_key(*parts))

    def uniforms(self, n: int) -> np.ndarray:
        raw = self._bits.random_raw(n)
        return (raw >> np.uint64(11)) * _INV_2_53

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def indices(self, n: int, size: int) -> np.ndarray:
        """`size` independent draws from range(n), with replacement."""
        if n <= 0:
            raise ValueError("cannot draw indices from an empty range")
        out = (self.uniforms(size) * n).astype(np.int64)
        np.minimum(out, n - 1, out=out)
        return out

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        u = self.uniforms(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))
            if j > i:
                j = i
            perm[i], perm[j] = perm[j], perm[i]
        return perm
