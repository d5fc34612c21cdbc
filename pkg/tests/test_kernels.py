"""Compiled and numpy kernels must agree bit-for-bit."""

import numpy as np
import pytest

from cdforge import _kernels
from cdforge._kernels import fallback


def _random_case(rng, vocab, n_orders):
    weights = rng.random(n_orders)
    weights /= weights.sum()
    totals = np.zeros(n_orders)
    tokens, counts = [], []
    bounds = [0]
    for _ in range(n_orders):
        nnz = int(rng.integers(0, min(vocab, 12)))
        toks = np.sort(rng.choice(vocab, size=nnz, replace=False)).astype(np.int64)
        cnts = rng.integers(1, 50, size=nnz).astype(np.float64)
        tokens.append(toks)
        counts.append(cnts)
        totals[len(bounds) - 1] = cnts.sum()
        bounds.append(bounds[-1] + nnz)
    tok_cat = np.concatenate(tokens) if bounds[-1] else np.zeros(0, dtype=np.int64)
    cnt_cat = np.concatenate(counts) if bounds[-1] else np.zeros(0)
    return weights, totals, tok_cat, cnt_cat, np.asarray(bounds, dtype=np.int64)


@pytest.mark.skipif(not _kernels.HAVE_COMPILED, reason="extension not built")
def test_compiled_matches_fallback_bitwise():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        vocab = int(rng.integers(4, 300))
        n_orders = int(rng.integers(1, 6))
        weights, totals, tok_cat, cnt_cat, bounds = _random_case(rng, vocab, n_orders)
        add_k = float(rng.choice([0.01, 0.5, 1.0, 1e-4]))
        a = np.empty(vocab)
        b = np.empty(vocab)
        _kernels.fill_interpolated(a, add_k, weights, totals, tok_cat, cnt_cat, bounds)
        fallback.fill_interpolated(b, add_k, weights, totals, tok_cat, cnt_cat, bounds)
        assert np.array_equal(a, b)


def test_fill_produces_a_distribution():
    rng = np.random.default_rng(7)
    for _ in range(50):
        vocab = int(rng.integers(4, 200))
        weights, totals, tok_cat, cnt_cat, bounds = _random_case(rng, vocab, 3)
        out = np.empty(vocab)
        fallback.fill_interpolated(out, 0.01, weights, totals, tok_cat, cnt_cat, bounds)
        assert np.all(out > 0)
        assert abs(out.sum() - 1.0) < 1e-9


def test_empty_rows_give_uniform():
    out = np.empty(10)
    bounds = np.zeros(3, dtype=np.int64)
    _kernels.fill_interpolated(out, 0.01, np.array([0.5, 0.5]), np.zeros(2),
                               np.zeros(0, dtype=np.int64), np.zeros(0), bounds)
    assert np.allclose(out, 0.1)
    assert abs(out.sum() - 1.0) < 1e-12
