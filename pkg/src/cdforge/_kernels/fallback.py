"""Pure-numpy fill, used when the compiled extension is unavailable.

Keeps the exact operation order of the Cython kernel (two passes, divide
before multiply) so both implementations produce bit-identical output.
"""

from __future__ import annotations

import numpy as np


def fill_interpolated(out, add_k, weights, totals, tokens, counts, bounds):
    vocab = out.shape[0]
    alpha_mass = add_k * vocab
    out[:] = 0.0
    for o in range(len(weights)):
        denom = totals[o] + alpha_mass
        out += weights[o] * (add_k / denom)
    for o in range(len(weights)):
        lo, hi = bounds[o], bounds[o + 1]
        if hi > lo:
            denom = totals[o] + alpha_mass
            out[tokens[lo:hi]] += weights[o] * (counts[lo:hi] / denom)
