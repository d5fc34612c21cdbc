# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fill for the interpolated count-mixture next-token distribution.

Must stay operation-for-operation identical to ``fallback.fill_interpolated``:
two passes (uniform floor, then sparse counts), divide before multiply, one
IEEE add per order per element. Tests assert bit equality between the two.
"""


def fill_interpolated(double[::1] out, double add_k, double[::1] weights,
                      double[::1] totals, long long[::1] tokens,
                      double[::1] counts, long long[::1] bounds):
    cdef Py_ssize_t vocab = out.shape[0]
    cdef Py_ssize_t n_orders = weights.shape[0]
    cdef double alpha_mass = add_k * vocab
    cdef Py_ssize_t o, i, j
    cdef double denom, base, w

    for i in range(vocab):
        out[i] = 0.0
    for o in range(n_orders):
        denom = totals[o] + alpha_mass
        base = weights[o] * (add_k / denom)
        for i in range(vocab):
            out[i] += base
    for o in range(n_orders):
        denom = totals[o] + alpha_mass
        w = weights[o]
        for j in range(bounds[o], bounds[o + 1]):
            out[tokens[j]] += w * (counts[j] / denom)
