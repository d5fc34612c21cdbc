"""Kernel selection: compiled Cython fill if built, numpy fallback otherwise."""

from cdforge._kernels import fallback

try:
    from cdforge._kernels._fill import fill_interpolated as _compiled_fill
except ImportError:
    _compiled_fill = None

HAVE_COMPILED = _compiled_fill is not None
fill_interpolated = _compiled_fill if HAVE_COMPILED else fallback.fill_interpolated


def implementation_name() -> str:
    return "compiled" if HAVE_COMPILED else "numpy"
