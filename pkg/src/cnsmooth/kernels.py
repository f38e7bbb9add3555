"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``CNSMOOTH_PURE_PYTHON`` is set to a non-empty value,
the numpy fallback is used. :func:`use_backend` switches temporarily.
"""

import contextlib
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_EXTENSION = _compiled is not None
_active = "python" if (_compiled is None or os.environ.get("CNSMOOTH_PURE_PYTHON")) else "cython"


def backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and _compiled is None:
        raise RuntimeError("compiled extension is not available")
    _active = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def resolvent_sweep(W, coef, rhs, x_in, x_out, change):
    """``x_out = coef * W @ x_in + rhs``; ``change`` gets the per-column
    max-abs step. All blocks are C-contiguous ``(n, m)`` float arrays."""
    if _active == "cython":
        _compiled.resolvent_sweep(W.neighbors, coef, rhs, x_in, x_out, change)
    else:
        _fallback.resolvent_sweep(W, coef, rhs, x_in, x_out, change)
