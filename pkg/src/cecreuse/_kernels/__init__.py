"""Kernel selection: compiled extension if available, pure Python otherwise.

Set CEC_REUSE_PURE=1 to force the pure-Python kernels even when the compiled
extension is installed.  Both implementations produce bit-identical results;
the compiled one is just faster (see benchmarks/bench_kernels.py).
"""
import os

if os.environ.get("CEC_REUSE_PURE") == "1":
    from . import _ref as _impl

    HAVE_EXT = False
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        from . import _ref as _impl

        HAVE_EXT = False

IMPL_NAME = _impl.IMPL_NAME
hit_derivative = _impl.hit_derivative
efficiency_bracket = _impl.efficiency_bracket
queue_waits = _impl.queue_waits

__all__ = [
    "HAVE_EXT",
    "IMPL_NAME",
    "hit_derivative",
    "efficiency_bracket",
    "queue_waits",
]
