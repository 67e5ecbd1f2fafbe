"""Selects the compiled step loops, falling back to numpy.

Set ``CIMSDE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels
from ._pykernels import DEGENERATE, DIVERGED, NCOL, OK, TRACE_COLUMNS

_compiled = None
if not os.environ.get("CIMSDE_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

KERNEL = "compiled" if _compiled is not None else "python"


def get(name: str | None = None):
    """Return the kernel module ``"compiled"``, ``"python"`` or the default."""
    name = name or KERNEL
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown kernel {name!r}")


def available() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


__all__ = ["KERNEL", "get", "available", "TRACE_COLUMNS", "NCOL", "OK", "DIVERGED", "DEGENERATE"]
