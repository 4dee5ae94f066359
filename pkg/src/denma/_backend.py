"""Selects the compiled kernel extension when available.

Set DENMA_BACKEND=py to force the numpy fallback, DENMA_BACKEND=c to require
the compiled extension (import error if it is missing); anything else means
"compiled if built, fallback otherwise".
"""

import os

_requested = os.environ.get("DENMA_BACKEND", "auto").lower()

if _requested == "py":
    from . import _kernels_py as kernels
elif _requested == "c":
    from . import _kernels as kernels  # noqa: F401  (built by setup.py)
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels


def active_backend() -> str:
    """'compiled' or 'python', whichever is serving the kernels."""
    return "compiled" if kernels.BACKEND_NAME == "c" else "python"
