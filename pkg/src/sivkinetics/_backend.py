"""Pick the compiled kernels when they were built, else the NumPy fallback.

``SIVKINETICS_BACKEND=python`` forces the fallback; ``=cython`` insists on
the compiled build and fails at import when it is missing.
"""

import os

from . import _kernels_py

_choice = os.environ.get("SIVKINETICS_BACKEND", "").strip().lower()
if _choice not in ("", "python", "cython"):
    raise ImportError(f"SIVKINETICS_BACKEND must be 'python' or 'cython', not {_choice!r}")

kernels = _kernels_py
if _choice != "python":
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise ImportError("SIVKINETICS_BACKEND=cython but the compiled kernels are not built") from None
        kernels = _kernels_py

NAME = kernels.NAME
