"""Backend selection for the hot per-step kernels.

The compiled extension is preferred when importable; the pure-numpy fallback
is always available.  Set ``TIMEPERCEPT_BACKEND=numpy`` (or ``cython``) to
force a choice -- forcing ``cython`` raises if the extension is missing.

Both backends satisfy the same contracts; results agree to floating-point
roundoff (summation order differs), so runs are reproducible per backend and
the active backend is recorded in every run manifest.
"""

from __future__ import annotations

import os

from . import numpy_backend

_requested = os.environ.get("TIMEPERCEPT_BACKEND", "").strip().lower()

kernels = numpy_backend
if _requested in ("", "cython", "fast"):
    try:
        from . import _fastcore as kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested:
            raise ImportError(
                "TIMEPERCEPT_BACKEND requested the compiled backend but "
                "timepercept.backends._fastcore is not built"
            )
elif _requested != "numpy":
    raise ImportError(f"unknown TIMEPERCEPT_BACKEND value {_requested!r}")

BACKEND_NAME: str = kernels.NAME


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        from . import _fastcore  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_kernels(name: str | None = None):
    """Kernel module by name (default: the backend selected at import)."""
    if name is None:
        return kernels
    if name == "numpy":
        return numpy_backend
    if name in ("cython", "fast"):
        from . import _fastcore

        return _fastcore
    raise ValueError(f"unknown backend {name!r}")
