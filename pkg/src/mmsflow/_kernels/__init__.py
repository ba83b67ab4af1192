"""Kernel backend selection.

The hot path (network evaluation and per-sample Jacobian assembly) has two
interchangeable implementations: a Cython extension built at install time
and a pure NumPy fallback.  The compiled one is preferred when present;
set ``MMSFLOW_KERNELS=numpy`` or ``MMSFLOW_KERNELS=compiled`` to force a
backend (forcing ``compiled`` raises if the extension is missing).

Both backends produce results equal to floating-point roundoff; they may
differ in the last bits because summation orders differ.
"""

import os

_requested = os.environ.get("MMSFLOW_KERNELS", "auto").strip().lower()

if _requested in ("numpy", "python", "pure"):
    from . import numpy_backend as _impl
elif _requested in ("auto", "", "compiled", "c"):
    try:
        from . import _mlp_cy as _impl
    except ImportError:
        if _requested in ("compiled", "c"):
            raise
        from . import numpy_backend as _impl
else:
    raise ValueError(f"unknown MMSFLOW_KERNELS value {_requested!r}")

BACKEND = _impl.BACKEND_NAME
forward = _impl.forward
forward_jacobian = _impl.forward_jacobian


def available_backends():
    """Names of the backends importable in this installation."""
    names = ["numpy"]
    try:
        from . import _mlp_cy  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get_backend(name: str):
    """Return the backend module by name ('numpy' or 'compiled')."""
    if name == "numpy":
        from . import numpy_backend

        return numpy_backend
    if name == "compiled":
        from . import _mlp_cy

        return _mlp_cy
    raise ValueError(f"unknown backend {name!r}")
