"""Backend selection for the per-cell kernels.

The compiled extension is used when it imports; otherwise the NumPy
implementation in :mod:`llbtoc._kernels_py` takes over. Call
:func:`use_backend` to switch explicitly (benchmarks and tests do).
"""

from __future__ import annotations

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_NAMES = ("laplacian", "llb_rhs", "lin_apply", "lin_apply_t", "xi_source")

BACKEND = ""


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def use_backend(name: str) -> None:
    """Route the kernel functions of this module to ``name``."""
    global BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        source = _compiled
    elif name == "python":
        source = _kernels_py
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    for fn in _NAMES:
        globals()[fn] = getattr(source, fn)
    BACKEND = name


def as_block(a: np.ndarray) -> np.ndarray:
    """View a field of shape ``(*cells, 3)`` as ``(n0, n1, n2, 3)``."""
    cells = a.shape[:-1]
    padded = tuple(cells) + (1,) * (3 - len(cells))
    return np.ascontiguousarray(a, dtype=np.float64).reshape(padded + (3,))


use_backend("compiled" if _compiled is not None else "python")
