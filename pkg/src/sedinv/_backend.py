"""Kernel backend selection.

The hot numerical loops in :mod:`sedinv.kernels` exist twice: a numba
``@njit`` version and a pure-numpy version. Which one runs is decided once at
import time from the environment variable ``SEDINV_BACKEND``:

* ``auto`` (default) - numba if it imports, numpy otherwise
* ``numba``          - require numba, raise if unavailable
* ``numpy``          - force the pure-numpy fallback

Results agree between backends to floating-point reordering tolerance;
bit-level determinism is guaranteed per backend.
"""

from __future__ import annotations

import os

_CHOICE = os.environ.get("SEDINV_BACKEND", "auto").strip().lower()

if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"SEDINV_BACKEND={_CHOICE!r}: expected 'auto', 'numba' or 'numpy'"
    )

if _CHOICE == "numpy":
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        if _CHOICE == "numba":
            raise
        HAVE_NUMBA = False

USE_NUMBA: bool = HAVE_NUMBA and _CHOICE in ("auto", "numba")


def backend_name() -> str:
    """Resolved backend, 'numba' or 'numpy'."""
    return "numba" if USE_NUMBA else "numpy"
