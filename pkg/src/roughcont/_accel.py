"""Backend selection for the hot pair-sum kernels.

Numba is used when importable unless ``ROUGHCONT_NO_NUMBA`` is set to a truthy
value, in which case the vectorised numpy implementations are used instead.
The flag is read at import time; ``set_backend`` switches at runtime (tests and
the benchmark use it to exercise both paths).
"""

import os

try:
    import numba

    HAVE_NUMBA = True
    # the bundled TBB is often too old; prefer the other layers
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_env = os.environ.get("ROUGHCONT_NO_NUMBA", "").strip().lower()
_use_numba = HAVE_NUMBA and _env not in {"1", "true", "yes", "on"}


def use_numba():
    return _use_numba


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _use_numba
    prev = "numba" if _use_numba else "numpy"
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def backend():
    return "numba" if _use_numba else "numpy"


def set_threads(n):
    """Bound the numba thread pool; a no-op on the numpy path."""
    if HAVE_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
