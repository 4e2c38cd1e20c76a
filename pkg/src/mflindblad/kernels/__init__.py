"""Hot per-particle kernels with two interchangeable backends.

The numba backend is used unless ``MFLINDBLAD_DISABLE_JIT`` is set to a true
value (or numba is unavailable), in which case the pure-numpy backend is used.
``MFLINDBLAD_NUM_THREADS`` sets the numba thread count; particles are updated
independently, so it never changes results.
"""
import os

from . import _numpy as numpy_backend
from ._common import ALGORITHM1, CONSISTENT, HALVED

VARIANT_CODES = {"algorithm1": ALGORITHM1, "halved-expectation": HALVED, "density-consistent": CONSISTENT}


def _truthy(value: str | None) -> bool:
    return (value or "").strip().lower() in {"1", "true", "yes", "on"}


def load_jit_backend():
    from . import _jit

    return _jit


jit_backend = None
if not _truthy(os.environ.get("MFLINDBLAD_DISABLE_JIT")):
    try:
        jit_backend = load_jit_backend()
    except ImportError:  # pragma: no cover - numba missing
        jit_backend = None

backend = jit_backend if jit_backend is not None else numpy_backend
BACKEND = "numba" if jit_backend is not None else "numpy"


def set_num_threads(n: int | None = None) -> int:
    """Apply ``n`` (or MFLINDBLAD_NUM_THREADS) to numba; returns the count in use."""
    if jit_backend is None:
        return 1
    import numba

    if n is None:
        env = os.environ.get("MFLINDBLAD_NUM_THREADS")
        if not env:
            return numba.get_num_threads()
        n = int(env)
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


gaussian_increments = backend.gaussian_increments
step_normalized = backend.step_normalized
step_unnormalized = backend.step_unnormalized
step_density = backend.step_density

__all__ = [
    "ALGORITHM1",
    "BACKEND",
    "CONSISTENT",
    "HALVED",
    "VARIANT_CODES",
    "backend",
    "gaussian_increments",
    "jit_backend",
    "numpy_backend",
    "set_num_threads",
    "step_density",
    "step_normalized",
    "step_unnormalized",
]
