"""Thread-count control for the numba kernels.

Importing this module before numba raises the thread-pool ceiling so that
``--threads`` can exceed the core count; outputs never depend on it.
"""
import os

os.environ.setdefault("NUMBA_NUM_THREADS", str(max(4, os.cpu_count() or 1)))
# the bundled TBB is too old for numba; OpenMP is always present
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

import numba  # noqa: E402


def set_threads(n: int | None) -> int:
    """Set the kernel thread count (clamped to the pool size); returns it."""
    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def get_threads() -> int:
    return numba.get_num_threads()
