"""Worker-thread control for the numba-backed kernels.

This module must be imported before numba so the thread cap below takes
effect; the package ``__init__`` guarantees that ordering.
"""

from __future__ import annotations

import os
import warnings

# Numba caps its thread pool at NUMBA_NUM_THREADS, fixed at import time.
# Keep a small oversubscription floor so thread-count invariance can be
# exercised even on single-core machines; harmless elsewhere, and only
# effective if numba has not been imported yet.
_FLOOR = 4
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(os.cpu_count() or 1, _FLOOR)))

with warnings.catch_warnings():
    # Some environments ship a TBB too old for numba's TBB layer; numba
    # warns once while initializing and falls back to another layer,
    # which is fine.
    warnings.filterwarnings("ignore", message=".*TBB.*")
    import numba
    import numba.np.ufunc.parallel  # noqa: F401  (threading layer init warns here)

    _default = min(os.cpu_count() or 1, int(numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(_default)

ENV_VAR = "JBF_THREADS"


def max_threads() -> int:
    """Largest worker count this process can use."""
    return int(numba.config.NUMBA_NUM_THREADS)


def get_threads() -> int:
    """Worker count currently in effect."""
    return int(numba.get_num_threads())


def set_threads(n: int) -> int:
    """Set the kernel worker count, clamped to [1, max_threads()].

    Returns the count actually set.  Results of every kernel in this
    package are bitwise independent of the worker count, so clamping
    never changes numerical behaviour.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    n = min(n, max_threads())
    numba.set_num_threads(n)
    return n


def threads_from_env(default: int | None = None) -> int:
    """Resolve the startup worker count from the environment.

    ``JBF_THREADS`` provides the default; an explicit ``default`` (e.g. a
    command-line flag, which wins over the environment) overrides it.
    """
    if default is not None:
        return set_threads(default)
    env = os.environ.get(ENV_VAR)
    if env is not None:
        try:
            return set_threads(int(env))
        except ValueError as exc:
            raise ValueError(f"invalid {ENV_VAR} value {env!r}") from exc
    return get_threads()
