"""Backend dispatch for the numeric kernels.

The env var ``PLACELINK_BACKEND`` picks the implementation at import time:

* ``numba`` — require the ``@njit`` kernels (raise if numba is missing)
* ``numpy`` — force the pure-numpy fallback
* unset / ``auto`` — numba when importable, numpy otherwise

``benchmarks/bench_kernels.py`` times both backends side by side.
"""

import os

from . import numpy_impl

EARTH_RADIUS_M = numpy_impl.EARTH_RADIUS_M

_KERNEL_NAMES = (
    "haversine_m_batch",
    "levenshtein_batch",
    "jaro_distance_batch",
    "geohash_encode_batch",
    "best_split_gini",
    "best_split_sse",
)


def _select():
    choice = os.environ.get("PLACELINK_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"PLACELINK_BACKEND must be 'numba', 'numpy', or 'auto', got {choice!r}"
        )
    if choice in ("auto", "numba"):
        try:
            from . import numba_impl
            return "numba", numba_impl
        except ImportError:
            if choice == "numba":
                raise
    return "numpy", numpy_impl


_backend_name, _impl = _select()

haversine_m_batch = _impl.haversine_m_batch
levenshtein_batch = _impl.levenshtein_batch
jaro_distance_batch = _impl.jaro_distance_batch
geohash_encode_batch = _impl.geohash_encode_batch
best_split_gini = _impl.best_split_gini
best_split_sse = _impl.best_split_sse


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _backend_name
