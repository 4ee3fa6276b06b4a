"""Global numerical knobs and environment switches.

``DDROP_NUMBA=0`` forces the pure-numpy kernels; ``DDROP_THREADS`` caps worker
threads used by the CLI.
"""

from __future__ import annotations

import os

TOL_BOUNDARY = 1e-9
DEFAULT_GRID = 101
DEFAULT_SEED = 0
MIN_STRICT_MARGIN = 1e-3
# Largest target matrix size p'q' for which homomorphisms are materialized as matrices.
MATRIX_CAP = 5000
# Above this size dense evaluation switches to scipy.sparse.
DENSE_CAP = 600


def use_numba() -> bool:
    return os.environ.get("DDROP_NUMBA", "1").strip().lower() not in {"0", "false", "no", "off"}


def thread_cap() -> int:
    raw = os.environ.get("DDROP_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return os.cpu_count() or 1
    return max(1, value)
