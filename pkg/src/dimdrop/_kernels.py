"""Hot loops with a numba implementation and a pure-numpy fallback.

The numba versions are used when numba imports and ``DDROP_NUMBA`` is not
``0``.  Both variants compute identical results (min/max/sums in the same
order for the reductions that matter) and are cross-checked in the tests.
"""

from __future__ import annotations

import numpy as np

from .config import use_numba

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# min-plus product


@njit(cache=True)
def _minplus_nb(a, b):
    n, m = a.shape
    l = b.shape[1]
    out = np.full((n, l), np.inf)
    for i in range(n):
        for j in range(m):
            aij = a[i, j]
            if aij == np.inf:
                continue
            for k in range(l):
                v = aij + b[j, k]
                if v < out[i, k]:
                    out[i, k] = v
    return out


def _minplus_np(a, b):
    n, m = a.shape
    l = b.shape[1]
    out = np.full((n, l), np.inf)
    if m == 0:
        return out
    step = max(1, 4_000_000 // max(1, m * l))
    for i in range(0, n, step):
        out[i : i + step] = np.min(a[i : i + step, :, None] + b[None, :, :], axis=1)
    return out


def minplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """C[i, k] = min_j A[i, j] + B[j, k] (with +inf as the neutral element)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError("inner dimensions differ")
    if HAVE_NUMBA and use_numba():
        return _minplus_nb(a, b)
    return _minplus_np(a, b)


# ---------------------------------------------------------------------------
# Katetov inequalities


@njit(cache=True)
def _katetov_nb(da, db, phi):
    na, nb = phi.shape
    worst = np.zeros(4)
    for i in range(na):
        for i2 in range(na):
            d = da[i, i2]
            for j in range(nb):
                # phi(a, b) <= d(a, a') + phi(a', b)
                v = phi[i, j] - (d + phi[i2, j])
                if v > worst[0] and phi[i, j] != np.inf:
                    worst[0] = v
                # d(a, a') <= phi(a, b) + phi(a', b)
                v = d - (phi[i, j] + phi[i2, j])
                if v > worst[1]:
                    worst[1] = v
    for j in range(nb):
        for j2 in range(nb):
            d = db[j, j2]
            for i in range(na):
                # phi(a, b) <= d(b, b') + phi(a, b')
                v = phi[i, j] - (d + phi[i, j2])
                if v > worst[2] and phi[i, j] != np.inf:
                    worst[2] = v
                # d(b, b') <= phi(a, b) + phi(a, b')
                v = d - (phi[i, j] + phi[i, j2])
                if v > worst[3]:
                    worst[3] = v
    return worst


def _katetov_np(da, db, phi):
    worst = np.zeros(4)
    finite = np.isfinite(phi)
    with np.errstate(invalid="ignore"):
        v = phi[:, None, :] - (da[:, :, None] + phi[None, :, :])
        v = np.where(finite[:, None, :], v, 0.0)
        worst[0] = max(0.0, float(np.nanmax(v, initial=0.0)))
        v = da[:, :, None] - (phi[:, None, :] + phi[None, :, :])
        worst[1] = max(0.0, float(np.nanmax(v, initial=0.0)))
        v = phi[:, :, None] - (db[None, :, :] + phi[:, None, :])
        v = np.where(finite[:, :, None], v, 0.0)
        worst[2] = max(0.0, float(np.nanmax(v, initial=0.0)))
        v = db[None, :, :] - (phi[:, :, None] + phi[:, None, :])
        worst[3] = max(0.0, float(np.nanmax(v, initial=0.0)))
    return worst


def katetov_violations(da: np.ndarray, db: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Largest violation (>= 0) of each of the four bi-Katetov inequalities."""
    da = np.ascontiguousarray(da, dtype=np.float64)
    db = np.ascontiguousarray(db, dtype=np.float64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if HAVE_NUMBA and use_numba():
        return _katetov_nb(da, db, phi)
    return _katetov_np(da, db, phi)


# ---------------------------------------------------------------------------
# batch evaluation of piecewise-linear maps


@njit(cache=True)
def _pl_eval_nb(xs, ys, offsets, pts):
    nm = offsets.shape[0] - 1
    npts = pts.shape[0]
    out = np.empty((nm, npts))
    for m in range(nm):
        lo, hi = offsets[m], offsets[m + 1]
        j = lo
        for t in range(npts):
            x = pts[t]
            if x <= xs[lo]:
                out[m, t] = ys[lo]
                continue
            if x >= xs[hi - 1]:
                out[m, t] = ys[hi - 1]
                continue
            # pts are sorted: advance the segment pointer
            if j < lo or xs[j] > x:
                j = lo
            while j + 1 < hi and xs[j + 1] <= x:
                j += 1
            x0, x1 = xs[j], xs[j + 1]
            out[m, t] = ys[j] + (ys[j + 1] - ys[j]) * (x - x0) / (x1 - x0)
    return out


def _pl_eval_np(xs, ys, offsets, pts):
    nm = len(offsets) - 1
    out = np.empty((nm, len(pts)))
    for m in range(nm):
        lo, hi = offsets[m], offsets[m + 1]
        out[m] = np.interp(pts, xs[lo:hi], ys[lo:hi])
    return out


def pl_eval_batch(xs: np.ndarray, ys: np.ndarray, offsets: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Values of many PL maps (knots concatenated, ``offsets`` delimiting maps) at sorted points."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if np.any(np.diff(pts) < 0):
        raise ValueError("points must be sorted")
    if HAVE_NUMBA and use_numba():
        return _pl_eval_nb(xs, ys, offsets, pts)
    return _pl_eval_np(xs, ys, offsets, pts)


def pack_maps(maps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate float knots of PL maps for :func:`pl_eval_batch`."""
    xs, ys, offsets = [], [], [0]
    for m in maps:
        fx, fy = m.float_knots()
        xs.append(fx)
        ys.append(fy)
        offsets.append(offsets[-1] + len(fx))
    if not xs:
        return np.zeros(0), np.zeros(0), np.zeros(1, dtype=np.int64)
    return np.concatenate(xs), np.concatenate(ys), np.asarray(offsets, dtype=np.int64)


# ---------------------------------------------------------------------------
# Hausdorff gap of columns


@njit(cache=True)
def _gap_columns_nb(vals):
    # vals: (count, columns), each column sorted ascending
    n, c = vals.shape
    out = np.empty(c)
    for t in range(c):
        g = max(vals[0, t], 1.0 - vals[n - 1, t])
        for i in range(n - 1):
            h = (vals[i + 1, t] - vals[i, t]) / 2.0
            if h > g:
                g = h
        out[t] = g
    return out


def _gap_columns_np(vals):
    g = np.maximum(vals[0], 1.0 - vals[-1])
    if vals.shape[0] > 1:
        g = np.maximum(g, np.max(np.diff(vals, axis=0), axis=0) / 2.0)
    return g


def hausdorff_gap_columns(vals: np.ndarray) -> np.ndarray:
    """Hausdorff distance to [0, 1] of every column of a (count, columns) array."""
    vals = np.sort(np.asarray(vals, dtype=np.float64), axis=0)
    if vals.shape[0] == 0:
        raise ValueError("empty value sets")
    vals = np.ascontiguousarray(vals)
    if HAVE_NUMBA and use_numba():
        return _gap_columns_nb(vals)
    return _gap_columns_np(vals)


def backend() -> str:
    return "numba" if HAVE_NUMBA and use_numba() else "numpy"
