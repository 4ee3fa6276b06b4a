"""Continuous paths of unitaries s -> U(s), s in [0, 1].

Every path exposes ``at(s)`` (a dense array or a scipy sparse matrix) and a
Lipschitz bound ``lipschitz()`` for the operator norm of U(s) - U(s').
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import dense, permutation_matrix, unitary_eig, unitary_power


class UnitaryPath:
    size: int
    sparse: bool = False

    def at(self, s: float):
        raise NotImplementedError

    def at_dense(self, s: float) -> np.ndarray:
        return dense(self.at(s))

    def lipschitz(self) -> float:
        raise NotImplementedError

    def knots(self) -> list[float]:
        return [0.0, 1.0]

    def adjoint(self) -> "UnitaryPath":
        return AdjointPath(self)


def _identity(n: int, sparse: bool):
    return sp.identity(n, dtype=complex, format="csr") if sparse else np.eye(n, dtype=complex)


class ConstantPath(UnitaryPath):
    def __init__(self, u):
        self.u = u if sp.issparse(u) else np.asarray(u, dtype=complex)
        self.size = self.u.shape[0]
        self.sparse = sp.issparse(self.u)

    @classmethod
    def identity(cls, n: int, sparse: bool = False) -> "ConstantPath":
        return cls(_identity(n, sparse))

    def at(self, s: float):
        return self.u

    def lipschitz(self) -> float:
        return 0.0


class KnotPath(UnitaryPath):
    """Spectral geodesics U_k exp(r log(U_k* U_{k+1})) between unitary knots."""

    def __init__(self, s_knots: Sequence[float], mats: Sequence[np.ndarray]):
        s = np.asarray([float(v) for v in s_knots])
        if len(s) < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("path knots must increase from 0 to 1")
        self.s = s
        self.mats = [np.asarray(m, dtype=complex) for m in mats]
        self.size = self.mats[0].shape[0]
        self._seg = []
        self._last = None
        for u0, u1 in zip(self.mats, self.mats[1:]):
            z, theta = unitary_eig(u0.conj().T @ u1)
            self._seg.append((z, theta))

    def at(self, s: float) -> np.ndarray:
        s = min(max(float(s), 0.0), 1.0)
        if self._last is not None and self._last[0] == s:
            return self._last[1]
        out = self._at(s)
        self._last = (s, out)
        return out

    def _at(self, s: float) -> np.ndarray:
        i = int(np.searchsorted(self.s, s, side="right") - 1)
        i = min(max(i, 0), len(self._seg) - 1)
        r = (s - self.s[i]) / (self.s[i + 1] - self.s[i])
        if r == 0.0:
            return self.mats[i]
        if r == 1.0:
            return self.mats[i + 1]
        z, theta = self._seg[i]
        return self.mats[i] @ unitary_power(z, theta, r)

    def lipschitz(self) -> float:
        out = 0.0
        for (z, theta), a, b in zip(self._seg, self.s, self.s[1:]):
            if theta.size:
                out = max(out, float(np.max(np.abs(theta))) / (b - a))
        return out

    def knots(self) -> list[float]:
        return [float(v) for v in self.s]


class InvolutionPath(UnitaryPath):
    """Path from 1 to the permutation matrix of an involution: P_+ + e^{i pi s} P_-."""

    sparse = True

    def __init__(self, perm: np.ndarray):
        perm = np.asarray(perm, dtype=np.int64)
        if np.any(perm[perm] != np.arange(len(perm))):
            raise ValueError("permutation is not an involution")
        self.perm = perm
        self.size = len(perm)
        idx = np.arange(self.size)
        self._moved = idx[perm != idx]
        self._fixed = idx[perm == idx]

    def at(self, s: float):
        e = np.exp(1j * math.pi * float(s))
        n = self.size
        m = self._moved
        rows = np.concatenate([self._fixed, m, m])
        cols = np.concatenate([self._fixed, m, self.perm[m]])
        vals = np.concatenate(
            [
                np.ones(len(self._fixed), dtype=complex),
                np.full(len(m), (1 + e) / 2),
                np.full(len(m), (1 - e) / 2),
            ]
        )
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def lipschitz(self) -> float:
        return math.pi if len(self._moved) else 0.0


class ProductPath(UnitaryPath):
    """Pointwise product U_1(s) U_2(s) ... U_r(s)."""

    def __init__(self, factors: Sequence[UnitaryPath]):
        if not factors:
            raise ValueError("empty product")
        sizes = {f.size for f in factors}
        if len(sizes) != 1:
            raise ValueError("factor sizes differ")
        self.factors = list(factors)
        self.size = factors[0].size
        self.sparse = all(f.sparse for f in factors)

    def at(self, s: float):
        out = None
        for f in self.factors:
            m = f.at(s)
            if out is None:
                out = m
            elif sp.issparse(out) and not sp.issparse(m):
                out = out @ m
            else:
                out = out @ m
        if sp.issparse(out) and not self.sparse:
            out = out.toarray()
        return out

    def lipschitz(self) -> float:
        return float(sum(f.lipschitz() for f in self.factors))

    def knots(self) -> list[float]:
        return sorted({k for f in self.factors for k in f.knots()})


class AdjointPath(UnitaryPath):
    def __init__(self, base: UnitaryPath):
        self.base = base
        self.size = base.size
        self.sparse = base.sparse

    def at(self, s: float):
        return self.base.at(s).conj().T

    def lipschitz(self) -> float:
        return self.base.lipschitz()

    def knots(self) -> list[float]:
        return self.base.knots()


class PiecewisePath(UnitaryPath):
    """Concatenation of pieces on [b_j, b_{j+1}] given as callables with Lipschitz bounds."""

    def __init__(self, breaks: Sequence[float], pieces: Sequence[tuple[Callable[[float], np.ndarray], float]], size: int):
        if len(breaks) != len(pieces) + 1:
            raise ValueError("need one more break than pieces")
        self.breaks = [float(b) for b in breaks]
        self.pieces = list(pieces)
        self.size = size

    def at(self, s: float):
        s = min(max(float(s), 0.0), 1.0)
        for j in range(len(self.pieces)):
            if s <= self.breaks[j + 1] or j == len(self.pieces) - 1:
                return self.pieces[j][0](s)
        raise AssertionError("unreachable")

    def lipschitz(self) -> float:
        return float(max(l for _, l in self.pieces))

    def knots(self) -> list[float]:
        return list(self.breaks)


class BlockEvaluationPath(UnitaryPath):
    """s -> block-diagonal image of a source unitary path under a normal-form layout.

    ``layout`` is a Homomorphism-like object providing ``block_diag_from``.
    """

    def __init__(self, layout, source_path: UnitaryPath):
        self.layout = layout
        self.source = source_path
        self.size = layout.tgt.p * layout.tgt.q
        self.sparse = layout.prefer_sparse

    def at(self, s: float):
        return self.layout.block_diag_from(self.source.at_dense, s)

    def lipschitz(self) -> float:
        return self.source.lipschitz() * self.layout.pattern_lipschitz()

    def knots(self) -> list[float]:
        return [0.0, 1.0]


def permutation_path(perm: np.ndarray) -> UnitaryPath:
    """Path from 1 to the permutation matrix of ``perm`` as a product of two involution paths.

    A cycle (c_0 ... c_{m-1}) equals R2 o R1 with R1: c_i <-> c_{-i} and
    R2: c_i <-> c_{1-i} (indices mod m), so M_perm = M_R2 M_R1.
    """
    perm = np.asarray(perm, dtype=np.int64)
    n = len(perm)
    r1 = np.arange(n)
    r2 = np.arange(n)
    seen = np.zeros(n, dtype=bool)
    for start in range(n):
        if seen[start] or perm[start] == start:
            seen[start] = True
            continue
        cyc = [start]
        seen[start] = True
        j = perm[start]
        while j != start:
            cyc.append(int(j))
            seen[j] = True
            j = perm[j]
        m = len(cyc)
        for i in range(m):
            r1[cyc[i]] = cyc[(-i) % m]
            r2[cyc[i]] = cyc[(1 - i) % m]
    return ProductPath([InvolutionPath(r2), InvolutionPath(r1)])


def sampled_unitarity_defect(path: UnitaryPath, per_segment: int = 10) -> float:
    """max ||U*U - 1|| (Frobenius bound) at knots and interior points of each segment."""
    from .linalg import unitarity_defect

    ks = path.knots()
    pts = set(ks)
    for a, b in zip(ks, ks[1:]):
        for j in range(1, per_segment + 1):
            pts.add(a + (b - a) * j / (per_segment + 1))
    return max(unitarity_defect(path.at(s)) for s in sorted(pts))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    from scipy.stats import unitary_group

    if n == 1:
        return np.exp(2j * math.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(n, random_state=rng)


def unitary_path_in_algebra(p: int, q: int, rng: np.random.Generator, interior: int = 1, scale: float = 1.0) -> KnotPath:
    """Random unitary path in Z_{p,q}: v (x) 1 at 0, 1 (x) w at 1, free unitaries between.

    ``scale`` < 1 shrinks every knot toward the identity along its spectral
    geodesic, giving slower paths.
    """
    def shrink(u):
        z, theta = unitary_eig(u)
        return unitary_power(z, theta, scale)

    knots = [0.0] + [(j + 1) / (interior + 1) for j in range(interior)] + [1.0]
    mats = [np.kron(shrink(random_unitary(p, rng)), np.eye(q))]
    mats += [shrink(random_unitary(p * q, rng)) for _ in range(interior)]
    mats.append(np.kron(np.eye(p), shrink(random_unitary(q, rng))))
    return KnotPath(knots, mats)
