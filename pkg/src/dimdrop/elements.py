"""Elements of Z_{p,q}: matrix-valued paths with boundary conditions.

``PLElement`` is entrywise piecewise linear between knots.  Products,
adjoints and linear combinations are represented lazily so that algebraic
identities can be checked on exact pointwise values.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import TOL_BOUNDARY
from .core import DimensionDropAlgebra
from .errors import BoundaryViolation, DimensionMismatch
from .linalg import compress_left, compress_right, opnorm
from .pattern import PLMap


class Element:
    algebra: DimensionDropAlgebra

    @property
    def size(self) -> int:
        return self.algebra.p * self.algebra.q

    def at(self, s: float) -> np.ndarray:
        return self.at_many(np.array([float(s)]))[0]

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def knots(self) -> list[float]:
        return [0.0, 1.0]

    def lipschitz(self) -> float:
        raise NotImplementedError

    def sup_norm(self) -> float:
        raise NotImplementedError

    def hermitian(self) -> bool:
        return False

    def adjoint(self) -> "Element":
        return AdjointElement(self)

    def __matmul__(self, other: "Element") -> "Element":
        return ProductElement(self, other)

    def trace_knots(self) -> tuple[list[float], list[float]]:
        raise NotImplementedError(f"{type(self).__name__} has no piecewise-linear trace")


class PLElement(Element):
    def __init__(self, algebra: DimensionDropAlgebra, s_knots: Sequence, mats: Sequence, *, check: bool = True, tol: float = TOL_BOUNDARY):
        self.algebra = algebra
        s = np.asarray([float(v) for v in s_knots])
        m = np.asarray(mats, dtype=complex)
        n = algebra.p * algebra.q
        if m.ndim != 3 or m.shape[1:] != (n, n) or m.shape[0] != len(s):
            raise DimensionMismatch(f"expected {len(s)} matrices of size {n}")
        if len(s) < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("knots must increase strictly from 0 to 1")
        self.s = s
        self.mats = m
        if check:
            _, r0 = compress_left(m[0], algebra.p, algebra.q)
            _, r1 = compress_right(m[-1], algebra.p, algebra.q)
            if r0 > tol or r1 > tol:
                raise BoundaryViolation(f"boundary residuals {r0:.3e}, {r1:.3e} exceed {tol}")
        self._herm = bool(np.allclose(m, np.conj(np.transpose(m, (0, 2, 1))), atol=1e-14))

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        svals = np.clip(np.asarray(svals, dtype=float), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.s, svals, side="right") - 1, 0, len(self.s) - 2)
        r = (svals - self.s[i]) / (self.s[i + 1] - self.s[i])
        a, b = self.mats[i], self.mats[i + 1]
        return a + r[:, None, None] * (b - a)

    def knots(self) -> list[float]:
        return [float(v) for v in self.s]

    def lipschitz(self) -> float:
        return max(opnorm(b - a) / (t1 - t0) for a, b, t0, t1 in zip(self.mats, self.mats[1:], self.s, self.s[1:]))

    def sup_norm(self) -> float:
        return max(opnorm(m) for m in self.mats)

    def hermitian(self) -> bool:
        return self._herm

    def trace_knots(self) -> tuple[list[float], list[float]]:
        n = self.size
        return self.knots(), [float(np.trace(m).real) / n for m in self.mats]

    def scaled(self, c: complex) -> "PLElement":
        return PLElement(self.algebra, self.s, self.mats * c, check=False)

    def plus(self, other: "PLElement", c: complex = 1.0) -> "PLElement":
        s = np.union1d(self.s, other.s)
        return PLElement(self.algebra, s, self.at_many(s) + c * other.at_many(s), check=False)

    def adjoint(self) -> "PLElement":
        return PLElement(self.algebra, self.s, np.conj(np.transpose(self.mats, (0, 2, 1))), check=False)

    def to_json(self) -> dict:
        return {
            "algebra": self.algebra.as_list(),
            "knots": [float(v) for v in self.s],
            "mats": [[[[float(z.real), float(z.imag)] for z in row] for row in m] for m in self.mats],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PLElement":
        alg = DimensionDropAlgebra.from_list(data["algebra"])
        mats = np.array([[[complex(re, im) for re, im in row] for row in m] for m in data["mats"]])
        return cls(alg, data["knots"], mats)


class ProductElement(Element):
    def __init__(self, left: Element, right: Element):
        if left.algebra != right.algebra:
            raise DimensionMismatch("factors live in different algebras")
        self.algebra = left.algebra
        self.left, self.right = left, right

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        return self.left.at_many(svals) @ self.right.at_many(svals)

    def knots(self) -> list[float]:
        return sorted(set(self.left.knots()) | set(self.right.knots()))

    def lipschitz(self) -> float:
        return self.left.sup_norm() * self.right.lipschitz() + self.right.sup_norm() * self.left.lipschitz()

    def sup_norm(self) -> float:
        return self.left.sup_norm() * self.right.sup_norm()


class AdjointElement(Element):
    def __init__(self, base: Element):
        self.algebra = base.algebra
        self.base = base

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        return np.conj(np.transpose(self.base.at_many(svals), (0, 2, 1)))

    def knots(self) -> list[float]:
        return self.base.knots()

    def lipschitz(self) -> float:
        return self.base.lipschitz()

    def sup_norm(self) -> float:
        return self.base.sup_norm()


class LinearCombination(Element):
    def __init__(self, terms: Sequence[tuple[complex, Element]]):
        algs = {e.algebra for _, e in terms}
        if len(algs) != 1:
            raise DimensionMismatch("terms live in different algebras")
        self.algebra = algs.pop()
        self.terms = list(terms)

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        out = None
        for c, e in self.terms:
            v = c * e.at_many(svals)
            out = v if out is None else out + v
        return out

    def knots(self) -> list[float]:
        return sorted({k for _, e in self.terms for k in e.knots()})

    def lipschitz(self) -> float:
        return sum(abs(c) * e.lipschitz() for c, e in self.terms)

    def sup_norm(self) -> float:
        return sum(abs(c) * e.sup_norm() for c, e in self.terms)


class UnitaryElement(Element):
    """A unitary path in Z_{p,q} viewed as an element."""

    def __init__(self, algebra: DimensionDropAlgebra, path):
        self.algebra = algebra
        self.path = path

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        return np.stack([self.path.at_dense(float(s)) for s in np.atleast_1d(svals)])

    def knots(self) -> list[float]:
        return self.path.knots()

    def lipschitz(self) -> float:
        return self.path.lipschitz()

    def sup_norm(self) -> float:
        return 1.0


# ---------------------------------------------------------------------------
# generator library


def unit_element(alg: DimensionDropAlgebra) -> PLElement:
    n = alg.p * alg.q
    return PLElement(alg, [0, 1], [np.eye(n), np.eye(n)], check=False)


def scalar_element(alg: DimensionDropAlgebra, g: PLMap) -> PLElement:
    """s -> g(s) 1 for a PL map g (values in [0, 1])."""
    n = alg.p * alg.q
    xs = [float(x) for x in g.xs]
    return PLElement(alg, xs, [float(y) * np.eye(n) for y in g.ys], check=False)


def scalar_from_values(alg: DimensionDropAlgebra, xs: Sequence[float], ys: Sequence[float]) -> PLElement:
    n = alg.p * alg.q
    return PLElement(alg, xs, [complex(y) * np.eye(n) for y in ys], check=False)


def tensor_interpolant(alg: DimensionDropAlgebra, x: np.ndarray, y: np.ndarray) -> PLElement:
    """(1-s) x (x) 1_q + s 1_p (x) y."""
    p, q = alg.p, alg.q
    return PLElement(alg, [0, 1], [np.kron(x, np.eye(q)), np.kron(np.eye(p), y)])


def bump_element(alg: DimensionDropAlgebra, e: np.ndarray, center: float = 0.5) -> PLElement:
    """Tent-shaped multiple of a fixed matrix, vanishing at both endpoints."""
    n = alg.p * alg.q
    z = np.zeros((n, n), dtype=complex)
    return PLElement(alg, [0, center, 1], [z, e, z])


def _random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (a + a.conj().T) / 2
    nrm = np.linalg.norm(h, 2)
    return h / nrm if nrm > 0 else h


def random_pl_element(alg: DimensionDropAlgebra, rng: np.random.Generator, knots: int = 4, hermitian: bool = True) -> PLElement:
    """Random PL element with interior knots and norm at most one."""
    p, q = alg.p, alg.q
    n = p * q
    s = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, size=knots - 2)), [1.0]])
    s = np.unique(s)
    mats = []
    for j, t in enumerate(s):
        if j == 0:
            m = np.kron(_random_hermitian(p, rng), np.eye(q))
        elif j == len(s) - 1:
            m = np.kron(np.eye(p), _random_hermitian(q, rng))
        else:
            m = _random_hermitian(n, rng)
        if not hermitian:
            m = m * np.exp(1j * rng.uniform(0, 2 * np.pi))
        mats.append(m)
    el = PLElement(alg, s, mats)
    nrm = el.sup_norm()
    return el.scaled(1.0 / nrm) if nrm > 1 else el


def generator_library(alg: DimensionDropAlgebra, count: int, rng: np.random.Generator) -> list[PLElement]:
    """Deterministic mix of scalar PL functions, tensor interpolants and bumps (norms <= 1)."""
    p, q = alg.p, alg.q
    n = p * q
    out: list[PLElement] = []
    kinds = ["scalar", "tensor", "bump", "random"]
    for j in range(count):
        kind = kinds[j % len(kinds)]
        if kind == "scalar":
            mid = float(rng.uniform(0.2, 0.8))
            g = PLMap([0, mid, 1], [float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), float(rng.uniform(0, 1))])
            out.append(scalar_element(alg, g))
        elif kind == "tensor":
            out.append(tensor_interpolant(alg, _random_hermitian(p, rng), _random_hermitian(q, rng)))
        elif kind == "bump":
            out.append(bump_element(alg, _random_hermitian(n, rng), float(rng.uniform(0.2, 0.8))))
        else:
            out.append(random_pl_element(alg, rng))
    return out


def modulus_of_continuity(f: Element, eps: float) -> float:
    """Delta_f(eps) = eps / L with L the Lipschitz constant, capped at 1."""
    lip = f.lipschitz()
    if lip <= 0:
        return 1.0
    return min(1.0, eps / lip)


def element_distance(f: Element, g: Element, grid: Optional[int] = None) -> float:
    """sup_s ||f(s) - g(s)|| sampled on the union of knots (plus an optional uniform grid)."""
    pts = set(f.knots()) | set(g.knots())
    if grid:
        pts |= set(np.linspace(0, 1, grid).tolist())
    s = np.array(sorted(pts))
    diff = f.at_many(s) - g.at_many(s)
    return max(opnorm(d) for d in diff)
