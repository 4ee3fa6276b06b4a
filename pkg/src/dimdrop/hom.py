"""Unital *-homomorphisms between dimension drop algebras in diagonal normal form.

h(f)(s) = U(s) diag[c0(f(0)) x a, f(t_1(s)), ..., f(t_k(s)), c1(f(1)) x b] U(s)*

where c0 strips the 1_q factor of f(0) in M_p (x) 1_q and c1 strips the 1_p
factor of f(1) in 1_p (x) M_q.  Block layouts are sparse-friendly: when the
unitary path is a permutation-type path, evaluations stay sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .config import DENSE_CAP, MATRIX_CAP, TOL_BOUNDARY
from .core import DimensionDropAlgebra, as_fraction, derive_embedding_integers, validate_pair
from .elements import Element, LinearCombination, ProductElement, modulus_of_continuity, unit_element
from .errors import (
    BoundaryViolation,
    BulletsUnsatisfied,
    DimensionMismatch,
    PatternsTooFar,
    SourceNotFaithful,
    TargetTooSmall,
    TraceVariantUnavailable,
)
from .linalg import (
    compress_left,
    hermitian_norm_blockwise,
    compress_right,
    dense,
    norm_bound,
    opnorm,
    permutation_matrix,
    unitarity_defect,
    unitary_eig,
    unitary_power,
)
from .measure import Measure, cdf_distance_at_knots, pullback_trace, quantile_coupling
from .paths import (
    BlockEvaluationPath,
    ConstantPath,
    KnotPath,
    PiecewisePath,
    ProductPath,
    UnitaryPath,
    permutation_path,
)
from .pattern import (
    EigenvaluePattern,
    PatternMorphism,
    PLMap,
    candidate_plans,
    compose as compose_patterns,
    pattern_from_plan,
    plan_width,
    synthesize_plan,
    variation,
)


class Homomorphism:
    """Normal-form morphism src -> tgt given by a pattern, remainders and a unitary path."""

    def __init__(
        self,
        src: DimensionDropAlgebra,
        tgt: DimensionDropAlgebra,
        pattern: EigenvaluePattern,
        a: int,
        b: int,
        unitary: Optional[UnitaryPath],
    ):
        self.src, self.tgt = src, tgt
        self.pattern = pattern
        self.a, self.b = int(a), int(b)
        p, q = src.p, src.q
        if p * self.a + p * q * pattern.k + q * self.b != tgt.p * tgt.q:
            raise DimensionMismatch("size identity p*a + p*q*k + q*b = p'q' fails")
        if unitary is not None and unitary.size != tgt.p * tgt.q:
            raise DimensionMismatch("unitary path has the wrong size")
        self.unitary = unitary
        self._index = None
        self._float_maps = None
        self._coo = None
        self._perms = None

    # structure --------------------------------------------------------------
    @property
    def k(self) -> int:
        return self.pattern.k

    @property
    def n(self) -> int:
        return self.tgt.p * self.tgt.q

    @property
    def materialized(self) -> bool:
        return self.unitary is not None

    @property
    def prefer_sparse(self) -> bool:
        return self.unitary is not None and self.unitary.sparse

    def as_pattern_morphism(self) -> PatternMorphism:
        return PatternMorphism(self.src, self.tgt, self.pattern, self.a, self.b)

    def _require_size(self) -> None:
        if self.n > MATRIX_CAP:
            raise DimensionMismatch(f"{self.tgt} is too large to materialize (pattern-only morphism)")

    def _require_matrices(self) -> None:
        self._require_size()
        if self.unitary is None:
            raise DimensionMismatch("morphism has no unitary path (pattern-only)")

    def expanded_index(self) -> np.ndarray:
        """Distinct-map index of every block position."""
        if self._index is None:
            self._require_size()
            self._index = np.repeat(np.arange(self.pattern.distinct), np.asarray(self.pattern.mult, dtype=np.int64))
        return self._index

    def map_values(self, s: float) -> np.ndarray:
        """t_d(s) for every distinct map d (floats)."""
        if self._float_maps is None:
            self._float_maps = [m.float_knots() for m in self.pattern.maps]
        return np.array([np.interp(s, fx, fy) for fx, fy in self._float_maps])

    def pattern_lipschitz(self) -> float:
        return max(float(m.lipschitz()) for m in self.pattern.maps)

    def block_sizes(self) -> list[int]:
        p, q = self.src.p, self.src.q
        return [p] * self.a + [p * q] * self.k + [q] * self.b

    def _coo_layout(self):
        if self._coo is None:
            rows, cols = [], []
            off = 0
            for size in self.block_sizes():
                r = np.arange(size)
                rows.append(off + np.repeat(r, size))
                cols.append(off + np.tile(r, size))
                off += size
            self._coo = (np.concatenate(rows), np.concatenate(cols))
        return self._coo

    # evaluation -------------------------------------------------------------
    def block_diag_from(self, values: Callable, s: float, sparse: Optional[bool] = None):
        """diag[c0(x(0)) x a, x(t_i(s)), c1(x(1)) x b] for a source-valued callable x."""
        self._require_matrices()
        p, q = self.src.p, self.src.q
        sparse = self.prefer_sparse if sparse is None else sparse
        if self.a:
            c0, r0 = compress_left(values(0.0), p, q)
            if r0 > TOL_BOUNDARY * max(1.0, np.linalg.norm(c0)):
                raise BoundaryViolation(f"value at 0 is not in M_p (x) 1_q (residual {r0:.3e})")
        if self.b:
            c1, r1 = compress_right(values(1.0), p, q)
            if r1 > TOL_BOUNDARY * max(1.0, np.linalg.norm(c1)):
                raise BoundaryViolation(f"value at 1 is not in 1_p (x) M_q (residual {r1:.3e})")
        tv = self.map_values(s)
        uniq, inv = np.unique(tv, return_inverse=True)
        mats = np.stack([np.asarray(values(float(v)), dtype=complex) for v in uniq])
        idx = inv[self.expanded_index()]
        if sparse:
            data = []
            if self.a:
                data.append(np.tile(c0.ravel(), self.a))
            data.append(mats[idx].reshape(-1))
            if self.b:
                data.append(np.tile(c1.ravel(), self.b))
            rows, cols = self._coo_layout()
            return sp.csr_matrix((np.concatenate(data), (rows, cols)), shape=(self.n, self.n))
        out = np.zeros((self.n, self.n), dtype=complex)
        off = 0
        for _ in range(self.a):
            out[off : off + p, off : off + p] = c0
            off += p
        pq = p * q
        for i in idx:
            out[off : off + pq, off : off + pq] = mats[i]
            off += pq
        for _ in range(self.b):
            out[off : off + q, off : off + q] = c1
            off += q
        return out

    def block_diag(self, f: Element, s: float, sparse: Optional[bool] = None):
        if f.algebra != self.src:
            raise DimensionMismatch(f"element of {f.algebra} applied to a morphism from {self.src}")
        return self.block_diag_from(lambda r: f.at(r), s, sparse)

    def block_diag_batch(self, f: Element, svals: np.ndarray):
        """Sparse block-diagonal stack of block_diag(f, s) over ``svals`` (one f.at_many call)."""
        self._require_matrices()
        p, q = self.src.p, self.src.q
        c0 = c1 = None
        if self.a:
            c0, r0 = compress_left(f.at(0.0), p, q)
            if r0 > TOL_BOUNDARY * max(1.0, np.linalg.norm(c0)):
                raise BoundaryViolation(f"value at 0 is not in M_p (x) 1_q (residual {r0:.3e})")
        if self.b:
            c1, r1 = compress_right(f.at(1.0), p, q)
            if r1 > TOL_BOUNDARY * max(1.0, np.linalg.norm(c1)):
                raise BoundaryViolation(f"value at 1 is not in 1_p (x) M_q (residual {r1:.3e})")
        tv = np.stack([self.map_values(float(s)) for s in svals])
        uniq, inv = np.unique(tv, return_inverse=True)
        inv = inv.reshape(tv.shape)
        mats = np.asarray(f.at_many(uniq), dtype=complex)
        eidx = self.expanded_index()
        rows, cols = self._coo_layout()
        data, rr, cc = [], [], []
        for j in range(len(svals)):
            if self.a:
                data.append(np.tile(c0.ravel(), self.a))
            data.append(mats[inv[j][eidx]].reshape(-1))
            if self.b:
                data.append(np.tile(c1.ravel(), self.b))
            rr.append(rows + j * self.n)
            cc.append(cols + j * self.n)
        size = self.n * len(svals)
        return sp.csr_matrix((np.concatenate(data), (np.concatenate(rr), np.concatenate(cc))), shape=(size, size))

    def evaluate(self, f: Element, s: float, u=None):
        """h(f)(s) as a dense array (dense mode) or CSR matrix (sparse mode)."""
        self._require_matrices()
        sparse = self.prefer_sparse
        d = self.block_diag(f, s, sparse)
        if u is None:
            u = self.unitary.at(s)
        if sparse:
            return u @ d @ u.conj().T
        u = dense(u)
        return u @ d @ u.conj().T

    def evaluate_dense(self, f: Element, s: float) -> np.ndarray:
        return dense(self.evaluate(f, s))

    def apply(self, f: Element) -> "ImageElement":
        return ImageElement(self, f)

    # boundary block structure -----------------------------------------------
    def canonical_permutations(self) -> tuple[np.ndarray, np.ndarray]:
        """Permutations moving D(0) into M_p' (x) 1_q' and D(1) into 1_p' (x) M_q'.

        perm[j] is the target position of block-layout index j.
        """
        if self._perms is None:
            self._perms = (self._canonical(0), self._canonical(1))
        return self._perms

    def _canonical(self, x: int) -> np.ndarray:
        p, q = self.src.p, self.src.q
        pp, qq = self.tgt.p, self.tgt.q
        group = qq if x == 0 else pp
        idx = self.expanded_index()
        vals = [m(x) for m in self.pattern.maps]
        c0_atoms: list[np.ndarray] = []
        c1_atoms: list[np.ndarray] = []
        interior: list[tuple[object, np.ndarray]] = []
        off = 0
        for _ in range(self.a):
            c0_atoms.append(off + np.arange(p))
            off += p
        pq = p * q
        base_maps = off
        for pos, d in enumerate(idx):
            start = base_maps + pos * pq
            v = vals[d]
            if v == 0:
                for kk in range(q):
                    c0_atoms.append(start + np.arange(p) * q + kk)
            elif v == 1:
                for i in range(p):
                    c1_atoms.append(start + i * q + np.arange(q))
            else:
                interior.append((v, start + np.arange(pq)))
        off = base_maps + len(idx) * pq
        for _ in range(self.b):
            c1_atoms.append(off + np.arange(q))
            off += q
        if len(c0_atoms) % group or len(c1_atoms) % group:
            raise BoundaryViolation(f"endpoint blocks at s={x} do not group into multiples of {group}")
        groups: list[list[np.ndarray]] = []
        for j in range(0, len(c0_atoms), group):
            groups.append(c0_atoms[j : j + group])
        j = 0
        while j < len(interior):
            chunk = interior[j : j + group]
            if len(chunk) < group or any(c[0] != chunk[0][0] for c in chunk):
                raise BoundaryViolation(f"interior values at s={x} do not come in groups of {group}")
            groups.append([c[1] for c in chunk])
            j += group
        for j in range(0, len(c1_atoms), group):
            groups.append(c1_atoms[j : j + group])
        perm = np.empty(self.n, dtype=np.int64)
        y_off = 0
        for g in groups:
            size = len(g[0])
            r = np.arange(size)
            for copy, atom in enumerate(g):
                if x == 0:
                    perm[atom] = (y_off + r) * qq + copy
                else:
                    perm[atom] = copy * qq + (y_off + r)
            y_off += size
        expected = pp if x == 0 else qq
        if y_off != expected:
            raise BoundaryViolation(f"block structure at s={x} has size {y_off}, expected {expected}")
        return perm

    def frames(self) -> tuple[np.ndarray, np.ndarray]:
        """Unitaries F0 in M_p', F1 in M_q' with U(0) = (F0 (x) 1) P0 and U(1) = (1 (x) F1) P1."""
        perm0, perm1 = self.canonical_permutations()
        pp, qq = self.tgt.p, self.tgt.q
        m0 = dense(self.unitary.at(0.0)) @ permutation_matrix(perm0, sparse=False).T
        m1 = dense(self.unitary.at(1.0)) @ permutation_matrix(perm1, sparse=False).T
        f0, r0 = compress_left(m0, pp, qq)
        f1, r1 = compress_right(m1, pp, qq)
        if r0 > 1e-7 or r1 > 1e-7:
            raise BoundaryViolation(f"endpoint unitaries are not block frames (residuals {r0:.2e}, {r1:.2e})")
        return f0, f1

    # modifications ----------------------------------------------------------
    def with_unitary(self, unitary: UnitaryPath) -> "Homomorphism":
        h = Homomorphism(self.src, self.tgt, self.pattern, self.a, self.b, unitary)
        h._index, h._coo, h._perms = self._index, self._coo, self._perms
        return h

    def postcompose_inner(self, z: UnitaryPath) -> "Homomorphism":
        """Ad(z) o h for a unitary path z in the target algebra."""
        return self.with_unitary(ProductPath([z, self.unitary]))

    def precompose_inner(self, x: UnitaryPath) -> "Homomorphism":
        """h o Ad(x) for a unitary path x in the source algebra."""
        return self.with_unitary(ProductPath([self.unitary, BlockEvaluationPath(self, x)]))

    def with_pattern(self, pattern: EigenvaluePattern) -> "Homomorphism":
        """Same remainders and unitary, different pattern with identical boundary values."""
        if pattern.k != self.k:
            raise DimensionMismatch("pattern length differs")
        h = Homomorphism(self.src, self.tgt, pattern, self.a, self.b, self.unitary)
        return h

    def to_json(self) -> dict:
        from .serialize import path_to_json

        return {
            "src": self.src.as_list(),
            "tgt": self.tgt.as_list(),
            "a": self.a,
            "b": self.b,
            "pattern": self.pattern.to_json(),
            "unitary": path_to_json(self.unitary) if self.unitary is not None else None,
        }

    def __repr__(self) -> str:
        return f"Homomorphism({self.src}->{self.tgt}, a={self.a}, b={self.b}, k={self.k}, distinct={self.pattern.distinct})"


class ImageElement(Element):
    """h(f) as an element of the target algebra (evaluated lazily)."""

    def __init__(self, h: Homomorphism, f: Element):
        if f.algebra != h.src:
            raise DimensionMismatch("element is not in the source algebra")
        self.algebra = h.tgt
        self.h, self.f = h, f

    def at(self, s: float) -> np.ndarray:
        return self.h.evaluate_dense(self.f, s)

    def at_many(self, svals: np.ndarray) -> np.ndarray:
        return np.stack([self.at(float(s)) for s in np.atleast_1d(svals)])

    def knots(self) -> list[float]:
        return sorted(set(_breakpoints(self.h, self.f)) | set(self.h.unitary.knots()))

    def lipschitz(self) -> float:
        return self.f.lipschitz() * self.h.pattern_lipschitz() + 2.0 * self.f.sup_norm() * self.h.unitary.lipschitz()

    def sup_norm(self) -> float:
        return self.f.sup_norm()

    def hermitian(self) -> bool:
        return self.f.hermitian()

    def trace_knots(self) -> tuple[list[float], list[float]]:
        """Normalized trace of the actual matrices h(f)(s) at every breakpoint."""
        xs = self.knots()
        n = self.h.n
        vals = []
        for s in xs:
            m = self.h.evaluate(self.f, s)
            vals.append(float(m.diagonal().sum().real) / n)
        return xs, vals


def _breakpoints(h: Homomorphism, f: Element) -> list[float]:
    """Points between which every s -> f(t_i(s)) is affine."""
    pts = {0.0, 1.0}
    fk = f.knots()
    for m in h.pattern.maps:
        pts.update(float(x) for x in m.xs)
        for y in fk:
            for lo, hi in m.preimage(y):
                pts.add(float(lo))
                pts.add(float(hi))
    return sorted(pts)


def pattern_trace_knots(h: Homomorphism, f: Element) -> tuple[list[float], list[float]]:
    """Closed-form tr h(f)(s) = [a p tr f(0) + pq sum_i tr f(t_i(s)) + b q tr f(1)] / p'q'."""
    p, q = h.src.p, h.src.q
    n = h.n
    pq = p * q
    xs = _breakpoints(h, f)

    def tr(m):
        return float(np.trace(m).real) / pq

    t0, t1 = tr(f.at(0.0)), tr(f.at(1.0))
    vals = []
    for s in xs:
        tv = h.map_values(s)
        acc = sum(c * tr(f.at(float(v))) for v, c in zip(tv, h.pattern.mult))
        vals.append((h.a * p * t0 + pq * acc + h.b * q * t1) / n)
    return xs, vals


# ---------------------------------------------------------------------------
# construction


def identity_hom(alg: DimensionDropAlgebra) -> Homomorphism:
    pat = EigenvaluePattern((PLMap.identity(),), (1,), True)
    return Homomorphism(alg, alg, pat, 0, 0, ConstantPath.identity(alg.p * alg.q))


def canonical_unitary(h: Homomorphism) -> UnitaryPath:
    """Permutation-type path with U(0) = P0 and U(1) = P1 (the canonical block permutations)."""
    perm0, perm1 = h.canonical_permutations()
    inv0 = np.empty_like(perm0)
    inv0[perm0] = np.arange(len(perm0))
    sigma = inv0[perm1]
    path = ProductPath([ConstantPath(permutation_matrix(perm0)), permutation_path(sigma)])
    path.tag = "canonical"
    return path


def hom_from_pattern(
    src: DimensionDropAlgebra, tgt: DimensionDropAlgebra, pattern: EigenvaluePattern, a: int, b: int, *, materialize: bool = True
) -> Homomorphism:
    h = Homomorphism(src, tgt, pattern, a, b, None)
    if materialize and h.n <= MATRIX_CAP:
        h.unitary = canonical_unitary(h)
    return h


def _trace_reparametrize(pattern: EigenvaluePattern, beta: PLMap) -> EigenvaluePattern:
    maps = tuple(beta.compose(m) for m in pattern.maps)
    return EigenvaluePattern(maps, pattern.mult, True).merged()


def synthesize_embedding(
    src: DimensionDropAlgebra,
    tgt: DimensionDropAlgebra,
    eps,
    tau_src: Optional[Measure] = None,
    tau_tgt: Optional[Measure] = None,
    *,
    waive_bullets: bool = False,
    materialize: bool = True,
) -> Homomorphism:
    """Embedding src -> tgt with variation < eps and an explicit boundary unitary.

    With ``tau_tgt`` the maps are reparametrized by a quantile coupling so that
    the pulled-back trace equals ``tau_src`` (Lebesgue when omitted).
    """
    eps_f = as_fraction(eps)
    if src == tgt and eps_f >= 1 and tau_tgt is None:
        return identity_hom(src)
    ints = derive_embedding_integers(src, tgt, eps_f)
    if not ints.above_bound and not waive_bullets:
        raise TargetTooSmall(f"min({tgt.p}, {tgt.q}) <= M = {ints.bound}; pass waive_bullets to try anyway")
    if tau_tgt is None:
        plan = synthesize_plan(ints, eps_f)
        return hom_from_pattern(src, tgt, pattern_from_plan(plan), ints.a, ints.b, materialize=materialize)
    if (tgt.p * tgt.q) % (src.p * src.q):
        raise TraceVariantUnavailable(f"{src.p * src.q} does not divide {tgt.p * tgt.q}")
    if not tau_tgt.is_atomless():
        raise TraceVariantUnavailable("target trace has atoms")
    tau_src = tau_src if tau_src is not None else Measure.lebesgue()
    if not tau_src.is_faithful():
        raise SourceNotFaithful("source trace is not faithful")
    tried = []
    for plan in candidate_plans(ints, eps_f, atomless=True):
        base = pattern_from_plan(plan)
        pm = PatternMorphism(src, tgt, base, ints.a, ints.b)
        nu = pullback_trace(pm, tau_tgt)
        beta = quantile_coupling(nu, tau_src)
        pattern = _trace_reparametrize(base, beta)
        v = variation(pattern)
        tried.append((plan.n_levels, float(v)))
        if v < eps_f or (plan.n_levels == 1 and eps_f >= 1):
            return hom_from_pattern(src, tgt, pattern, ints.a, ints.b, materialize=materialize)
    raise BulletsUnsatisfied(f"no trace-preserving pattern with variation < {eps_f}; tried {tried}")


def trace_preservation_error(h: Homomorphism, tau_src: Measure, tau_tgt: Measure) -> float:
    return cdf_distance_at_knots(pullback_trace(h, tau_tgt), tau_src)


def compose_homs(second: Homomorphism, first: Homomorphism) -> Homomorphism:
    """second o first, for a second morphism without remainder blocks (a = b = 0)."""
    if first.tgt != second.src:
        from .errors import ChainMismatch

        raise ChainMismatch(f"{first.tgt} does not match {second.src}")
    if second.a or second.b:
        raise NotImplementedError("composition is implemented when the outer morphism has a = b = 0")
    comp = compose_patterns(first.as_pattern_morphism(), second.as_pattern_morphism())
    h = Homomorphism(first.src, second.tgt, comp.pattern, comp.a, comp.b, None)
    if not (first.materialized and second.materialized) or h.n > MATRIX_CAP:
        return h
    p, q = first.src.p, first.src.q
    pq = p * q
    # raw layout: for each expanded map of ``second`` a copy of first's layout
    inner = first.n
    c0_raw, c1_raw = [], []
    map_raw: dict = {}
    first_idx = first.expanded_index()
    second_idx = second.expanded_index()
    for e2, d2 in enumerate(second_idx):
        base = e2 * inner
        off = base
        for _ in range(first.a):
            c0_raw.append(off + np.arange(p))
            off += p
        for e1, d1 in enumerate(first_idx):
            map_raw.setdefault((int(d2), int(d1)), []).append(off + np.arange(pq))
            off += pq
        for _ in range(first.b):
            c1_raw.append(off + np.arange(q))
            off += q
    order: list[np.ndarray] = []
    order.extend(c0_raw[: comp.a])
    rest0 = c0_raw[comp.a :]
    for d2 in range(second.pattern.distinct):
        for d1 in range(first.pattern.distinct):
            order.extend(map_raw.get((d2, d1), []))
    for j in range(0, len(rest0), q):
        atoms = rest0[j : j + q]
        block = np.empty(pq, dtype=np.int64)
        for kk, atom in enumerate(atoms):
            block[np.arange(p) * q + kk] = atom
        order.append(block)
    rest1 = c1_raw[: len(c1_raw) - comp.b]
    for j in range(0, len(rest1), p):
        atoms = rest1[j : j + p]
        block = np.empty(pq, dtype=np.int64)
        for i, atom in enumerate(atoms):
            block[i * q + np.arange(q)] = atom
        order.append(block)
    order.extend(c1_raw[len(c1_raw) - comp.b :])
    perm = np.concatenate(order)
    if len(perm) != h.n or len(np.unique(perm)) != h.n:  # pragma: no cover - layout bookkeeping
        raise AssertionError("composite layout is not a permutation")
    h.unitary = ProductPath([second.unitary, BlockEvaluationPath(second, first.unitary), ConstantPath(permutation_matrix(perm))])
    return h


# ---------------------------------------------------------------------------
# verification


@dataclass
class MorphismReport:
    multiplicative: float = 0.0
    adjoint: float = 0.0
    linear: float = 0.0
    unital: float = 0.0
    boundary: float = 0.0
    unitarity: float = 0.0
    grid: int = 0
    tol: float = TOL_BOUNDARY
    failures: list = field(default_factory=list)

    @property
    def max_defect(self) -> float:
        return max(self.multiplicative, self.adjoint, self.linear, self.unital, self.boundary, self.unitarity)

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tol

    def as_dict(self) -> dict:
        return {
            "multiplicative": self.multiplicative,
            "adjoint": self.adjoint,
            "linear": self.linear,
            "unital": self.unital,
            "boundary": self.boundary,
            "unitarity": self.unitarity,
            "max_defect": self.max_defect,
            "passed": self.passed,
            "grid": self.grid,
            "tol": self.tol,
            "norm": "frobenius upper bound",
            "failures": self.failures,
        }


def _block_norms(x, n: int, count: int) -> np.ndarray:
    """Frobenius norm of each diagonal n x n block row of a stacked sparse matrix."""
    x = x.tocsr()
    # inputs are sparse products or differences, which scipy returns duplicate-free
    rows = np.repeat(np.arange(x.shape[0]), np.diff(x.indptr))
    sq = np.bincount(rows // n, weights=np.abs(x.data) ** 2, minlength=count)
    return np.sqrt(sq)


def verify_morphism(h: Homomorphism, gens: Sequence[Element], grid: int = 101, tol: float = TOL_BOUNDARY) -> MorphismReport:
    """Grid check of the *-homomorphism identities, unitality and target boundary membership.

    In sparse mode all grid points are processed at once as one block-diagonal
    matrix, which keeps the per-operation overhead independent of the grid.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    h._require_matrices()
    rep = MorphismReport(grid=grid, tol=tol)
    gens = list(gens)
    one = unit_element(h.src)
    pairs = [(i, j) for i in range(len(gens)) for j in range(len(gens))]
    alpha, beta = complex(0.7, -0.2), complex(-0.4, 0.3)
    lin = [LinearCombination([(alpha, gens[i]), (beta, gens[(i + 1) % len(gens)])]) for i in range(len(gens))]
    prods = [ProductElement(gens[i], gens[j]) for i, j in pairs]
    adjs = [g.adjoint() for g in gens]
    n = h.n
    pp, qq = h.tgt.p, h.tgt.q
    svals = np.linspace(0.0, 1.0, grid)
    if h.prefer_sparse:
        nnz = max([h.evaluate(g, 0.5).nnz for g in gens] + [n])
        chunk = max(1, min(grid, 2_000_000 // nnz))
        for start in range(0, grid, chunk):
            _verify_batch(h, svals[start : start + chunk], gens, prods, pairs, adjs, lin, one, alpha, beta, rep)
    else:
        eye = np.eye(n)
        for s in svals:
            u = dense(h.unitary.at(float(s)))
            rep.unitarity = max(rep.unitarity, unitarity_defect(u))
            imgs = [h.evaluate(g, s, u) for g in gens]
            for (i, j), pr in zip(pairs, prods):
                rep.multiplicative = max(rep.multiplicative, norm_bound(h.evaluate(pr, s, u) - imgs[i] @ imgs[j]))
            for i, ad in enumerate(adjs):
                rep.adjoint = max(rep.adjoint, norm_bound(h.evaluate(ad, s, u) - imgs[i].conj().T))
            for i, lc in enumerate(lin):
                d = norm_bound(h.evaluate(lc, s, u) - alpha * imgs[i] - beta * imgs[(i + 1) % len(gens)])
                rep.linear = max(rep.linear, d)
            rep.unital = max(rep.unital, norm_bound(h.evaluate(one, s, u) - eye))
    for s, compress in ((0.0, compress_left), (1.0, compress_right)):
        for g in gens:
            _, r = compress(h.evaluate(g, s), pp, qq)
            rep.boundary = max(rep.boundary, r)
    for name in ("multiplicative", "adjoint", "linear", "unital", "boundary", "unitarity"):
        if getattr(rep, name) > tol:
            rep.failures.append(name)
    return rep


def _verify_batch(h, svals, gens, prods, pairs, adjs, lin, one, alpha, beta, rep) -> None:
    n = h.n
    m = len(svals)
    u = sp.block_diag([h.unitary.at(float(s)) for s in svals], format="csr")
    uh = u.conj().T.tocsr()
    eye = sp.identity(n * m, dtype=complex, format="csr")
    rep.unitarity = max(rep.unitarity, float(_block_norms(uh @ u - eye, n, m).max()))

    def img(f):
        return u @ h.block_diag_batch(f, svals) @ uh

    imgs = [img(g) for g in gens]
    for (i, j), pr in zip(pairs, prods):
        rep.multiplicative = max(rep.multiplicative, float(_block_norms(img(pr) - imgs[i] @ imgs[j], n, m).max()))
    for i, ad in enumerate(adjs):
        rep.adjoint = max(rep.adjoint, float(_block_norms(img(ad) - imgs[i].conj().T, n, m).max()))
    for i, lc in enumerate(lin):
        d = img(lc) - alpha * imgs[i] - beta * imgs[(i + 1) % len(gens)]
        rep.linear = max(rep.linear, float(_block_norms(d, n, m).max()))
    rep.unital = max(rep.unital, float(_block_norms(img(one) - eye, n, m).max()))


# ---------------------------------------------------------------------------
# corrective unitary


def pattern_distance(p1: EigenvaluePattern, p2: EigenvaluePattern) -> float:
    """max_i ||t_i^1 - t_i^2||_inf over expanded positions (two-pointer over multiplicities)."""
    if p1.k != p2.k:
        raise DimensionMismatch("patterns have different lengths")
    i = j = 0
    ri, rj = p1.mult[0], p2.mult[0]
    best = 0.0
    seen = set()
    while True:
        key = (i, j)
        if key not in seen:
            seen.add(key)
            best = max(best, float(p1.maps[i].sup_distance(p2.maps[j])))
        step = min(ri, rj)
        ri -= step
        rj -= step
        if ri == 0:
            i += 1
            if i == p1.distinct:
                break
            ri = p1.mult[i]
        if rj == 0:
            j += 1
            rj = p2.mult[j]
    return best


@dataclass
class CorrectiveResult:
    w: UnitaryPath
    defect: float
    per_generator: list
    delta: float
    closeness: float
    modulus: float
    commutant_defect: float
    boundary_residual: float
    grid: int

    def as_dict(self) -> dict:
        return {
            "defect": self.defect,
            "per_generator": self.per_generator,
            "delta": self.delta,
            "pattern_distance": self.closeness,
            "modulus": self.modulus,
            "commutant_defect": self.commutant_defect,
            "boundary_residual": self.boundary_residual,
            "grid": self.grid,
        }


def _log_path(w: np.ndarray):
    z, theta = unitary_eig(w)
    return z, theta


def corrective_unitary(h1: Homomorphism, h2: Homomorphism, gens: Sequence[Element], eps: float, grid: int = 101) -> CorrectiveResult:
    """Unitary path w in the target algebra with ||Ad(w) h1(g) - h2(g)|| small on ``gens``.

    Steps: align the endpoint frames with a path v in the target algebra,
    connect 1 to u2 u1'* at each end inside the commutant of the endpoint
    image (functional calculus of the logarithm), and use u2 u1'* with time
    reparametrization in between.  The returned path is w v.
    """
    if h1.src != h2.src or h1.tgt != h2.tgt:
        raise DimensionMismatch("morphisms have different source or target")
    if (h1.a, h1.b, h1.k) != (h2.a, h2.b, h2.k):
        raise PatternsTooFar("remainder indices or pattern lengths differ")
    gens = list(gens)
    modulus = min(modulus_of_continuity(g, eps) for g in gens)
    closeness = pattern_distance(h1.pattern, h2.pattern)
    if closeness >= modulus:
        raise PatternsTooFar(f"pattern distance {closeness:.3e} is not below the modulus {modulus:.3e}")
    perms1, perms2 = h1.canonical_permutations(), h2.canonical_permutations()
    if not (np.array_equal(perms1[0], perms2[0]) and np.array_equal(perms1[1], perms2[1])):
        raise PatternsTooFar("endpoint block structures differ")
    pp, qq = h1.tgt.p, h1.tgt.q
    n = h1.n
    f0a, f1a = h1.frames()
    f0b, f1b = h2.frames()
    a0 = np.kron(f0b @ f0a.conj().T, np.eye(qq))
    a1 = np.kron(np.eye(pp), f1b @ f1a.conj().T)
    v = KnotPath([0.0, 1.0], [a0, a1])
    u1p = ProductPath([v, h1.unitary])
    u2 = h2.unitary
    w0 = dense(u2.at(0.0)) @ dense(u1p.at(0.0)).conj().T
    w1 = dense(u2.at(1.0)) @ dense(u1p.at(1.0)).conj().T
    z0, th0 = _log_path(w0)
    z1, th1 = _log_path(w1)
    commutant = 0.0
    for g in gens:
        x0 = dense(h1.evaluate(g, 0.0, u1p.at(0.0)))
        x1 = dense(h1.evaluate(g, 1.0, u1p.at(1.0)))
        commutant = max(commutant, opnorm(w0 @ x0 - x0 @ w0), opnorm(w1 @ x1 - x1 @ w1))
    lt = max(h1.pattern_lipschitz(), h2.pattern_lipschitz())
    lu = max(u1p.lipschitz(), u2.lipschitz())
    delta = min(modulus / lt if lt > 0 else 1.0, eps / lu if lu > 0 else 1.0) / 2
    delta = min(delta, 0.25)

    def mid(s):
        return dense(u2.at(s)) @ dense(u1p.at(s)).conj().T

    lip_mid = u2.lipschitz() + u1p.lipschitz()
    pieces = [
        (lambda s: unitary_power(z0, th0, 2 * s / delta), 2 * float(np.max(np.abs(th0), initial=0.0)) / delta),
        (lambda s: mid(2 * s - delta), 2 * lip_mid),
        (mid, lip_mid),
        (lambda s: mid(2 * s - 1 + delta), 2 * lip_mid),
        (lambda s: unitary_power(z1, th1, 2 * (1 - s) / delta), 2 * float(np.max(np.abs(th1), initial=0.0)) / delta),
    ]
    breaks = [0.0, delta / 2, delta, 1 - delta, 1 - delta / 2, 1.0]
    w = PiecewisePath(breaks, pieces, n)
    total = ProductPath([w, v])
    per = [0.0] * len(gens)
    herm = [g.hermitian() for g in gens]
    svals = sorted(set(np.linspace(0.0, 1.0, grid).tolist()) | set(breaks))
    sups = [g.sup_norm() for g in gens]
    eye = np.eye(n)
    for s in svals:
        # ||W U1 D1 U1* W* - U2 D2 U2*|| = ||C D1 C* - D2|| with C = U2* W U1
        c = dense(u2.at(s)).conj().T @ (dense(total.at(s)) @ h1.unitary.at(s))
        e = float(np.linalg.norm(c - eye))
        ch = c.conj().T
        for gi, g in enumerate(gens):
            x1 = h1.block_diag(g, s, sparse=True)
            x2 = h2.block_diag(g, s, sparse=False)
            if e <= 1e-12:
                # C = 1 + E: ||C D1 C* - D1|| <= e (2 + e) ||D1|| and D1 - D2 is block diagonal
                dx = dense(x1) - x2
                d = hermitian_norm_blockwise(dx) if herm[gi] else opnorm(dx)
                d += e * (2 + e) * sups[gi]
            else:
                cx = np.asarray((x1.T @ c.T).T)
                diff = cx @ ch - x2
                d = hermitian_norm_blockwise(diff) if herm[gi] else opnorm(diff)
            per[gi] = max(per[gi], d)
    _, r0 = compress_left(dense(total.at(0.0)), pp, qq)
    _, r1 = compress_right(dense(total.at(1.0)), pp, qq)
    return CorrectiveResult(
        w=total,
        defect=max(per) if per else 0.0,
        per_generator=per,
        delta=delta,
        closeness=closeness,
        modulus=modulus,
        commutant_defect=commutant,
        boundary_residual=max(r0, r1),
        grid=grid,
    )


def perturb_pattern(pattern: EigenvaluePattern, size: float, rng: np.random.Generator) -> EigenvaluePattern:
    """Independently move interior knot values of every copy by at most ``size`` (then sort).

    Boundary values are untouched, so the endpoint block structure is kept.
    """
    maps = []
    for m in pattern.expanded():
        fm = m.to_float()
        xs = list(fm.xs)
        ys = list(fm.ys)
        extra = [float(rng.uniform(0.1, 0.9))]
        for x in extra:
            if x not in xs:
                y = float(m(x))
                pos = int(np.searchsorted(xs, x))
                xs.insert(pos, x)
                ys.insert(pos, y)
        for i in range(1, len(ys) - 1):
            ys[i] = min(max(ys[i] + float(rng.uniform(-size, size)), 0.0), 1.0)
        maps.append(PLMap(xs, ys))
    from .pattern import normalize

    return normalize(EigenvaluePattern.from_maps(maps))
