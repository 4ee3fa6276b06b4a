"""Approximate isomorphisms on finite samples.

A :class:`SampledBiKatetov` stores a nonnegative matrix phi(a_i, b_j) together
with the sample metrics of both sides and callables that measure distances to
new samples, so trivial extensions can be formed later.  Sampled objects are
the computable fragment of maps defined on whole algebras: values beyond the
samples are given by the trivial extension formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._kernels import katetov_violations, minplus
from .config import DEFAULT_GRID, DENSE_CAP, MIN_STRICT_MARGIN
from .core import DimensionDropAlgebra
from .elements import Element
from .errors import BudgetExhausted, DimensionMismatch, EmptySubset, MiddleMismatch
from .linalg import compress_left, compress_right, dense, opnorm
from .measure import Measure
from .paths import KnotPath

Metric = Callable[[object, object], float]


@dataclass
class StrictnessWitness:
    psi: np.ndarray  # values on A0 x B0
    A0: list  # indices into the left samples
    B0: list  # indices into the right samples
    eps: float


@dataclass
class SampledBiKatetov:
    left: list
    right: list
    values: np.ndarray
    da: np.ndarray
    db: np.ndarray
    left_metric: Optional[Metric] = None
    right_metric: Optional[Metric] = None
    witness: Optional[StrictnessWitness] = None
    notes: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.da = np.asarray(self.da, dtype=float)
        self.db = np.asarray(self.db, dtype=float)
        na, nb = len(self.left), len(self.right)
        if self.values.shape != (na, nb) or self.da.shape != (na, na) or self.db.shape != (nb, nb):
            raise DimensionMismatch("value or metric matrices do not match the sample counts")
        if np.any(self.values < 0):
            raise ValueError("bi-Katetov values must be nonnegative")

    def violations(self) -> np.ndarray:
        """Largest violation of each of the four inequalities (0 when all hold)."""
        return katetov_violations(self.da, self.db, self.values)

    def is_bikatetov(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.violations() <= tol))

    def restrict(self, rows: Sequence[int], cols: Sequence[int]) -> "SampledBiKatetov":
        rows, cols = list(rows), list(cols)
        return SampledBiKatetov(
            [self.left[i] for i in rows],
            [self.right[j] for j in cols],
            self.values[np.ix_(rows, cols)],
            self.da[np.ix_(rows, rows)],
            self.db[np.ix_(cols, cols)],
            self.left_metric,
            self.right_metric,
        )

    def to_json(self) -> dict:
        return {
            "left_count": len(self.left),
            "right_count": len(self.right),
            "values": self.values.tolist(),
            "da": self.da.tolist(),
            "db": self.db.tolist(),
            "witness": None
            if self.witness is None
            else {"A0": self.witness.A0, "B0": self.witness.B0, "eps": self.witness.eps, "psi": self.witness.psi.tolist()},
            "notes": self.notes,
        }


# ---------------------------------------------------------------------------
# metrics


class MatrixMetric:
    """Metric on integer labels given by a distance matrix (abstract instances)."""

    def __init__(self, d: np.ndarray):
        self.d = np.asarray(d, dtype=float)

    def __call__(self, x, y) -> float:
        return float(self.d[int(x), int(y)])


class ImageMetric:
    """d(x, y) = max over a fixed grid of ||h(x)(s) - h(y)(s)|| for a morphism h.

    Using one fixed grid on both sides of a pair keeps every sampled quantity a
    genuine pseudometric, so the bi-Katetov inequalities hold on the nose.
    """

    def __init__(self, h, grid: int = DEFAULT_GRID):
        self.h = h
        self.grid = np.linspace(0.0, 1.0, grid)
        self._cache: dict = {}

    def images(self, x: Element) -> np.ndarray:
        key = id(x)
        if key not in self._cache:
            self._cache[key] = (x, np.stack([dense(self.h.evaluate(x, float(s))) for s in self.grid]))
        return self._cache[key][1]

    def __call__(self, x, y) -> float:
        if x is y:
            return 0.0
        return _sup_distance(self.images(x), self.images(y))

    def lipschitz(self, x: Element) -> float:
        return self.h.apply(x).lipschitz()


def _sup_distance(xs: np.ndarray, ys: np.ndarray) -> float:
    diff = xs - ys
    herm = np.allclose(diff, np.conj(np.transpose(diff, (0, 2, 1))), atol=1e-14)
    return max(opnorm(d, hermitian=herm) for d in diff)


def element_sup_metric(x: Element, y: Element) -> float:
    """sup_s ||x(s) - y(s)|| on the union of knots; exact for PL elements (norm is convex on segments)."""
    if x is y:
        return 0.0
    pts = np.array(sorted(set(x.knots()) | set(y.knots())))
    return _sup_distance(x.at_many(pts), y.at_many(pts))


def _pairwise(samples: Sequence, metric: Metric) -> np.ndarray:
    n = len(samples)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = metric(samples[i], samples[j])
    return d


def _cross(rows: Sequence, cols: Sequence, metric: Metric) -> np.ndarray:
    out = np.zeros((len(rows), len(cols)))
    for i, x in enumerate(rows):
        for j, y in enumerate(cols):
            out[i, j] = 0.0 if x is y else metric(x, y)
    return out


# ---------------------------------------------------------------------------
# joint embeddings and the calculus


@dataclass
class JointEmbedding:
    iota: object  # Homomorphism A -> C
    eta: object  # Homomorphism B -> C
    target: DimensionDropAlgebra
    measure: Measure

    def to_json(self) -> dict:
        return {
            "target": self.target.as_list(),
            "measure": self.measure.to_json(),
            "iota": self.iota.to_json(),
            "eta": self.eta.to_json(),
        }


def from_matrices(da, db, values) -> SampledBiKatetov:
    """Abstract instance on integer labels 0..n-1 with explicit metrics."""
    da, db = np.asarray(da, dtype=float), np.asarray(db, dtype=float)
    return SampledBiKatetov(
        list(range(da.shape[0])), list(range(db.shape[0])), values, da, db, MatrixMetric(da), MatrixMetric(db)
    )


def phi_from_pair(je: JointEmbedding, left: Sequence[Element], right: Sequence[Element], grid: int = DEFAULT_GRID) -> SampledBiKatetov:
    """phi(a, b) = max over the grid of ||iota(a)(s) - eta(b)(s)||.

    The grid maximum is a lower estimate of the supremum; the Lipschitz slack
    (L_a + L_b) h / 2 that turns it into an upper bound is recorded in ``notes``.
    """
    for a in left:
        if a.algebra != je.iota.src:
            raise DimensionMismatch("left sample is not in the source of iota")
    for b in right:
        if b.algebra != je.eta.src:
            raise DimensionMismatch("right sample is not in the source of eta")
    ma, mb = ImageMetric(je.iota, grid), ImageMetric(je.eta, grid)
    vals = np.zeros((len(left), len(right)))
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            vals[i, j] = _sup_distance(ma.images(a), mb.images(b))
    h = 1.0 / (grid - 1)
    slack = max((ma.lipschitz(a) for a in left), default=0.0) + max((mb.lipschitz(b) for b in right), default=0.0)
    out = SampledBiKatetov(list(left), list(right), vals, _pairwise(left, ma), _pairwise(right, mb), ma, mb)
    out.notes.append(f"grid maximum over {grid} points; sup is at most value + {slack * h / 2:.6g}")
    return out


def extend_trivial(phi: SampledBiKatetov, new_left: Sequence = (), new_right: Sequence = ()) -> SampledBiKatetov:
    """phi|^(A' x B')(a', b') = min_{a, b} d(a', a) + phi(a, b) + d(b, b')."""
    if (new_left and phi.left_metric is None) or (new_right and phi.right_metric is None):
        raise ValueError("extension needs metrics for the new samples")
    left = list(phi.left) + [x for x in new_left if not _contains(phi.left, x)]
    right = list(phi.right) + [y for y in new_right if not _contains(phi.right, y)]
    na, nb = len(phi.left), len(phi.right)
    ea, eb = left[na:], right[nb:]
    da = np.zeros((len(left), len(left)))
    da[:na, :na] = phi.da
    if ea:
        da[na:, :na] = _cross(ea, phi.left, phi.left_metric)
        da[:na, na:] = da[na:, :na].T
        da[na:, na:] = _pairwise(ea, phi.left_metric)
    db = np.zeros((len(right), len(right)))
    db[:nb, :nb] = phi.db
    if eb:
        db[nb:, :nb] = _cross(eb, phi.right, phi.right_metric)
        db[:nb, nb:] = db[nb:, :nb].T
        db[nb:, nb:] = _pairwise(eb, phi.right_metric)
    vals = minplus(minplus(da[:, :na], phi.values), db[:nb, :])
    return SampledBiKatetov(left, right, vals, da, db, phi.left_metric, phi.right_metric, notes=list(phi.notes))


def _contains(items: Sequence, x) -> bool:
    return any(x is y or (type(x) is type(y) and isinstance(x, (int, np.integer)) and x == y) for y in items)


def compose_apx(phi: SampledBiKatetov, psi: SampledBiKatetov) -> SampledBiKatetov:
    """(psi phi)(a, c) = min over the shared middle samples of phi(a, b) + psi(b, c)."""
    if len(phi.right) != len(psi.left) or any(not (x is y or x == y) for x, y in zip(phi.right, psi.left)):
        raise MiddleMismatch("the right samples of phi are not the left samples of psi")
    out = SampledBiKatetov(
        list(phi.left),
        list(psi.right),
        minplus(phi.values, psi.values),
        phi.da,
        psi.db,
        phi.left_metric,
        psi.right_metric,
    )
    out.notes.append("infimum over the sampled middle only; an upper bound for the full composite")
    return out


def totality_defect(phi: SampledBiKatetov, A0: Optional[Sequence[int]] = None) -> float:
    """max over a in A0 of min over the right samples of phi(a, b)."""
    rows = list(range(len(phi.left))) if A0 is None else list(A0)
    if not rows:
        raise EmptySubset("A0 is empty")
    if phi.values.shape[1] == 0:
        return float("inf")
    return float(np.max(np.min(phi.values[rows], axis=1)))


def with_margin(base: SampledBiKatetov, A0: Sequence[int], B0: Sequence[int], margin: float) -> SampledBiKatetov:
    """(base|_{A0 x B0})|^{A x B} + margin, with the strictness witness attached."""
    A0, B0 = list(A0), list(B0)
    if not A0 or not B0:
        raise EmptySubset("witness support must be nonempty")
    psi = base.values[np.ix_(A0, B0)]
    ext = minplus(minplus(base.da[:, A0], psi), base.db[B0, :])
    out = SampledBiKatetov(
        list(base.left), list(base.right), ext + margin, base.da, base.db, base.left_metric, base.right_metric
    )
    out.witness = StrictnessWitness(psi.copy(), A0, B0, float(margin))
    return out


def strictness_witness(phi: SampledBiKatetov, min_margin: float = MIN_STRICT_MARGIN):
    """Return (psi, A0, B0, eps) when a dominated finitely supported map with gap eps >= min_margin is known."""
    w = phi.witness
    if w is None:
        return None
    ext = minplus(minplus(phi.da[:, w.A0], w.psi), phi.db[w.B0, :])
    gap = float(np.min(phi.values - ext))
    if gap < w.eps - 1e-12:
        phi.notes.append(f"attached witness does not dominate (gap {gap:.3e} < {w.eps:.3e})")
        return None
    if w.eps < min_margin:
        phi.notes.append(f"margin {w.eps:.3e} is below the configured minimum {min_margin:.3e}")
        return None
    return w.psi, w.A0, w.B0, w.eps


# ---------------------------------------------------------------------------
# upper bounds for the tuple pseudometric


@dataclass
class SearchBudget:
    max_size: int = 10**4
    max_candidates: int = 32
    grid: int = DEFAULT_GRID


@dataclass
class DkResult:
    bound: float
    certified_upper: float
    certificate: Optional[JointEmbedding]
    candidates: list

    def as_dict(self) -> dict:
        out = {
            "bound": self.bound,
            "certified_upper": self.certified_upper,
            "target": None if self.certificate is None else self.certificate.target.as_list(),
            "candidates": self.candidates,
        }
        if self.certificate is not None:
            out["iota"] = self.certificate.iota.to_json()
            out["eta"] = self.certificate.eta.to_json()
        return out


def _align_pair(xa: np.ndarray, xb: np.ndarray, ya: Optional[np.ndarray], yb: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Unitary W with W xb W* = xa (and W yb W* close to ya) from eigenvectors of hermitian xa, xb."""
    la, va = np.linalg.eigh(xa)
    lb, vb = np.linalg.eigh(xb)
    if np.max(np.abs(la - lb), initial=0.0) > 1e-8:
        return None
    if len(la) > 1 and np.min(np.diff(la)) < 1e-6:
        return None
    n = len(la)
    phase = np.ones(n, dtype=complex)
    if ya is not None and n > 1:
        ma = va.conj().T @ ya @ va
        mb = vb.conj().T @ yb @ vb
        known = np.zeros(n, dtype=bool)
        known[0] = True
        queue = [0]
        while queue:
            j = queue.pop()
            for k in range(n):
                if not known[k] and abs(mb[j, k]) > 1e-8 and abs(ma[j, k]) > 1e-8:
                    # phase_j conj(phase_k) mb[j, k] = ma[j, k]
                    ratio = ma[j, k] / (mb[j, k] * phase[j])
                    phase[k] = np.conj(ratio / abs(ratio))
                    known[k] = True
                    queue.append(k)
        if not known.all():
            return None
    return (va * phase) @ vb.conj().T


def _align_at(t: int, anchor: int, a_vals: list, b_vals: list, p: int, q: int) -> Optional[np.ndarray]:
    grid = a_vals[0].shape[0]
    others = [j for j in range(len(a_vals)) if j != anchor]
    if t in (0, grid - 1):
        comp = compress_left if t == 0 else compress_right

        def pick(x):
            return comp(x[t], p, q)[0]

    else:

        def pick(x):
            return x[t]

    xa, xb = pick(a_vals[anchor]), pick(b_vals[anchor])
    w = None
    for j in others or [None]:
        ya = None if j is None else pick(a_vals[j])
        yb = None if j is None else pick(b_vals[j])
        w = _align_pair(xa, xb, ya, yb)
        if w is not None:
            break
    if w is None and others:
        # no sample fixes the eigenvector phases; the anchor alone still aligns
        w = _align_pair(xa, xb, None, None)
    if w is None:
        return None
    if t == 0:
        return np.kron(w, np.eye(q))
    if t == grid - 1:
        return np.kron(np.eye(p), w)
    return w


def alignment_path(a_samples: Sequence[Element], b_samples: Sequence[Element], grid: int) -> Optional[KnotPath]:
    """Unitary path W in the common algebra with W b_i W* = a_i on the grid for an anchor sample i.

    The anchor is the first hermitian sample whose spectrum is simple and matches
    on every grid point; eigenvector phases are fixed by another sample.  At the
    endpoints the alignment is done in the tensor factor, so W(0) and W(1) have
    the boundary block form.  Returns None when no sample can serve as anchor.
    """
    if not a_samples:
        return None
    alg = a_samples[0].algebra
    p, q = alg.p, alg.q
    svals = np.linspace(0.0, 1.0, grid)
    a_vals = [x.at_many(svals) for x in a_samples]
    b_vals = [x.at_many(svals) for x in b_samples]

    def hermitian(x):
        return np.allclose(x, np.conj(np.transpose(x, (0, 2, 1))), atol=1e-12)

    for anchor in range(len(a_samples)):
        if not (hermitian(a_vals[anchor]) and hermitian(b_vals[anchor])):
            continue
        mats = []
        for t in range(grid):
            w = _align_at(t, anchor, a_vals, b_vals, p, q)
            if w is None:
                break
            if mats:
                # remove the free global phase so consecutive knots are close
                z = np.trace(mats[-1].conj().T @ w)
                if abs(z) > 0:
                    w = w * (abs(z) / z)
            mats.append(w)
        if len(mats) == grid:
            return KnotPath(svals, mats)
    return None


def _tuple_distance(iota, eta, a_samples, b_samples, grid: int) -> tuple[float, float]:
    best = 0.0
    slack = 0.0
    for a, b in zip(a_samples, b_samples):
        pts = set(np.linspace(0.0, 1.0, grid).tolist()) | set(iota.apply(a).knots()) | set(eta.apply(b).knots())
        svals = sorted(pts)
        xa = np.stack([dense(iota.evaluate(a, float(s))) for s in svals])
        xb = np.stack([dense(eta.evaluate(b, float(s))) for s in svals])
        best = max(best, _sup_distance(xa, xb))
        slack = max(slack, (iota.apply(a).lipschitz() + eta.apply(b).lipschitz()) / (2 * (grid - 1)))
    return best, best + slack


def candidate_targets(src_a: DimensionDropAlgebra, src_b: DimensionDropAlgebra, budget: SearchBudget) -> list:
    """Coprime (p, q) with p q <= max_size divisible by both source sizes, smallest first."""
    import math

    na, nb = src_a.p * src_a.q, src_b.p * src_b.q
    step = na * nb // math.gcd(na, nb)
    out = []
    total = step
    while total <= budget.max_size and len(out) < budget.max_candidates:
        for p in range(1, total + 1):
            if total % p == 0 and math.gcd(p, total // p) == 1:
                out.append(DimensionDropAlgebra(p, total // p))
                if len(out) >= budget.max_candidates:
                    break
        total += step
    return out


def dk_upper(genA, genB, budget: Optional[SearchBudget] = None) -> DkResult:
    """Upper bound for inf over joint embeddings of max_i d(iota(a_i), eta(b_i)).

    ``genA`` and ``genB`` are (algebra, measure, tuple of elements).  Candidates:
    the identity pair and an eigenvector alignment Ad(W) when both sides are the
    same algebra with the same trace, then trace-preserving embeddings into
    common targets in increasing size.  ``bound`` is the grid maximum and
    ``certified_upper`` adds the Lipschitz slack between grid points.
    """
    from .hom import Homomorphism, identity_hom, synthesize_embedding
    from .pattern import EigenvaluePattern, PLMap

    budget = budget or SearchBudget()
    alg_a, mu_a, xs = genA
    alg_b, mu_b, ys = genB
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise DimensionMismatch("tuples have different lengths")
    results = []
    best = (float("inf"), float("inf"), None)

    def consider(label, iota, eta, target, measure):
        nonlocal best
        val, upper = _tuple_distance(iota, eta, xs, ys, budget.grid)
        results.append({"candidate": label, "target": target.as_list(), "bound": val, "certified_upper": upper})
        if val < best[0]:
            best = (val, upper, JointEmbedding(iota, eta, target, measure))

    if alg_a == alg_b and mu_a == mu_b:
        ident = identity_hom(alg_a)
        consider("identity", ident, ident, alg_a, mu_a)
        path = alignment_path(xs, ys, budget.grid)
        if path is not None:
            pat = EigenvaluePattern((PLMap.identity(),), (1,), True)
            eta = Homomorphism(alg_b, alg_a, pat, 0, 0, path)
            consider("alignment", ident, eta, alg_a, mu_a)
    lam = Measure.lebesgue()
    for tgt in candidate_targets(alg_a, alg_b, budget):
        if best[0] <= 1e-12:
            break
        if tgt.p * tgt.q > DENSE_CAP:
            results.append({"candidate": "common-target", "target": tgt.as_list(), "skipped": "too large to evaluate"})
            continue
        try:
            iota = synthesize_embedding(alg_a, tgt, 1, mu_a, lam, waive_bullets=True)
            eta = synthesize_embedding(alg_b, tgt, 1, mu_b, lam, waive_bullets=True)
        except Exception as exc:  # candidate not realizable: skip it
            results.append({"candidate": "common-target", "target": tgt.as_list(), "skipped": type(exc).__name__})
            continue
        if not (iota.materialized and eta.materialized):
            continue
        consider("common-target", iota, eta, tgt, lam)
    if best[2] is None:
        results.append({"exhausted": str(BudgetExhausted("no candidate joint embedding within the budget"))})
    return DkResult(best[0], best[1], best[2], results)
