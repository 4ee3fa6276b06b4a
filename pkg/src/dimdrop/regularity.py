"""Inductive systems of prime dimension drop algebras and finite-horizon checkers.

Each checker works on eigenvalue patterns of the composite connecting maps
and reports a verdict at a stated horizon together with the full table; the
underlying conditions are limits, so a PASS is evidence, not a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .core import DimensionDropAlgebra, as_fraction, validate_pair
from .errors import BoundNotMet, BulletsUnsatisfied, ChainMismatch, TargetTooSmall, TraceVariantUnavailable
from .hom import Homomorphism, compose_homs, identity_hom, synthesize_embedding
from .measure import Measure
from .pattern import (
    EigenvaluePattern,
    PatternMorphism,
    compose as compose_patterns,
    dedupe,
    normalize,
    num_to_str,
    sorted_census,
    variation,
)

# Composite patterns with more distinct maps than this are not normalized;
# their variation is reported as the (certified) variation of the raw family.
NORMALIZE_CAP = 150


@dataclass
class InductiveSystem:
    stages: list  # list of (DimensionDropAlgebra, Measure)
    steps: list  # list of Homomorphism, steps[n]: stage n -> stage n + 1
    name: str = "system"
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if len(self.steps) != len(self.stages) - 1:
            raise ChainMismatch("need exactly one step between consecutive stages")
        for n, h in enumerate(self.steps):
            if h.src != self.stages[n][0] or h.tgt != self.stages[n + 1][0]:
                raise ChainMismatch(f"step {n} does not connect stage {n} to stage {n + 1}")

    @property
    def length(self) -> int:
        return len(self.stages)

    def algebra(self, n: int) -> DimensionDropAlgebra:
        return self.stages[n][0]

    def measure(self, n: int) -> Measure:
        return self.stages[n][1]

    def composite(self, m: int, n: int) -> PatternMorphism:
        """Pattern data of the connecting map from stage m to stage n (m < n)."""
        if not 0 <= m < n < self.length:
            raise ValueError(f"need 0 <= m < n < {self.length}")
        key = (m, n)
        if key not in self._cache:
            if n == m + 1:
                pm = self.steps[m].as_pattern_morphism()
            else:
                prev = self.composite(m, n - 1)
                pm = compose_patterns(prev, self.steps[n - 1].as_pattern_morphism())
                pm = PatternMorphism(pm.src, pm.tgt, dedupe(pm.pattern), pm.a, pm.b)
            self._cache[key] = pm
        return self._cache[key]

    def composite_hom(self, m: int, n: int) -> Homomorphism:
        """Materialized connecting homomorphism (when the target is small enough)."""
        h = self.steps[m]
        for j in range(m + 1, n):
            h = compose_homs(self.steps[j], h)
        return h

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "stages": [{"algebra": a.as_list(), "measure": mu.to_json()} for a, mu in self.stages],
            "steps": [h.to_json() for h in self.steps],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "InductiveSystem":
        from .serialize import hom_from_json

        stages = [(DimensionDropAlgebra.from_list(s["algebra"]), Measure.from_json(s["measure"])) for s in data["stages"]]
        steps = [hom_from_json(h) for h in data["steps"]]
        return cls(stages, steps, data.get("name", "system"), dict(data.get("meta", {})))


def identity_system(alg: DimensionDropAlgebra, stages: int) -> InductiveSystem:
    """Constant system whose every step is the identity (negative control)."""
    lam = Measure.lebesgue()
    return InductiveSystem([(alg, lam)] * stages, [identity_hom(alg) for _ in range(stages - 1)], "identity")


def _coprime_factorizations(total: int) -> list[tuple[int, int]]:
    out = []
    for p in range(1, math.isqrt(total) + 1):
        if total % p == 0:
            q = total // p
            if math.gcd(p, q) == 1:
                out.append((p, q))
                if p != q:
                    out.append((q, p))
    return sorted(out, key=lambda pq: (abs(pq[0] - pq[1]), pq[0]))


def _try_step(src, tgt, eps, require_bound: bool) -> Optional[Homomorphism]:
    try:
        return synthesize_embedding(
            src, tgt, eps, Measure.lebesgue(), Measure.lebesgue(), waive_bullets=not require_bound
        )
    except (BulletsUnsatisfied, TargetTooSmall, TraceVariantUnavailable):
        return None


def standard_system(
    start: DimensionDropAlgebra,
    stages: int,
    eps_schedule: Sequence,
    *,
    growth: str = "power",
    max_exponent: int = 12,
    max_factor: int = 200,
    require_bound: bool = False,
) -> InductiveSystem:
    """Regular system with trace-preserving steps into Lebesgue traces.

    growth="square": stage n+1 = (p_n^2, q_n^2), raising BoundNotMet when that fails.
    growth="power": the smallest exponent e >= 2 with (p_n^e, q_n^e) admitting a
    step of variation below the scheduled epsilon.
    growth="minimal": the smallest coprime pair whose product is a multiple of p_n q_n.
    Every choice keeps p_n q_n | p_{n+1} q_{n+1}, so remainder indices vanish.
    """
    if len(eps_schedule) != stages - 1:
        raise ValueError("eps_schedule needs stages - 1 entries")
    validate_pair(start.p, start.q)
    lam = Measure.lebesgue()
    algs = [start]
    steps = []
    exponents = []
    for n, eps in enumerate(eps_schedule):
        eps = as_fraction(eps)
        if eps <= 0:
            raise ValueError("schedule entries must be positive")
        src = algs[-1]
        step = None
        if growth in ("square", "power"):
            top = 2 if growth == "square" else max_exponent
            for e in range(2, top + 1):
                tgt = DimensionDropAlgebra(src.p**e, src.q**e)
                step = _try_step(src, tgt, eps, require_bound)
                if step is not None:
                    exponents.append(e)
                    break
        elif growth == "minimal":
            base = src.p * src.q
            for r in range(2, max_factor + 1):
                for p, q in _coprime_factorizations(base * r):
                    step = _try_step(src, DimensionDropAlgebra(p, q), eps, require_bound)
                    if step is not None:
                        exponents.append(r)
                        break
                if step is not None:
                    break
        else:
            raise ValueError(f"unknown growth rule {growth!r}")
        if step is None:
            raise BoundNotMet(f"no {growth} successor of {src} admits a step with variation < {eps}")
        steps.append(step)
        algs.append(step.tgt)
    meta = {
        "growth": growth,
        "schedule": [num_to_str(as_fraction(e)) for e in eps_schedule],
        "factors": exponents,
        "bound_required": require_bound,
    }
    return InductiveSystem([(a, lam) for a in algs], steps, f"standard-{growth}", meta)


# ---------------------------------------------------------------------------
# checkers


def composite_variation(sys: InductiveSystem, m: int, n: int) -> tuple[Fraction, bool]:
    """(V, exact): exact variation of the normalized composite when it is small,
    otherwise the variation of the raw family, which is an upper bound."""
    pat = sys.composite(m, n).pattern
    if pat.distinct <= NORMALIZE_CAP:
        return variation(normalize(pat)), True
    return variation(pat), False


def check_variation(sys: InductiveSystem, m: int = 0, horizon: Optional[int] = None, tol: float = 0.1) -> dict:
    horizon = sys.length - 1 if horizon is None else horizon
    if not 0 <= m < horizon < sys.length:
        raise ValueError(f"need 0 <= m < horizon < {sys.length}")
    rows = []
    for n in range(m + 1, horizon + 1):
        v, exact = composite_variation(sys, m, n)
        rows.append({"n": n, "variation": float(v), "exact": exact, "distinct_maps": sys.composite(m, n).pattern.distinct})
    vals = [r["variation"] for r in rows]
    steps = len(vals) - 1
    trend = sum(1 for a, b in zip(vals, vals[1:]) if b <= a) / steps if steps else 1.0
    final = vals[-1]
    return {
        "check": "variation",
        "m": m,
        "horizon": horizon,
        "tol": tol,
        "table": rows,
        "final": final,
        "nonincreasing_fraction": trend,
        "verdict": "PASS" if final < tol else "FAIL",
        "note": f"finite horizon {horizon}; non-exact rows are upper bounds from the unsorted family",
    }


def _x_candidates(pat: EigenvaluePattern, y) -> list[float]:
    pts: set = set()
    for mp in pat.maps:
        for lo, hi in mp.preimage(y):
            pts.add(lo)
            pts.add(hi)
            if hi != lo:
                pts.update(x for x in mp.xs if lo < x < hi)
                pts.add((lo + hi) / 2)
    return sorted(float(x) for x in pts)


def check_simplicity(
    sys: InductiveSystem, m: int = 0, eps: float = 0.2, y_grid: int = 21, horizon: Optional[int] = None
) -> dict:
    """For each y on the grid, find n <= horizon such that at every x where some
    eigenvalue map equals y the value set is eps-dense in [0, 1]."""
    horizon = sys.length - 1 if horizon is None else horizon
    if not 0 <= m < horizon < sys.length:
        raise ValueError(f"need 0 <= m < horizon < {sys.length}")
    eps_f = float(eps)
    ys = [Fraction(i, y_grid - 1) for i in range(y_grid)] if y_grid > 1 else [Fraction(1, 2)]
    rows = []
    for y in ys:
        found = None
        worst_seen = []
        for n in range(m + 1, horizon + 1):
            pat = sys.composite(m, n).pattern
            xs = _x_candidates(pat, y)
            if not xs:
                worst_seen.append({"n": n, "gap": None})
                continue
            vals = _kernels.pl_eval_batch(*_kernels.pack_maps(pat.maps), np.asarray(xs))
            gaps = _kernels.hausdorff_gap_columns(vals)
            worst = float(np.max(gaps))
            worst_seen.append({"n": n, "gap": worst, "x_candidates": len(xs)})
            if worst < eps_f:
                found = n
                break
        rows.append({"y": float(y), "n": found, "trace": worst_seen})
    ok = all(r["n"] is not None for r in rows)
    return {
        "check": "simplicity",
        "m": m,
        "horizon": horizon,
        "eps": eps_f,
        "y_grid": y_grid,
        "table": rows,
        "first_n": max((r["n"] for r in rows if r["n"] is not None), default=None),
        "verdict": "PASS" if ok else "FAIL",
        "note": "y sampled on a grid; x solved exactly per PL segment (knots and midpoints inside flat pieces)",
    }


def check_monotracial(
    sys: InductiveSystem,
    m: int = 0,
    eps: float = 0.1,
    y_grid: int = 21,
    horizon: Optional[int] = None,
    ratio_tol: float = 0.05,
) -> dict:
    """Table of c_{m,n}(y, eps) / k(m, n); PASS iff the largest ratio at the horizon is below ratio_tol."""
    horizon = sys.length - 1 if horizon is None else horizon
    if not 0 <= m < horizon < sys.length:
        raise ValueError(f"need 0 <= m < horizon < {sys.length}")
    eps_f = as_fraction(eps)
    ys = [Fraction(i, y_grid - 1) for i in range(y_grid)] if y_grid > 1 else [Fraction(1, 2)]
    rows = []
    for n in range(m + 1, horizon + 1):
        pat = sys.composite(m, n).pattern
        k = pat.k
        ratios = []
        for y in ys:
            c = sorted_census(pat, y, eps_f)
            ratios.append(float(Fraction(c.c_count, k)))
        rows.append({"n": n, "k": str(k), "ratios": ratios, "max_ratio": max(ratios)})
    final = rows[-1]["max_ratio"]
    return {
        "check": "monotrace",
        "m": m,
        "horizon": horizon,
        "eps": float(eps_f),
        "y": [float(y) for y in ys],
        "ratio_tol": ratio_tol,
        "table": rows,
        "final_max_ratio": final,
        "verdict": "PASS" if final < ratio_tol else "FAIL",
        "note": f"finite horizon {horizon}",
    }
