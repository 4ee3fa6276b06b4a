"""Finite-depth back-and-forth between two inductive systems.

Legs alternate phi_n: A_n -> B_{n+offset} and psi_n: B_{n+offset} -> A_{n+1}.
With offset 1 and equal algebras, phi_0 is a twisted connecting map
Ad(z) o iota, every psi_n is the inner automorphism Ad(w_n) produced by the
corrective unitary, and phi_{n+1} = iota o Ad(w_n*) undoes it, so each
triangle is either a corrective-unitary estimate or exact up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_GRID, DEFAULT_SEED
from .elements import Element, generator_library
from .errors import DefectExceeded, DimDropError, HorizonExhausted, PatternsTooFar
from .hom import Homomorphism, compose_homs, corrective_unitary, identity_hom
from .linalg import dense, opnorm
from .paths import AdjointPath, UnitaryPath, unitary_path_in_algebra
from .pattern import EigenvaluePattern, PLMap
from .regularity import InductiveSystem


def inner_hom(alg, path: UnitaryPath) -> Homomorphism:
    """Ad(w) as a normal-form endomorphism (identity pattern, unitary path w)."""
    pat = EigenvaluePattern((PLMap.identity(),), (1,), True)
    return Homomorphism(alg, alg, pat, 0, 0, path)


def triangle_defect(
    first: Homomorphism, second: Homomorphism, reference: Homomorphism, gens: Sequence[Element], grid: int = DEFAULT_GRID
) -> tuple[float, list]:
    """max over gens and grid of ||second(first(g))(s) - reference(g)(s)||."""
    svals = np.linspace(0.0, 1.0, grid)
    per = []
    for g in gens:
        inner = first.apply(g)
        worst = 0.0
        for s in svals:
            x = dense(second.evaluate(inner, float(s)))
            y = dense(reference.evaluate(g, float(s)))
            d = x - y
            worst = max(worst, opnorm(d, hermitian=bool(np.allclose(d, d.conj().T, atol=1e-13))))
        per.append(worst)
    return (max(per) if per else 0.0), per


@dataclass
class Triangle:
    kind: str  # "up": psi_n o phi_n vs iota^A;  "low": phi_{n+1} o psi_n vs iota^B
    index: int
    defect: float
    bound: float
    per_generator: list

    @property
    def passed(self) -> bool:
        return self.defect <= self.bound

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "index": self.index,
            "defect": self.defect,
            "bound": self.bound,
            "passed": self.passed,
            "per_generator": self.per_generator,
        }


@dataclass
class IntertwiningChain:
    phi_steps: list
    psi_steps: list
    triangles: list
    eps_schedule: list
    offset: int
    gens: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def defects(self) -> list:
        return [t.defect for t in self.triangles]

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.triangles) and len(self.triangles) == len(self.eps_schedule)

    def to_json(self) -> dict:
        return {
            "offset": self.offset,
            "eps_schedule": [float(e) for e in self.eps_schedule],
            "triangles": [t.as_dict() for t in self.triangles],
            "phi": [h.to_json() for h in self.phi_steps],
            "psi": [h.to_json() for h in self.psi_steps],
            "meta": self.meta,
            "passed": self.passed,
        }


def _stage_gens(sys: InductiveSystem, n: int, count: int, seed: int) -> list:
    rng = np.random.default_rng([seed, n])
    return generator_library(sys.algebra(n), count, rng)


def build_intertwining(
    sysA: InductiveSystem,
    sysB: InductiveSystem,
    gens_per_stage: int,
    eps_schedule: Sequence[float],
    *,
    offset: int = 1,
    seed: int = DEFAULT_SEED,
    grid: int = DEFAULT_GRID,
    twist: float = 0.5,
) -> IntertwiningChain:
    """Alternating chain whose triangles meet ``eps_schedule`` (one entry per triangle).

    Triangles are ordered up(0), low(0), up(1), low(1), ...  With offset 0 the
    legs are identities and connecting maps; with offset 1 the first leg is
    twisted by a random unitary path of size ``twist`` and the rest is
    repaired by corrective unitaries.
    """
    sched = [float(e) for e in eps_schedule]
    if offset not in (0, 1):
        raise ValueError("offset must be 0 or 1")
    chain = IntertwiningChain([], [], [], sched, offset, meta={"seed": seed, "grid": grid, "twist": twist})
    rng = np.random.default_rng(seed)

    def gens_for(n):
        if n not in chain.gens:
            chain.gens[n] = _stage_gens(sysA, n, gens_per_stage, seed)
        return chain.gens[n]

    def record(kind, n, first, second, reference, gens, bound):
        d, per = triangle_defect(first, second, reference, gens, grid)
        tri = Triangle(kind, n, d, bound, per)
        chain.triangles.append(tri)
        if not tri.passed:
            raise DefectExceeded(f"{kind} triangle {n}: defect {d:.3e} exceeds {bound:.3e}", chain)

    t = 0
    n = 0
    phi_next: Optional[Homomorphism] = None
    while t < len(sched):
        if n + 1 >= sysA.length or n + offset >= sysB.length:
            raise DefectExceeded("systems are too short for the schedule", chain)
        a_n, b_m, a_next = sysA.algebra(n), sysB.algebra(n + offset), sysA.algebra(n + 1)
        iota_a = sysA.steps[n]
        if offset == 0:
            if a_n != b_m or sysA.steps[n].tgt != a_next:
                raise DefectExceeded(f"stage {n} algebras differ; identity legs are not available", chain)
            phi = identity_hom(a_n)
            psi = iota_a
        else:
            if b_m != a_next:
                raise DefectExceeded(f"{b_m} differs from {a_next}; no aligned leg at stage {n}", chain)
            if phi_next is None:
                z = unitary_path_in_algebra(b_m.p, b_m.q, rng, interior=1, scale=twist)
                phi = iota_a.postcompose_inner(z)
            else:
                phi = phi_next
            gens = gens_for(n)
            try:
                res = corrective_unitary(phi, iota_a, gens, sched[t] / 2, grid)
            except (PatternsTooFar, DimDropError) as exc:
                raise DefectExceeded(f"no corrective unitary at stage {n}: {exc}", chain) from exc
            psi = inner_hom(b_m, res.w)
            chain.meta.setdefault("corrective", []).append(res.as_dict())
        chain.phi_steps.append(phi)
        chain.psi_steps.append(psi)
        gens = gens_for(n)
        record("up", n, phi, psi, iota_a, gens, sched[t])
        t += 1
        if t >= len(sched):
            break
        # lower triangle: phi_{n+1} o psi_n against the B connecting map
        m = n + offset
        if m + 1 >= sysB.length or n + 2 > sysA.length:
            raise DefectExceeded("systems are too short for the schedule", chain)
        iota_b = sysB.steps[m]
        if offset == 0:
            phi_next = identity_hom(sysA.algebra(n + 1))
        else:
            phi_next = iota_b.precompose_inner(AdjointPath(psi.unitary))
        gens_b = _stage_gens(sysB, m, gens_per_stage, seed + 1)
        record("low", n, psi, phi_next, iota_b, gens_b, sched[t])
        t += 1
        n += 1
    return chain


# ---------------------------------------------------------------------------
# approximately inner endomorphisms


@dataclass
class ApproxInnerResult:
    v: UnitaryPath
    defect: float
    stage: int
    per_generator: list
    details: dict

    def as_dict(self) -> dict:
        return {"defect": self.defect, "stage": self.stage, "per_generator": self.per_generator, "details": self.details}


def approx_inner_demo(
    sys: InductiveSystem,
    rho: Homomorphism,
    gens: Sequence[Element],
    eps: float,
    *,
    n: Optional[int] = None,
    horizon: Optional[int] = None,
    grid: int = DEFAULT_GRID,
) -> ApproxInnerResult:
    """Unitary v in a stage N >= m with ||rho_N(f) - v* iota_{N,n}(f) v|| < 2 eps on ``gens``.

    ``rho`` maps stage n to stage m; it is pushed to later stages by the
    connecting maps until a corrective unitary w with Ad(w) iota ~ rho exists,
    and v = w*.
    """
    stages = [a for a, _ in sys.stages]
    if n is None:
        n = stages.index(rho.src)
    m = stages.index(rho.tgt, n)
    horizon = sys.length - 1 if horizon is None else horizon
    best = float("inf")
    tried = []
    rho_N = rho
    for N in range(m, horizon + 1):
        if N > m:
            rho_N = compose_homs(sys.steps[N - 1], rho_N)
        if N == n:
            ref = identity_hom(stages[n])
        else:
            ref = sys.composite_hom(n, N)
        try:
            res = corrective_unitary(ref, rho_N, gens, eps, grid)
        except PatternsTooFar as exc:
            tried.append({"stage": N, "error": str(exc)})
            continue
        tried.append({"stage": N, "defect": res.defect})
        best = min(best, res.defect)
        if res.defect < 2 * eps:
            return ApproxInnerResult(AdjointPath(res.w), res.defect, N, res.per_generator, {"tried": tried, **res.as_dict()})
    raise HorizonExhausted(f"no stage up to {horizon} gave defect < {2 * eps}", best)
