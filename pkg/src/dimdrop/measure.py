"""Tracial states as probability measures on [0, 1].

A measure is a finite list of atoms plus a continuous part described by a
piecewise-linear CDF F with F(0) = 0 and F(1) = continuous mass.  Integrals of
piecewise-linear functions, pushforwards along monotone PL maps and quantile
couplings are all exact on the knots.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .errors import NotMonotone, SourceNotAtomless, SourceNotFaithful, TargetNotFaithful
from .pattern import Number, PLMap, num, num_to_str

_MASS_TOL = 1e-12


def _is_zero(x) -> bool:
    return x == 0 or (isinstance(x, float) and abs(x) <= _MASS_TOL)


@dataclass(frozen=True)
class Measure:
    """Probability measure: atoms (location, mass) plus a PL continuous CDF."""

    atoms: tuple[tuple[Number, Number], ...]
    cdf_x: tuple[Number, ...]
    cdf_f: tuple[Number, ...]

    def __post_init__(self) -> None:
        merged: dict = {}
        for loc, mass in self.atoms:
            loc, mass = num(loc), num(mass)
            if mass < 0 or loc < 0 or loc > 1:
                raise ValueError(f"invalid atom ({loc}, {mass})")
            if _is_zero(mass):
                continue
            merged[loc] = merged.get(loc, 0) + mass
        atoms = tuple(sorted(merged.items()))
        xs = tuple(num(x) for x in self.cdf_x)
        fs = tuple(num(f) for f in self.cdf_f)
        if len(xs) != len(fs) or len(xs) < 2 or xs[0] != 0 or xs[-1] != 1:
            raise ValueError("CDF knots must span [0, 1]")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("CDF knot locations must be strictly increasing")
        if fs[0] != 0 and not _is_zero(fs[0]):
            raise ValueError("CDF must start at 0")
        if any(b < a and not _is_zero(a - b) for a, b in zip(fs, fs[1:])):
            raise NotMonotone("CDF must be nondecreasing")
        total = sum(m for _, m in atoms) + fs[-1]
        if abs(total - 1) > _MASS_TOL:
            raise ValueError(f"total mass {float(total)} differs from 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "cdf_x", xs)
        object.__setattr__(self, "cdf_f", fs)

    # constructors ---------------------------------------------------------
    @classmethod
    def lebesgue(cls) -> "Measure":
        return cls((), (0, 1), (0, 1))

    @classmethod
    def dirac(cls, x) -> "Measure":
        return cls(((x, 1),), (0, 1), (0, 0))

    @classmethod
    def from_cdf(cls, knots: Iterable[Sequence], atoms: Iterable[Sequence] = ()) -> "Measure":
        pts = list(knots)
        return cls(tuple(tuple(a) for a in atoms), tuple(p[0] for p in pts), tuple(p[1] for p in pts))

    @classmethod
    def mixture(cls, parts: Sequence[tuple[Number, "Measure"]]) -> "Measure":
        """Convex combination sum w_i mu_i (weights must sum to 1)."""
        atoms: list = []
        xs = sorted({x for _, mu in parts for x in mu.cdf_x})
        fs = [0] * len(xs)
        for w, mu in parts:
            atoms.extend((loc, w * m) for loc, m in mu.atoms)
            for j, x in enumerate(xs):
                fs[j] = fs[j] + w * mu.continuous_cdf(x)
        return cls(tuple(atoms), tuple(xs), tuple(fs))

    # basic queries --------------------------------------------------------
    @property
    def atom_mass(self) -> Number:
        return sum((m for _, m in self.atoms), 0)

    @property
    def continuous_mass(self) -> Number:
        return self.cdf_f[-1]

    @property
    def total_mass(self) -> Number:
        return self.atom_mass + self.continuous_mass

    def is_atomless(self) -> bool:
        return not self.atoms

    def is_faithful(self) -> bool:
        """Positive on every nonempty open set.

        Finitely many atoms cannot charge a whole open interval, so this holds
        exactly when the continuous CDF increases strictly on every segment.
        """
        return all(b > a and not _is_zero(b - a) for a, b in zip(self.cdf_f, self.cdf_f[1:]))

    def continuous_cdf(self, x) -> Number:
        xs, fs = self.cdf_x, self.cdf_f
        if x <= 0:
            return fs[0]
        if x >= 1:
            return fs[-1]
        from bisect import bisect_right

        i = bisect_right(xs, x) - 1
        x0, x1 = xs[i], xs[i + 1]
        return fs[i] + (fs[i + 1] - fs[i]) * (x - x0) / (x1 - x0)

    def cdf(self, x) -> Number:
        """Right-continuous total CDF mu([0, x])."""
        return self.continuous_cdf(x) + sum((m for loc, m in self.atoms if loc <= x), 0)

    def cdf_left(self, x) -> Number:
        """mu([0, x))."""
        return self.continuous_cdf(x) + sum((m for loc, m in self.atoms if loc < x), 0)

    def discrete_part(self) -> tuple[tuple[Number, Number], ...]:
        return self.atoms

    def continuous_part_cdf(self) -> PLMap:
        return PLMap(self.cdf_x, self.cdf_f)

    # integration ----------------------------------------------------------
    def integrate_pl(self, xs: Sequence, vals: Sequence) -> Number:
        """Exact integral of the PL function with knots (xs, vals) (values unrestricted)."""
        xs = [num(x) for x in xs]
        vals = list(vals)

        def g(x):
            from bisect import bisect_right

            if x <= xs[0]:
                return vals[0]
            if x >= xs[-1]:
                return vals[-1]
            i = bisect_right(xs, x) - 1
            x0, x1 = xs[i], xs[i + 1]
            if x == x0:
                return vals[i]
            return vals[i] + (vals[i + 1] - vals[i]) * (x - x0) / (x1 - x0)

        total = 0
        for loc, m in self.atoms:
            total = total + g(loc) * m
        grid = sorted(set(xs) | set(self.cdf_x))
        prev_x, prev_f, prev_g = grid[0], self.continuous_cdf(grid[0]), g(grid[0])
        for x in grid[1:]:
            fx, gx = self.continuous_cdf(x), g(x)
            total = total + (fx - prev_f) * (prev_g + gx) / 2
            prev_x, prev_f, prev_g = x, fx, gx
        return total

    def integrate_map(self, m: PLMap) -> Number:
        return self.integrate_pl(m.xs, m.ys)

    # JSON -----------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "atoms": [[num_to_str(x), num_to_str(w)] for x, w in self.atoms],
            "cdf": [[num_to_str(x), num_to_str(f)] for x, f in zip(self.cdf_x, self.cdf_f)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Measure":
        atoms = tuple((num(x), num(w)) for x, w in data.get("atoms", []))
        cdf = data["cdf"]
        return cls(atoms, tuple(num(x) for x, _ in cdf), tuple(num(f) for _, f in cdf))

    def __repr__(self) -> str:
        return f"Measure(atoms={len(self.atoms)}, cdf_knots={len(self.cdf_x)})"


# ---------------------------------------------------------------------------


def trace_value(mu: Measure, f) -> Number:
    """tau_mu(f) = integral of the normalized trace of f against mu.

    ``f`` must expose ``trace_knots()`` returning (xs, values) of the PL scalar
    function s -> tr f(s).
    """
    xs, vals = f.trace_knots()
    return mu.integrate_pl(xs, vals)


def _require_monotone(beta: PLMap) -> None:
    if not beta.is_nondecreasing():
        raise NotMonotone("map is not nondecreasing")


def pushforward(mu: Measure, beta: PLMap) -> Measure:
    """beta_* mu for a nondecreasing PL map; plateaus of beta become atoms."""
    _require_monotone(beta)
    return pushforward_any(mu, beta)


def quantile_map(tau: Measure) -> PLMap:
    """Left-continuous quantile Q(u) = inf{y : tau([0, y]) >= u} of a faithful measure.

    Faithfulness makes the CDF strictly increasing, so Q is continuous; atoms
    of tau become plateaus of Q.
    """
    if not tau.is_faithful():
        raise TargetNotFaithful("quantile coupling needs a faithful target measure")
    ys = sorted(set(tau.cdf_x) | {loc for loc, _ in tau.atoms})
    us: list = []
    qs: list = []
    for y in ys:
        lo, hi = tau.cdf_left(y), tau.cdf(y)
        for u in (lo, hi):
            if us and (u == us[-1] or (isinstance(u, float) and abs(u - us[-1]) <= _MASS_TOL)):
                qs[-1] = y
                continue
            us.append(u)
            qs.append(y)
    if any(isinstance(u, float) for u in us):
        us = [float(u) for u in us]
        us[0], us[-1] = 0.0, 1.0
    else:
        us[0], us[-1] = Fraction(0), Fraction(1)
    return PLMap(us, qs)


def quantile_coupling(lambda_src: Measure, tau: Measure) -> PLMap:
    """Nondecreasing continuous surjection beta with beta_* lambda_src = tau."""
    if not lambda_src.is_atomless():
        raise SourceNotAtomless("source measure has atoms")
    if not lambda_src.is_faithful():
        raise SourceNotFaithful("source measure is not faithful")
    q = quantile_map(tau)
    cdf = PLMap(lambda_src.cdf_x, lambda_src.cdf_f)
    return q.compose(cdf)


def plateaus(beta: PLMap) -> list[tuple[Number, Number]]:
    """Maximal closed intervals of positive length on which beta is constant."""
    _require_monotone(beta)
    out: list[tuple[Number, Number]] = []
    for x0, x1, y0, y1 in beta.segments():
        if y0 != y1:
            continue
        if out and out[-1][1] == x0:
            out[-1] = (out[-1][0], x1)
        else:
            out.append((x0, x1))
    return out


def pullback_trace(h, tau_target: Measure) -> Measure:
    """h^* tau' = [a p delta_0 + b q delta_1 + pq sum_i (t_i)_* tau'] / (p'q').

    ``h`` is anything with ``src``, ``tgt``, ``pattern``, ``a`` and ``b``.
    Pushforwards along non-monotone maps are computed piecewise on monotone
    pieces of each map.
    """
    p, q = h.src.p, h.src.q
    n = h.tgt.p * h.tgt.q
    parts: list[tuple[Number, Measure]] = []
    if h.a:
        parts.append((Fraction(h.a * p, n), Measure.dirac(0)))
    if h.b:
        parts.append((Fraction(h.b * q, n), Measure.dirac(1)))
    for m, c in h.pattern.items():
        parts.append((Fraction(p * q * c, n), pushforward_any(tau_target, m)))
    return Measure.mixture(parts)


def pushforward_any(mu: Measure, t: PLMap) -> Measure:
    """t_* mu for an arbitrary PL map (split into monotone pieces)."""
    atoms = [(t(loc), m) for loc, m in mu.atoms]
    grid = sorted(set(t.xs) | set(mu.cdf_x))
    pieces = []
    for x0, x1 in zip(grid, grid[1:]):
        mass = mu.continuous_cdf(x1) - mu.continuous_cdf(x0)
        if _is_zero(mass):
            continue
        y0, y1 = t(x0), t(x1)
        if y0 == y1:
            atoms.append((y0, mass))
        else:
            lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
            pieces.append((lo, hi, mass))
    ys = sorted({num(0), num(1)} | {y for p in pieces for y in p[:2]})

    def cont(y):
        total = 0
        for lo, hi, mass in pieces:
            if y >= hi:
                total = total + mass
            elif y > lo:
                total = total + mass * (y - lo) / (hi - lo)
        return total

    return Measure(tuple(atoms), tuple(ys), tuple(cont(y) for y in ys))


def cdf_distance_at_knots(mu: Measure, nu: Measure) -> float:
    """max |mu([0,x]) - nu([0,x])| over all knots and atoms of both measures."""
    pts = set(mu.cdf_x) | set(nu.cdf_x) | {x for x, _ in mu.atoms} | {x for x, _ in nu.atoms}
    return max(float(abs(mu.cdf(x) - nu.cdf(x))) for x in pts)


def pl_sqrt_cdf_target(mesh: int) -> tuple[Measure, PLMap]:
    """Measure with CDF y^2 sampled on a mesh, and the PL square root on the same mesh."""
    ys = [Fraction(i, mesh) for i in range(mesh + 1)]
    tau = Measure.from_cdf([(y, y * y) for y in ys])
    us = [y * y for y in ys]
    return tau, PLMap(us, ys)


def pl_approximation(fn: Callable[[float], float], mesh: int) -> PLMap:
    """PL interpolant of a continuous [0,1]->[0,1] function on a uniform mesh."""
    xs = [Fraction(i, mesh) for i in range(mesh + 1)]
    return PLMap(xs, [float(fn(float(x))) for x in xs])
