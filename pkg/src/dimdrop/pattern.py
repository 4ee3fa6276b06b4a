"""Eigenvalue patterns: finite families of piecewise-linear self-maps of [0, 1].

Knots are kept as exact ``Fraction`` values whenever the inputs are exact; floats
are accepted and propagate as floats.  Patterns carry multiplicities so that
embeddings with astronomically many eigenvalue maps stay tractable: only the
distinct maps are stored, with a Python-int count for each.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .core import DimensionDropAlgebra, EmbeddingIntegers, as_fraction
from .errors import BulletsUnsatisfied, ChainMismatch, EmptyPattern, EmptySet, NotNormalized

Number = Union[Fraction, float]
_FLOAT_SLACK = 1e-12


def num(x) -> Number:
    """Coerce to the exact-or-float number type used by knots."""
    if isinstance(x, (Fraction, float)):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not knot values")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, str):
        return Fraction(x) if ("/" in x or "e" not in x.lower()) else float(x)
    raise TypeError(f"unsupported knot value {x!r}")


def num_to_str(x: Number) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


class PLMap:
    """Continuous piecewise-linear map [0, 1] -> [0, 1] given by its knots."""

    __slots__ = ("xs", "ys", "_hash", "_float")

    def __init__(self, xs: Iterable, ys: Iterable, *, check: bool = True):
        xs_t = tuple(num(v) for v in xs)
        ys_t = tuple(num(v) for v in ys)
        if check:
            if len(xs_t) != len(ys_t) or len(xs_t) < 2:
                raise ValueError("a PL map needs at least two knots with matching x and y")
            if xs_t[0] != 0 or xs_t[-1] != 1:
                raise ValueError("knots must start at x=0 and end at x=1")
            if any(b <= a for a, b in zip(xs_t, xs_t[1:])):
                raise ValueError("knot x-coordinates must be strictly increasing")
            fixed = []
            for y in ys_t:
                if y < 0 or y > 1:
                    if isinstance(y, float) and -_FLOAT_SLACK <= y <= 1 + _FLOAT_SLACK:
                        y = min(max(y, 0.0), 1.0)
                    else:
                        raise ValueError(f"knot value {y} outside [0, 1]")
                fixed.append(y)
            ys_t = tuple(fixed)
        self.xs = xs_t
        self.ys = ys_t
        self._hash = None
        self._float = None

    # construction helpers -------------------------------------------------
    @classmethod
    def from_knots(cls, knots: Iterable[Sequence]) -> "PLMap":
        pts = list(knots)
        return cls([p[0] for p in pts], [p[1] for p in pts])

    @classmethod
    def identity(cls) -> "PLMap":
        return cls([0, 1], [0, 1])

    @classmethod
    def constant(cls, c) -> "PLMap":
        return cls([0, 1], [c, c])

    @classmethod
    def affine(cls, y0, y1) -> "PLMap":
        return cls([0, 1], [y0, y1])

    @classmethod
    def tent(cls, base, peak, at=Fraction(1, 2)) -> "PLMap":
        return cls([0, at, 1], [base, peak, base])

    # evaluation -----------------------------------------------------------
    def __call__(self, x) -> Number:
        xs, ys = self.xs, self.ys
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        i = bisect_right(xs, x) - 1
        x0, x1 = xs[i], xs[i + 1]
        if x == x0:
            return ys[i]
        y0, y1 = ys[i], ys[i + 1]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def float_knots(self) -> tuple[np.ndarray, np.ndarray]:
        if self._float is None:
            self._float = (
                np.array([float(v) for v in self.xs]),
                np.array([float(v) for v in self.ys]),
            )
        return self._float

    def eval_array(self, x: np.ndarray) -> np.ndarray:
        fx, fy = self.float_knots()
        return np.interp(np.asarray(x, dtype=float), fx, fy)

    # geometry -------------------------------------------------------------
    def image(self) -> tuple[Number, Number]:
        return min(self.ys), max(self.ys)

    def diameter(self) -> Number:
        lo, hi = self.image()
        return hi - lo

    def image_of(self, lo, hi) -> tuple[Number, Number]:
        """Exact image of the sub-interval [lo, hi]."""
        vals = [self(lo), self(hi)]
        i, j = bisect_right(self.xs, lo), bisect_left(self.xs, hi)
        vals.extend(self.ys[i:j])
        return min(vals), max(vals)

    def lipschitz(self) -> Number:
        return max(abs(y1 - y0) / (x1 - x0) for x0, x1, y0, y1 in self.segments())

    def segments(self) -> Iterator[tuple[Number, Number, Number, Number]]:
        xs, ys = self.xs, self.ys
        for i in range(len(xs) - 1):
            yield xs[i], xs[i + 1], ys[i], ys[i + 1]

    def is_constant(self) -> bool:
        return all(y == self.ys[0] for y in self.ys)

    def is_nondecreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.ys, self.ys[1:]))

    def compose(self, inner: "PLMap") -> "PLMap":
        """Return self o inner, exact on the breakpoints of both maps."""
        pts = set(inner.xs)
        kx = self.xs
        for x0, x1, y0, y1 in inner.segments():
            if y0 == y1:
                continue
            lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
            i, j = bisect_right(kx, lo), bisect_left(kx, hi)
            for u in kx[i:j]:
                pts.add(x0 + (u - y0) * (x1 - x0) / (y1 - y0))
        xs = sorted(pts)
        return PLMap(xs, [self(inner(x)) for x in xs], check=False)._clamped().simplified()

    def _clamped(self) -> "PLMap":
        if all(not isinstance(y, float) or 0.0 <= y <= 1.0 for y in self.ys):
            return self
        return PLMap(self.xs, [min(max(y, 0.0), 1.0) if isinstance(y, float) else y for y in self.ys], check=False)

    def simplified(self) -> "PLMap":
        """Drop knots where the map is exactly collinear with its neighbours."""
        xs, ys = list(self.xs), list(self.ys)
        if len(xs) <= 2:
            return self
        out_x, out_y = [xs[0]], [ys[0]]
        for i in range(1, len(xs) - 1):
            x0, y0 = out_x[-1], out_y[-1]
            x1, y1 = xs[i], ys[i]
            x2, y2 = xs[i + 1], ys[i + 1]
            if (y1 - y0) * (x2 - x1) == (y2 - y1) * (x1 - x0):
                continue
            out_x.append(x1)
            out_y.append(y1)
        out_x.append(xs[-1])
        out_y.append(ys[-1])
        if len(out_x) == len(xs):
            return self
        return PLMap(out_x, out_y, check=False)

    def preimage(self, y) -> list[tuple[Number, Number]]:
        """Closed intervals (possibly degenerate) on which the map equals y."""
        out: list[tuple[Number, Number]] = []
        for x0, x1, y0, y1 in self.segments():
            if y0 == y1:
                if y0 == y:
                    out.append((x0, x1))
                continue
            lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
            if lo <= y <= hi:
                x = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
                out.append((x, x))
        merged: list[tuple[Number, Number]] = []
        for a, b in sorted(out):
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
            else:
                merged.append((a, b))
        return merged

    def sup_distance(self, other: "PLMap") -> Number:
        if self.is_exact() and other.is_exact():
            xs = sorted(set(self.xs) | set(other.xs))
            return max(abs(self(x) - other(x)) for x in xs)
        (ax, ay), (bx, by) = self.float_knots(), other.float_knots()
        xs = np.union1d(ax, bx)
        return float(np.max(np.abs(np.interp(xs, ax, ay) - np.interp(xs, bx, by))))

    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.xs) and all(isinstance(v, (int, Fraction)) for v in self.ys)

    def perturbed(self, offsets: dict) -> "PLMap":
        """Shift interior knot values by ``offsets[i]`` (clamped to [0, 1])."""
        ys = list(self.ys)
        for i, d in offsets.items():
            if 0 < i < len(ys) - 1:
                ys[i] = min(max(ys[i] + d, 0 * d), 1 + 0 * d)
        return PLMap(self.xs, ys)

    def to_float(self) -> "PLMap":
        return PLMap([float(x) for x in self.xs], [float(y) for y in self.ys], check=False)

    # identity -------------------------------------------------------------
    def key(self) -> tuple:
        return (self.xs, self.ys)

    def __eq__(self, other) -> bool:
        return isinstance(other, PLMap) and self.xs == other.xs and self.ys == other.ys

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.xs, self.ys))
        return self._hash

    def __repr__(self) -> str:
        pts = ", ".join(f"({num_to_str(x)}, {num_to_str(y)})" for x, y in zip(self.xs, self.ys))
        return f"PLMap[{pts}]"

    def to_json(self) -> list[list[str]]:
        return [[num_to_str(x), num_to_str(y)] for x, y in zip(self.xs, self.ys)]

    @classmethod
    def from_json(cls, data) -> "PLMap":
        return cls.from_knots([(num(x), num(y)) for x, y in data])


def _le_everywhere(f: PLMap, g: PLMap) -> bool:
    xs = sorted(set(f.xs) | set(g.xs))
    for x in xs:
        a, b = f(x), g(x)
        if a > b and not (isinstance(a - b, float) and a - b <= _FLOAT_SLACK):
            return False
    return True


@dataclass(frozen=True)
class EigenvaluePattern:
    """Ordered family of PL maps with multiplicities; k = sum of multiplicities."""

    maps: tuple[PLMap, ...]
    mult: tuple[int, ...] = ()
    normalized: bool = False

    def __post_init__(self) -> None:
        maps = tuple(self.maps)
        mult = tuple(int(m) for m in self.mult) if self.mult else tuple(1 for _ in maps)
        if len(mult) != len(maps):
            raise ValueError("maps and multiplicities differ in length")
        if any(m <= 0 for m in mult):
            raise ValueError("multiplicities must be positive")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "mult", mult)
        if self.normalized and not is_sorted(maps):
            raise NotNormalized("maps flagged as normalized are not pointwise sorted")

    @classmethod
    def from_maps(cls, maps: Iterable[PLMap], normalized: bool = False) -> "EigenvaluePattern":
        maps = tuple(maps)
        return cls(maps, tuple(1 for _ in maps), normalized)

    @property
    def k(self) -> int:
        return sum(self.mult)

    @property
    def distinct(self) -> int:
        return len(self.maps)

    def expanded(self) -> list[PLMap]:
        out: list[PLMap] = []
        for m, c in zip(self.maps, self.mult):
            out.extend([m] * c)
        return out

    def items(self) -> Iterator[tuple[PLMap, int]]:
        return zip(self.maps, self.mult)

    def values_at(self, x) -> list[tuple[Number, int]]:
        return [(m(x), c) for m, c in self.items()]

    def value_multiset(self, x) -> Counter:
        out: Counter = Counter()
        for m, c in self.items():
            out[m(x)] += c
        return out

    def merged(self) -> "EigenvaluePattern":
        """Merge adjacent identical maps (keeps order, hence normalization)."""
        maps: list[PLMap] = []
        mult: list[int] = []
        for m, c in self.items():
            if maps and maps[-1] == m:
                mult[-1] += c
            else:
                maps.append(m)
                mult.append(c)
        return EigenvaluePattern(tuple(maps), tuple(mult), self.normalized)

    def variation(self) -> Number:
        return variation(self)

    def to_json(self) -> dict:
        return {
            "maps": [m.to_json() for m in self.maps],
            "mult": [str(c) if c > 2**53 else c for c in self.mult],
            "normalized": self.normalized,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EigenvaluePattern":
        maps = tuple(PLMap.from_json(m) for m in data["maps"])
        mult = tuple(int(c) for c in data.get("mult", [1] * len(maps)))
        return cls(maps, mult, bool(data.get("normalized", False)))


def is_sorted(maps: Sequence[PLMap]) -> bool:
    return all(_le_everywhere(f, g) for f, g in zip(maps, maps[1:]))


# ---------------------------------------------------------------------------
# normalization and variation


def normalize(pat: EigenvaluePattern) -> EigenvaluePattern:
    """Pointwise-sorted family: the r-th output map is the r-th smallest value function."""
    if pat.distinct == 0:
        return EigenvaluePattern((), (), True)
    if pat.distinct == 1 or is_sorted(pat.maps):
        return EigenvaluePattern(pat.maps, pat.mult, True).merged()
    maps, mult = pat.maps, pat.mult
    d = len(maps)
    knots = sorted({x for m in maps for x in m.xs})
    vals = [[m(x) for x in knots] for m in maps]
    pts = set(knots)
    for j in range(len(knots) - 1):
        x0, x1 = knots[j], knots[j + 1]
        for a in range(d):
            va0, va1 = vals[a][j], vals[a][j + 1]
            for b in range(a + 1, d):
                d0 = va0 - vals[b][j]
                d1 = va1 - vals[b][j + 1]
                if d0 * d1 < 0:
                    pts.add(x0 + (x1 - x0) * d0 / (d0 - d1))
    grid = sorted(pts)
    table = [[m(x) for x in grid] for m in maps]
    k = sum(mult)
    bounds = {0, k}
    orders = []
    for t in range(len(grid)):
        order = sorted(range(d), key=lambda i: (table[i][t], i))
        orders.append(order)
        cum = 0
        for i in order:
            cum += mult[i]
            bounds.add(cum)
    cuts = sorted(bounds)
    prefix = []
    for order in orders:
        cum, acc = 0, []
        for i in order:
            cum += mult[i]
            acc.append(cum)
        prefix.append(acc)
    new_maps: list[PLMap] = []
    new_mult: list[int] = []
    for r in range(len(cuts) - 1):
        rank = cuts[r]
        ys = []
        for t, order in enumerate(orders):
            pos = bisect_right(prefix[t], rank)
            ys.append(table[order[pos]][t])
        new_maps.append(PLMap(grid, ys, check=False).simplified())
        new_mult.append(cuts[r + 1] - cuts[r])
    return EigenvaluePattern(tuple(new_maps), tuple(new_mult), True).merged()


def variation(pat: EigenvaluePattern) -> Number:
    """Largest image diameter over the maps of the pattern (exact)."""
    if pat.distinct == 0:
        raise EmptyPattern("variation of an empty pattern")
    return max(m.diameter() for m in pat.maps)


# ---------------------------------------------------------------------------
# composition


@dataclass(frozen=True)
class PatternMorphism:
    """Pattern-level data of a normal-form morphism src -> tgt."""

    src: DimensionDropAlgebra
    tgt: DimensionDropAlgebra
    pattern: EigenvaluePattern
    a: int
    b: int

    def check_size(self) -> None:
        p, q = self.src.p, self.src.q
        if p * self.a + p * q * self.pattern.k + q * self.b != self.tgt.p * self.tgt.q:
            raise ValueError("size identity p*a + p*q*k + q*b = p'q' fails")

    def boundary_profile(self, x) -> tuple[int, int, dict]:
        """(#maps with value 0, #maps with value 1, {interior value: count}) at x."""
        zero = one = 0
        inner: dict = {}
        for m, c in self.pattern.items():
            v = m(x)
            if v == 0:
                zero += c
            elif v == 1:
                one += c
            else:
                inner[v] = inner.get(v, 0) + c
        return zero, one, inner


def compose(first: PatternMorphism, second: PatternMorphism) -> PatternMorphism:
    """Pattern of ``second o first`` where first: m -> n and second: n -> l.

    Maps are t_j o s_j' for t in first and s in second (ordered with s major),
    followed by constants: folded copies of the compression of f(0) (value 0),
    interior boundary values of ``first`` picked up by the remainder blocks of
    ``second``, and folded copies at value 1.
    """
    if first.tgt != second.src:
        raise ChainMismatch(f"{first.tgt} does not match {second.src}")
    pm, qm = first.src.p, first.src.q
    pn, qn = first.tgt.p, first.tgt.q
    ao, bo = first.a, first.b
    ai, bi = second.a, second.b
    ki = second.pattern.k
    z0, o0, inner0 = first.boundary_profile(0)
    z1, o1, inner1 = first.boundary_profile(1)
    c0 = ai * ((ao + qm * z0) // qn) + bi * ((ao + qm * z1) // pn) + ki * ao
    c1 = ai * ((bo + pm * o0) // qn) + bi * ((bo + pm * o1) // pn) + ki * bo
    consts: dict = {}
    for y, c in inner0.items():
        consts[y] = consts.get(y, 0) + ai * (c // qn)
    for y, c in inner1.items():
        consts[y] = consts.get(y, 0) + bi * (c // pn)
    a_c, extra0 = c0 % qm, c0 // qm
    b_c, extra1 = c1 % pm, c1 // pm
    cache: dict = {}
    maps: list[PLMap] = []
    mult: list[int] = []
    for s, cs in second.pattern.items():
        for t, ct in first.pattern.items():
            key = (t, s)
            comp = cache.get(key)
            if comp is None:
                comp = t.compose(s)
                cache[key] = comp
            maps.append(comp)
            mult.append(cs * ct)
    if extra0:
        maps.append(PLMap.constant(0))
        mult.append(extra0)
    for y in sorted(consts):
        if consts[y]:
            maps.append(PLMap.constant(y))
            mult.append(consts[y])
    if extra1:
        maps.append(PLMap.constant(1))
        mult.append(extra1)
    out = PatternMorphism(first.src, second.tgt, EigenvaluePattern(tuple(maps), tuple(mult)), a_c, b_c)
    out.check_size()
    return out


def dedupe(pat: EigenvaluePattern) -> EigenvaluePattern:
    """Merge equal maps anywhere in the family (order of first appearance)."""
    index: dict = {}
    maps: list[PLMap] = []
    mult: list[int] = []
    for m, c in pat.items():
        i = index.get(m)
        if i is None:
            index[m] = len(maps)
            maps.append(m)
            mult.append(c)
        else:
            mult[i] += c
    return EigenvaluePattern(tuple(maps), tuple(mult), False)


# ---------------------------------------------------------------------------
# census and Hausdorff gap


@dataclass(frozen=True)
class Census:
    a_count: int
    b_count: int
    c_count: int
    y: Number
    eps: Number

    def as_dict(self) -> dict:
        return {"a": self.a_count, "b": self.b_count, "c": self.c_count, "y": num_to_str(self.y), "eps": num_to_str(self.eps)}


def census(pat: EigenvaluePattern, y, eps) -> Census:
    """a = #{max t_i <= y+eps}, b = #{min t_i < y-eps}, c = max(b-a, 0) on a normalized pattern."""
    if not pat.normalized:
        raise NotNormalized("census needs a normalized pattern; call normalize() first")
    y, eps = num(y), num(eps)
    a = b = 0
    for m, c in pat.items():
        lo, hi = m.image()
        if hi <= y + eps:
            a += c
        if lo < y - eps:
            b += c
    return Census(a, b, max(b - a, 0), y, eps)


def _open_sublevel_intervals(m: PLMap, c, below: bool) -> list[tuple[Number, Number, bool, bool]]:
    """Pieces of {x : m(x) < c} (below) or {x : m(x) > c} as (lo, hi, lo_closed, hi_closed)."""
    out = []
    for x0, x1, y0, y1 in m.segments():
        in0 = y0 < c if below else y0 > c
        in1 = y1 < c if below else y1 > c
        if in0 and in1:
            out.append((x0, x1))
        elif in0 or in1:
            xc = x0 + (c - y0) * (x1 - x0) / (y1 - y0)
            out.append((x0, xc) if in0 else (xc, x1))
    return out


def _max_cover_count(pat: EigenvaluePattern, c, below: bool) -> int:
    """max over x of the number of maps (with multiplicity) strictly below/above c at x.

    Each map's set is relatively open in [0, 1]; pieces of one map only touch at
    endpoints, so sweeping with closings before openings at equal coordinates
    never over-counts.  Sets that reach x=0 or x=1 contain that endpoint.
    """
    events: list[tuple[Number, int, int]] = []
    for m, cnt in pat.items():
        pieces = _open_sublevel_intervals(m, c, below)
        # merge touching pieces so the endpoints 0 and 1 are handled once
        merged: list[list] = []
        for lo, hi in pieces:
            if merged and merged[-1][1] == lo:
                merged[-1][1] = hi
            else:
                merged.append([lo, hi])
        for lo, hi in merged:
            if lo == hi:
                continue
            events.append((lo, 1, cnt))
            events.append((hi, 0, -cnt))
    if not events:
        return 0
    events.sort(key=lambda e: (e[0], e[1]))
    best = cur = 0
    for _, _, w in events:
        cur += w
        if cur > best:
            best = cur
    return best


def sorted_census(pat: EigenvaluePattern, y, eps) -> Census:
    """Census of ``normalize(pat)`` computed without normalizing.

    For the r-th order statistic T_r, min T_r < y-eps iff some x has at least r
    values below y-eps, so b = max_x #{t_i(x) < y-eps}; dually
    a = k - max_x #{t_i(x) > y+eps}.
    """
    y, eps = num(y), num(eps)
    k = pat.k
    b = _max_cover_count(pat, y - eps, below=True)
    a = k - _max_cover_count(pat, y + eps, below=False)
    return Census(a, b, max(b - a, 0), y, eps)


def hausdorff_gap(values: Iterable) -> Number:
    """Hausdorff distance between a finite subset of [0, 1] and [0, 1]."""
    vals = sorted(set(values))
    if not vals:
        raise EmptySet("hausdorff_gap of an empty set")
    gap = max(vals[0], 1 - vals[-1])
    for u, v in zip(vals, vals[1:]):
        h = (v - u) / 2
        if h > gap:
            gap = h
    return gap


# ---------------------------------------------------------------------------
# synthesis of patterns meeting the embedding bullets


@dataclass
class LevelPlan:
    """Combinatorial skeleton of a synthesized pattern.

    Levels 0 = L_0 < ... < L_N = 1; each map starts and ends on a level and the
    start/end levels of one map differ by at most one.  ``runs`` lists
    (start level, end level, count) in index order.
    """

    n_levels: int
    starts: list[int]  # breakpoints sigma_1..sigma_N
    ends: list[int]  # breakpoints e_1..e_N
    runs: list[tuple[int, int, int]]
    ramps: dict = field(default_factory=dict)  # gap -> (direction, count)
    up_tents: dict = field(default_factory=dict)  # level -> count (dipping into gap=level)
    down_tents: dict = field(default_factory=dict)  # level -> count (dipping into gap=level-1)
    constants: dict = field(default_factory=dict)  # level -> count
    positions: list = field(default_factory=list)

    def loads(self) -> list[int]:
        out = []
        for g in range(self.n_levels):
            load = self.ramps.get(g, (0, 0))[1] + self.up_tents.get(g, 0) + self.down_tents.get(g + 1, 0)
            out.append(load)
        return out


def _lattice_candidates(target: Fraction, base: int, step: int, count: int) -> list[int]:
    """Lattice points base + step*r (0 <= r <= count) closest to target."""
    r = math.floor((target - base) / step)
    out = set()
    for d in (-1, 0, 1, 2):
        rr = min(max(r + d, 0), count)
        out.add(base + step * rr)
    return sorted(out)


def _runs_from_breakpoints(k: int, sig: list[int], eps_b: list[int]) -> list[tuple[int, int, int]]:
    n = len(sig)
    s_bp = [0] + sig + [k]  # level j occupies [s_bp[j], s_bp[j+1])
    e_bp = [0] + eps_b + [k]
    cuts = sorted(set(s_bp) | set(e_bp))
    runs: list[tuple[int, int, int]] = []
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        s_lvl = bisect_right(s_bp, lo) - 1
        e_lvl = bisect_right(e_bp, lo) - 1
        s_lvl, e_lvl = min(s_lvl, n), min(e_lvl, n)
        if runs and runs[-1][0] == s_lvl and runs[-1][1] == e_lvl:
            runs[-1] = (s_lvl, e_lvl, runs[-1][2] + hi - lo)
        else:
            runs.append((s_lvl, e_lvl, hi - lo))
    return runs


def _plan_for_levels(ints: EmbeddingIntegers, n_lv: int, atomless: bool) -> Optional[LevelPlan]:
    k = ints.k
    qq, pp = ints.tgt.q, ints.tgt.p
    n00, n01, n10, n11 = ints.n00, ints.n01, ints.n10, ints.n11
    rest0, rest1 = k - n00 - n01, k - n10 - n11
    if rest0 < 0 or rest1 < 0 or rest0 % qq or rest1 % pp:
        return None
    g0, g1 = rest0 // qq, rest1 // pp
    if n_lv == 1:
        if g0 or g1:
            return None
        sig, eb = [n00], [n10]
    else:
        first = (n00, n10)
        last = (k - n01, k - n11)
        states: list[dict] = [{first: (0.0, None)}]
        kf = float(k) if k else 1.0
        for j in range(2, n_lv):
            target = Fraction((2 * j - 1) * k, 2 * n_lv)
            s_c = _lattice_candidates(target, n00, qq, g0) if g0 else [n00]
            e_c = _lattice_candidates(target, n10, pp, g1) if g1 else [n10]
            layer: dict = {}
            for s in s_c:
                for e in e_c:
                    cost_here = (float(s - target) / kf) ** 2 + (float(e - target) / kf) ** 2
                    best = None
                    for (ps, pe), (pc, _) in states[-1].items():
                        if ps <= s and pe <= e and pe <= s and ps <= e:
                            if best is None or pc < best[0]:
                                best = (pc, (ps, pe))
                    if best is not None:
                        layer[(s, e)] = (best[0] + cost_here, best[1])
            if not layer:
                return None
            states.append(layer)
        best = None
        for (ps, pe), (pc, _) in states[-1].items():
            s, e = last
            if ps <= s and pe <= e and pe <= s and ps <= e:
                if best is None or pc < best[0]:
                    best = (pc, (ps, pe))
        if best is None:
            return None
        chain = [last]
        cur = best[1]
        for layer in reversed(states):
            chain.append(cur)
            cur = layer[cur][1]
        chain.reverse()
        sig = [c[0] for c in chain]
        eb = [c[1] for c in chain]
        # the first constraint pair against level 0 is e_0 = 0 <= sigma_1 and 0 <= e_1
    runs = _runs_from_breakpoints(k, sig, eb)
    plan = LevelPlan(n_lv, sig, eb, runs)
    stays: dict = {}
    for s, e, c in runs:
        if abs(s - e) > 1:
            return None
        if s == e:
            stays[s] = stays.get(s, 0) + c
        else:
            g = min(s, e)
            direction = 1 if e > s else -1
            prev = plan.ramps.get(g)
            if prev is not None and prev[0] != direction:  # pragma: no cover - monotone matching
                return None
            plan.ramps[g] = (direction, (prev[1] if prev else 0) + c)
    if atomless:
        target = Fraction(k, n_lv)
        loads = [plan.ramps.get(g, (0, 0))[1] for g in range(n_lv)]
        for j in range(n_lv + 1):
            c = stays.get(j, 0)
            if not c:
                continue
            if j == 0:
                plan.up_tents[0] = c
                loads[0] += c
                continue
            if j == n_lv:
                plan.down_tents[j] = c
                loads[j - 1] += c
                continue
            deficit = max(0, math.ceil(target - loads[j - 1]))
            down = min(c, deficit)
            # keep the right gap alive if nothing else can feed it
            if down == c and loads[j] == 0 and stays.get(j + 1, 0) == 0 and c > 1:
                down = c - 1
            if down:
                plan.down_tents[j] = down
                loads[j - 1] += down
            if c - down:
                plan.up_tents[j] = c - down
                loads[j] += c - down
        if min(loads) < 1:
            return None
        cum = 0
        positions = [Fraction(0)]
        for g in range(n_lv):
            cum += loads[g]
            positions.append(Fraction(cum, k))
        plan.positions = positions
    else:
        plan.constants = dict(stays)
        for g in range(n_lv):
            if g in plan.ramps:
                continue
            if plan.constants.get(g, 0) > 0:
                plan.constants[g] -= 1
                plan.up_tents[g] = plan.up_tents.get(g, 0) + 1
            elif plan.constants.get(g + 1, 0) > 0:
                plan.constants[g + 1] -= 1
                plan.down_tents[g + 1] = plan.down_tents.get(g + 1, 0) + 1
            else:
                return None
        plan.constants = {j: c for j, c in plan.constants.items() if c}
        plan.positions = [Fraction(j, n_lv) for j in range(n_lv + 1)]
    return plan


def _maps_from_plan(plan: LevelPlan) -> EigenvaluePattern:
    L = plan.positions
    n_lv = plan.n_levels
    entries: list[tuple[PLMap, int]] = []
    for j, c in plan.constants.items():
        entries.append((PLMap.constant(L[j]), c))
    for g, (direction, c) in plan.ramps.items():
        m = PLMap.affine(L[g], L[g + 1]) if direction > 0 else PLMap.affine(L[g + 1], L[g])
        entries.append((m, c))
    for g in range(n_lv):
        has_ramp = g in plan.ramps
        up = plan.up_tents.get(g, 0)
        down = plan.down_tents.get(g + 1, 0)
        mid = (L[g] + L[g + 1]) / 2
        full = not has_ramp and not (up and down)
        if up:
            entries.append((PLMap.tent(L[g], L[g + 1] if full else mid), up))
        if down:
            entries.append((PLMap.tent(L[g + 1], L[g] if full else mid), down))
    half = Fraction(1, 2)
    entries.sort(key=lambda e: (e[0](half), e[0](0), e[0](1)))
    maps = tuple(e[0] for e in entries)
    mult = tuple(e[1] for e in entries)
    pattern = EigenvaluePattern(maps, mult)
    if is_sorted(maps):
        return EigenvaluePattern(maps, mult, True).merged()
    return normalize(pattern)  # pragma: no cover - the tie-break order is already sorted


def candidate_plans(ints: EmbeddingIntegers, eps=None, *, atomless: bool = False, extra_levels: int = 12) -> Iterator[LevelPlan]:
    """Level plans for increasing numbers of levels, starting at floor(1/eps)+1."""
    eps_f = as_fraction(eps if eps is not None else ints.eps)
    if eps_f <= 0:
        raise ValueError("eps must be positive")
    if eps_f >= 1 and ints.g0 == 0 and ints.g1 == 0:
        plan = _plan_for_levels(ints, 1, atomless)
        if plan is not None:
            yield plan
    base = max(2, math.floor(1 / eps_f) + 1)
    for n_lv in range(base, base + extra_levels):
        plan = _plan_for_levels(ints, n_lv, atomless)
        if plan is not None:
            yield plan


def plan_width(plan: LevelPlan) -> Fraction:
    return max(b - a for a, b in zip(plan.positions, plan.positions[1:]))


def synthesize_plan(ints: EmbeddingIntegers, eps=None, *, atomless: bool = False) -> LevelPlan:
    """Find a level plan for ``ints`` whose maps all have image diameter < eps."""
    eps_f = as_fraction(eps if eps is not None else ints.eps)
    tried: list[int] = []
    for plan in candidate_plans(ints, eps_f, atomless=atomless):
        tried.append(plan.n_levels)
        if plan.n_levels > 1 and plan_width(plan) >= eps_f:
            continue
        return plan
    raise BulletsUnsatisfied(
        f"no level plan for {ints.src}->{ints.tgt} at eps={eps_f} (feasible level counts {tried}); "
        f"bullets: {ints.bullet_report()}"
    )


def pattern_from_plan(plan: LevelPlan) -> EigenvaluePattern:
    return _maps_from_plan(plan)


def synthesize(
    ints: EmbeddingIntegers,
    src: Optional[DimensionDropAlgebra] = None,
    tgt: Optional[DimensionDropAlgebra] = None,
    eps=None,
    *,
    atomless: bool = False,
) -> EigenvaluePattern:
    """Normalized pattern realizing the boundary counts of ``ints`` with every diameter < eps.

    Maps start and end on levels; interior start values come in blocks of q',
    interior end values in blocks of p'; ramps join adjacent levels and tents
    (peaking at x=1/2) cover gaps not crossed by a ramp.  With ``atomless`` no
    map is constant, so pushing an atomless trace forward creates no atoms.
    When eps >= 1 and there are no interior blocks (for example the identity
    embedding) a single full-range ramp is allowed.
    """
    if src is not None and src != ints.src or tgt is not None and tgt != ints.tgt:
        raise ValueError("algebras do not match the embedding integers")
    plan = synthesize_plan(ints, eps, atomless=atomless)
    return _maps_from_plan(plan)


def boundary_counts(pat: EigenvaluePattern) -> dict:
    """Exact n_x^y counts and interior multiplicities at x = 0 and x = 1."""
    out = {}
    for x in (0, 1):
        zero = one = 0
        inner: Counter = Counter()
        for m, c in pat.items():
            v = m(x)
            if v == 0:
                zero += c
            elif v == 1:
                one += c
            else:
                inner[v] += c
        out[x] = (zero, one, dict(inner))
    return out


def union_covers_unit_interval(pat: EigenvaluePattern) -> bool:
    intervals = sorted(m.image() for m in pat.maps)
    reach = None
    for lo, hi in intervals:
        if reach is None:
            if lo > 0:
                return False
            reach = hi
        elif lo > reach:
            return False
        else:
            reach = max(reach, hi)
    return reach is not None and reach >= 1
