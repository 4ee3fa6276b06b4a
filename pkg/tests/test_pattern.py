from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import coprime_pairs, patterns, pl_maps, unit_fractions
from dimdrop.core import derive_embedding_integers, minimum_target_bound, validate_pair
from dimdrop.errors import EmptyPattern, EmptySet, NotNormalized
from dimdrop.pattern import (
    EigenvaluePattern,
    PatternMorphism,
    PLMap,
    boundary_counts,
    census,
    compose,
    dedupe,
    hausdorff_gap,
    is_sorted,
    normalize,
    sorted_census,
    synthesize,
    union_covers_unit_interval,
    variation,
)
from oracles import brute_census, brute_hausdorff_gap, sampled_values


def _knot_union(pat):
    xs = set()
    for m in pat.maps:
        xs.update(m.xs)
    return sorted(xs)


# ---------------------------------------------------------------------------
# PL maps


@given(pl_maps(), pl_maps(), unit_fractions(48))
def test_compose_pointwise(f, g, x):
    assert f.compose(g)(x) == f(g(x))


@given(pl_maps(), unit_fractions(24))
def test_preimage_is_exact(f, y):
    for lo, hi in f.preimage(y):
        assert f(lo) == y and f(hi) == y
        assert f((lo + hi) / 2) == y
    # every knot with value y is covered
    for x, v in zip(f.xs, f.ys):
        if v == y:
            assert any(lo <= x <= hi for lo, hi in f.preimage(y))


@given(pl_maps(), pl_maps())
def test_sup_distance_matches_dense_sampling(f, g):
    grid = np.linspace(0, 1, 2001)
    sampled = float(np.max(np.abs(f.eval_array(grid) - g.eval_array(grid))))
    d = f.sup_distance(g)
    assert isinstance(d, Fraction)
    assert sampled <= float(d) + 1e-12
    assert float(d) <= sampled + 1e-9 + float(f.lipschitz() + g.lipschitz()) / 2000


@given(pl_maps())
def test_json_round_trip(f):
    assert PLMap.from_json(f.to_json()) == f


# ---------------------------------------------------------------------------
# normalization and variation


@given(patterns(), unit_fractions(96))
def test_normalize_preserves_value_multisets(pat, x):
    norm = normalize(pat)
    assert norm.normalized and is_sorted(norm.maps)
    assert norm.k == pat.k
    assert sampled_values(norm.items(), x) == sampled_values(pat.items(), x)


@given(patterns())
def test_normalize_idempotent_and_variation_shrinks(pat):
    norm = normalize(pat)
    again = normalize(norm)
    assert [m for m, _ in again.items()] == [m for m, _ in norm.items()]
    assert variation(norm) <= variation(pat)


@given(patterns())
def test_variation_matches_sorted_rows_at_knots(pat):
    norm = normalize(pat)
    xs = _knot_union(norm)
    cols = [sampled_values(pat.items(), x) for x in xs]
    rows = list(zip(*cols))
    brute = max(max(r) - min(r) for r in rows)
    assert variation(norm) == brute


def test_variation_of_empty_pattern():
    with pytest.raises(EmptyPattern):
        variation(EigenvaluePattern((), ()))


def test_normalized_flag_is_checked():
    with pytest.raises(NotNormalized):
        EigenvaluePattern((PLMap.constant(1), PLMap.constant(0)), (1, 1), True)


# ---------------------------------------------------------------------------
# census


@given(patterns(max_maps=4), unit_fractions(12), st.sampled_from([Fraction(1, 12), Fraction(1, 6), Fraction(1, 4)]))
def test_sorted_census_dual_routes(pat, y, eps):
    norm = normalize(pat)
    direct = census(norm, y, eps)
    swept = sorted_census(pat, y, eps)
    assert (direct.a_count, direct.b_count, direct.c_count) == (swept.a_count, swept.b_count, swept.c_count)
    assert (swept.a_count, swept.b_count, swept.c_count) == brute_census(pat, y, eps, _knot_union(norm))


def test_census_needs_normalized():
    with pytest.raises(NotNormalized):
        census(EigenvaluePattern((PLMap.identity(),), (1,)), Fraction(1, 2), Fraction(1, 4))


# ---------------------------------------------------------------------------
# Hausdorff gap


@given(st.lists(unit_fractions(50), min_size=1, max_size=12))
def test_hausdorff_gap_matches_grid(values):
    gap = hausdorff_gap(values)
    brute, res = brute_hausdorff_gap(values)
    assert abs(float(gap) - brute) <= res


def test_hausdorff_gap_examples():
    assert hausdorff_gap([Fraction(1, 2)]) == Fraction(1, 2)
    assert hausdorff_gap([0, 1]) == Fraction(1, 2)
    assert hausdorff_gap([Fraction(i, 10) for i in range(11)]) == Fraction(1, 20)
    with pytest.raises(EmptySet):
        hausdorff_gap([])


# ---------------------------------------------------------------------------
# composition


@given(patterns(max_maps=3, max_mult=2), patterns(max_maps=3, max_mult=2), unit_fractions(48))
def test_compose_values_are_composites(p1, p2, x):
    # pattern-level composite with no remainder blocks: src Z_{1,1}
    one = validate_pair(1, 1)
    mid = validate_pair(1, p1.k)
    tgt = validate_pair(1, p1.k * p2.k)
    first = PatternMorphism(one, mid, p1, 0, 0)
    second = PatternMorphism(mid, tgt, p2, 0, 0)
    comp = compose(first, second)
    assert comp.pattern.k == p1.k * p2.k
    expected = sorted(t(s(x)) for s, cs in p2.items() for t, ct in p1.items() for _ in range(cs * ct))
    assert sampled_values(comp.pattern.items(), x) == expected


@given(patterns())
def test_dedupe_keeps_multiset(pat):
    d = dedupe(pat)
    assert d.k == pat.k
    assert len(set(d.maps)) == d.distinct
    for x in (Fraction(0), Fraction(1, 3), Fraction(1)):
        assert sampled_values(d.items(), x) == sampled_values(pat.items(), x)


# ---------------------------------------------------------------------------
# synthesis


@given(coprime_pairs(6), st.sampled_from([1, Fraction(1, 2), Fraction(1, 3)]), st.integers(1, 12), st.data())
def test_synthesized_pattern_meets_integers(src, eps, extra, data):
    m = minimum_target_bound(src, eps)
    pp = m + extra
    qq = data.draw(st.integers(pp + 1, pp + 15).filter(lambda v: np.gcd(pp, v) == 1))
    tgt = validate_pair(pp, qq)
    ints = derive_embedding_integers(src, tgt, eps)
    pat = synthesize(ints, src, tgt, eps)
    assert pat.k == ints.k
    assert variation(pat) < Fraction(eps)
    assert union_covers_unit_interval(pat)
    counts = boundary_counts(pat)
    z0, o0, inner0 = counts[0]
    z1, o1, inner1 = counts[1]
    assert (z0, o0, z1, o1) == (ints.n00, ints.n01, ints.n10, ints.n11)
    # interior boundary values come in blocks of q' at 0 and p' at 1
    assert all(c % tgt.q == 0 for c in inner0.values())
    assert all(c % tgt.p == 0 for c in inner1.values())
