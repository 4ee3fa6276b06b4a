import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimdrop.core import validate_pair
from dimdrop.elements import generator_library, scalar_element
from dimdrop.errors import EmptySubset, MiddleMismatch
from dimdrop.fraisse import (
    JointEmbedding,
    SearchBudget,
    compose_apx,
    dk_upper,
    extend_trivial,
    from_matrices,
    phi_from_pair,
    strictness_witness,
    totality_defect,
    with_margin,
)
from dimdrop.hom import identity_hom
from dimdrop.intertwine import inner_hom
from dimdrop.measure import Measure
from dimdrop.paths import unitary_path_in_algebra
from dimdrop.pattern import PLMap
from oracles import brute_katetov

S23 = validate_pair(2, 3)


def _dists(x, y):
    return np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1)


@st.composite
def euclidean_instances(draw, max_pts=5):
    """phi(a, b) = |x_a - y_b| + c on random points: always bi-Katetov."""
    na, nb = draw(st.integers(1, max_pts)), draw(st.integers(1, max_pts))
    seed = draw(st.integers(0, 2**31 - 1))
    c = draw(st.floats(0, 2))
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(na, 2)), rng.normal(size=(nb, 2))
    return from_matrices(_dists(x, x), _dists(y, y), _dists(x, y) + c)


def _brute_extension(da, db, phi, A0, B0):
    out = np.full((da.shape[0], db.shape[0]), np.inf)
    for i in range(da.shape[0]):
        for j in range(db.shape[0]):
            for a in A0:
                for b in B0:
                    out[i, j] = min(out[i, j], da[i, a] + phi[a, b] + db[b, j])
    return out


@given(euclidean_instances())
def test_euclidean_instances_are_bikatetov(phi):
    assert phi.is_bikatetov()
    assert np.array_equal(phi.violations(), brute_katetov(phi.da, phi.db, phi.values))


@given(euclidean_instances(), st.data())
def test_trivial_extension_restricts_and_dominates(phi, data):
    na, nb = phi.values.shape
    A0 = sorted(set(data.draw(st.lists(st.integers(0, na - 1), min_size=1, max_size=na))))
    B0 = sorted(set(data.draw(st.lists(st.integers(0, nb - 1), min_size=1, max_size=nb))))
    base = phi.restrict(A0, B0)
    rest = [i for i in range(na) if i not in A0]
    cols = [j for j in range(nb) if j not in B0]
    ext = extend_trivial(base, rest, cols)
    order_a, order_b = A0 + rest, B0 + cols
    assert np.allclose(ext.values[: len(A0), : len(B0)], phi.values[np.ix_(A0, B0)], atol=1e-12)
    assert ext.is_bikatetov(1e-9)
    brute = _brute_extension(phi.da, phi.db, phi.values, A0, B0)[np.ix_(order_a, order_b)]
    assert np.allclose(ext.values, brute, atol=1e-12)
    # maximality: the original map agrees on A0 x B0, so it lies below the extension
    assert np.all(phi.values[np.ix_(order_a, order_b)] <= ext.values + 1e-12)


@given(euclidean_instances(), st.floats(0, 1))
def test_compose_is_monotone_and_matches_loops(phi, bump):
    nb = phi.values.shape[1]
    rng = np.random.default_rng(nb)
    z = rng.normal(size=(3, 2))
    psi = from_matrices(phi.db, _dists(z, z), rng.uniform(0, 2, size=(nb, 3)))
    comp = compose_apx(phi, psi)
    brute = np.min(phi.values[:, :, None] + psi.values[None, :, :], axis=1)
    assert np.array_equal(comp.values, brute)
    bigger = from_matrices(phi.da, phi.db, phi.values + bump)
    assert np.all(compose_apx(bigger, psi).values >= comp.values)


def test_middle_mismatch():
    a = from_matrices(np.zeros((1, 1)), np.zeros((2, 2)), np.zeros((1, 2)))
    b = from_matrices(np.zeros((3, 3)), np.zeros((1, 1)), np.zeros((3, 1)))
    with pytest.raises(MiddleMismatch):
        compose_apx(a, b)


def test_totality_defect():
    phi = from_matrices(np.array([[0, 1], [1, 0]]), np.zeros((2, 2)), np.array([[0.5, 0.2], [0.7, 0.9]]))
    assert totality_defect(phi) == 0.7
    assert totality_defect(phi, [0]) == 0.2
    with pytest.raises(EmptySubset):
        totality_defect(phi, [])


@given(euclidean_instances(), st.floats(0.01, 1))
def test_margin_gives_witness(phi, margin):
    strict = with_margin(phi, [0], [0], margin)
    psi, A0, B0, eps = strictness_witness(strict, min_margin=1e-6)
    assert (A0, B0) == ([0], [0]) and eps == margin
    assert np.all(strict.values >= phi.values[0, 0] - 1e-12)
    assert strictness_witness(phi) is None


def test_margin_below_minimum_is_refused():
    phi = from_matrices(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    strict = with_margin(phi, [0], [0], 1e-9)
    assert strictness_witness(strict, min_margin=1e-3) is None
    assert strict.notes
    with pytest.raises(EmptySubset):
        with_margin(phi, [], [0], 0.1)


def test_phi_from_identity_pair(rng):
    gens = generator_library(S23, 3, rng)
    ident = identity_hom(S23)
    phi = phi_from_pair(JointEmbedding(ident, ident, S23, Measure.lebesgue()), gens, gens, grid=21)
    assert np.allclose(np.diag(phi.values), 0)
    assert np.allclose(phi.values, phi.da, atol=1e-12)
    assert phi.is_bikatetov(1e-12)


def _budget():
    return SearchBudget(max_size=60, max_candidates=3, grid=21)


def test_dk_same_tuple_is_zero(rng):
    gens = generator_library(S23, 2, rng)
    res = dk_upper((S23, Measure.lebesgue(), gens), (S23, Measure.lebesgue(), gens), _budget())
    assert res.bound == 0.0


def test_dk_conjugated_tuple_is_aligned(rng):
    gens = generator_library(S23, 2, rng)
    z = unitary_path_in_algebra(2, 3, rng, interior=1, scale=0.5)
    ad = inner_hom(S23, z)
    moved = [ad.apply(g) for g in gens]
    res = dk_upper((S23, Measure.lebesgue(), gens), (S23, Measure.lebesgue(), moved), _budget())
    assert res.bound < 1e-9
    assert res.certified_upper >= res.bound


def test_dk_scalar_tuple_matches_sup_distance():
    f = scalar_element(S23, PLMap([0, 1], [0, 1]))
    g = scalar_element(S23, PLMap([0, 1], [0, 0.5]))
    res = dk_upper((S23, Measure.lebesgue(), [f]), (S23, Measure.lebesgue(), [g]), _budget())
    ident = [c for c in res.candidates if c.get("candidate") == "identity"][0]
    assert ident["bound"] == pytest.approx(0.5, abs=1e-12)
    assert res.bound <= 0.5 + 1e-12
