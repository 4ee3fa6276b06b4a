from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimdrop.core import validate_pair
from dimdrop.elements import generator_library, modulus_of_continuity, random_pl_element, scalar_element
from dimdrop.errors import PatternsTooFar, TargetTooSmall
from dimdrop.hom import (
    compose_homs,
    corrective_unitary,
    hom_from_pattern,
    identity_hom,
    pattern_distance,
    perturb_pattern,
    synthesize_embedding,
    trace_preservation_error,
    verify_morphism,
)
from dimdrop.linalg import compress_left, compress_right
from dimdrop.measure import Measure, trace_value
from dimdrop.paths import ConstantPath, unitary_path_in_algebra
from dimdrop.pattern import PLMap, boundary_counts, variation
from dimdrop.serialize import hom_from_json
from oracles import lebesgue_trace, matrix_trace_integral

S12, S23 = validate_pair(1, 2), validate_pair(2, 3)
T79 = validate_pair(7, 9)


@pytest.fixture(scope="module")
def h79():
    return synthesize_embedding(S12, T79, 1)


def test_identity_verifies(rng):
    gens = generator_library(S23, 3, rng)
    rep = verify_morphism(identity_hom(S23), gens, grid=21)
    assert rep.passed and rep.max_defect < 1e-12


def test_synthesized_verifies(h79, rng):
    gens = generator_library(S12, 3, rng)
    rep = verify_morphism(h79, gens, grid=51)
    assert rep.passed, rep.as_dict()
    assert variation(h79.pattern) < 1


def test_non_frame_unitary_fails_boundary(h79, rng):
    broken = h79.with_unitary(ConstantPath.identity(h79.n))
    gens = generator_library(S12, 2, rng)
    rep = verify_morphism(broken, gens, grid=11)
    assert "boundary" in rep.failures


def test_too_small_target_needs_waiver():
    with pytest.raises(TargetTooSmall):
        synthesize_embedding(S23, validate_pair(7, 9), 1)
    h = synthesize_embedding(S23, validate_pair(7, 11), 1, waive_bullets=True)
    assert variation(h.pattern) < 1


@settings(max_examples=15)
@given(st.lists(st.fractions(0, 1, max_denominator=12), min_size=2, max_size=4), st.floats(0, 1))
def test_scalar_spectrum_matches_pattern(ys, s):
    """Eigenvalues of h(g 1)(s): g(t_i(s)) with multiplicity pq, g(0) ap times, g(1) bq times."""
    h = synthesize_embedding(S12, T79, 1)
    xs = [Fraction(i, len(ys) - 1) for i in range(len(ys))]
    g = PLMap(xs, ys)
    f = scalar_element(S12, g)
    mat = h.evaluate_dense(f, s)
    got = np.sort(np.linalg.eigvalsh((mat + mat.conj().T) / 2))
    p, q = S12.p, S12.q
    expect = [float(g(Fraction(0)))] * (h.a * p) + [float(g(Fraction(1)))] * (h.b * q)
    for m, c in h.pattern.items():
        expect += [float(g.to_float()(m.to_float()(s)))] * (c * p * q)
    assert np.allclose(got, np.sort(expect), atol=1e-12)


def test_boundary_membership_of_images(h79, rng):
    f = random_pl_element(S12, rng)
    _, r0 = compress_left(h79.evaluate_dense(f, 0.0), 7, 9)
    _, r1 = compress_right(h79.evaluate_dense(f, 1.0), 7, 9)
    assert max(r0, r1) < 1e-12


def test_compose_matches_nested_spectra(rng):
    first = synthesize_embedding(S12, validate_pair(3, 4), 1, waive_bullets=True)
    second = synthesize_embedding(validate_pair(3, 4), validate_pair(8, 9), 1, waive_bullets=True)
    both = compose_homs(second, first)
    f = random_pl_element(S12, rng)
    nested = second.apply(first.apply(f))
    for s in np.linspace(0, 1, 7):
        a = both.evaluate_dense(f, float(s))
        b = np.asarray(nested.at(float(s)))
        assert np.allclose(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b), atol=1e-10)
    rep = verify_morphism(both, generator_library(S12, 2, rng), grid=21)
    assert rep.passed


def test_trace_preserving_dual_route(rng):
    h = synthesize_embedding(S23, validate_pair(8, 27), 1, Measure.lebesgue(), Measure.lebesgue(), waive_bullets=True)
    lam = Measure.lebesgue()
    assert trace_preservation_error(h, lam, lam) < 1e-12
    for _ in range(3):
        f = random_pl_element(S23, rng)
        closed = float(trace_value(lam, f))
        assert abs(closed - lebesgue_trace(f)) < 1e-9
        assert abs(closed - matrix_trace_integral(h, f)) < 1e-9


def test_json_round_trip(h79, rng):
    back = hom_from_json(h79.to_json())
    f = random_pl_element(S12, rng)
    for s in (0.0, 0.3, 1.0):
        assert np.allclose(back.evaluate_dense(f, s), h79.evaluate_dense(f, s), atol=0)


@given(st.integers(0, 2**31 - 1), st.floats(0.001, 0.2))
@settings(max_examples=20)
def test_perturbation_keeps_boundary_and_is_close(seed, size):
    base = synthesize_embedding(S12, T79, 1).pattern
    pert = perturb_pattern(base, size, np.random.default_rng(seed))
    assert pert.k == base.k
    assert pattern_distance(base, pert) <= size + 1e-12
    b0, b1 = boundary_counts(base), boundary_counts(pert)
    assert {k: (v[0], v[1]) for k, v in b0.items()} == {k: (v[0], v[1]) for k, v in b1.items()}


def test_pattern_distance_brute(h79):
    base = h79.pattern
    pert = perturb_pattern(base, 0.05, np.random.default_rng(3))
    xs = np.linspace(0, 1, 4001)
    a = np.array([m.eval_array(xs) for m in base.expanded()])
    b = np.array([m.eval_array(xs) for m in pert.expanded()])
    brute = float(np.max(np.abs(a - b)))
    assert brute <= pattern_distance(base, pert) + 1e-12
    assert pattern_distance(base, pert) <= brute + 0.05 * 2 / 4000 * 50


def test_corrective_unitary_small(h79, rng):
    gens = generator_library(S12, 3, rng)
    eps = 0.25
    mod = min(modulus_of_continuity(g, eps) for g in gens)
    pert = perturb_pattern(h79.pattern, 0.5 * mod, rng)
    z = unitary_path_in_algebra(7, 9, rng, interior=1, scale=0.3)
    h2 = hom_from_pattern(S12, T79, pert, h79.a, h79.b).postcompose_inner(z)
    res = corrective_unitary(h79, h2, gens, eps, grid=51)
    assert res.defect < 5 * eps
    assert res.boundary_residual < 1e-9


def test_corrective_rejects_far_patterns(h79, rng):
    gens = generator_library(S12, 2, rng)
    far = perturb_pattern(h79.pattern, 0.4, np.random.default_rng(1))
    h2 = hom_from_pattern(S12, T79, far, h79.a, h79.b)
    with pytest.raises(PatternsTooFar):
        corrective_unitary(h79, h2, gens, 0.01)
