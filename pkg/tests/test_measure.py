from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import faithful_measures, monotone_pl_maps, pl_maps, unit_fractions
from dimdrop.core import validate_pair
from dimdrop.elements import scalar_element
from dimdrop.errors import NotMonotone, SourceNotAtomless, TargetNotFaithful
from dimdrop.measure import (
    Measure,
    cdf_distance_at_knots,
    plateaus,
    pushforward,
    pushforward_any,
    quantile_coupling,
    quantile_map,
    trace_value,
)


def _lebesgue_preimage_mass(t, y, n=20001):
    """Lebesgue measure of {x : t(x) <= y} on a fine grid."""
    xs = np.linspace(0, 1, n)
    return float(np.mean(t.eval_array(xs) <= float(y) + 1e-15))


@given(faithful_measures())
def test_quantile_coupling_pushes_lebesgue_to_target(tau):
    beta = quantile_coupling(Measure.lebesgue(), tau)
    assert beta.is_nondecreasing()
    assert beta(0) == 0 and beta(1) == 1
    pushed = pushforward(Measure.lebesgue(), beta)
    assert cdf_distance_at_knots(pushed, tau) == 0.0


@given(faithful_measures())
def test_plateaus_are_atoms(tau):
    beta = quantile_coupling(Measure.lebesgue(), tau)
    flats = plateaus(beta)
    assert sorted(beta(lo) for lo, _ in flats) == sorted(loc for loc, _ in tau.atoms)
    for (lo, hi), (_, mass) in zip(sorted(flats, key=lambda f: beta(f[0])), tau.atoms):
        assert hi - lo == mass


@given(pl_maps(), unit_fractions(24))
def test_pushforward_cdf_matches_sampling(t, y):
    mu = pushforward_any(Measure.lebesgue(), t)
    assert abs(float(mu.total_mass) - 1) < 1e-12
    assert abs(float(mu.cdf(y)) - _lebesgue_preimage_mass(t, y)) <= 2e-4 + 1e-12


@given(faithful_measures(), st.lists(unit_fractions(24), min_size=2, max_size=5))
def test_trace_of_scalar_matches_riemann_sum(mu, ys):
    xs = [Fraction(i, len(ys) - 1) for i in range(len(ys))]
    from dimdrop.pattern import PLMap

    g = PLMap(xs, ys)
    f = scalar_element(validate_pair(2, 3), g)
    exact = float(trace_value(mu, f))
    # Riemann-Stieltjes sum against the CDF on a fine grid plus atoms
    grid = np.linspace(0, 1, 20001)
    cdf = np.array([float(mu.continuous_cdf(Fraction(x).limit_denominator(10**9))) for x in grid[::100]])
    gx = np.array([float(g(Fraction(x).limit_denominator(10**9))) for x in grid[::100]])
    mid = (gx[1:] + gx[:-1]) / 2
    approx = float(np.sum(mid * np.diff(cdf))) + sum(float(m) * float(g(loc)) for loc, m in mu.atoms)
    assert abs(exact - approx) < 5e-3


def test_quantile_rejects_unfaithful_target():
    flat = Measure((), (0, Fraction(1, 2), 1), (0, 1, 1))
    with pytest.raises(TargetNotFaithful):
        quantile_map(flat)


def test_coupling_rejects_atomic_source():
    with pytest.raises(SourceNotAtomless):
        quantile_coupling(Measure.mixture([(Fraction(1, 2), Measure.dirac(0)), (Fraction(1, 2), Measure.lebesgue())]), Measure.lebesgue())


@given(pl_maps())
def test_pushforward_requires_monotone(t):
    if t.is_nondecreasing():
        pushforward(Measure.lebesgue(), t)
    else:
        with pytest.raises(NotMonotone):
            pushforward(Measure.lebesgue(), t)


@given(faithful_measures())
def test_measure_json_round_trip(mu):
    assert Measure.from_json(mu.to_json()) == mu


@given(monotone_pl_maps())
def test_pushforward_of_monotone_map_total_mass(t):
    mu = pushforward(Measure.lebesgue(), t)
    assert mu.total_mass == 1
    for lo, hi in plateaus(t):
        assert any(loc == t(lo) and m >= hi - lo for loc, m in mu.atoms)
