import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from dimdrop.core import validate_pair  # noqa: E402
from dimdrop.measure import Measure  # noqa: E402
from dimdrop.pattern import EigenvaluePattern, PLMap  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# ---------------------------------------------------------------------------
# strategies


@st.composite
def coprime_pairs(draw, max_value=20):
    p = draw(st.integers(1, max_value))
    q = draw(st.integers(1, max_value).filter(lambda v: math.gcd(p, v) == 1))
    return validate_pair(p, q)


@st.composite
def unit_fractions(draw, denom=24):
    """Exact points of [0, 1] on a fixed lattice."""
    return Fraction(draw(st.integers(0, denom)), denom)


@st.composite
def pl_maps(draw, max_knots=5, denom=24):
    """Exact PL self-map of [0, 1] with strictly increasing lattice knots."""
    inner = draw(st.lists(st.integers(1, denom - 1), max_size=max_knots - 2, unique=True))
    xs = [Fraction(0)] + [Fraction(v, denom) for v in sorted(inner)] + [Fraction(1)]
    ys = [draw(unit_fractions(denom)) for _ in xs]
    return PLMap(xs, ys)


@st.composite
def monotone_pl_maps(draw, max_knots=5, denom=24):
    m = draw(pl_maps(max_knots, denom))
    ys = sorted(m.ys)
    return PLMap(m.xs, ys)


@st.composite
def patterns(draw, max_maps=5, max_mult=3):
    maps = draw(st.lists(pl_maps(), min_size=1, max_size=max_maps))
    mult = [draw(st.integers(1, max_mult)) for _ in maps]
    return EigenvaluePattern(tuple(maps), tuple(mult))


@st.composite
def faithful_measures(draw, denom=24, allow_atoms=True):
    """Strictly increasing PL continuous part plus optional atoms."""
    cuts = sorted(set(draw(st.lists(st.integers(1, denom - 1), max_size=4))))
    xs = [Fraction(0)] + [Fraction(c, denom) for c in cuts] + [Fraction(1)]
    weights = [draw(st.integers(1, 6)) for _ in range(len(xs) - 1)]
    atoms = []
    if allow_atoms and draw(st.booleans()):
        loc = draw(unit_fractions(denom))
        atoms = [(loc, Fraction(draw(st.integers(1, 3)), 8))]
    cont = 1 - sum((m for _, m in atoms), Fraction(0))
    total = sum(weights)
    fs = [Fraction(0)]
    for w in weights:
        fs.append(fs[-1] + cont * Fraction(w, total))
    return Measure(tuple(atoms), tuple(xs), tuple(fs))


@st.composite
def finite_metric(draw, n, dim=2):
    """Euclidean distances of n random lattice points (a genuine metric)."""
    pts = np.array([[draw(st.integers(-6, 6)) for _ in range(dim)] for _ in range(n)], dtype=float)
    return np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)), pts


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_system():
    from dimdrop.regularity import standard_system

    return standard_system(validate_pair(1, 1), 3, [Fraction(1, 2)] * 2, growth="minimal")


@pytest.fixture(scope="session")
def power_system():
    from dimdrop.regularity import standard_system

    sched = [Fraction(1), Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    return standard_system(validate_pair(2, 3), 5, sched, growth="power")
