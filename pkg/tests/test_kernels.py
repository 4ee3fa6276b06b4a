import os
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import pl_maps
from dimdrop import _kernels
from oracles import brute_katetov, brute_minplus

finite = st.floats(0, 10, allow_nan=False, allow_infinity=False)


@contextmanager
def _backend(flag):
    old = os.environ.get("DDROP_NUMBA")
    os.environ["DDROP_NUMBA"] = flag
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("DDROP_NUMBA", None)
        else:
            os.environ["DDROP_NUMBA"] = old


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    if request.param == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setenv("DDROP_NUMBA", "1" if request.param == "numba" else "0")
    assert _kernels.backend() == request.param
    return request.param


@st.composite
def matrix_pair(draw):
    n, m, l = draw(st.integers(1, 5)), draw(st.integers(1, 5)), draw(st.integers(1, 5))
    a = draw(hnp.arrays(float, (n, m), elements=finite))
    b = draw(hnp.arrays(float, (m, l), elements=finite))
    return a, b


@given(matrix_pair())
def test_minplus_both_backends_match_loops(pair):
    a, b = pair
    ref = brute_minplus(a, b)
    for flag in ("1", "0"):
        with _backend(flag):
            assert np.array_equal(_kernels.minplus(a, b), ref)


def test_minplus_with_infinity(backend):
    a = np.array([[0.0, np.inf], [np.inf, 1.0]])
    b = np.array([[2.0], [3.0]])
    assert np.array_equal(_kernels.minplus(a, b), [[2.0], [4.0]])


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_katetov_backends_match_loops(na, nb, data):
    da = data.draw(hnp.arrays(float, (na, na), elements=finite))
    db = data.draw(hnp.arrays(float, (nb, nb), elements=finite))
    phi = data.draw(hnp.arrays(float, (na, nb), elements=finite))
    ref = brute_katetov(da, db, phi)
    for flag in ("1", "0"):
        with _backend(flag):
            assert np.allclose(_kernels.katetov_violations(da, db, phi), ref, atol=1e-12, rtol=0)


@given(st.lists(pl_maps(), min_size=1, max_size=6), st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_pl_eval_backends(maps, pts):
    pts = np.sort(np.asarray(pts))
    xs, ys, off = _kernels.pack_maps(maps)
    ref = np.array([m.eval_array(pts) for m in maps])
    for flag in ("1", "0"):
        with _backend(flag):
            assert np.allclose(_kernels.pl_eval_batch(xs, ys, off, pts), ref, atol=1e-15)


def test_pl_eval_rejects_unsorted(backend):
    xs, ys, off = _kernels.pack_maps([])
    with pytest.raises(ValueError):
        _kernels.pl_eval_batch(xs, ys, off, np.array([0.5, 0.1]))


@given(hnp.arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(0, 1)))
def test_gap_columns_backends(vals):
    from dimdrop.pattern import hausdorff_gap

    ref = np.array([float(hausdorff_gap(vals[:, j].tolist())) for j in range(vals.shape[1])])
    for flag in ("1", "0"):
        with _backend(flag):
            assert np.allclose(_kernels.hausdorff_gap_columns(vals), ref, atol=1e-15)
