import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from dimdrop.linalg import hermitian_norm_blockwise


@st.composite
def block_hermitian(draw):
    """Hermitian matrix made of random blocks, shuffled, plus optional tiny couplings."""
    seed = draw(st.integers(0, 2**31 - 1))
    sizes = draw(st.lists(st.integers(1, 5), min_size=1, max_size=6))
    coupling = draw(st.sampled_from([0.0, 1e-17, 1e-3]))
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    x = np.zeros((n, n), dtype=complex)
    at = 0
    for k in sizes:
        b = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        x[at : at + k, at : at + k] = b + b.conj().T
        at += k
    noise = rng.normal(size=(n, n)) * coupling
    x = x + noise + noise.T
    perm = rng.permutation(n)
    return x[np.ix_(perm, perm)]


@given(block_hermitian())
def test_blockwise_norm_bounds_exact_norm(x):
    exact = float(np.max(np.abs(np.linalg.eigvalsh(x))))
    got = hermitian_norm_blockwise(x)
    assert got >= exact - 1e-12
    assert got <= exact + 1e-12 * max(1.0, exact)


def test_blockwise_norm_of_zero_and_empty():
    assert hermitian_norm_blockwise(np.zeros((3, 3))) == 0.0
    assert hermitian_norm_blockwise(np.zeros((0, 0))) == 0.0
