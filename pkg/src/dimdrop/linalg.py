"""Small linear-algebra helpers: tensor-factor compressions, unitary logarithms, norms."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


def is_sparse(x) -> bool:
    return sp.issparse(x)


def dense(x) -> np.ndarray:
    return x.toarray() if sp.issparse(x) else np.asarray(x)


def adjoint(x):
    return x.conj().T


def compress_left(x: np.ndarray, p: int, q: int) -> tuple[np.ndarray, float]:
    """Best approximation c (x) 1_q of x; returns (c, Frobenius residual)."""
    if sp.issparse(x):
        return _compress_sparse(x, p, q, left=True)
    t = np.asarray(x).reshape(p, q, p, q)
    c = np.einsum("ikjk->ij", t) / q
    resid = np.linalg.norm(t - c[:, None, :, None] * np.eye(q)[None, :, None, :])
    return c, float(resid)


def compress_right(x: np.ndarray, p: int, q: int) -> tuple[np.ndarray, float]:
    """Best approximation 1_p (x) c of x; returns (c, Frobenius residual)."""
    if sp.issparse(x):
        return _compress_sparse(x, p, q, left=False)
    t = np.asarray(x).reshape(p, q, p, q)
    c = np.einsum("ikil->kl", t) / p
    resid = np.linalg.norm(t - np.eye(p)[:, None, :, None] * c[None, :, None, :])
    return c, float(resid)


def _compress_sparse(x, p: int, q: int, left: bool) -> tuple[np.ndarray, float]:
    coo = x.tocoo()
    coo.sum_duplicates()
    r, c, v = coo.row, coo.col, coo.data
    if left:
        keep_r, keep_c, copy_r, copy_c, size, copies = r // q, c // q, r % q, c % q, p, q
    else:
        keep_r, keep_c, copy_r, copy_c, size, copies = r % q, c % q, r // q, c // q, q, p
    diag = copy_r == copy_c
    cmat = np.zeros((size, size), dtype=complex)
    np.add.at(cmat, (keep_r[diag], keep_c[diag]), v[diag])
    cmat /= copies
    off = np.sum(np.abs(v[~diag]) ** 2)
    on = np.sum(np.abs(v[diag] - cmat[keep_r[diag], keep_c[diag]]) ** 2)
    present = np.zeros((size, size), dtype=np.int64)
    np.add.at(present, (keep_r[diag], keep_c[diag]), 1)
    missing = np.sum((copies - present) * np.abs(cmat) ** 2)
    return cmat, float(np.sqrt(off + on + missing))


def unitarity_defect(u) -> float:
    """Frobenius norm of u*u - 1 (an upper bound for the operator norm)."""
    if sp.issparse(u):
        d = (u.conj().T @ u) - sp.identity(u.shape[0], dtype=complex, format="csr")
        return float(sp.linalg.norm(d)) if d.nnz else 0.0
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def norm_bound(x) -> float:
    """Cheap certified upper bound for the operator norm (Frobenius)."""
    if sp.issparse(x):
        if not x.nnz:
            return 0.0
        if x.format == "csr" and not x.has_canonical_format:
            # duplicates would understate the norm; summing them does not need sorting
            x = sp.csr_matrix(x.tocoo(), copy=False)
            x.sum_duplicates()
        return float(np.linalg.norm(x.data))
    return float(np.linalg.norm(x))


def opnorm(x, hermitian: bool = False) -> float:
    """Operator norm; exact for dense input, Frobenius upper bound for sparse input."""
    if sp.issparse(x):
        return norm_bound(x)
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    if hermitian:
        w = np.linalg.eigvalsh((x + x.conj().T) / 2)
        return float(max(abs(w[0]), abs(w[-1])))
    return float(np.linalg.norm(x, 2))


def hermitian_norm_blockwise(x, tol: float = 1e-14) -> float:
    """Upper bound for the operator norm of a hermitian matrix, tight up to ``tol``-sized couplings.

    Entries below tol * max|x| are dropped and their Frobenius norm is added
    back; the rest splits into connected components whose norms are computed
    exactly.  Block-diagonal differences of normal forms cost a few small
    eigenvalue problems instead of one large one.
    """
    from scipy.sparse.csgraph import connected_components

    x = dense(x)
    if x.size == 0:
        return 0.0
    mag = np.abs(x)
    top = float(mag.max())
    if top == 0.0:
        return 0.0
    keep = mag > tol * top
    dropped = float(np.sqrt(np.sum(mag[~keep] ** 2)))
    count, labels = connected_components(sp.csr_matrix(keep), directed=False)
    if count == 1:
        return opnorm(x, hermitian=True)
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    best = 0.0
    for idx in np.split(order, bounds):
        blk = x[np.ix_(idx, idx)]
        if len(idx) == 1:
            best = max(best, abs(blk[0, 0]))
        else:
            w = np.linalg.eigvalsh((blk + blk.conj().T) / 2)
            best = max(best, abs(w[0]), abs(w[-1]))
    return float(best) + dropped


def unitary_eig(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition u = Z diag(exp(i*theta)) Z* via the complex Schur form.

    Angles lie in (-pi, pi]; an eigenvalue within 1e-12 of -1 is rotated to
    angle pi - 1e-6 so that consecutive logarithms stay on one branch.
    """
    t, z = sla.schur(np.asarray(u, dtype=complex), output="complex")
    theta = np.angle(np.diag(t))
    near = np.abs(np.abs(theta) - np.pi) < 1e-12
    theta = np.where(near, np.pi - 1e-6, theta)
    return z, theta


def unitary_log(u: np.ndarray) -> np.ndarray:
    """Hermitian h with u = exp(i h) and spectrum in (-pi, pi]."""
    z, theta = unitary_eig(u)
    h = (z * theta) @ z.conj().T
    return (h + h.conj().T) / 2


def unitary_power(z: np.ndarray, theta: np.ndarray, t: float) -> np.ndarray:
    return (z * np.exp(1j * t * theta)) @ z.conj().T


def polar_unitary(x: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition (closest unitary in Frobenius norm)."""
    u, _, vh = np.linalg.svd(x)
    return u @ vh


def block_diag_dense(blocks) -> np.ndarray:
    return sla.block_diag(*blocks) if blocks else np.zeros((0, 0), dtype=complex)


def permutation_matrix(perm: np.ndarray, sparse: bool = True):
    """Matrix M with M e_j = e_{perm[j]}."""
    n = len(perm)
    m = sp.csr_matrix((np.ones(n, dtype=complex), (np.asarray(perm), np.arange(n))), shape=(n, n))
    return m if sparse else m.toarray()
