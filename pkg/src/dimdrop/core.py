"""Prime dimension drop algebras and the integer arithmetic of their embeddings.

Z_{p,q} is the algebra of continuous maps f: [0,1] -> M_p (x) M_q with
f(0) in M_p (x) 1_q and f(1) in 1_p (x) M_q.  A unital embedding
Z_{p,q} -> Z_{p',q'} in normal form has a copies of the compression of f(0),
k full evaluations f(t_i(s)) and b copies of the compression of f(1); the
sizes force p*a + p*q*k + q*b = p'*q'.  Everything here is exact integer
arithmetic on Python ints (no overflow).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .errors import NoSolution, NonPositive, NotCoprime

Real = Union[int, float, Fraction]


@dataclass(frozen=True, order=True)
class DimensionDropAlgebra:
    """Handle for the prime dimension drop algebra Z_{p,q}."""

    p: int
    q: int

    def __post_init__(self) -> None:
        if not (isinstance(self.p, int) and isinstance(self.q, int)):
            raise TypeError("p and q must be integers")
        if self.p < 1 or self.q < 1:
            raise NonPositive(f"p and q must be positive, got ({self.p}, {self.q})")
        if math.gcd(self.p, self.q) != 1:
            raise NotCoprime(self.p, self.q)

    @property
    def matrix_size(self) -> int:
        return self.p * self.q

    def __str__(self) -> str:
        return f"Z_{{{self.p},{self.q}}}"

    def as_list(self) -> list[int]:
        return [self.p, self.q]

    @classmethod
    def from_list(cls, data) -> "DimensionDropAlgebra":
        """Inverse of :meth:`as_list`; accepts integers written as strings."""
        p, q = data
        return cls(int(p), int(q))


def validate_pair(p: int, q: int) -> DimensionDropAlgebra:
    """Return the algebra handle for (p, q), rejecting non-prime pairs."""
    return DimensionDropAlgebra(int(p), int(q))


def _inverse_mod(x: int, m: int) -> int:
    if m == 1:
        return 0
    return pow(x % m, -1, m)


def remainder_indices(src: DimensionDropAlgebra, tgt: DimensionDropAlgebra) -> Optional[tuple[int, int]]:
    """Unique (a, b) with 0 <= a < q, 0 <= b < p and p*a + q*b = p'q' (mod pq).

    Coprimality of (p, q) makes the congruence always solvable: reducing mod q
    forces a = p'q' * p^{-1} (mod q) and reducing mod p forces b likewise.
    ``None`` is kept in the signature for non-prime callers but never returned
    for valid handles.
    """
    p, q = src.p, src.q
    n = tgt.p * tgt.q
    a = (n * _inverse_mod(p, q)) % q if q > 1 else 0
    b = (n * _inverse_mod(q, p)) % p if p > 1 else 0
    if (p * a + q * b - n) % (p * q) != 0:  # pragma: no cover - impossible for coprime p, q
        return None
    return a, b


def minimum_target_bound(src: DimensionDropAlgebra, eps: Real) -> int:
    """M = ceil(pq (1/eps + 2)); targets with min(p', q') > M satisfy every bullet."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    value = src.p * src.q * (1 / as_fraction(eps) + 2)
    return math.ceil(value)


@dataclass(frozen=True)
class EmbeddingIntegers:
    """Integers governing a normal-form embedding src -> tgt.

    ``n_xy`` counts maps with t_i(x) = y.  ``g0`` and ``g1`` are the numbers of
    interior value groups at s = 0 (groups of q') and s = 1 (groups of p').
    """

    src: DimensionDropAlgebra
    tgt: DimensionDropAlgebra
    eps: Fraction
    a: int
    b: int
    k: int
    l0: int
    m0: int
    l1: int
    m1: int
    n00: int
    n01: int
    n10: int
    n11: int
    bound: int

    @property
    def above_bound(self) -> bool:
        return min(self.tgt.p, self.tgt.q) > self.bound

    @property
    def g0(self) -> Fraction:
        return Fraction(self.k - self.n00 - self.n01, self.tgt.q)

    @property
    def g1(self) -> Fraction:
        return Fraction(self.k - self.n10 - self.n11, self.tgt.p)

    def bullet_report(self) -> dict[str, bool]:
        """Truth value of each bullet claim, computed whether or not it is guaranteed."""
        inv_eps = 1 / self.eps
        return {
            "n00+n01<k": self.n00 + self.n01 < self.k,
            "n10+n11<k": self.n10 + self.n11 < self.k,
            "q' | k-n00-n01": (self.k - self.n00 - self.n01) % self.tgt.q == 0,
            "p' | k-n10-n11": (self.k - self.n10 - self.n11) % self.tgt.p == 0,
            "quotient0>1/eps": self.g0 > inv_eps,
            "quotient1>1/eps": self.g1 > inv_eps,
        }

    @property
    def bullets_hold(self) -> bool:
        return all(self.bullet_report().values())

    def check_identities(self) -> None:
        """Assert the exact size identity and the four boundary congruences."""
        p, q, pp, qq = self.src.p, self.src.q, self.tgt.p, self.tgt.q
        assert p * self.a + p * q * self.k + q * self.b == pp * qq
        assert (self.a + q * self.n00) % qq == 0
        assert (self.b + p * self.n01) % qq == 0
        assert (self.a + q * self.n10) % pp == 0
        assert (self.b + p * self.n11) % pp == 0

    def as_dict(self) -> dict:
        return {
            "src": self.src.as_list(),
            "tgt": self.tgt.as_list(),
            "eps": str(self.eps),
            "a": self.a,
            "b": self.b,
            "k": self.k,
            "l0": self.l0,
            "m0": self.m0,
            "l1": self.l1,
            "m1": self.m1,
            "n00": self.n00,
            "n01": self.n01,
            "n10": self.n10,
            "n11": self.n11,
            "M": self.bound,
            "above_bound": self.above_bound,
            "bullets": self.bullet_report(),
        }


def as_fraction(x: Real) -> Fraction:
    """Exact conversion; floats are snapped to the nearest fraction with denominator <= 1e12."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def derive_embedding_integers(src: DimensionDropAlgebra, tgt: DimensionDropAlgebra, eps: Real) -> EmbeddingIntegers:
    """Solve for (a, b, k), the residues l^y, m^y and the boundary counts n_x^y.

    The residues are the least non-negative solutions of
    p l0 = p' (mod q), p m0 = q' (mod q), q l1 = p' (mod p), q m1 = q' (mod p),
    and n00 = (q' l0 - a)/q, n01 = (q' l1 - b)/p, n10 = (p' m0 - a)/q,
    n11 = (p' m1 - b)/p.  Bullet claims are evaluated but only guaranteed when
    min(p', q') exceeds the bound M; below it they are reported, not enforced.
    """
    ab = remainder_indices(src, tgt)
    if ab is None:  # pragma: no cover
        raise NoSolution("remainder congruence has no solution")
    a, b = ab
    p, q, pp, qq = src.p, src.q, tgt.p, tgt.q
    rest = pp * qq - p * a - q * b
    if rest < 0:
        raise NoSolution(f"p'q' = {pp * qq} is smaller than pa + qb = {p * a + q * b}")
    k, r = divmod(rest, p * q)
    if r:  # pragma: no cover - excluded by the congruence
        raise NoSolution("size identity is not divisible by pq")
    l0 = (pp * _inverse_mod(p, q)) % q if q > 1 else 0
    m0 = (qq * _inverse_mod(p, q)) % q if q > 1 else 0
    l1 = (pp * _inverse_mod(q, p)) % p if p > 1 else 0
    m1 = (qq * _inverse_mod(q, p)) % p if p > 1 else 0
    n00, r00 = divmod(qq * l0 - a, q)
    n01, r01 = divmod(qq * l1 - b, p)
    n10, r10 = divmod(pp * m0 - a, q)
    n11, r11 = divmod(pp * m1 - b, p)
    if r00 or r01 or r10 or r11 or min(n00, n01, n10, n11) < 0:  # pragma: no cover
        raise NoSolution("boundary multiplicities are not non-negative integers")
    ints = EmbeddingIntegers(
        src=src,
        tgt=tgt,
        eps=as_fraction(eps),
        a=a,
        b=b,
        k=k,
        l0=l0,
        m0=m0,
        l1=l1,
        m1=m1,
        n00=n00,
        n01=n01,
        n10=n10,
        n11=n11,
        bound=minimum_target_bound(src, eps),
    )
    ints.check_identities()
    if ints.above_bound and not ints.bullets_hold:  # pragma: no cover - guaranteed arithmetically
        raise AssertionError(f"bullet claims fail above the bound: {ints.bullet_report()}")
    return ints


def divides(m: int, n: int) -> bool:
    return n % m == 0
