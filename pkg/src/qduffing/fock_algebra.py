"""Normal-ordered polynomials in a single bosonic mode.

A term ``(j, k) -> c`` stands for ``c * adag**j * a**k`` with all creation
operators to the left.  Products are reordered with the closed-form
contraction rule

    a**j adag**k = sum_r  r! C(j, r) C(k, r)  adag**(k - r) a**(j - r)

so the combinatorial factors are exact integers and only the coefficient
products carry floating-point roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

Key = tuple[int, int]

__all__ = [
    "NOPoly",
    "no_product",
    "commutator",
    "adjoint",
    "to_matrix",
    "interior",
    "annihilator",
    "creator",
    "identity",
    "number",
    "monomial",
]


@dataclass(frozen=True)
class NOPoly:
    """Immutable normal-ordered polynomial in ``a`` and ``adag``."""

    terms: Mapping[Key, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[Key, complex] = {}
        for (j, k), c in dict(self.terms).items():
            if j < 0 or k < 0:
                raise ValueError(f"negative power in key {(j, k)}")
            c = complex(c)
            if c != 0:
                clean[(int(j), int(k))] = clean.get((int(j), int(k)), 0) + c
        clean = {key: c for key, c in clean.items() if c != 0}
        object.__setattr__(self, "terms", clean)

    # -- construction helpers -------------------------------------------

    @classmethod
    def scalar(cls, c: complex) -> "NOPoly":
        return cls({(0, 0): c})

    # -- queries ---------------------------------------------------------

    @property
    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(j + k for j, k in self.terms)

    def coeff(self, dagger_power: int, annihilation_power: int) -> complex:
        return self.terms.get((dagger_power, annihilation_power), 0j)

    def part(self, degree: int) -> "NOPoly":
        """Terms of exactly the given total degree."""
        return NOPoly({key: c for key, c in self.terms.items() if sum(key) == degree})

    def sorted_terms(self) -> list[tuple[Key, complex]]:
        """Descending dagger power, ascending annihilation power."""
        return sorted(self.terms.items(), key=lambda kv: (-kv[0][0], kv[0][1]))

    def chop(self, tol: float = 1e-14) -> "NOPoly":
        return NOPoly({key: c for key, c in self.terms.items() if abs(c) > tol})

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, NOPoly):
            other = NOPoly.scalar(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0) + c
        return NOPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return NOPoly({key: -c for key, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, NOPoly):
            return no_product(self, other)
        return NOPoly({key: c * other for key, c in self.terms.items()})

    def __rmul__(self, other):
        return NOPoly({key: other * c for key, c in self.terms.items()})

    def __truediv__(self, other):
        return NOPoly({key: c / other for key, c in self.terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = identity()
        for _ in range(n):
            out = no_product(out, self)
        return out

    def __repr__(self):
        if not self.terms:
            return "NOPoly(0)"
        parts = [f"({c:.6g}) a+^{j} a^{k}" for (j, k), c in self.sorted_terms()]
        return "NOPoly(" + " + ".join(parts) + ")"


def monomial(dagger_power: int, annihilation_power: int, coeff: complex = 1.0) -> NOPoly:
    return NOPoly({(dagger_power, annihilation_power): coeff})


def identity() -> NOPoly:
    return NOPoly.scalar(1.0)


def annihilator() -> NOPoly:
    return monomial(0, 1)


def creator() -> NOPoly:
    return monomial(1, 0)


def number() -> NOPoly:
    return monomial(1, 1)


def _reorder_weights(j: int, k: int) -> Iterable[tuple[int, int]]:
    """Yield ``(r, weight)`` for normal-ordering ``a**j adag**k``."""
    for r in range(min(j, k) + 1):
        yield r, math.factorial(r) * math.comb(j, r) * math.comb(k, r)


def no_product(p: NOPoly, q: NOPoly) -> NOPoly:
    """Normal-ordered form of the operator product ``p q``."""
    out: dict[Key, complex] = {}
    for (i, j), cp in p.terms.items():
        for (k, l), cq in q.terms.items():
            c = cp * cq
            for r, w in _reorder_weights(j, k):
                key = (i + k - r, j + l - r)
                out[key] = out.get(key, 0) + w * c
    return NOPoly(out)


def commutator(p: NOPoly, q: NOPoly) -> NOPoly:
    return no_product(p, q) - no_product(q, p)


def adjoint(p: NOPoly) -> NOPoly:
    return NOPoly({(k, j): c.conjugate() for (j, k), c in p.terms.items()})


def _monomial_matrix(j: int, k: int, dim: int) -> np.ndarray:
    # <n - k + j| adag^j a^k |n> = sqrt(n!/(n-k)!) * sqrt((n-k+j)!/(n-k)!)
    mat = np.zeros((dim, dim))
    for n in range(k, dim):
        target = n - k + j
        if target >= dim:
            break
        val = 1.0
        for s in range(n - k + 1, n + 1):
            val *= math.sqrt(s)
        for s in range(n - k + 1, target + 1):
            val *= math.sqrt(s)
        mat[target, n] = val
    return mat


def to_matrix(p: NOPoly, dim: int) -> np.ndarray:
    """Truncated number-basis matrix (a ``FockMatrix``) of ``p``.

    Entries are the exact matrix elements of the untruncated operator
    between the first ``dim`` number states.
    """
    if dim < p.degree + 2:
        raise ValueError(f"dim={dim} too small for degree {p.degree} (need >= degree + 2)")
    mat = np.zeros((dim, dim), dtype=complex)
    for (j, k), c in p.terms.items():
        mat += c * _monomial_matrix(j, k, dim)
    return mat


def interior(mat: np.ndarray, degree: int) -> np.ndarray:
    """Restrict a truncated matrix to the guard band ``0..N-1-degree``."""
    n = mat.shape[0] - degree
    if n <= 0:
        raise ValueError("guard band is empty")
    return mat[:n, :n]
