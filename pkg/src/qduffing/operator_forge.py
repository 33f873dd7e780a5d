"""Sector split of the Hamiltonian, first-order generators and the density operator.

Operators live in the number basis of the mean-field mode at a time ``t``.
The explicit coupling ``m*lam`` in ``H = H2 + m lam H4 + E0`` and in
``A = a + m lam B3`` can be multiplied by a formal ``scale`` while the mode
(Omega, u) and the coefficients b3 stay frozen.  That is how order-by-order
claims are measured: a residual of order (m lam)**n scales as scale**n.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg

from .coeff_flow import (
    MONOMIALS,
    CoeffVector,
    FlowMode,
    find_alpha_crit,
    quartic_sector,
)
from .fock_algebra import NOPoly, adjoint, annihilator, interior, to_matrix
from .meanfield import MeanFieldSolution, quadratures
from . import oracle

__all__ = [
    "SectorSplit",
    "GeneratorPair",
    "DensitySpec",
    "BeyondCriticalCoupling",
    "build_h_sectors",
    "hamiltonian_matrix",
    "build_generators",
    "generator_derivative",
    "generator_in_reference_basis",
    "liouville_residual",
    "commutator_defect",
    "density_operator",
    "perturbative_domain",
    "density_liouville_residual",
    "quadrature_cumulants",
    "heisenberg_defect",
    "verification_report",
]

GUARD = 8


class BeyondCriticalCoupling(ValueError):
    pass


@dataclass(frozen=True)
class SectorSplit:
    h2: NOPoly
    h4: NOPoly
    e0: float
    coupling: float  # m * lam

    def hamiltonian(self, scale: float = 1.0) -> NOPoly:
        return self.h2 + (scale * self.coupling) * self.h4 + self.e0

    @property
    def h2_offdiag_max(self) -> float:
        return max(abs(self.h2.coeff(2, 0)), abs(self.h2.coeff(0, 2)))

    @property
    def h2_number_coeff(self) -> complex:
        return self.h2.coeff(1, 1)


@dataclass(frozen=True)
class GeneratorPair:
    a_op: NOPoly
    adag_op: NOPoly
    b3: CoeffVector
    t: float
    scale: float = 1.0


@dataclass(frozen=True)
class DensitySpec:
    """exp(-omega0 A+ A) on at most ``dim`` number states.

    ``domain_ratio`` further restricts the states to those where the cubic
    correction is no larger than ``domain_ratio`` times the bare term, see
    :func:`perturbative_domain`.  ``None`` uses all ``dim`` states.
    """

    omega0: float
    dim: int = 64
    normalize: bool = True
    domain_ratio: float | None = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.omega0) and self.omega0 > 0):
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.domain_ratio is not None and not self.domain_ratio > 0:
            raise ValueError("domain_ratio must be positive or None")


def build_h_sectors(sol: MeanFieldSolution, t: float = 0.0) -> SectorSplit:
    """Normal-order H in the mode basis at t and split it by degree.

    ``h4`` is the coupling-free quartic q**4/4 part, so it is defined (and
    nonzero) even at lam = 0 where ``coupling * h4`` vanishes.
    """
    p_ = sol.params
    q, p = quadratures(sol, t)
    q2 = q * q
    H = p * p / (2.0 * p_.m) + (0.5 * p_.m * p_.omega**2) * q2 + (0.25 * p_.m * p_.lam) * (q2 * q2)
    for odd in (1, 3):
        if H.part(odd).max_abs_coeff() > 1e-12:
            raise ArithmeticError("odd sector in an even Hamiltonian")
    return SectorSplit(h2=H.part(2), h4=quartic_sector(sol, t), e0=H.coeff(0, 0).real,
                       coupling=sol.coupling)


def hamiltonian_matrix(sol: MeanFieldSolution, t: float, dim: int) -> np.ndarray:
    """H from matrix powers of q and p (no normal ordering), exact on dim states."""
    p_ = sol.params
    q, p = quadratures(sol, t)
    pad = dim + 4
    Q, P = to_matrix(q, pad), to_matrix(p, pad)
    Q2 = Q @ Q
    H = P @ P / (2.0 * p_.m) + 0.5 * p_.m * p_.omega**2 * Q2 + 0.25 * p_.m * p_.lam * (Q2 @ Q2)
    return H[:dim, :dim]


@lru_cache(maxsize=None)
def _alpha_crit_printed() -> float:
    return find_alpha_crit(FlowMode.PAPER_LITERAL, 1e-6)


def _correction(sol: MeanFieldSolution, b: np.ndarray, scale: float) -> NOPoly:
    g = scale * sol.coupling
    return NOPoly({key: g * bk for key, bk in zip(MONOMIALS, b)})


def build_generators(sol: MeanFieldSolution, b3: CoeffVector, t: float | None = None,
                     scale: float = 1.0) -> GeneratorPair:
    """A = a + scale * m lam * sum_k b_k adag**(3-k) a**k and its adjoint."""
    t = b3.t if t is None else t
    if abs(t - b3.t) > 1e-14:
        raise ValueError(f"coefficients given at t={b3.t}, generator requested at t={t}")
    alpha = scale * sol.alpha
    ac = _alpha_crit_printed()
    if alpha >= ac:
        raise BeyondCriticalCoupling(f"alpha={alpha:.4g} >= alpha_c={ac:.4g}: generator not bounded")
    A = annihilator() + _correction(sol, b3.b, scale)
    return GeneratorPair(a_op=A, adag_op=adjoint(A), b3=b3, t=t, scale=scale)


def generator_derivative(g: GeneratorPair, sol: MeanFieldSolution) -> NOPoly:
    """Analytic d/dt of A in the mode basis at g.t.

    a(t) = exp(i Omega t) a(0), so each monomial adag**(3-k) a**k picks up
    i Omega (2k - 3); the coefficients contribute bdot.
    """
    Om = sol.Omega
    gscale = g.scale * sol.coupling
    out = {(0, 1): 1j * Om}
    for k, (key, bk, bdk) in enumerate(zip(MONOMIALS, g.b3.b, g.b3.bdot)):
        out[key] = gscale * (bdk + 1j * Om * (2 * k - 3) * bk)
    return NOPoly(out)


def generator_in_reference_basis(sol: MeanFieldSolution, b3: CoeffVector, scale: float = 1.0) -> NOPoly:
    """A(t) expressed with the t = 0 mode operators."""
    Om, t = sol.Omega, b3.t
    out = {(0, 1): np.exp(1j * Om * t)}
    g = scale * sol.coupling
    for k, (key, bk) in enumerate(zip(MONOMIALS, b3.b)):
        out[key] = g * bk * np.exp(1j * Om * (2 * k - 3) * t)
    return NOPoly(out)


def _band_norm(R: np.ndarray, guard: int) -> float:
    return float(np.linalg.norm(interior(R, guard), 2))


def liouville_residual(g: GeneratorPair, split: SectorSplit, sol: MeanFieldSolution,
                       dim: int = 64, guard: int = GUARD) -> float:
    """Largest singular value of i dA/dt + [A, H] on the guard band."""
    if dim < 32:
        raise ValueError("liouville_residual needs dim >= 32")
    H = to_matrix(split.hamiltonian(g.scale), dim)
    A = to_matrix(g.a_op, dim)
    dA = to_matrix(generator_derivative(g, sol), dim)
    return _band_norm(1j * dA + A @ H - H @ A, guard)


def commutator_defect(g: GeneratorPair, dim: int = 64, guard: int = GUARD) -> float:
    """max-norm of [A, A+] - 1 on the guard band, from matrix products."""
    A = to_matrix(g.a_op, dim)
    Ad = to_matrix(g.adag_op, dim)
    C = A @ Ad - Ad @ A - np.eye(dim)
    return float(np.max(np.abs(interior(C, guard))))


MIN_DOMAIN = 8


def perturbative_domain(A_op: NOPoly, dim: int, ratio: float | None = 1.0) -> int:
    """Number of low states on which ``A - a`` stays below ``ratio * a``.

    Column by column, ||(A - a)|n>|| / ||a|n>|| grows like m lam |b| n.
    Past the crossover the truncated series has spurious near-kernel states
    at large n which would leak weight into exp(-omega0 A+ A).
    """
    if ratio is None:
        return dim
    bare = annihilator()
    A = to_matrix(A_op, dim + 3)[:, :dim]
    a = to_matrix(bare, dim + 3)[:, :dim]
    corr = np.linalg.norm(A - a, axis=0)[1:] / np.linalg.norm(a, axis=0)[1:]
    over = np.nonzero(corr >= ratio)[0]
    if len(over) == 0:
        return dim
    return int(min(dim, max(MIN_DOMAIN, over[0] + 1)))


def _rho_from_operator(A_op: NOPoly, spec: DensitySpec) -> np.ndarray:
    n = perturbative_domain(A_op, spec.dim, spec.domain_ratio)
    # rectangular realization: A maps n states into n + 3 exactly, so
    # A+A is the compression of the true operator and cannot acquire
    # spurious small eigenvalues from cut-off raising terms
    A = to_matrix(A_op, n + 3)[:, :n]
    N = A.conj().T @ A
    N = 0.5 * (N + N.conj().T)
    w, V = scipy.linalg.eigh(N)
    w = np.clip(w, 0.0, None)
    rho = (V * np.exp(-spec.omega0 * w)) @ V.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    if spec.normalize:
        rho = rho / np.trace(rho).real
    out = np.zeros((spec.dim, spec.dim), dtype=complex)
    out[:n, :n] = rho
    return out


def density_operator(g: GeneratorPair, spec: DensitySpec) -> np.ndarray:
    """Trace-normalized exp(-omega0 A+ A), Hermitian and positive by construction."""
    return _rho_from_operator(g.a_op, spec)


def density_liouville_residual(sol: MeanFieldSolution, coeff_fn: Callable[[float], CoeffVector],
                               spec: DensitySpec, t: float = 0.0, scale: float = 1.0,
                               h: float | None = None, guard: int = GUARD) -> float:
    """||i d rho/dt + [rho, H]|| with a Richardson-extrapolated central difference.

    Everything is expressed in the t = 0 mode basis so that rho(t +- h) are
    comparable matrices.
    """
    h = 1e-4 / sol.Omega if h is None else h
    split = build_h_sectors(sol, 0.0)
    H = to_matrix(split.hamiltonian(scale), spec.dim)

    def rho_at(s):
        return _rho_from_operator(generator_in_reference_basis(sol, coeff_fn(s), scale), spec)

    def central(step):
        return (rho_at(t + step) - rho_at(t - step)) / (2 * step)

    drho = (4.0 * central(h / 2) - central(h)) / 3.0
    rho = rho_at(t)
    return _band_norm(1j * drho + rho @ H - H @ rho, guard)


def quadrature_cumulants(rho: np.ndarray, sol: MeanFieldSolution, t: float = 0.0) -> dict:
    """Moments of q in rho and the excess kurtosis <q^4> - 3 <q^2>^2."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"density matrix not normalized (trace {tr})")
    dim = rho.shape[0]
    q, _ = quadratures(sol, t)
    q2 = q * q
    mom = {}
    for n, op in ((1, q), (2, q2), (4, q2 * q2)):
        mom[n] = np.trace(rho @ to_matrix(op, dim)).real
    if abs(mom[1]) > 1e-10:
        raise ArithmeticError(f"<q> = {mom[1]:.3g} violates parity")
    kappa4 = mom[4] - 3.0 * mom[2] ** 2
    return {"q_mean": mom[1], "q2": mom[2], "q4": mom[4], "kurtosis_excess": kappa4,
            "purity": float(np.trace(rho @ rho).real)}


def heisenberg_defect(sol: MeanFieldSolution, coeff_fn: Callable[[float], CoeffVector], t: float,
                      scale: float = 1.0, dim: int = 96, band: int = 24) -> float:
    """|| exp(-iHt) A(0) exp(iHt) - A(t) || on the lowest ``band`` states.

    The Liouville flow of an invariant runs opposite to the Heisenberg flow of
    an observable, hence the evaluation at -t.
    """
    split = build_h_sectors(sol, 0.0)
    H = to_matrix(split.hamiltonian(scale), dim)
    A0 = to_matrix(generator_in_reference_basis(sol, coeff_fn(0.0), scale), dim)
    At = to_matrix(generator_in_reference_basis(sol, coeff_fn(t), scale), dim)
    evolved = oracle.heisenberg_evolve(A0, sol.params, -t, hamiltonian=H)
    return float(np.linalg.norm((evolved - At)[:band, :band], 2))


def verification_report(**values) -> dict:
    """JSON-ready verification record with the fixed key set."""
    keys = ("h2_offdiag_max", "h2_number_coeff", "liouville_residual", "commutator_defect",
            "kurtosis_excess", "purity")
    out = {k: (None if values.get(k) is None else float(values[k])) for k in keys}
    out["mode"] = str(values.get("mode", FlowMode.ENGINE_DERIVED.value))
    out["convention"] = str(values.get("convention", "m_normalized"))
    return out
