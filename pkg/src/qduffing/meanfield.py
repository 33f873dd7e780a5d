"""Gap equation, mode functions and mean energy of the Gaussian mean field.

Units have hbar = 1.  The dressed frequency ``Omega`` is the positive root of

    Omega**3 - omega**2 * Omega - 3 * lam / (2 * m) = 0

and the mode function is ``u(t) = exp(-i Omega t) / sqrt(2 m Omega)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import bisect

from .fock_algebra import NOPoly

__all__ = [
    "Convention",
    "PhysParams",
    "MeanFieldSolution",
    "ModeValues",
    "BranchFault",
    "gap_cubic",
    "closed_form_omega",
    "bisect_omega",
    "solve_omega",
    "mode_at",
    "mean_energy",
    "meanfield_residual",
    "quadratures",
]


class Convention(str, Enum):
    LITERAL = "literal"
    M_NORMALIZED = "m_normalized"


class BranchFault(ArithmeticError):
    """Closed-form root and bisection root disagree."""


@dataclass(frozen=True)
class PhysParams:
    m: float = 1.0
    omega: float = 1.0
    lam: float = 0.0
    convention: Convention = Convention.M_NORMALIZED

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention(self.convention))
        if not (math.isfinite(self.m) and self.m > 0):
            raise ValueError(f"mass must be positive, got {self.m}")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and non-negative, got {self.lam}")
        if self.convention is Convention.M_NORMALIZED and self.m != 1.0:
            raise ValueError("convention m_normalized requires m = 1 (use convention=literal)")


@dataclass(frozen=True)
class MeanFieldSolution:
    Omega: float
    E0: float
    params: PhysParams
    omega_closed_form: float
    omega_bisection: float

    @property
    def alpha(self) -> float:
        """Dimensionless coupling lam / (4 m Omega**3)."""
        p = self.params
        return p.lam / (4.0 * p.m * self.Omega**3)

    @property
    def coupling(self) -> float:
        """The explicit prefactor ``m * lam`` of the quartic sector."""
        return self.params.m * self.params.lam

    @property
    def mode_norm2(self) -> float:
        """|u|**2 = 1 / (2 m Omega)."""
        return 1.0 / (2.0 * self.params.m * self.Omega)

    def cubic_residual(self) -> float:
        return abs(gap_cubic(self.Omega, self.params))


@dataclass(frozen=True)
class ModeValues:
    t: float
    u: complex
    udot: complex
    v: complex
    pi: complex

    def wronskian(self) -> complex:
        """u* v - u v*, equal to i for a canonical mode."""
        return self.u.conjugate() * self.v - self.u * self.v.conjugate()


def gap_cubic(Omega: float, params: PhysParams) -> float:
    # factored so that the value at Omega = omega is exactly -3 lam / (2 m)
    w = params.omega
    return Omega * (Omega - w) * (Omega + w) - 1.5 * params.lam / params.m


def closed_form_omega(params: PhysParams) -> complex:
    """Cardano root evaluated with principal complex branches.

    The inner radicand is negative for lam/m < sqrt(6912/104976) omega**3, in
    which case the two cube-root terms are complex conjugates and the sum is
    real only up to roundoff.  The complex value is returned untouched.
    """
    r = params.lam / params.m
    w = params.omega
    inner = 324.0 * r + cmath.sqrt(complex(-6912.0 * w**6 + 104976.0 * r**2))
    cube = inner ** (1.0 / 3.0)
    c2 = 2.0 ** (1.0 / 3.0)
    return 2.0 * c2 * w**2 / cube + cube / (6.0 * c2)


def bisect_omega(params: PhysParams, xtol: float = 1e-15) -> float:
    lo = params.omega
    hi = params.omega + 1.5 * params.lam / (params.m * params.omega**2) + 1.0
    flo = gap_cubic(lo, params)
    if flo == 0.0:
        return lo
    return bisect(gap_cubic, lo, hi, args=(params,), xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)


def solve_omega(params: PhysParams, agree_tol: float = 1e-9) -> MeanFieldSolution:
    """Dressed frequency from both the Cardano formula and bisection."""
    closed = closed_form_omega(params)
    root = bisect_omega(params)
    if abs(closed.real - root) > agree_tol * max(1.0, root) or abs(closed.imag) > agree_tol:
        raise BranchFault(f"closed form {closed} disagrees with bisection {root} for {params}")
    sol = MeanFieldSolution(
        Omega=root, E0=float("nan"), params=params,
        omega_closed_form=closed.real, omega_bisection=root,
    )
    return MeanFieldSolution(
        Omega=root, E0=mean_energy(sol, 0.0), params=params,
        omega_closed_form=closed.real, omega_bisection=root,
    )


def mode_at(sol: MeanFieldSolution, t: float) -> ModeValues:
    m = sol.params.m
    u = cmath.exp(-1j * sol.Omega * t) / math.sqrt(2.0 * m * sol.Omega)
    udot = -1j * sol.Omega * u
    return ModeValues(t=t, u=u, udot=udot, v=-m * udot, pi=m * udot.conjugate())


def mean_energy(sol: MeanFieldSolution, t: float = 0.0) -> float:
    """Vacuum expectation of H evaluated term by term as printed.

    Under ``convention=literal`` with m != 1 the quartic term (3 lam/4)|u|^4
    differs from the normal-ordered constant (3 m lam/4)|u|^4 by a factor m.
    """
    p = sol.params
    mv = mode_at(sol, t)
    n2 = (mv.u.conjugate() * mv.u).real
    kinetic = (mv.pi.conjugate() * mv.pi).real / (2.0 * p.m)
    return kinetic + 0.5 * p.m * p.omega**2 * n2 + 0.75 * p.lam * n2**2


def meanfield_residual(sol: MeanFieldSolution, t: float, amplitude_scale: float = 1.0) -> float:
    """|u'' + omega^2 u + 3 lam |u|^2 u| for the (optionally rescaled) mode."""
    p = sol.params
    u = amplitude_scale * mode_at(sol, t).u
    uddot = -sol.Omega**2 * u
    return abs(uddot + p.omega**2 * u + 3.0 * p.lam * (u.conjugate() * u).real * u)


def quadratures(sol: MeanFieldSolution, t: float) -> tuple[NOPoly, NOPoly]:
    """q and p in terms of the mode operators at time t.

    Inverting ``adag = u p + v q`` with the Wronskian gives
    ``q = i (u a - u* adag)`` and ``p = -i (v a - v* adag)``.
    """
    mv = mode_at(sol, t)
    q = NOPoly({(0, 1): 1j * mv.u, (1, 0): -1j * mv.u.conjugate()})
    p = NOPoly({(0, 1): -1j * mv.v, (1, 0): 1j * mv.v.conjugate()})
    return q, p
