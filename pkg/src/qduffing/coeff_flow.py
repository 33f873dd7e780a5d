"""Order-(m lam) coefficient flow of the cubic generator correction.

The correction is ``B3 = sum_k b_k adag**(3-k) a**k`` (k = annihilation
power).  Its coefficients obey a linear inhomogeneous system

    db/dt = K(t) b + s(t)

which the phase substitution ``b_k = c_k exp(i (4 - 2k) Omega t)`` turns
into ``dc/dt = i Omega M c + s_tilde`` with a constant real matrix ``M``.

Two realizations of ``K`` and ``s`` are kept side by side:

* ``paper_literal``: the printed matrix and source, with the fourth diagonal
  entry of the reduced system read as ``-6 alpha + 2``;
* ``engine_derived``: the cubic projection of ``i([a, H4] + m lam [B3, H4])``
  computed by the normal-ordering engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .fock_algebra import annihilator, commutator, monomial, NOPoly
from .meanfield import MeanFieldSolution, mode_at

__all__ = [
    "FlowMode",
    "MONOMIALS",
    "PHASE_INDEX",
    "CoeffSystem",
    "CoeffVector",
    "StabilityReport",
    "NoTransition",
    "SingularSystem",
    "StepSizeError",
    "quartic_sector",
    "build_time_system",
    "build_constant_system",
    "eigen_spectrum",
    "secular_indicator",
    "stability_sweep",
    "find_alpha_crit",
    "particular_solution",
    "driven_coefficients",
    "linearized_coefficients",
    "closed_form_flow",
    "integrate_flow",
    "growth_rate",
    "weak_coupling_slopes",
    "mode_discrepancy",
]

MONOMIALS: tuple[tuple[int, int], ...] = ((3, 0), (2, 1), (1, 2), (0, 3))
# b_k carries exp(i * PHASE_INDEX[k] * Omega * t)
PHASE_INDEX = np.array([4.0, 2.0, 0.0, -2.0])
SECULAR_THRESHOLD = 1e-8
CERT_TOL = 1e-10
FOURTH_DIAGONAL_READING = "-6*alpha + 2 (printed '-6 alpha + 2 alpha' rejected: alpha=0 spectrum needs +2)"


class FlowMode(str, Enum):
    PAPER_LITERAL = "paper_literal"
    ENGINE_DERIVED = "engine_derived"


class NoTransition(RuntimeError):
    def __init__(self, msg, sweep=None):
        super().__init__(msg)
        self.sweep = sweep


class SingularSystem(np.linalg.LinAlgError):
    def __init__(self, msg, cond):
        super().__init__(msg)
        self.cond = cond


class StepSizeError(ValueError):
    pass


@dataclass(frozen=True)
class CoeffSystem:
    mode: FlowMode
    alpha: float
    matrix: np.ndarray
    source: np.ndarray  # constant transformed source, in units of |u|^4
    Omega: float = 1.0


@dataclass(frozen=True)
class CoeffVector:
    """Coefficients of B3 at time t, with their time derivative."""

    b: np.ndarray
    c: np.ndarray
    t: float
    bdot: np.ndarray = field(default=None)


@dataclass
class StabilityReport:
    mode: FlowMode
    alpha_grid: np.ndarray
    spectra: np.ndarray  # (len(grid), 4) complex
    alpha_crit: float | None
    fourth_diagonal: str = FOURTH_DIAGONAL_READING

    def to_csv(self) -> str:
        lines = ["alpha,re_nu1,im_nu1,re_nu2,im_nu2,re_nu3,im_nu3,re_nu4,im_nu4"]
        for a, nus in zip(self.alpha_grid, self.spectra):
            vals = [a]
            for nu in nus:
                vals += [nu.real, nu.imag]
            lines.append(",".join(f"{float(x):.17g}" for x in vals))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# time-dependent system

def quartic_sector(sol: MeanFieldSolution, t: float) -> NOPoly:
    """H4: the normal-ordered quartic part of q**4 / 4 in the mode basis at t."""
    u = mode_at(sol, t).u
    return NOPoly({(j, 4 - j): 0.25 * math.comb(4, j) * (-u.conjugate()) ** j * u ** (4 - j)
                   for j in range(5)})


@lru_cache(maxsize=None)
def _engine_tensors() -> tuple[np.ndarray, np.ndarray]:
    """Structure constants of the cubic projections.

    T[k, l, j] = coefficient of monomial k in [monomial l, adag**j a**(4-j)]
    S[k, j]    = coefficient of monomial k in [a, adag**j a**(4-j)]
    """
    T = np.zeros((4, 4, 5))
    S = np.zeros((4, 5))
    a = annihilator()
    for j in range(5):
        quart = monomial(j, 4 - j)
        src = commutator(a, quart)
        for k, key in enumerate(MONOMIALS):
            S[k, j] = src.coeff(*key).real
        for l, lkey in enumerate(MONOMIALS):
            comm = commutator(monomial(*lkey), quart)
            for k, key in enumerate(MONOMIALS):
                T[k, l, j] = comm.coeff(*key).real
    return T, S


def _quartic_coeffs(u: complex) -> np.ndarray:
    uc = u.conjugate()
    return np.array([0.25 * math.comb(4, j) * (-uc) ** j * u ** (4 - j) for j in range(5)])


def _time_system(u: complex, coupling: float, mode: FlowMode) -> tuple[np.ndarray, np.ndarray]:
    mode = FlowMode(mode)
    if mode is FlowMode.ENGINE_DERIVED:
        T, S = _engine_tensors()
        h = _quartic_coeffs(u)
        return 1j * coupling * (T @ h), 1j * (S @ h)
    uc = u.conjugate()
    n2 = (uc * u).real
    P = np.array([
        [-9 * n2**2, 0, 3 * uc**4, 0],
        [18 * uc * u**3, -3 * n2**2, -6 * uc**3 * u, 9 * uc**4],
        [-9 * u**4, 6 * uc * u**3, 3 * n2**2, -18 * uc**3 * u],
        [0, -3 * u**4, 0, -6 * n2**2],
    ], dtype=complex)
    s = 1j * np.array([uc**4, -uc**3 * u, n2**2, -uc * u**3])
    return 1j * coupling * P, s


def _coupling(sol: MeanFieldSolution, alpha: float | None) -> float:
    """m*lam, or the formal value giving the requested alpha on sol's mode."""
    if alpha is None:
        return sol.coupling
    return 4.0 * sol.params.m**2 * sol.Omega**3 * alpha


def build_time_system(sol: MeanFieldSolution, t: float, mode=FlowMode.PAPER_LITERAL,
                      alpha: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(K(t), s(t)) of the coefficient flow db/dt = K b + s."""
    return _time_system(mode_at(sol, t).u, _coupling(sol, alpha), mode)


def _reduce(K, s, Omega, t):
    ph = np.exp(1j * PHASE_INDEX * Omega * t)
    Kc = (K * ph[None, :]) / ph[:, None] - 1j * Omega * np.diag(PHASE_INDEX)
    return Kc / (1j * Omega), s / ph


def build_constant_system(alpha: float, mode=FlowMode.PAPER_LITERAL, t: float = 0.0,
                          sol: MeanFieldSolution | None = None) -> CoeffSystem:
    """Constant-coefficient reduction at coupling alpha.

    The reduced matrix depends only on alpha, so a unit reference mode
    (m = Omega = 1) is used unless a solution is supplied.  For the printed
    matrix the phase of b_3 contributes the constant +2 to the fourth
    diagonal entry, i.e. the reading -6 alpha + 2.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    mode = FlowMode(mode)
    if sol is None:
        Omega, m = 1.0, 1.0
        u = np.exp(-1j * Omega * t) / math.sqrt(2.0 * m * Omega)
        coupling = 4.0 * m**2 * Omega**3 * alpha
    else:
        Omega, m = sol.Omega, sol.params.m
        u = mode_at(sol, t).u
        coupling = _coupling(sol, alpha)
    K, s = _time_system(u, coupling, mode)
    Mc, st = _reduce(K, s, Omega, t)
    if np.max(np.abs(Mc.imag)) > 1e-10 * max(1.0, np.max(np.abs(Mc))):
        raise ArithmeticError("phase reduction left a complex matrix")
    Mr = Mc.real.copy()
    n2 = 1.0 / (2.0 * m * Omega)
    source = st / n2**2
    return CoeffSystem(mode=mode, alpha=float(alpha), matrix=Mr, source=source, Omega=Omega)


# ---------------------------------------------------------------------------
# spectrum and stability

def eigen_spectrum(sys: CoeffSystem, return_vectors: bool = False):
    """Eigenvalues of the real reduced matrix with backward-error certification.

    Sorted by (Re, Im).  The mode angular frequencies are Omega * nu.
    """
    M = sys.matrix
    w, V = np.linalg.eig(M)
    scale = max(np.linalg.norm(M, 2), 1e-300)
    for i in range(4):
        x = V[:, i]
        berr = np.linalg.norm(M @ x - w[i] * x) / (scale * np.linalg.norm(x))
        if not berr < CERT_TOL:
            raise np.linalg.LinAlgError(f"eigenpair {i} failed certification (backward error {berr:.3g})")
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    if return_vectors:
        return w, V
    return w


def secular_indicator(alpha: float, mode=FlowMode.PAPER_LITERAL) -> float:
    return float(np.max(np.abs(eigen_spectrum(build_constant_system(alpha, mode)).imag)))


def stability_sweep(alpha_grid, mode=FlowMode.PAPER_LITERAL) -> np.ndarray:
    return np.array([eigen_spectrum(build_constant_system(a, mode)) for a in alpha_grid])


def find_alpha_crit(mode=FlowMode.PAPER_LITERAL, tol: float = 1e-4, lo: float = 0.0,
                    hi: float = 0.5, n_grid: int = 501) -> float:
    """Onset of complex eigenvalues, located by bisection on the indicator."""
    grid = np.linspace(lo, hi, n_grid)
    flags = np.array([secular_indicator(a, mode) > SECULAR_THRESHOLD for a in grid])
    if not flags.any():
        raise NoTransition(f"no real-to-complex transition for {FlowMode(mode).value} in [{lo}, {hi}]",
                           sweep=(grid, flags))
    first = int(np.argmax(flags))
    if first == 0:
        raise NoTransition(f"spectrum already complex at alpha={lo}", sweep=(grid, flags))
    if not flags[first:].all():
        raise NoTransition("indicator is not monotone: spectrum returns to real", sweep=(grid, flags))
    a, b = grid[first - 1], grid[first]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if secular_indicator(mid, mode) > SECULAR_THRESHOLD:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def weak_coupling_slopes(alpha: float = 1e-4, mode=FlowMode.PAPER_LITERAL) -> np.ndarray:
    """Forward-difference slopes d nu / d alpha of the sorted spectrum."""
    nu0 = eigen_spectrum(build_constant_system(0.0, mode)).real
    nu1 = eigen_spectrum(build_constant_system(alpha, mode)).real
    return (nu1 - nu0) / alpha


# ---------------------------------------------------------------------------
# solutions

def particular_solution(sys: CoeffSystem, sol: MeanFieldSolution | None = None,
                        max_cond: float = 1e12) -> np.ndarray:
    """Constant driven solution c_p of dc/dt = i Omega M c + s_tilde.

    Returned in physical units when ``sol`` is given, otherwise in units of
    |u|^4 / Omega.
    """
    cond = np.linalg.cond(sys.matrix)
    if not np.isfinite(cond) or cond > max_cond:
        raise SingularSystem(f"resonant coefficient system at alpha={sys.alpha} (cond={cond:.3g})", cond)
    if sol is None:
        Omega, n4 = 1.0, 1.0
    else:
        Omega, n4 = sol.Omega, sol.mode_norm2**2
    source = sys.source * n4
    A = 1j * Omega * sys.matrix
    cp = np.linalg.solve(A, -source)
    res = np.linalg.norm(A @ cp + source)
    if res > 1e-10 * max(1.0, np.linalg.norm(source)):
        raise SingularSystem(f"particular solution residual {res:.3g}", cond)
    return cp


def _phases(Omega, t):
    return np.exp(1j * PHASE_INDEX * Omega * t)


def driven_coefficients(sol: MeanFieldSolution, t: float = 0.0, mode=FlowMode.ENGINE_DERIVED,
                        alpha: float | None = None) -> CoeffVector:
    """Bounded driven solution b = c_p * phases (no homogeneous admixture)."""
    a = sol.alpha if alpha is None else alpha
    sys = build_constant_system(a, mode, sol=sol)
    cp = particular_solution(sys, sol)
    ph = _phases(sol.Omega, t)
    b = cp * ph
    return CoeffVector(b=b, c=cp, t=t, bdot=1j * PHASE_INDEX * sol.Omega * b)


def linearized_coefficients(sol: MeanFieldSolution, t: float = 0.0,
                            mode=FlowMode.ENGINE_DERIVED) -> CoeffVector:
    """Strict first-order solution: the m*lam [B3, H4] feedback is dropped.

    Non-resonant components take their driven values; the resonant k = 2
    component grows secularly from zero at t = 0.
    """
    sys = build_constant_system(0.0, mode, sol=sol)
    src = sys.source * sol.mode_norm2**2
    Om = sol.Omega
    c = np.zeros(4, dtype=complex)
    cdot = np.zeros(4, dtype=complex)
    for k in range(4):
        if PHASE_INDEX[k] == 0:
            c[k] = src[k] * t
            cdot[k] = src[k]
        else:
            c[k] = -src[k] / (1j * Om * (-PHASE_INDEX[k]))
    ph = _phases(Om, t)
    b = c * ph
    bdot = (cdot + 1j * PHASE_INDEX * Om * c) * ph
    return CoeffVector(b=b, c=c, t=t, bdot=bdot)


def closed_form_flow(sol: MeanFieldSolution, mode, b0, times, alpha: float | None = None) -> np.ndarray:
    """Eigen-decomposition solution of the reduced system mapped back to b."""
    a = sol.alpha if alpha is None else alpha
    sys = build_constant_system(a, mode, sol=sol)
    cp = particular_solution(sys, sol)
    nu, V = eigen_spectrum(sys, return_vectors=True)
    c0 = np.asarray(b0, dtype=complex)  # phases are 1 at t = 0
    w = np.linalg.solve(V, c0 - cp)
    times = np.asarray(times, dtype=float)
    ev = np.exp(1j * sol.Omega * np.outer(times, nu))
    c = cp[None, :] + (ev * w[None, :]) @ V.T
    return c * np.exp(1j * sol.Omega * np.outer(times, PHASE_INDEX))


def integrate_flow(sol: MeanFieldSolution, mode, b0, t_span, dt: float,
                   alpha: float | None = None) -> list[CoeffVector]:
    """Classical RK4 on the time-dependent system (not the reduced one).

    ``alpha`` overrides the coupling prefactor on sol's mode, which allows
    formal couplings (alpha >= 1/6) that no real omega can produce.
    """
    Om = sol.Omega
    if dt > (2 * math.pi / Om) / 200:
        raise StepSizeError(f"dt={dt} does not resolve the fast phase (max {(2 * math.pi / Om) / 200:.3g})")
    t0, t1 = t_span
    nsteps = int(math.ceil((t1 - t0) / dt - 1e-9))
    h = (t1 - t0) / nsteps

    def rhs(t, b):
        K, s = build_time_system(sol, t, mode, alpha)
        return K @ b + s

    b = np.asarray(b0, dtype=complex).copy()
    t = t0
    out = [CoeffVector(b=b.copy(), c=b / _phases(Om, t), t=t)]
    for _ in range(nsteps):
        k1 = rhs(t, b)
        k2 = rhs(t + h / 2, b + h / 2 * k1)
        k3 = rhs(t + h / 2, b + h / 2 * k2)
        k4 = rhs(t + h, b + h * k3)
        b = b + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        out.append(CoeffVector(b=b.copy(), c=b / _phases(Om, t), t=t))
    return out


def growth_rate(traj: list[CoeffVector], start_fraction: float = 0.5) -> float:
    """Least-squares slope of log ||b|| over the tail of a trajectory."""
    ts = np.array([cv.t for cv in traj])
    ln = np.log(np.array([np.linalg.norm(cv.b) for cv in traj]))
    sel = ts >= ts[0] + start_fraction * (ts[-1] - ts[0])
    return float(np.polyfit(ts[sel], ln[sel], 1)[0])


# ---------------------------------------------------------------------------
# mode comparison

def mode_discrepancy(alpha: float) -> dict:
    """Entrywise comparison of the printed and engine-derived reduced systems."""
    p = build_constant_system(alpha, FlowMode.PAPER_LITERAL)
    e = build_constant_system(alpha, FlowMode.ENGINE_DERIVED)
    entries = []
    for i in range(4):
        for j in range(4):
            if abs(p.matrix[i, j] - e.matrix[i, j]) > 1e-12:
                entries.append({"row": i, "col": j, "paper_literal": float(p.matrix[i, j]),
                                "engine_derived": float(e.matrix[i, j])})
    ratios = []
    for ps, es in zip(p.source, e.source):
        ratios.append(float((es / ps).real) if ps != 0 else float("nan"))
    return {
        "alpha": alpha,
        "matrix_entries": entries,
        "source_paper_literal": [[z.real, z.imag] for z in p.source],
        "source_engine_derived": [[z.real, z.imag] for z in e.source],
        "source_factors": ratios,
    }
