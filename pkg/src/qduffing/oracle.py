"""Independent ground truth.

Nothing here uses the normal-ordering engine: the Hamiltonian is assembled
from ladder matrices in the bare-omega harmonic basis, and the classical
Duffing period comes from direct time integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .meanfield import PhysParams

__all__ = [
    "SpectrumResult",
    "ClassicalRun",
    "EnergyDriftError",
    "bare_hamiltonian",
    "exact_diagonalize",
    "heisenberg_evolve",
    "classical_frequency",
    "classical_run",
]


class EnergyDriftError(RuntimeError):
    pass


@dataclass
class SpectrumResult:
    dims: list[int]
    energies: list[list[float]]
    converged: list[bool]

    def ground_energy(self) -> float:
        return self.energies[-1][0]

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "energies": [[float(e) for e in row] for row in self.energies],
                "converged": [bool(c) for c in self.converged]}


@dataclass
class ClassicalRun:
    q0: float
    p0: float
    dt: float
    samples: np.ndarray  # columns t, q, p
    period: float
    energy_drift: float

    def to_csv(self) -> str:
        rows = ["t,q,p"]
        rows += [f"{t:.17g},{q:.17g},{p:.17g}" for t, q, p in self.samples]
        return "\n".join(rows) + "\n"


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1)


def bare_hamiltonian(params: PhysParams, dim: int) -> np.ndarray:
    """H in the harmonic basis of the bare frequency, exact on dim states."""
    m, w, lam = params.m, params.omega, params.lam
    pad = dim + 4
    a = _ladder(pad)
    q = (a + a.T) / math.sqrt(2.0 * m * w)
    p = 1j * math.sqrt(m * w / 2.0) * (a.T - a)
    q2 = q @ q
    H = p @ p / (2.0 * m) + 0.5 * m * w**2 * q2 + 0.25 * m * lam * (q2 @ q2)
    H = H[:dim, :dim]
    return 0.5 * (H + H.conj().T)


def exact_diagonalize(params: PhysParams, dims=(256, 384), levels: int = 10,
                      tol: float = 1e-8) -> SpectrumResult:
    dims = [int(d) for d in dims]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be increasing")
    if dims[-1] > 512:
        raise ValueError("max dim is 512")
    energies = []
    for d in dims:
        w = scipy.linalg.eigvalsh(bare_hamiltonian(params, d).real, subset_by_index=[0, levels - 1])
        energies.append(list(w))
    if len(dims) > 1:
        diff = np.abs(np.array(energies[-1]) - np.array(energies[-2]))
        converged = list(diff < tol)
    else:
        converged = [False] * levels
    return SpectrumResult(dims=dims, energies=energies, converged=converged)


def heisenberg_evolve(op: np.ndarray, params: PhysParams | None, t: float,
                      hamiltonian: np.ndarray | None = None) -> np.ndarray:
    """exp(iHt) op exp(-iHt) through the eigen-decomposition of H.

    ``hamiltonian`` must be given in the same basis as ``op``; by default
    the bare-basis Hamiltonian of ``params`` at op's dimension is used.
    """
    dim = op.shape[0]
    H = bare_hamiltonian(params, dim) if hamiltonian is None else hamiltonian
    if H.shape != op.shape:
        raise ValueError(f"dimension mismatch: H {H.shape} vs op {op.shape}")
    w, V = scipy.linalg.eigh(0.5 * (H + H.conj().T))
    U = (V * np.exp(1j * w * t)) @ V.conj().T
    return U @ op @ U.conj().T


def _energy(q, p, params):
    return p**2 / (2 * params.m) + 0.5 * params.m * params.omega**2 * q**2 + 0.25 * params.m * params.lam * q**4


def classical_run(params: PhysParams, amplitude: float, periods: int = 6,
                  steps_per_period: int = 2000, drift_tol: float = 1e-8) -> ClassicalRun:
    """RK4 for q'' + omega^2 q + lam q^3 = 0 from (amplitude, 0)."""
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    m, w, lam = params.m, params.omega, params.lam
    w_est = w * (1.0 + 3.0 * lam * amplitude**2 / (8.0 * w**2))
    dt = (2 * math.pi / w_est) / steps_per_period
    n = periods * steps_per_period

    def f(y):
        q, p = y
        return np.array([p / m, -m * (w**2 * q + lam * q**3)])

    y = np.array([amplitude, 0.0])
    out = np.empty((n + 1, 3))
    out[0] = (0.0, *y)
    for i in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = ((i + 1) * dt, *y)
    E = _energy(out[:, 1], out[:, 2], params)
    drift = float(np.max(np.abs(E - E[0])) / abs(E[0]))
    if drift > drift_tol:
        raise EnergyDriftError(f"energy drift {drift:.3g} exceeds {drift_tol}")

    # positive-going zero crossings of q, linearly interpolated
    t, q = out[:, 0], out[:, 1]
    idx = np.nonzero((q[:-1] < 0) & (q[1:] >= 0))[0]
    crossings = t[idx] - q[idx] * (t[idx + 1] - t[idx]) / (q[idx + 1] - q[idx])
    if len(crossings) < 2:
        raise RuntimeError("fewer than two zero crossings; increase periods")
    period = float(np.mean(np.diff(crossings)))
    return ClassicalRun(q0=amplitude, p0=0.0, dt=dt, samples=out, period=period, energy_drift=drift)


def classical_frequency(params: PhysParams, amplitude: float, **kwargs) -> tuple[float, float]:
    """(numerical angular frequency, first-order Lindstedt value)."""
    run = classical_run(params, amplitude, **kwargs)
    w = params.omega
    return 2 * math.pi / run.period, w * (1.0 + 3.0 * params.lam * amplitude**2 / (8.0 * w**2))
