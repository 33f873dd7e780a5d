import math

import numpy as np
import pytest

from qduffing.meanfield import PhysParams, solve_omega
from qduffing.oracle import (
    EnergyDriftError, bare_hamiltonian, classical_frequency, classical_run, exact_diagonalize,
    heisenberg_evolve,
)


@pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
def test_free_spectrum_is_harmonic(omega):
    spec = exact_diagonalize(PhysParams(omega=omega), dims=(64, 96), levels=8)
    assert np.allclose(spec.energies[-1], omega * (np.arange(8) + 0.5), atol=1e-12)
    assert all(spec.converged)


@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0, 2.0])
def test_variational_bound(lam):
    sol = solve_omega(PhysParams(lam=lam))
    spec = exact_diagonalize(sol.params, dims=(256, 384), levels=4)
    assert spec.converged[0]
    assert sol.E0 > spec.ground_energy()


def test_variational_gap_at_unit_coupling():
    sol = solve_omega(PhysParams(lam=1.0))
    e = exact_diagonalize(sol.params, dims=(256, 384), levels=2).ground_energy()
    assert 0 < (sol.E0 - e) / e < 0.05


def _second_order_sum(lam, dim=64):
    # brute-force sum over intermediate states of V = (lam/4) q^4 in the free basis
    H0 = bare_hamiltonian(PhysParams(lam=0.0), dim).real
    V = bare_hamiltonian(PhysParams(lam=lam), dim).real - H0
    e = np.diag(H0)
    return -sum(V[n, 0] ** 2 / (e[n] - e[0]) for n in range(1, dim))


def test_second_order_sum_matches_closed_form():
    g = 0.1 / 4
    assert _second_order_sum(0.1) == pytest.approx(-21 / 8 * g**2, rel=1e-12)


@pytest.mark.parametrize("lam", [0.01, 0.05, 0.1])
def test_rayleigh_schroedinger(lam):
    e = exact_diagonalize(PhysParams(lam=lam), dims=(96, 128), levels=1).ground_energy()
    first = 0.5 + 3 * lam / 16
    g = lam / 4
    # the first-order shift is accurate up to the second-order term 21 g^2 / 8
    assert abs(e - first) < 21 / 8 * g**2 * 1.2
    # third order is 333 g^3 / 16
    assert abs(e - first - _second_order_sum(lam)) < 333 / 16 * g**3 * 1.2


def test_first_order_shift_at_weak_coupling():
    e = exact_diagonalize(PhysParams(lam=0.01), dims=(64, 96), levels=1).ground_energy()
    assert e == pytest.approx(0.5 + 3 * 0.01 / 16, abs=1e-3)


def test_spectrum_json_roundtrip():
    spec = exact_diagonalize(PhysParams(lam=0.3), dims=(48, 64), levels=3)
    js = spec.to_json()
    assert js["dims"] == [48, 64]
    assert len(js["energies"]) == 2 and len(js["energies"][0]) == 3
    assert all(isinstance(c, bool) for c in js["converged"])


@pytest.mark.parametrize("dims", [(64, 48), (64, 64), (256, 600)])
def test_dims_validation(dims):
    with pytest.raises(ValueError):
        exact_diagonalize(PhysParams(), dims=dims)


def test_heisenberg_evolution_of_free_annihilator():
    p = PhysParams(omega=1.3)
    dim = 32
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    t = 0.77
    assert np.allclose(heisenberg_evolve(a, p, t), a * np.exp(-1j * 1.3 * t), atol=1e-12)


def test_heisenberg_evolution_conserves_hamiltonian():
    p = PhysParams(lam=0.5)
    H = bare_hamiltonian(p, 40)
    assert np.allclose(heisenberg_evolve(H, p, 2.1), H, atol=1e-10)


def test_heisenberg_dimension_mismatch():
    with pytest.raises(ValueError):
        heisenberg_evolve(np.eye(10), PhysParams(), 1.0, hamiltonian=np.eye(12))


def test_classical_harmonic_period():
    run = classical_run(PhysParams(omega=2.0), 0.7)
    assert run.period == pytest.approx(math.pi, rel=1e-9)
    assert run.energy_drift < 1e-8
    assert run.to_csv().splitlines()[0] == "t,q,p"


@pytest.mark.parametrize("a", [1.0, 0.5, 0.25])
def test_lindstedt_error_is_second_order(a):
    lam = 0.1
    num, lind = classical_frequency(PhysParams(lam=lam), a)
    eps = lam * a * a
    # next Lindstedt coefficient is -21/256
    assert (num - lind) / eps**2 == pytest.approx(-21 / 256, rel=0.05)


def test_frequency_shift_ratio():
    p = PhysParams(lam=0.1)
    shift = [classical_frequency(p, a)[0] - 1.0 for a in (1.0, 0.5)]
    assert shift[0] / shift[1] == pytest.approx(4.0, rel=0.1)


def test_energy_drift_gate():
    with pytest.raises(EnergyDriftError):
        classical_run(PhysParams(lam=1.0), 2.0, steps_per_period=40)


def test_classical_rejects_bad_amplitude():
    with pytest.raises(ValueError):
        classical_run(PhysParams(), 0.0)
