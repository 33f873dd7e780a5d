"""Order-by-order scaling of the generator residuals under halving of m*lam.

Frozen mode: Omega, u and b3 of the reference coupling are kept and the
explicit m*lam is scaled.  Re-solved: each coupling gets its own mean field.
"""

import argparse

from qduffing.coeff_flow import linearized_coefficients
from qduffing.meanfield import PhysParams, solve_omega
from qduffing.operator_forge import (
    DensitySpec, build_generators, build_h_sectors, commutator_defect, density_liouville_residual,
    heisenberg_defect, liouville_residual,
)


def metrics(sol, scale, dim):
    fn = lambda t: linearized_coefficients(sol, t)
    g = build_generators(sol, fn(0.0), scale=scale)
    return {
        "liouville": liouville_residual(g, build_h_sectors(sol), sol, dim),
        "commutator": commutator_defect(g, dim),
        "heisenberg": heisenberg_defect(sol, fn, 0.25 / sol.Omega, scale=scale, band=8),
        "rho": density_liouville_residual(sol, fn, DensitySpec(omega0=sol.Omega, dim=dim), scale=scale),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05])
    ap.add_argument("--nfock", type=int, default=64)
    args = ap.parse_args()
    print(f"{'lam':>6s} {'kind':>9s} " + " ".join(f"{k:>11s}" for k in ("liouville", "commutator", "heisenberg", "rho")))
    for lam in args.lambdas:
        sol = solve_omega(PhysParams(lam=lam))
        full, half = metrics(sol, 1.0, args.nfock), metrics(sol, 0.5, args.nfock)
        print(f"{lam:6.3f} {'frozen':>9s} " + " ".join(f"{full[k] / half[k]:11.4f}" for k in full))
        other = metrics(solve_omega(PhysParams(lam=lam / 2)), 1.0, args.nfock)
        print(f"{lam:6.3f} {'re-solved':>9s} " + " ".join(f"{full[k] / other[k]:11.4f}" for k in full))


if __name__ == "__main__":
    main()
