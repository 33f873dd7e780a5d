"""Gaussian mean-field energy against exact diagonalization over a coupling grid."""

import argparse

import numpy as np

from qduffing.meanfield import PhysParams, solve_omega
from qduffing.oracle import exact_diagonalize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
    ap.add_argument("--dims", type=int, nargs=2, default=[256, 384])
    args = ap.parse_args()
    print("lambda,Omega,E_meanfield,E_exact,relative_gap,converged")
    for lam in args.lambdas:
        sol = solve_omega(PhysParams(lam=lam))
        spec = exact_diagonalize(sol.params, dims=args.dims, levels=1)
        e = spec.ground_energy()
        print(f"{lam:g},{sol.Omega:.12f},{sol.E0:.12f},{e:.12f},{(sol.E0 - e) / e:.3e},{spec.converged[0]}")


if __name__ == "__main__":
    main()
