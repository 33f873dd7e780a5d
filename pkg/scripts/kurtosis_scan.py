"""Excess kurtosis and purity of the first-order density operator versus coupling."""

import argparse

from qduffing.coeff_flow import linearized_coefficients
from qduffing.meanfield import PhysParams, solve_omega
from qduffing.operator_forge import DensitySpec, build_generators, density_operator, perturbative_domain, quadrature_cumulants


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 0.0125, 0.025, 0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--nfock", type=int, default=128)
    ap.add_argument("--domain-ratio", type=float, default=1.0)
    args = ap.parse_args()
    print("lambda,alpha,domain_states,q2,kurtosis_excess,purity")
    for lam in args.lambdas:
        sol = solve_omega(PhysParams(lam=lam))
        g = build_generators(sol, linearized_coefficients(sol, 0.0))
        spec = DensitySpec(omega0=sol.Omega, dim=args.nfock, domain_ratio=args.domain_ratio)
        c = quadrature_cumulants(density_operator(g, spec), sol)
        n = perturbative_domain(g.a_op, args.nfock, args.domain_ratio)
        print(f"{lam:g},{sol.alpha:.6f},{n},{c['q2']:.10f},{c['kurtosis_excess']:.10f},{c['purity']:.10f}")


if __name__ == "__main__":
    main()
