"""Classical Duffing frequency against the mean-field frequency.

The classical amplitude is matched to the mean-field width, a**2 / 2 = |u|**2.
The comparison is reported, not gated.
"""

import argparse
import math

from qduffing.meanfield import PhysParams, solve_omega
from qduffing.oracle import classical_frequency


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.5, 1.0])
    args = ap.parse_args()
    print("lambda,Omega,amplitude,classical,lindstedt,meanfield_shift/classical_shift")
    for lam in args.lambdas:
        p = PhysParams(lam=lam)
        sol = solve_omega(p)
        a = math.sqrt(2 * sol.mode_norm2)
        num, lind = classical_frequency(p, a)
        print(f"{lam:g},{sol.Omega:.10f},{a:.6f},{num:.10f},{lind:.10f},{(sol.Omega - 1) / (num - 1):.4f}")


if __name__ == "__main__":
    main()
