"""Grid refinement of rotation-model leaves against the closed form.

    python scripts/refinement_study.py --n 1 2 3 --levels 3
"""

import argparse
import time

import numpy as np

from pseudorot.circle import golden_mean
from pseudorot.floer import FloerProblem, model_grid, solve_leaf
from pseudorot.hamiltonian import MappingTorus, RotationHamiltonian


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--levels", type=int, default=3, help="number of grids, each twice as fine")
    ap.add_argument("--Ns", type=int, default=64)
    ap.add_argument("--Nt", type=int, default=256)
    ap.add_argument("--theta", type=float, default=0.7)
    args = ap.parse_args()

    alpha = golden_mean()
    print(f"{'n':>3} {'Ns':>5} {'Nt':>5} {'sup error':>11} {'ratio':>6} {'seconds':>8}")
    for n in args.n:
        P = FloerProblem(MappingTorus(n, RotationHamiltonian(alpha)), alpha, "plus", args.Ns, args.Nt)
        prev = None
        for _ in range(args.levels):
            t0 = time.perf_counter()
            L = solve_leaf(P, args.theta)
            err = float(np.max(np.abs(L.z - model_grid(P, args.theta))))
            ratio = f"{prev / err:6.2f}" if prev else "     -"
            print(f"{n:>3} {P.Ns:>5} {P.Nt:>5} {err:11.3e} {ratio} {time.perf_counter() - t0:8.2f}")
            prev, P = err, P.refined()


if __name__ == "__main__":
    main()
