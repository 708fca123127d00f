"""C0 distance of the induced maps phi_n to the time-one map along depths.

    python scripts/convergence_study.py --epsilon 0.05 --depths 1 2 3 5 --csv converge.csv
"""

import argparse

from pseudorot.circle import golden_mean
from pseudorot.diagnostics import convergence_experiment
from pseudorot.hamiltonian import PerturbedRotation, RotationHamiltonian


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilon", type=float, default=0.05, help="0 selects the exact rotation model")
    ap.add_argument("--depths", type=int, nargs="+", default=[1, 2, 3, 5])
    ap.add_argument("--thetas", type=int, default=32)
    ap.add_argument("--side", choices=["auto", "plus", "minus"], default="auto")
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    alpha = golden_mean()
    H = RotationHamiltonian(alpha) if args.epsilon == 0 else PerturbedRotation(alpha, args.epsilon)
    table = convergence_experiment(H, alpha, args.depths, args.thetas, args.side)
    print(f"{'n':>4} {'{n alpha}':>10} {'d':>10} {'d_inv':>10} {'periodic':>10}")
    for r in table.rows:
        print(f"{r['n']:>4} {r['frac_n_alpha']:10.6f} {r['d_c0']:10.4g} {r['d_c0_inv']:10.4g} "
              f"{r['periodicity_residual']:10.3g}")
    for n, msg in table.gaps:
        print(f"gap at n={n}: {msg}")
    print("decreasing (10% slack):", table.decreasing)
    if args.csv:
        table.to_csv(args.csv)


if __name__ == "__main__":
    main()
