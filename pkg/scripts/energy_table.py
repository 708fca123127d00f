"""Leaf energies of a perturbed-rotation foliation against {n alpha} pi.

    python scripts/energy_table.py --n 3 --epsilon 0.05 --thetas 32 --csv energies.csv
"""

import argparse
import csv
import math
import time

from pseudorot.circle import frac_mul, golden_mean
from pseudorot.diagnostics import stokes_check
from pseudorot.foliation import build_foliation, induced_disk_map, verify_periodicity
from pseudorot.hamiltonian import MappingTorus, PerturbedRotation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--side", choices=["plus", "minus"], default="plus")
    ap.add_argument("--thetas", type=int, default=32)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    alpha = golden_mean()
    t0 = time.perf_counter()
    F = build_foliation(MappingTorus(args.n, PerturbedRotation(alpha, args.epsilon)), alpha, args.side, args.thetas,
                        progress=lambda j, th: print(f"  leaf {j + 1}/{args.thetas}", end="\r"))
    print(f"built in {time.perf_counter() - t0:.1f}s, Ns={F.problem.Ns}, gaps={len(F.gaps)}")
    target = math.pi * F.problem.gap
    rows = []
    for th, L in zip(F.thetas, F.leaves):
        if L is None:
            continue
        rep = stokes_check(L, F.problem)
        rows.append((th, L.e_omega, abs(L.e_omega - target) / target, max(rep.deviations.values())))
    worst = max(r[2] for r in rows)
    print(f"target {target:.6f} = pi * {frac_mul(args.n, alpha) if args.side == 'plus' else F.problem.gap:.6f}")
    print(f"max relative energy error {worst:.3e}, max stokes disagreement {max(r[3] for r in rows):.3e}")
    if F.complete:
        rep = verify_periodicity(induced_disk_map(F))
        print(f"periodicity residual {rep.residual:.3e} (tolerance {rep.tolerance:.3e})")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "e_omega", "rel_error", "stokes_disagreement"])
            w.writerows([[repr(float(v)) for v in r] for r in rows])


if __name__ == "__main__":
    main()
