"""Returning disks, blow-up rotation numbers and periodic-point scans on small examples."""

import math

from pseudorot.annulus import AnnulusMapLift, blow_up, periodic_point_scan, returning_disk_search
from pseudorot.anosov_katok import conjugated_rotation, make_conjugator
from pseudorot.circle import golden_mean
from pseudorot.diskmap import PolarGrid, rotation_map


def main():
    twist = returning_disk_search(AnnulusMapLift.twist(), 0.02, max_n=10)
    print(f"twist map: {len(twist.positive)} positive, {len(twist.negative)} negative -> {twist.implication}")
    a = float(golden_mean())
    rigid = returning_disk_search(AnnulusMapLift.rotation(a), 0.02, max_n=50)
    print(f"golden rotation: {rigid.status}")

    g = make_conjugator([{"type": "twist", "amplitude": 0.3}, {"type": "sector", "q": 5, "amplitude": 0.1}],
                        PolarGrid(32, 128))
    C = conjugated_rotation(2, 5, g)
    inner, outer = blow_up(C.exact).boundary_rotation_numbers()
    pts = periodic_point_scan(C.exact, max_period=10, nr=6, ntheta=24)
    print(f"conjugated 2/5 rotation: boundary rotation numbers {inner:.4f}, {outer:.4f}; "
          f"{len(pts)} orbits, periods {sorted({p.period for p in pts})}")
    none = periodic_point_scan(rotation_map(2 * math.pi * a), max_period=50)
    print(f"golden rotation periodic points up to period 50: {len(none)}")


if __name__ == "__main__":
    main()
