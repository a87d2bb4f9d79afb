"""Dimension drop (b - b_n) / mu_b(U_n) of survivor sets in the middle-thirds Cantor set."""
import argparse
import math
from pathlib import Path

from escapelab.dimension import dimension_drop_asymptotics
from escapelab.gdms import bowen_parameter, get_instance
from escapelab.holes import Center, aperiodic_center, cylinder_hole_sequence
from escapelab.thermo import gibbs_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default="cantor3")
    ap.add_argument("--levels", type=int, default=14)
    ap.add_argument("--out-dir", default="results/dimdrop")
    args = ap.parse_args()

    g = get_instance(args.system)
    b = bowen_parameter(g).value
    gibbs_b = gibbs_state(g.family().at(b), n_check=0)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    centers = {"aperiodic": aperiodic_center(), "fixed-0": Center.periodic((0,)),
               "period2-01": Center.periodic((0, 1))}
    print(f"b = {b:.12f}")
    for label, center in centers.items():
        h = cylinder_hole_sequence(g, center, args.levels, gibbs_b)
        rep = dimension_drop_asymptotics(g, h)
        (out / f"{label}.csv").write_text(rep.to_csv())
        print(f"{label:<12} chi={rep.chi:.6f} limit={rep.extrapolation.limit:.6f} "
              f"theory={rep.theoretical_limit:.6f} 1/chi={1 / rep.chi:.6f}")
    print(f"log 3 = {math.log(3):.6f}")


if __name__ == "__main__":
    main()
