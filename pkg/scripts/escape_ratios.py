"""Escape-rate ratios R_n / mu(U_n) for shrinking cylinder holes on the doubling map.

Writes one CSV per center and prints the extrapolated limits next to the
closed-form values 1 - exp(S_p phi(xi) - p P) (periodic) and 1 (otherwise).
"""
import argparse
from pathlib import Path

from escapelab.escape import escape_asymptotics
from escapelab.gdms import get_instance
from escapelab.holes import aperiodic_center, center_from_point, classify_center, cylinder_hole_sequence
from escapelab.thermo import Potential, gibbs_state

CENTERS = {"fixed-0": "0", "period2-third": "1/3", "period3-seventh": "1/7", "aperiodic": None}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=20)
    ap.add_argument("--p0", type=float, default=0.5, help="Bernoulli weight of digit 0")
    ap.add_argument("--out-dir", default="results/escape")
    args = ap.parse_args()

    g = get_instance("doubling")
    gibbs = gibbs_state(Potential.bernoulli([args.p0, 1 - args.p0]))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'center':<18}{'last ratio':>12}{'limit':>12}{'+/-':>10}{'theory':>10}")
    for label, z in CENTERS.items():
        if z is None:
            center = aperiodic_center()
            cls = classify_center(g.subshift, center)
        else:
            center = center_from_point(g, z, 128)
            cls = classify_center(g, z)
        h = cylinder_hole_sequence(g, center, args.levels, gibbs, cls)
        rep = escape_asymptotics(gibbs, h)
        (out / f"{label}.csv").write_text(rep.to_csv())
        ext = rep.extrapolation
        print(f"{label:<18}{rep.rows[-1].ratio:>12.6f}{ext.limit:>12.7f}{ext.uncertainty:>10.1e}"
              f"{rep.theoretical:>10.4f}")


if __name__ == "__main__":
    main()
