"""Ball holes: inner/outer cylinder sandwiches, their escape ratios and boundary diagnostics."""
import argparse
from pathlib import Path

from escapelab.diagnostics import dbt_curve, probes_to_csv, wbt_curve
from escapelab.escape import ball_escape_asymptotics
from escapelab.gdms import bowen_parameter, get_instance
from escapelab.holes import ball_hole_sequence
from escapelab.thermo import gibbs_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default="cantor3")
    ap.add_argument("--center", type=float, default=0.25)
    ap.add_argument("--kappa", type=float, default=0.5)
    ap.add_argument("--beta", type=float, default=2.0)
    ap.add_argument("--out-dir", default="results/balls")
    args = ap.parse_args()

    g = get_instance(args.system)
    gibbs = gibbs_state(g.family().at(bowen_parameter(g).value), n_check=0)
    radii = [0.3 * 0.6 ** j for j in range(14)]
    _, sandwiches = ball_hole_sequence(g, gibbs, args.center, radii, args.kappa)
    rep = ball_escape_asymptotics(gibbs, sandwiches)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ball_escape.csv").write_text(rep.to_csv())
    for side, ext in rep.extra["ball_extrapolation"].items():
        flag = "" if ext["reliable"] else "  (non-monotone tail, fit unreliable)"
        print(f"{side:>6} limit {ext['limit']:.5f} (+/- {ext['uncertainty']:.1e}){flag}")
    probes = wbt_curve(g, gibbs, args.center, args.beta, radii[:10])
    (out / "wbt.csv").write_text(probes_to_csv(probes))
    for w, d in zip(probes, dbt_curve(g, gibbs, args.center, args.kappa, radii[:10])):
        print(f"r={w.r:.5f} mu(B)={w.ball_mass:.3e} WBT={w.ratio:.3e} DBT={d.ratio:.3e} N={d.N}")


if __name__ == "__main__":
    main()
