"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines are printed in the
terminal summary) or as a script.
"""
import math
import time

import numpy as np

from escapelab.diagnostics import dbt_curve, gap_statistics
from escapelab.dimension import (
    dimension_drop_asymptotics,
    family_operator,
    lambda_prime,
    survivor_bowen_parameter,
    survivor_dimension,
)
from escapelab.escape import (
    escape_asymptotics,
    escape_rate,
    extrapolate_limit,
    log_survival_probability_exact,
    monte_carlo_survival,
    survival_probability_exact,
)
from escapelab.gdms import get_instance
from escapelab.holes import (
    Center,
    aperiodic_center,
    ball_sandwich,
    center_from_point,
    classify_center,
    cylinder_hole_sequence,
)
from escapelab.induce import build_induced, kac_check, ldp_rate, tail_decay, transfer_escape_rate
from escapelab.symbolic import StructuralError
from escapelab.thermo import Potential, gibbs_state

from conftest import INSTANCE_NAMES, natural_state, nonperiodic_center, record_criterion

LOG3 = math.log(3)


def doubling_escape(center, gibbs=None, levels=range(1, 21)):
    g = get_instance("doubling")
    gibbs = gibbs or gibbs_state(g.family().at(1.0))
    if isinstance(center, str):
        cls = classify_center(g, center)
        center = center_from_point(g, center, 128)
    else:
        cls = classify_center(g.subshift, center)
    start = time.perf_counter()
    h = cylinder_hole_sequence(g, center, max(levels), gibbs, cls)
    rep = escape_asymptotics(gibbs, h, list(levels))
    return rep, time.perf_counter() - start


def check_escape_limit(number, center, target, last_tol, limit_tol, gibbs=None):
    rep, secs = doubling_escape(center, gibbs)
    last = rep.rows[-1].ratio
    lim = rep.extrapolation.limit
    ok_last = last_tol is None or abs(last - target) <= last_tol * target
    ok_lim = abs(lim - target) <= limit_tol * target
    ok = ok_last and ok_lim and secs < 60
    detail = (f"ratio(n=20)={last:.6f} limit={lim:.7f} target={target} "
              f"(tol {'' if last_tol is None else f'{last_tol:.1%} / '}{limit_tol:.1%}) time={secs:.2f}s")
    record_criterion(number, ok, detail)
    assert ok, detail


def test_criterion_01_fixed_point():
    check_escape_limit(1, "0", 0.5, 0.02, 0.005)


def test_criterion_02_period_two():
    check_escape_limit(2, "1/3", 0.75, 0.02, 0.005)


def test_criterion_03_aperiodic():
    check_escape_limit(3, aperiodic_center(), 1.0, None, 0.02)


def test_criterion_04_gibbs_weighted():
    check_escape_limit(4, "0", 0.7, None, 0.02, gibbs_state(Potential.bernoulli([0.3, 0.7])))


def test_criterion_05_dimension_drop():
    g = get_instance("cantor3")
    b = math.log(2) / LOG3
    gibbs_b = gibbs_state(g.family().at(b), n_check=0)
    start = time.perf_counter()
    out = {}
    for label, center in (("aperiodic", aperiodic_center()), ("periodic", Center.periodic((0,)))):
        h = cylinder_hole_sequence(g, center, 14, gibbs_b)
        out[label] = dimension_drop_asymptotics(g, h).extrapolation.limit
    secs = time.perf_counter() - start
    target_a = 1 / LOG3
    target_p = (2 / 3) / LOG3  # the stated periodic target
    ok_a = abs(out["aperiodic"] - target_a) <= 0.05 * target_a
    ok_p = abs(out["periodic"] - target_p) <= 0.05 * target_p
    ok = ok_a and ok_p and secs < 120
    detail = (f"aperiodic limit={out['aperiodic']:.5f} vs {target_a:.5f} [{'ok' if ok_a else 'off'}]; "
              f"periodic limit={out['periodic']:.5f} vs {target_p:.5f} [{'ok' if ok_p else 'off'}; "
              f"(1-3^-b)/log3={(1 - 3 ** -b) / LOG3:.5f}] time={secs:.2f}s")
    record_criterion(5, ok, detail)
    assert ok, detail


def criterion_centers(name):
    return [nonperiodic_center(name), Center.periodic((1,) if name == "golden_thirds" else (0,))]


def test_criterion_06_survivor_dimension_identity():
    worst, count = 0.0, 0
    for name in INSTANCE_NAMES:
        g = get_instance(name)
        for center in criterion_centers(name):
            for n in range(1, 11):
                words = [center.prefix(n)]
                a = survivor_dimension(g, words).value
                b = survivor_bowen_parameter(g, words).value
                worst = max(worst, abs(a - b))
                count += 1
    ok = worst <= 1e-9
    detail = f"max |b_n - Bowen(survivor system)| = {worst:.2e} over {count} holes (tol 1e-9)"
    record_criterion(6, ok, detail)
    assert ok, detail


def test_criterion_07_derivative_law():
    worst = 0.0
    h = 1e-6
    for name in INSTANCE_NAMES:
        g = get_instance(name)
        for center in criterion_centers(name):
            for n in range(1, 11):
                words = [center.prefix(n)]
                try:
                    op = family_operator(g, words)
                except StructuralError:
                    continue
                if op.log_radius(0.0) == -math.inf:
                    continue
                for t in np.linspace(0.1, 1.9, 10):
                    fd = (math.exp(op.log_radius(t + h)) - math.exp(op.log_radius(t - h))) / (2 * h)
                    an = lambda_prime(g, words, t, op=op)
                    worst = max(worst, abs(an - fd) / abs(fd))
    g = get_instance("cantor3")
    b = math.log(2) / LOG3
    at_b = lambda_prime(g, [], b)
    err_b = abs(at_b + LOG3)
    ok = worst <= 1e-6 and err_b <= 1e-8
    detail = f"max rel |lam' - FD| = {worst:.2e} (tol 1e-6); lam'(b) + log3 = {err_b:.1e} (tol 1e-8)"
    record_criterion(7, ok, detail)
    assert ok, detail


def test_criterion_08_kac():
    ind = build_induced(gibbs_state(Potential.bernoulli([0.5, 0.5])), [(1,)], 60)
    kac = kac_check(ind)
    ok = kac.holds and kac.width <= 1e-10 and kac.rhs == 2.0
    detail = f"int tau dmu_F = {kac.lhs:.15f}, 1/mu(F) = {kac.rhs}, gap {kac.gap:.1e} <= width {kac.width:.1e}"
    record_criterion(8, ok, detail)
    assert ok, detail


def test_criterion_09_ldp_hypotheses():
    ind = build_induced(gibbs_state(Potential.bernoulli([0.5, 0.5])), [(1,)], 60)
    td = tail_decay(ind)
    grid = sorted(set(np.round(np.linspace(-1.0, 0.5, 31), 12)) | {0.0})
    curve = ldp_rate(ind, grid, td.alpha)
    p0 = curve.pressure_at_zero()
    worst_gap = max(pt.gap for pt in curve.points if abs(pt.theta) >= 0.05)
    ok = curve.gap_negative(0.05) and abs(p0) <= 1e-10 and curve.convexity_min >= -1e-9
    detail = (f"max gap(theta) over |theta|>=0.05 = {worst_gap:.4f} (<0), P(0) = {p0:.1e}, "
              f"min second difference = {curve.convexity_min:.4f}")
    record_criterion(9, ok, detail)
    assert ok, detail


def test_criterion_10_rate_transfer():
    base_g = gibbs_state(Potential.bernoulli([0.5, 0.5]))
    ind = build_induced(base_g, [(1,)], 60)
    ig = gibbs_state(ind.potential, 1e-14, n_check=0)
    parts, ok = [], True
    for label, center in (("aperiodic", (1,) + aperiodic_center().prefix(127)),
                          ("(10)", Center.periodic((1, 0)).prefix(64))):
        rows = [transfer_escape_rate(ind, [center[:n]], n, ig) for n in range(2, 17)]
        base = extrapolate_limit([r.mu_B for r in rows], [r.base_ratio for r in rows]).limit
        induced = extrapolate_limit([r.mu_F_B for r in rows], [r.induced_ratio for r in rows]).limit
        rel = abs(base - induced) / abs(base)
        ok &= rel <= 0.05
        parts.append(f"{label}: base {base:.5f} induced {induced:.5f} ({rel:.2%})")
    detail = "; ".join(parts) + " (tol 5%)"
    record_criterion(10, ok, detail)
    assert ok, detail


def test_criterion_11_oracle_equivalence():
    k = 2000
    misses = []
    worst = 0.0
    for name in INSTANCE_NAMES:
        _, _, gibbs = natural_state(name)
        for center in criterion_centers(name):
            for n in range(1, 9):
                words = [center.prefix(n)]
                R = escape_rate(gibbs, words).R_n
                log_s = log_survival_probability_exact(gibbs, words, k)
                if math.isinf(R) and log_s == -math.inf:
                    continue
                diff = abs(-log_s / k - R)
                worst = max(worst, diff)
                if diff > 1e-3:
                    misses.append(f"{name}[{''.join(map(str, words[0]))}]={diff:.1e}")
    z_scores = []
    for name in INSTANCE_NAMES:
        _, _, gibbs = natural_state(name)
        words = [nonperiodic_center(name).prefix(3)]
        exact = survival_probability_exact(gibbs, words, 10)
        for seed in (1, 7, 13):
            mc = monte_carlo_survival(gibbs, words, 10, 1_000_000, seed)
            z_scores.append(abs(mc.estimate - exact) / mc.std_error)
    ok_mc = max(z_scores) <= 3
    ok = not misses and ok_mc
    detail = (f"spectral vs k=2000 survival: max diff {worst:.1e} (tol 1e-3), "
              f"{len(misses)} over tolerance {misses}; Monte Carlo max |z| = {max(z_scores):.2f} (tol 3)")
    record_criterion(11, ok, detail)
    assert ok, detail


def test_criterion_12_sandwich():
    probes = 0
    bad = 0
    for name in INSTANCE_NAMES:
        g, _, gibbs = natural_state(name)
        for word in g.subshift.admissible_words(6)[::7]:
            z = g.apply(word, 0.5)
            for kappa in (0.25, 0.5, 1.0):
                for p in dbt_curve(g, gibbs, z, kappa, [0.2, 0.07, 0.02, 0.006]):
                    lo = math.exp(-kappa * p.N)
                    probes += 1
                    bad += not (lo <= p.mu_ball <= math.exp(kappa) * lo)
                stats = gap_statistics(g, gibbs, z, kappa, [0.1, 0.03])
                for r, N in zip((0.1, 0.03), stats.values):
                    sw = ball_sandwich(g, gibbs, z, r, kappa)
                    probes += 1
                    bad += not (sw.sandwich_holds() and sw.N == N)
    ok = bad == 0
    detail = f"e^-kN <= mu(B) <= e^k e^-kN on {probes - bad}/{probes} probes"
    record_criterion(12, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    import sys

    failed = 0
    for key, fn in sorted(globals().items()):
        if key.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
