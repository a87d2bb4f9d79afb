import math

import numpy as np
import pytest

from escapelab.diagnostics import (
    ball_mass_bracket,
    dbt_curve,
    gap_statistics,
    probes_to_csv,
    wbt_curve,
    wbt_verdict,
)
from escapelab.gdms import get_instance

from conftest import INSTANCE_NAMES, natural_state

RADII = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005]


def test_ball_mass_lebesgue():
    g, _, gibbs = natural_state("doubling")
    lo, hi, _ = ball_mass_bracket(g, gibbs, 0.3, 0.1, rel_width=1e-6)
    assert lo <= 0.2 <= hi and hi - lo < 1e-6
    lo, hi, _ = ball_mass_bracket(g, gibbs, 0.0, 0.25)
    assert lo == pytest.approx(0.25) and hi == pytest.approx(0.25)


def test_cantor_ball_mass():
    g, _, gibbs = natural_state("cantor3")
    lo, hi, _ = ball_mass_bracket(g, gibbs, 0.0, 1 / 3)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(0.5)


@pytest.mark.parametrize("name", INSTANCE_NAMES)
def test_sandwich_holds_for_every_probe(name):
    g, _, gibbs = natural_state(name)
    z = g.apply(g.subshift.admissible_words(7)[3], 0.37)
    for kappa in (0.3, 0.5, 1.0):
        for p in dbt_curve(g, gibbs, z, kappa, RADII):
            lo = math.exp(-kappa * p.N)
            assert lo <= p.mu_ball <= math.exp(kappa) * lo


def test_dyadic_ball_has_no_straddlers():
    g, _, gibbs = natural_state("doubling")
    (p,) = dbt_curve(g, gibbs, 0.5, 0.5, [0.25])
    assert p.mu_ball == pytest.approx(0.5) and p.N == 2
    assert p.n_straddlers == 0 and p.ratio == 0.0


def test_straddle_counting_bound_lebesgue():
    g, _, gibbs = natural_state("doubling")
    for p in dbt_curve(g, gibbs, 0.3141, 0.5, [0.11, 0.037, 0.0123]):
        assert p.ratio <= p.n_straddlers * 2.0 ** -p.N / p.mu_ball + 1e-12


def test_small_kappa_shrinks_straddle_ratio():
    g, _, gibbs = natural_state("doubling")
    coarse = dbt_curve(g, gibbs, 0.3141, 1.0, [0.05])[0].ratio
    fine = dbt_curve(g, gibbs, 0.3141, 0.25, [0.05])[0].ratio
    assert fine < coarse


@pytest.mark.parametrize("name", ["doubling", "cantor3", "half_quarter"])
def test_wbt_implies_dbt(name):
    g, _, gibbs = natural_state(name)
    z = g.apply((0, 1, 1, 0, 1), 0.2)
    wbt = wbt_curve(g, gibbs, z, 2.0, RADII)
    dbt = dbt_curve(g, gibbs, z, 0.5, RADII)
    for w, d in zip(wbt, dbt):
        if w.ratio < 0.05:
            assert d.ratio < 0.25


def test_wbt_lebesgue_decays_like_radius():
    g, _, gibbs = natural_state("doubling")
    probes = wbt_curve(g, gibbs, 0.5, 2.0, [0.1, 0.01])
    # mu(B) = 2r, the annulus has half-width w = 4r^2 on both sides: ratio 4w / 2r = 8r
    assert probes[-1].ratio == pytest.approx(8 * 0.01, rel=0.01)
    assert wbt_verdict(probes)
    assert probes_to_csv(probes).splitlines()[0] == "r,mu_ball,annulus_mass,ratio,bracket_width"


def test_wbt_huge_beta_is_below_resolution():
    g, _, gibbs = natural_state("doubling")
    (p,) = wbt_curve(g, gibbs, 0.3, 50.0, [0.1])
    assert p.ratio <= p.bracket_width + 1e-12


def test_wbt_rejects_non_decreasing_radii():
    g, _, gibbs = natural_state("doubling")
    with pytest.raises(ValueError):
        wbt_curve(g, gibbs, 0.5, 2.0, [0.1, 0.1])


@pytest.mark.parametrize("kappa", [0.25, 0.5, 1.0])
def test_gap_statistics_dyadic_grid(kappa):
    g, _, gibbs = natural_state("doubling")
    stats = gap_statistics(g, gibbs, 0.3, kappa, [2.0 ** -j for j in range(2, 14)])
    assert stats.max_gap == math.ceil(math.log(2) / kappa)
    assert list(stats.values) == sorted(stats.values)
    if kappa < math.log(2):  # each halving of r moves N by at least one
        assert len(stats.levels) == len(stats.values)
