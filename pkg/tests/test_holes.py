import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from escapelab.escape import survival_probability_exact
from escapelab.gdms import INSTANCES, get_instance, project_all
from escapelab.holes import (
    NON_PSEUDO_PERIODIC,
    UNIQUELY_PERIODIC,
    Center,
    ResolutionError,
    aperiodic_center,
    ball_hole_sequence,
    ball_sandwich,
    center_from_point,
    check_U_conditions,
    classify_center,
    cylinder_hole_sequence,
    n_kappa,
    periodic_inclusion_holds,
    periodic_weight,
    sqrt2_minus_1_digits,
    theoretical_escape_limit,
    validate_nesting,
)
from escapelab.symbolic import StructuralError, Subshift
from escapelab.thermo import Potential, gibbs_state

from conftest import INSTANCE_NAMES, natural_state, nonperiodic_center


def decimal_digits(n, base):
    getcontext().prec = int(n * math.log10(base)) + 30
    x = Decimal(2).sqrt() - 1
    out = []
    for _ in range(n):
        x *= base
        d = int(x)
        out.append(d)
        x -= d
    return tuple(out)


@pytest.mark.parametrize("base", [2, 3, 10])
def test_sqrt2_digits_match_decimal_oracle(base):
    assert sqrt2_minus_1_digits(200, base) == decimal_digits(200, base)


@pytest.mark.parametrize("z, kind, xi", [
    ("0", UNIQUELY_PERIODIC, (0,)),
    ("1/3", UNIQUELY_PERIODIC, (0, 1)),
    ("2/3", UNIQUELY_PERIODIC, (1, 0)),
    ("1/7", UNIQUELY_PERIODIC, (0, 0, 1)),
    ("3/10", NON_PSEUDO_PERIODIC, None),
])
def test_classify_doubling_points(z, kind, xi):
    cls = classify_center(get_instance("doubling"), z)
    assert cls.kind == kind and cls.xi == xi


def test_classify_symbolic_centers():
    s = Subshift.full(2)
    assert classify_center(s, aperiodic_center()).kind == NON_PSEUDO_PERIODIC
    assert classify_center(s, Center.periodic((0, 1, 1))).xi == (0, 1, 1)
    assert classify_center(s, Center.periodic((0, 1, 0, 1))).xi == (0, 1)


def test_dyadic_point_is_not_periodic():
    # 1/2 is coded by 1000... and by 0111..., neither of which is periodic
    assert classify_center(get_instance("doubling"), "1/2").kind == NON_PSEUDO_PERIODIC


def test_center_from_point_codes_the_point():
    g = get_instance("cantor3")
    c = center_from_point(g, "1/4", 30)
    assert c.prefix(6) == (0, 1, 0, 1, 0, 1)  # 1/4 = 0.020202... in base 3
    assert abs(g.apply(c.prefix(30), 0.0) - 0.25) < 3.0 ** -29


def test_nesting_and_inadmissible_center():
    s = Subshift.golden_mean()
    h = cylinder_hole_sequence(s, Center.periodic((1, 0)), 10, classification=None)
    validate_nesting(h)
    with pytest.raises(StructuralError):
        cylinder_hole_sequence(s, Center.periodic((0,)), 5)


@pytest.mark.parametrize("xi", [(0,), (0, 1), (0, 0, 1), (1, 0, 1, 1)])
def test_periodic_inclusion_u4b(xi):
    h = cylinder_hole_sequence(Subshift.full(2), Center.periodic(xi), 20)
    assert periodic_inclusion_holds(h)
    for n in h.level_numbers:
        assert (xi + h.words(n)[0])[:n] == h.words(n)[0]


GOLDEN = (1 + math.sqrt(5)) / 2
# largest mu_b mass of a single letter, which bounds mu(U_n)^(1/n) for these measures
DECLARED_RHO = {
    "cantor3": 0.5,
    "doubling": 0.5,
    "half_quarter": 1 / GOLDEN,                   # (1/2)^b with 2^-b + 4^-b = 1
    "golden_thirds": GOLDEN ** 2 / (1 + GOLDEN ** 2),  # Parry mass of [1]
}


@pytest.mark.parametrize("name", INSTANCE_NAMES)
def test_measured_decay_below_declared(name):
    g, b, gibbs = natural_state(name)
    h = cylinder_hole_sequence(g, nonperiodic_center(name), 16, gibbs)
    assert h.decay_rho <= DECLARED_RHO[name] + 1e-12
    conds = check_U_conditions(h, gibbs)
    assert all(c.status in ("pass", "n/a") for c in conds.values())


def test_lebesgue_decay_exactly_half():
    g, _, gibbs = natural_state("doubling")
    h = cylinder_hole_sequence(g, Center.periodic((0,)), 20, gibbs)
    assert h.decay_rho <= 0.5 + 1e-12
    assert h.mu[20] == pytest.approx(2.0 ** -20, rel=1e-12)


def test_periodic_weights():
    g = gibbs_state(Potential.bernoulli([0.3, 0.7]))
    assert periodic_weight(g, (0,)) == pytest.approx(0.3)
    assert periodic_weight(g, (0, 1)) == pytest.approx(0.21)
    cls = classify_center(Subshift.full(2), Center.periodic((0,)))
    assert theoretical_escape_limit(g, cls) == pytest.approx(0.7)


@given(st.floats(1e-12, 1.0), st.floats(0.05, 2.0))
def test_n_kappa_sandwich(mu, kappa):
    n = n_kappa(mu, kappa)
    assert math.exp(-kappa * n) <= mu * (1 + 1e-12)
    assert mu <= math.exp(kappa) * math.exp(-kappa * n) * (1 + 1e-12)


def test_n_kappa_rejects_empty_ball():
    with pytest.raises(ValueError):
        n_kappa(0.0, 0.5)


def ball_survival_bounds(g, gibbs, z, r, k, m=8):
    """Brute-force bounds for mu{x : pi(sigma^i x) not in B(z, r), 1 <= i <= k}."""
    kk = g.subshift.alphabet_size
    codes_m, lo, hi = project_all(g, m)
    inside = (lo >= z - r) & (hi <= z + r)
    apart = (hi <= z - r) | (lo >= z + r)
    codes, mu = gibbs.cylinder_measures(k + m + 1)
    sure_alive = np.ones(len(codes), dtype=bool)
    maybe_alive = np.ones(len(codes), dtype=bool)
    for i in range(1, k + 1):
        window = (codes // kk ** (k + 1 - i)) % kk ** m
        pos = np.searchsorted(codes_m, window)
        sure_alive &= apart[pos]
        maybe_alive &= ~inside[pos]
    return float(mu[sure_alive].sum()), float(mu[maybe_alive].sum())


@pytest.mark.parametrize("name", INSTANCE_NAMES)
@given(data=st.data())
@settings(max_examples=12, deadline=None)
def test_ball_sandwich_orders_survival(name, data):
    g, _, gibbs = natural_state(name)
    word = data.draw(st.sampled_from(g.subshift.admissible_words(10)))
    z = g.apply(word, 0.5 * sum(g.interval))
    r = data.draw(st.floats(0.02, 0.2))
    k = data.draw(st.integers(1, 5))
    kappa = data.draw(st.sampled_from([0.5, 1.0]))
    try:
        sw = ball_sandwich(g, gibbs, z, r, kappa)
    except ResolutionError:
        assume(False)
    assert sw.sandwich_holds()
    assert gibbs.measure_of_words(sw.inner) <= sw.mu_ball + sw.bracket_width + 1e-12
    assert gibbs.measure_of_words(sw.outer) >= sw.mu_ball - sw.bracket_width - 1e-12
    lower, upper = ball_survival_bounds(g, gibbs, z, r, k)
    s_outer = survival_probability_exact(gibbs, sw.outer, k) if sw.outer else 1.0
    s_inner = survival_probability_exact(gibbs, sw.inner, k) if sw.inner else 1.0
    assert s_outer <= upper + 1e-12
    assert lower <= s_inner + 1e-12


def test_ball_hole_sequence_is_nested_and_admissible():
    g, _, gibbs = natural_state("cantor3")
    radii = [0.3 * 3.0 ** -j for j in range(6)]
    h, kept = ball_hole_sequence(g, gibbs, 0.25, radii, 0.5)
    validate_nesting(h)
    assert [sw.N for sw in kept] == sorted({sw.N for sw in kept})
    conds = check_U_conditions(h, gibbs)
    assert conds["U1"].status == "pass" and conds["U4"].status == "pass"


def test_hole_sequence_json():
    h = cylinder_hole_sequence(Subshift.full(2), Center.periodic((0, 1)), 4, gibbs_state(Potential.bernoulli([0.5, 0.5])))
    doc = __import__("json").loads(h.to_json())
    assert doc["classification"]["xi"] == [0, 1]
    assert [lv["words"] for lv in doc["levels"]] == [["0"], ["01"], ["010"], ["0101"]]
