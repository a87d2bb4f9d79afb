import math

import numpy as np
import pytest

from escapelab.dimension import (
    dimension_drop_asymptotics,
    family_operator,
    lambda_prime,
    lambda_t_n,
    periodic_derivative,
    second_derivative_probe,
    survivor_bowen_parameter,
    survivor_dimension,
    theoretical_drop_limit,
)
from escapelab.escape import escape_rate
from escapelab.gdms import get_instance, lyapunov
from escapelab.holes import Center, classify_center, cylinder_hole_sequence

from conftest import INSTANCE_NAMES, natural_state, nonperiodic_center

GOLDEN = (1 + math.sqrt(5)) / 2
T_GRID = np.linspace(0.1, 1.9, 10)


def test_lambda_closed_forms():
    g = get_instance("doubling")
    assert lambda_t_n(g, [(0,)], 1.0) == pytest.approx(0.5)
    assert lambda_t_n(g, [(0, 0)], 0.5) == pytest.approx(GOLDEN * 2 ** -0.5, rel=1e-13)
    assert lambda_t_n(g, [], 5.0) == pytest.approx(2.0 ** -4, rel=1e-13)
    with pytest.raises(ValueError):
        lambda_t_n(g, [(0,)], -0.1)


def test_survivor_dimension_closed_forms():
    g = get_instance("doubling")
    assert survivor_dimension(g, [(0,)]).degenerate
    assert survivor_dimension(g, [(0, 0)]).value == pytest.approx(math.log2(GOLDEN), abs=1e-12)
    c3 = get_instance("cantor3")
    # avoiding 11 in the Cantor set: golden-mean words at ratio 1/3
    assert survivor_dimension(c3, [(1, 1)]).value == pytest.approx(math.log(GOLDEN) / math.log(3), abs=1e-12)


def test_lambda_prime_at_bowen_is_minus_lyapunov():
    g = get_instance("cantor3")
    b = math.log(2) / math.log(3)
    assert lambda_prime(g, [], b) == pytest.approx(-math.log(3), rel=1e-8)


@pytest.mark.parametrize("name", INSTANCE_NAMES)
def test_lambda_prime_matches_finite_differences(name):
    g = get_instance(name)
    center = nonperiodic_center(name)
    h = 1e-6
    for n in range(1, 11):
        words = [center.prefix(n)]
        try:
            op = family_operator(g, words)
        except Exception:
            continue  # nothing survives
        for t in T_GRID:
            fd = (math.exp(op.log_radius(t + h)) - math.exp(op.log_radius(t - h))) / (2 * h)
            assert lambda_prime(g, words, t, op=op) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("name", INSTANCE_NAMES)
@pytest.mark.parametrize("periodic", [False, True])
def test_survivor_dimension_equals_subsystem_bowen(name, periodic):
    g = get_instance(name)
    center = Center.periodic((1, 0)) if periodic else nonperiodic_center(name)
    for n in range(1, 11):
        words = [center.prefix(n)]
        a = survivor_dimension(g, words)
        b = survivor_bowen_parameter(g, words)
        assert a.value == pytest.approx(b.value, abs=1e-9)


@pytest.mark.parametrize("name", INSTANCE_NAMES)
def test_drop_root_order_and_escape_consistency(name):
    g, b, gibbs_b = natural_state(name)
    center = nonperiodic_center(name)
    h = cylinder_hole_sequence(g, center, 12, gibbs_b)
    rep = dimension_drop_asymptotics(g, h)
    chi = rep.chi
    for row in rep.rows:
        assert b - row.b_n > 0
    last = rep.rows[-1]
    assert 0.5 <= last.drop_ratio * chi <= 1.5
    for row in rep.rows[len(rep.rows) // 2:]:
        R = escape_rate(gibbs_b, h.words(row.n)).R_n
        assert abs(R - (b - row.b_n) * chi) <= 0.2 * R


def test_periodic_drop_limit_and_derivative():
    g = get_instance("cantor3")
    b = math.log(2) / math.log(3)
    _, _, gibbs_b = natural_state("cantor3")
    cls = classify_center(g.subshift, Center.periodic((0,)))
    assert periodic_derivative(g, (0,)) == pytest.approx(1 / 3)
    assert periodic_derivative(g, (0, 1)) == pytest.approx(1 / 9)
    expected = (1 - 3 ** -b) / math.log(3)
    assert theoretical_drop_limit(g, gibbs_b, math.log(3), cls) == pytest.approx(expected, rel=1e-12)


def test_second_derivative_probe_is_finite():
    g = get_instance("cantor3")
    assert 0 < second_derivative_probe(g, [(0, 1, 1)], np.linspace(0.2, 1.0, 9)) < 10


def test_lyapunov_consistency():
    g = get_instance("half_quarter")
    b = survivor_dimension(g, []).value
    chi = lyapunov(g, b)
    w0, w1 = 0.5 ** b, 0.25 ** b
    assert chi == pytest.approx(w0 * math.log(2) + w1 * math.log(4), rel=1e-10)


def test_periodic_drop_extrapolates_to_weighted_limit():
    g, b, gibbs_b = natural_state("cantor3")
    h = cylinder_hole_sequence(g, Center.periodic((0,)), 14, gibbs_b)
    rep = dimension_drop_asymptotics(g, h)
    # 3^-b = 1/2 exactly, so the limit is (1 - 1/2) / log 3
    assert rep.extrapolation.limit == pytest.approx(0.5 / math.log(3), rel=1e-3)
    assert rep.theoretical_limit == pytest.approx(0.5 / math.log(3), rel=1e-12)
    assert rep.extra["periodic_derivative"] == pytest.approx(1 / 3)
