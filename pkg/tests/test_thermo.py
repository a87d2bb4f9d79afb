import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from escapelab.gdms import INSTANCES, get_instance
from escapelab.symbolic import StructuralError, Subshift
from escapelab.thermo import (
    ConvergenceError,
    Potential,
    birkhoff,
    build_transfer_matrix,
    format_potential,
    gibbs_state,
    normalize,
    parse_potential,
    pressure,
    pressure_derivative,
)

SHIFTS = {
    "full2": Subshift.full(2),
    "full3": Subshift.full(3),
    "golden": Subshift.golden_mean(),
}


@st.composite
def potentials(draw, max_depth=2):
    s = SHIFTS[draw(st.sampled_from(sorted(SHIFTS)))]
    m = draw(st.integers(1, max_depth))
    n = len(s.cylinder_index(m))
    vals = draw(st.lists(st.floats(-3.0, 1.0), min_size=n, max_size=n))
    return Potential(s, m, vals)


def brute_partition(p, n):
    """Sum of exp(S_n phi) over admissible words of length n + depth."""
    total = 0.0
    for w in p.subshift.admissible_words(n + p.depth):
        total += math.exp(birkhoff(p, w, n))
    return total


def markov_oracle(p, word):
    """Cylinder mass from an independently built Markov chain (depth-1 potentials)."""
    a = p.subshift.incidence.astype(float)
    m = a * np.exp(p.values)[:, None]  # weight of leaving letter i
    w, vr = np.linalg.eig(m)
    i = int(np.argmax(w.real))
    lam, v = w[i].real, np.abs(vr[:, i].real)
    P = m * v[None, :] / (lam * v[:, None])
    w2, vl = np.linalg.eig(P.T)
    pi = np.abs(vl[:, int(np.argmin(np.abs(w2 - 1)))].real)
    pi /= pi.sum()
    mass = pi[word[0]]
    for x, y in zip(word, word[1:]):
        mass *= P[x, y]
    return mass


@given(potentials(), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_partition_sum_matches_matrix_power(p, n):
    tm = build_transfer_matrix(p)
    mat = tm.matrix.toarray()
    vec = np.ones(mat.shape[0])
    for _ in range(n):
        vec = mat @ vec
    via_matrix = vec.sum() * math.exp(n * tm.log_scale)
    assert via_matrix == pytest.approx(brute_partition(p, n), rel=1e-12)


@given(potentials(max_depth=1), st.integers(1, 6), st.data())
@settings(max_examples=40, deadline=None)
def test_cylinder_mass_matches_markov_oracle(p, n, data):
    g = gibbs_state(p, n_check=0)
    word = data.draw(st.sampled_from(p.subshift.admissible_words(n)))
    assert g.cylinder_measure(word) == pytest.approx(markov_oracle(p, word), abs=1e-10)


@given(potentials(), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_cylinder_measures_are_invariant_probabilities(p, n):
    g = gibbs_state(p, n_check=0)
    codes, mu = g.cylinder_measures(n)
    assert mu.sum() == pytest.approx(1.0, abs=1e-12)
    words = p.subshift.admissible_words(n)
    # sigma-invariance: sum over letters a of mu([a w]) equals mu([w])
    for w in words[:8]:
        pre = sum(g.cylinder_measure((a,) + w) for a in range(p.subshift.alphabet_size))
        assert pre == pytest.approx(g.cylinder_measure(w), abs=1e-12)


def test_bernoulli_measures_are_products():
    g = gibbs_state(Potential.bernoulli([0.3, 0.7]))
    assert g.pressure == pytest.approx(0.0, abs=1e-14)
    assert g.cylinder_measure((0, 1, 1)) == pytest.approx(0.3 * 0.7 * 0.7, rel=1e-13)
    assert g.gibbs_constant_bound == pytest.approx(1.0, abs=1e-12)


def test_golden_mean_entropy():
    p = Potential.constant(Subshift.golden_mean(), 0.0)
    assert pressure(p) == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-13)


def test_partition_pressure_converges():
    p = Potential.constant(Subshift.golden_mean(), 0.0)
    assert pressure(p, "partition", n=20) == pytest.approx(pressure(p), abs=0.05)


def test_gibbs_constants_are_stable():
    s = Subshift.golden_mean()
    p = Potential(s, 2, [-0.3, -1.1, -0.7])
    g = gibbs_state(p, n_check=12)
    consts = np.array(g.gibbs_constants)
    assert np.isfinite(consts).all()
    swings = np.abs(np.diff(consts))
    assert (swings[1:] <= swings[:-1] + 1e-9).all()
    assert consts.max() < 10


@pytest.mark.parametrize("name", sorted(INSTANCES))
@pytest.mark.parametrize("t", [0.3, 0.7, 1.5])
def test_pressure_derivative_matches_finite_difference(name, t):
    fam = get_instance(name).family()
    g = gibbs_state(fam.at(t), n_check=0)
    h = 1e-5
    lam = lambda x: gibbs_state(fam.at(x), n_check=0).lam  # noqa: E731
    fd = (lam(t + h) - lam(t - h)) / (2 * h)
    assert pressure_derivative(fam, g) == pytest.approx(fd, rel=1e-6)


@given(potentials())
@settings(max_examples=25, deadline=None)
def test_normalize_idempotent_and_measure_preserving(p):
    g = gibbs_state(p, n_check=0)
    q = normalize(g)
    gq = gibbs_state(q, n_check=0)
    assert gq.pressure == pytest.approx(0.0, abs=1e-12)
    tm = build_transfer_matrix(q)
    ones = tm.matrix @ np.ones(tm.matrix.shape[0]) * math.exp(tm.log_scale)
    assert np.allclose(ones, 1.0, atol=1e-11)
    q2 = normalize(gq)
    assert np.allclose(q2.values, q.values, atol=1e-11)
    for n in (1, 2, 3, 5):
        _, a = g.cylinder_measures(n)
        _, b = gq.cylinder_measures(n)
        assert np.allclose(a, b, atol=1e-12)


def test_periodic_graph_rejected():
    s = Subshift(np.array([[0, 1], [1, 0]]))
    with pytest.raises(StructuralError):
        gibbs_state(Potential.constant(s, 0.0))


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        Potential(Subshift.full(2), 2, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        Potential(Subshift.full(2), 1, [0.0, float("nan")])


def test_no_convergence_raises():
    p = Potential(Subshift.full(3), 1, [0.0, -1e-9, -2e-9])
    with pytest.raises(ConvergenceError):
        gibbs_state(Potential(Subshift.full(2), 2, [0.0, -5.0, -0.1, -3.0]), tol=1e-300, max_iter=3)
    assert p.depth == 1


def test_potential_text_roundtrip():
    p = Potential(Subshift.golden_mean(), 2, [-0.3, -1.1, -0.7])
    q = parse_potential(format_potential(p), p.subshift)
    assert q.depth == 2 and np.array_equal(q.values, p.values)
