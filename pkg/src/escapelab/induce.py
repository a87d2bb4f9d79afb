"""First-return (induced) systems on unions of cylinders.

An induced letter is a base word ``x_0 ... x_{tau+d-1}`` that starts in
``F``, lands in ``F`` after ``tau`` steps and avoids ``F`` in between
(``F`` is a union of depth-``d`` cylinders).  Letter ``e`` may follow letter
``e'`` when the landing window of ``e'`` is the starting window of ``e``.
Return times are truncated at ``T_max``; the mass left over is measured
exactly and its decay gives a tail certificate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .escape import escape_rate, log_survival_probability_exact
from .gdms import Gdms
from .holes import _extend_to
from .roots import Root
from .symbolic import StructuralError, Subshift, TruncationCertificate, Word
from .thermo import GibbsState, Potential, PotentialFamily, birkhoff, gibbs_state, pressure_derivative


@dataclass(frozen=True, eq=False)
class InducedSystem:
    base: GibbsState
    F: tuple[Word, ...]
    d: int
    words: tuple[Word, ...]
    tau: np.ndarray
    mu: np.ndarray                 # base measure of each induced cylinder
    subshift: Subshift
    potential: Potential           # S_tau(phi - P) on induced letters
    certificate: TruncationCertificate
    T_max: int
    decay_ratio: float             # measured ratio of consecutive non-returned masses
    mu_F: float

    @property
    def n_letters(self) -> int:
        return len(self.words)

    def induced_sums(self, p: Potential) -> np.ndarray:
        """``S_tau p`` on each induced letter."""
        if p.depth > self.d + 1:
            raise ValueError("potential depth exceeds the induced letter overlap")
        return np.array([birkhoff(p, w, int(t)) for w, t in zip(self.words, self.tau)])

    def base_expansion(self, letters: Sequence[int]) -> Word:
        """Base word whose cylinder equals the induced cylinder ``[letters]``."""
        out: Word = ()
        for i, e in enumerate(letters):
            w, t = self.words[e], int(self.tau[e])
            out = out + (w if i == len(letters) - 1 else w[:t])
        return out

    def to_json(self) -> str:
        s = self.base.subshift
        doc = {
            "F": [s.format_word(w) for w in self.F],
            "letters": [{"word": s.format_word(w), "tau": int(t), "mu": float(m)}
                        for w, t, m in zip(self.words, self.tau, self.mu)],
            "tail": {"T_max": self.T_max, "mass_bound": self.certificate.tail_mass_bound},
        }
        return json.dumps(doc, indent=2)


def build_induced(g: GibbsState, F: Sequence[Word], T_max: int = 60, max_letters: int = 200_000) -> InducedSystem:
    """Enumerate first-return words to ``F`` with return time at most ``T_max``."""
    s, p, k = g.subshift, g.potential, g.subshift.alphabet_size
    F = [tuple(w) for w in F]
    if not F:
        raise ValueError("F must be non-empty")
    if len({len(w) for w in F}) != 1:
        raise ValueError("F must consist of words of one length")
    for w in F:
        if not s.is_admissible(w):
            raise ValueError(f"inadmissible word {w} in F")
    d = max(len(F[0]), p.depth - 1)
    F = _extend_to(s, F, d) if d != len(F[0]) else sorted(set(F))
    in_F = set(F)
    words, taus = [], []
    frontier = list(F)
    frontier_mass = [g.measure_of_words(frontier)]
    for tau in range(1, T_max + 1):
        nxt = []
        for w in frontier:
            for e in range(k):
                if not s.incidence[w[-1], e]:
                    continue
                x = w + (e,)
                if x[-d:] in in_F:
                    words.append(x)
                    taus.append(tau)
                else:
                    nxt.append(x)
        frontier = nxt
        if len(words) + len(frontier) > max_letters:
            raise StructuralError(f"more than {max_letters} first-return words; lower T_max")
        frontier_mass.append(g.measure_of_words(frontier))
        if not frontier:
            break
    if not words:
        raise StructuralError("no first returns to F were found")
    tail = frontier_mass[-1]
    ratios = [b / a for a, b in zip(frontier_mass[-6:-1], frontier_mass[-5:]) if a > 0]
    decay = max(ratios) if ratios and tail > 0 else 0.0
    mu = np.array([g.cylinder_measure(w) for w in words])
    tau_arr = np.array(taus, dtype=np.int64)
    labels = [s.format_word(w) for w in words]
    landing = {i: w[-d:] for i, w in enumerate(words)}
    starting = {i: w[:d] for i, w in enumerate(words)}
    inc = np.array([[landing[i] == starting[j] for j in range(len(words))] for i in range(len(words))], dtype=np.int8)
    sub = Subshift.pruned(inc, labels)
    keep = [labels.index(lb) for lb in sub.labels] if len(sub.labels) != len(labels) else list(range(len(words)))
    words = [words[i] for i in keep]
    mu, tau_arr = mu[keep], tau_arr[keep]
    phi_F = np.array([birkhoff(p, w, int(t)) - t * g.log_lambda for w, t in zip(words, tau_arr)])
    potential = Potential.from_letters(sub, phi_F)
    mu_F = g.measure_of_words(F)
    cert = TruncationCertificate(tuple(range(len(words))), min(tail / mu_F, 0.999999),
                                 f"first returns with tau <= {T_max}")
    return InducedSystem(g, tuple(F), d, tuple(words), tau_arr, mu, sub, potential, cert, T_max, decay, mu_F)


@dataclass(frozen=True)
class KacResult:
    lhs: float
    rhs: float
    gap: float
    width: float

    @property
    def holds(self) -> bool:
        return self.gap <= self.width


def kac_check(ind: InducedSystem) -> KacResult:
    """``int_F tau dmu_F`` against ``1 / mu(F)``.

    Returns with ``tau > T_max`` contribute between ``(T+1) t`` and
    ``t (T + 1 + r / (1 - r))`` where ``t`` is the conditional mass left over
    and ``r`` its measured geometric decay; the width also carries a bound on
    floating point rounding and the eigenvector residual of the base state.
    """
    mu_F_letters = ind.mu / ind.mu_F
    partial = float(np.sum(ind.tau * mu_F_letters))
    t = ind.certificate.tail_mass_bound
    T = ind.T_max
    r = ind.decay_ratio
    if t == 0:
        tail_lo = tail_hi = 0.0
    elif r < 1:
        tail_lo, tail_hi = (T + 1) * t, t * (T + 1 + r / (1 - r))
    else:
        tail_lo, tail_hi = (T + 1) * t, math.inf
    rounding = 4 * np.finfo(float).eps * ind.n_letters * max(partial, 1.0)
    lhs = partial + 0.5 * (tail_lo + tail_hi)
    rhs = 1.0 / ind.mu_F
    # masses inherit the relative error of the Perron vectors
    eigen = 10 * max(ind.base.residual, np.finfo(float).eps) * (partial + rhs)
    width = 0.5 * (tail_hi - tail_lo) + rounding + eigen
    return KacResult(lhs, rhs, abs(lhs - rhs), width)


@dataclass(frozen=True)
class TailDecay:
    alpha: float
    C: float
    residuals: np.ndarray
    tails: np.ndarray
    n: np.ndarray
    infinite: bool

    @property
    def etd(self) -> bool:
        return self.infinite or (self.alpha > 0 and float(np.abs(self.residuals).max()) <= 0.05)


def entrance_tail(g: GibbsState, F: Sequence[Word], n: int) -> float:
    """``mu{x : sigma^j x not in F for 0 <= j < n}``, the first entrance time being at least ``n``."""
    if n <= 0:
        return 1.0
    return math.exp(log_survival_probability_exact(g, F, n - 1, first_step=0))


def tail_decay(ind: InducedSystem, n_range: Sequence[int] = range(1, 21)) -> TailDecay:
    """Fit ``log mu(E_F >= n) = log C - alpha n``; exact zeros give ``alpha = inf``."""
    ns = np.array(list(n_range), dtype=np.int64)
    tails = np.array([entrance_tail(ind.base, ind.F, int(n)) for n in ns])
    if (tails <= 0).any():
        return TailDecay(math.inf, 1.0, np.zeros(0), tails, ns, True)
    y = np.log(tails)
    A = np.vstack([np.ones(len(ns)), -ns.astype(float)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return TailDecay(float(coef[1]), float(math.exp(coef[0])), resid, tails, ns, False)


@dataclass(frozen=True)
class LdpPoint:
    theta: float
    pressure: float
    mean_tau: float
    gap: float


@dataclass(frozen=True)
class LdpCurve:
    points: tuple[LdpPoint, ...]
    convexity_min: float
    derivative_error: float

    def gap_negative(self, min_abs_theta: float = 0.05) -> bool:
        return all(pt.gap < 0 for pt in self.points if abs(pt.theta) >= min_abs_theta)

    def pressure_at_zero(self) -> float | None:
        for pt in self.points:
            if pt.theta == 0:
                return pt.pressure
        return None

    def rate(self, x: float) -> float:
        """Legendre transform ``sup_theta (theta x - P(theta))`` over the grid."""
        return max(pt.theta * x - pt.pressure for pt in self.points)


def ldp_rate(ind: InducedSystem, theta_grid: Sequence[float], alpha: float | None = None) -> LdpCurve:
    """Tilted pressure ``P(phi_F + theta tau)``, its derivative and the gap function."""
    thetas = np.array(sorted(theta_grid), dtype=float)
    if alpha is not None and (thetas >= alpha).any():
        raise ValueError(f"tilts must stay below the tail decay rate {alpha:.4f}")
    tau_pot = Potential.from_letters(ind.subshift, ind.tau.astype(float))
    fam = PotentialFamily(tau_pot, ind.potential)
    pts = []
    for th in thetas:
        st = gibbs_state(fam.at(th), 1e-14, n_check=0)
        mean = pressure_derivative(fam, st) / st.lam
        pts.append(LdpPoint(float(th), st.pressure, mean, st.pressure - th * mean))
    P = np.array([pt.pressure for pt in pts])
    convex = math.inf
    if len(thetas) >= 3:
        d1 = np.diff(P) / np.diff(thetas)
        convex = float((2 * np.diff(d1) / (thetas[2:] - thetas[:-2])).min())
    # derivative identity against central differences
    h = 1e-5
    errs = []
    for pt in pts[:: max(1, len(pts) // 5)]:
        up = gibbs_state(fam.at(pt.theta + h), 1e-14, n_check=0).pressure
        dn = gibbs_state(fam.at(pt.theta - h), 1e-14, n_check=0).pressure
        errs.append(abs((up - dn) / (2 * h) - pt.mean_tau) / max(abs(pt.mean_tau), 1.0))
    return LdpCurve(tuple(pts), convex, max(errs) if errs else 0.0)


# -- transfer between base and induced systems -----------------------------------
def induced_hole_words(ind: InducedSystem, base_words: Sequence[Word]) -> list[tuple[int, ...]]:
    """Induced words whose cylinders make up ``F`` intersected with the base hole."""
    out = []
    starts = {}
    for i, w in enumerate(ind.words):
        starts.setdefault(w[: ind.d], []).append(i)
    for u in base_words:
        u = tuple(u)
        if len(u) < ind.d or u[: ind.d] not in set(ind.F):
            raise ValueError(f"hole word {u} is not contained in F")
        stack = [((e,), ind.words[e]) for e in starts.get(u[: ind.d], [])]
        while stack:
            seq, exp = stack.pop()
            m = min(len(exp), len(u))
            if exp[:m] != u[:m]:
                continue
            if len(exp) >= len(u):
                out.append(seq)
                continue
            last = seq[-1]
            body = exp[: len(exp) - ind.d]
            for f in starts.get(ind.words[last][-ind.d:], []):
                stack.append((seq + (f,), body + ind.words[f]))
    return sorted(set(out))


@dataclass(frozen=True)
class TransferRow:
    n: int
    mu_B: float
    base_ratio: float
    mu_F_B: float
    induced_ratio: float
    warnings: tuple[str, ...] = ()


def transfer_escape_rate(ind: InducedSystem, hole: Sequence[Word], n: int = 0,
                         induced_gibbs: GibbsState | None = None, hypotheses_ok: bool = True) -> TransferRow:
    """``R(B)/mu(B)`` in the base and ``R_F(B)/mu_F(B)`` in the induced system."""
    g = ind.base
    mu_B = g.measure_of_words(hole)
    base = escape_rate(g, hole)
    ig = induced_gibbs or gibbs_state(ind.potential, 1e-14, n_check=0)
    iw = induced_hole_words(ind, hole)
    mu_FB = ig.measure_of_words(iw)
    warn = () if hypotheses_ok else ("ETD or LDP check failed",)
    if mu_FB <= 0 or mu_FB >= 1 - 1e-12:
        return TransferRow(n, mu_B, base.R_n / mu_B, mu_FB, math.nan, warn + ("hole fills F",))
    ind_rate = escape_rate(ig, iw)
    return TransferRow(n, mu_B, base.R_n / mu_B, mu_FB, ind_rate.R_n / mu_FB, warn)


def induced_gdms(g: Gdms, ind: InducedSystem) -> Gdms:
    """The first-return system as a conformal system with ``log|phi_e'| = S_tau zeta``."""
    zeta = g.log_derivative()
    ell = ind.induced_sums(zeta)
    return Gdms(ind.subshift, None, None, g.interval, Potential.from_letters(ind.subshift, ell),
                f"{g.name}-induced", g.bdp_constant)


@dataclass(frozen=True)
class DimensionTransfer:
    base: float
    induced: float
    outside_F: float

    @property
    def predicted(self) -> float:
        return max(self.induced, self.outside_F)

    @property
    def difference(self) -> float:
        return abs(self.base - self.predicted)


def transfer_dimension(g: Gdms, ind: InducedSystem, hole: Sequence[Word], tol: float = 1e-13) -> DimensionTransfer:
    """Survivor dimension of ``hole`` directly and as ``max(HD K_F(B), HD K(F))``."""
    from .dimension import survivor_dimension

    base = survivor_dimension(g, list(hole), tol).value
    outside = survivor_dimension(g, list(ind.F), tol).value
    gi = induced_gdms(g, ind)
    iw = induced_hole_words(ind, hole) if hole else []
    induced = survivor_dimension(gi, iw, tol).value
    return DimensionTransfer(base, induced, outside)
