"""Hausdorff dimension of survivor sets and its drop as holes shrink.

For a conformal system with geometric potential ``zeta = log|phi'|`` the
hole-punched family ``t -> L_{t,n}`` has leading eigenvalue ``lam_n(t)``,
strictly decreasing in ``t``; the survivor set has dimension ``b_n`` with
``lam_n(b_n) = 1``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .escape import Extrapolation, SurvivorOperator, extrapolate_limit, map_levels, survivor_operator
from .gdms import Gdms, bowen_parameter, lyapunov
from .holes import (
    NON_PSEUDO_PERIODIC,
    UNIQUELY_PERIODIC,
    Classification,
    HoleSequence,
    periodic_weight,
)
from .roots import BracketError, Root, decreasing_root
from .symbolic import StructuralError, Subshift, Word
from .thermo import Potential, extend_depth, gibbs_state


def family_operator(g: Gdms, hole_words: Sequence[Word], method: str = "auto") -> SurvivorOperator:
    """Survivor operator with edge weights ``exp(t * zeta)``."""
    zeta = g.log_derivative()
    zero = Potential.constant(g.subshift, 0.0, zeta.depth)
    return survivor_operator(zero, hole_words, ell=zeta, method=method)


def lambda_t_n(g: Gdms, hole_words: Sequence[Word], t: float, method: str = "auto",
               op: SurvivorOperator | None = None) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    op = op or family_operator(g, hole_words, method)
    return math.exp(op.log_radius(t))


def lambda_prime(g: Gdms, hole_words: Sequence[Word], t: float, method: str = "auto",
                 op: SurvivorOperator | None = None) -> float:
    """``d lam_n / dt`` from the left and right Perron vectors of the survivor block."""
    op = op or family_operator(g, hole_words, method)
    log_lam, ratio = op.eigendata(t)
    return math.exp(log_lam) * ratio


def survivor_dimension(g: Gdms, hole_words: Sequence[Word], tol: float = 1e-13,
                       b: float | None = None, method: str = "auto") -> Root:
    """Root ``b_n`` of ``log lam_n(t) = 0`` on ``[0, b]``.

    A survivor set carrying no exponential growth (``lam_n(0) <= 1``, e.g. a
    single periodic orbit) gives a degenerate root 0.
    """
    if b is None:
        b = bowen_parameter(g, tol).value
    if not hole_words:
        return Root(b, 0.0)
    try:
        op = family_operator(g, hole_words, method)
    except StructuralError as exc:
        if "no survivors" in str(exc):
            return Root(0.0, 0.0, degenerate=True)
        raise
    f = lambda t: op.log_radius(t)  # noqa: E731
    fprime = lambda t: op.eigendata(t)[1]  # noqa: E731
    f0 = f(0.0)
    if f0 <= tol:
        return Root(0.0, abs(f0) if math.isfinite(f0) else 0.0, degenerate=True)
    fb = f(b)
    if fb >= 0:
        if fb <= tol:
            return Root(b, fb)
        raise BracketError(f"lam_n(b) > 1 ({fb:.3e}); survivor pressure exceeds the full one")
    return decreasing_root(f, fprime, 0.0, b, tol)


def second_derivative_probe(g: Gdms, hole_words: Sequence[Word], t_grid: Sequence[float],
                            method: str = "auto") -> float:
    """Largest second divided difference of ``lam_n`` over the grid."""
    t = np.asarray(sorted(t_grid), dtype=float)
    if len(t) < 3:
        raise ValueError("need at least three grid points")
    op = family_operator(g, hole_words, method)
    lam = np.array([math.exp(op.log_radius(x)) for x in t])
    d1 = np.diff(lam) / np.diff(t)
    d2 = 2 * np.diff(d1) / (t[2:] - t[:-2])
    return float(np.abs(d2).max())


# -- an independent construction of the survivor system ------------------------
def survivor_subsystems(g: Gdms, hole_words: Sequence[Word]) -> list[Gdms]:
    """Higher-block systems whose limit sets make up the survivor set.

    Letters are the admissible depth-``D`` words avoiding the hole, ``D`` the
    longest hole word; ``w -> w'`` is allowed when ``w'`` extends the shift
    of ``w``; letter ``w`` uses the map of its first letter.  One system per
    strongly connected component carrying a cycle.
    """
    s, k = g.subshift, g.subshift.alphabet_size
    zeta = g.log_derivative()
    depth = max(zeta.depth, max((len(w) for w in hole_words), default=1))
    zd = extend_depth(zeta, depth)
    idx = zd.index
    alive = ~idx.prefix_states(hole_words) if hole_words else np.ones(len(idx), dtype=bool)
    codes = idx.codes
    src, f = np.nonzero(s.incidence[codes % k])
    tgt = idx.index_of_codes((codes[src] % k ** (depth - 1)) * k + f)
    keep = alive[src] & alive[tgt]
    n = len(idx)
    adj = sp.csr_matrix((np.ones(int(keep.sum()), dtype=np.int8), (src[keep], tgt[keep])), shape=(n, n))
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    first_letter = codes // k ** (depth - 1)
    for c in range(ncomp):
        nodes = np.flatnonzero((labels == c) & alive)
        if nodes.size == 0:
            continue
        sub = adj[nodes][:, nodes].toarray()
        if not sub.any():
            continue
        sub_shift = Subshift(sub)
        log_d = Potential.from_letters(sub_shift, zd.values[nodes])
        ratios = translations = None
        if g.is_affine:
            ratios = g.ratios[first_letter[nodes]]
            translations = g.translations[first_letter[nodes]]
        out.append(Gdms(sub_shift, ratios, translations, g.interval, log_d,
                        f"{g.name}-survivor", g.bdp_constant))
    return out


def survivor_bowen_parameter(g: Gdms, hole_words: Sequence[Word], tol: float = 1e-13) -> Root:
    """Dimension of the survivor set as the largest Bowen parameter of its components."""
    parts = survivor_subsystems(g, hole_words)
    if not parts:
        return Root(0.0, 0.0, degenerate=True)
    roots = [bowen_parameter(p, tol) for p in parts]
    return max(roots, key=lambda r: r.value)


# -- asymptotics ---------------------------------------------------------------
def theoretical_drop_limit(g: Gdms, gibbs_b, chi: float, cls: Classification) -> float | None:
    """``d(z) / chi`` with ``d = 1`` off periodic points and ``1 - |phi_xi'|^b`` on them."""
    if cls.kind == NON_PSEUDO_PERIODIC:
        return 1.0 / chi
    if cls.kind == UNIQUELY_PERIODIC:
        return (1.0 - periodic_weight(gibbs_b, cls.xi)) / chi
    return None


def periodic_derivative(g: Gdms, xi: Word) -> float:
    """``|phi_xi'|`` at the fixed point of ``phi_xi``."""
    zeta = g.log_derivative()
    p = len(xi)
    reps = (p + zeta.depth) // p + 1
    word = xi * reps
    return math.exp(sum(zeta.value(word[j:j + zeta.depth]) for j in range(p)))


@dataclass(frozen=True)
class DimensionRow:
    n: int
    mu_b_Un: float
    b_n: float
    drop_ratio: float
    degenerate: bool = False


@dataclass(frozen=True)
class DimensionReport:
    b: float
    chi: float
    rows: tuple[DimensionRow, ...]
    extrapolation: Extrapolation | None
    theoretical_limit: float | None
    classification: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "mu_b_Un", "b_n", "drop_ratio"])
        for r in self.rows:
            w.writerow([r.n, repr(float(r.mu_b_Un)), repr(float(r.b_n)), repr(float(r.drop_ratio))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "chi": self.chi,
            "theoretical_limit": self.theoretical_limit,
            "classification": self.classification,
            "extrapolation": asdict(self.extrapolation) if self.extrapolation else None,
            "rows": [asdict(r) for r in self.rows],
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def dimension_drop_asymptotics(g: Gdms, h: HoleSequence, levels: Sequence[int] | None = None,
                               tol: float = 1e-13, method: str = "auto", threads: int = 1) -> DimensionReport:
    levels = list(levels) if levels is not None else h.level_numbers
    b = bowen_parameter(g, tol).value
    chi = lyapunov(g, b, tol)
    gibbs_b = gibbs_state(g.family().at(b), tol, n_check=0)
    roots = map_levels(lambda n: survivor_dimension(g, h.words(n), tol, b, method), levels, threads)
    rows = []
    for n, root in zip(levels, roots):
        mu = gibbs_b.measure_of_words(h.words(n))
        rows.append(DimensionRow(n, mu, root.value, (b - root.value) / mu, root.degenerate))
    usable = [r for r in rows if not r.degenerate]
    ext = extrapolate_limit([r.mu_b_Un for r in usable], [r.drop_ratio for r in usable]) if usable else None
    theory = theoretical_drop_limit(g, gibbs_b, chi, h.classification)
    extra = {}
    if h.classification.kind == UNIQUELY_PERIODIC:
        extra["periodic_derivative"] = periodic_derivative(g, h.classification.xi)
    return DimensionReport(b, chi, tuple(rows), ext, theory, h.classification.to_dict(), extra)
