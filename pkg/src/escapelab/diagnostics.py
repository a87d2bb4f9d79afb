"""Boundary-thinness diagnostics for balls in the limit set.

Ball masses are never assumed: they are bracketed by cylinder covers, and
every reported ratio carries the width of its bracket.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gdms import Gdms, project
from .holes import _interval_position, ball_sandwich, n_kappa
from .thermo import GibbsState


def ball_mass_bracket(g: Gdms, gibbs: GibbsState, z: float, r: float, rel_width: float = 1e-3,
                      max_depth: int = 40, min_depth: int = 4) -> tuple[float, float, int]:
    """``(lower, upper, depth)`` for ``mu(B(z, r))``, refining straddling cylinders only."""
    if r <= 0:
        return 0.0, 0.0, 0
    s = g.subshift
    a, b = z - r, z + r
    inside_mass = 0.0
    frontier = [()]
    depth = 0
    while True:
        depth += 1
        nxt = []
        for w in frontier:
            for e in range(s.alphabet_size):
                if w and not s.incidence[w[-1], e]:
                    continue
                child = w + (e,)
                pos = _interval_position(*project(g, child), a, b)
                if pos == 1:
                    inside_mass += gibbs.cylinder_measure(child)
                elif pos == 0:
                    nxt.append(child)
        frontier = nxt
        straddle = gibbs.measure_of_words(frontier)
        done = straddle <= rel_width * max(inside_mass, 1e-300) or not frontier
        if depth >= max_depth or (depth >= min_depth and done):
            return inside_mass, inside_mass + straddle, depth


@dataclass(frozen=True)
class AnnulusProbe:
    z: float
    r: float
    beta: float
    inner_radius: float
    outer_radius: float
    annulus_mass: float
    ball_mass: float
    ratio: float
    bracket_width: float


def wbt_curve(g: Gdms, gibbs: GibbsState, z: float, beta: float, radii: Sequence[float],
              rel_width: float = 1e-3, max_depth: int = 40) -> list[AnnulusProbe]:
    """Annulus-to-ball mass ratios ``mu(A(z; r - mu(B)^beta, r + mu(B)^beta)) / mu(B)``."""
    radii = [float(r) for r in radii]
    if len(radii) > 1 and not all(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    out = []
    for r in radii:
        lo, hi, _ = ball_mass_bracket(g, gibbs, z, r, rel_width, max_depth)
        mu_b = 0.5 * (lo + hi)
        if mu_b <= 0:
            raise ValueError(f"ball B({z}, {r}) carries no mass")
        w = mu_b ** beta
        r_in, r_out = max(r - w, 0.0), r + w
        o_lo, o_hi, _ = ball_mass_bracket(g, gibbs, z, r_out, rel_width, max_depth)
        i_lo, i_hi, _ = ball_mass_bracket(g, gibbs, z, r_in, rel_width, max_depth)
        ann_lo, ann_hi = max(o_lo - i_hi, 0.0), o_hi - i_lo
        ann = 0.5 * (ann_lo + ann_hi)
        ratio = ann / mu_b
        width = ann_hi / max(lo, 1e-300) - ann_lo / max(hi, 1e-300)
        out.append(AnnulusProbe(z, r, beta, r_in, r_out, ann, mu_b, ratio, width))
    return out


def wbt_verdict(probes: Sequence[AnnulusProbe], threshold: float = 0.1) -> bool:
    return bool(probes) and probes[-1].ratio < threshold


def probes_to_csv(probes: Sequence[AnnulusProbe]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "mu_ball", "annulus_mass", "ratio", "bracket_width"])
    for p in probes:
        w.writerow([repr(float(x)) for x in (p.r, p.ball_mass, p.annulus_mass, p.ratio, p.bracket_width)])
    return buf.getvalue()


@dataclass(frozen=True)
class DbtProbe:
    r: float
    kappa: float
    N: int
    mu_ball: float
    straddle_mass: float
    ratio: float
    n_straddlers: int

    @property
    def sandwich_holds(self) -> bool:
        lo = math.exp(-self.kappa * self.N)
        return lo <= self.mu_ball <= math.exp(self.kappa) * lo


def dbt_curve(g: Gdms, gibbs: GibbsState, z: float, kappa: float, radii: Sequence[float],
              depth: int | None = None) -> list[DbtProbe]:
    """Mass of level-``N_kappa`` cylinders meeting both ``B`` and its complement, over ``mu(B)``."""
    out = []
    for r in radii:
        sw = ball_sandwich(g, gibbs, z, r, kappa, depth)
        m = gibbs.measure_of_words(sw.straddlers)
        out.append(DbtProbe(r, kappa, sw.N, sw.mu_ball, m, m / sw.mu_ball, len(sw.straddlers)))
    return out


@dataclass(frozen=True)
class GapStatistics:
    levels: tuple[int, ...]
    max_gap: int
    values: tuple[int, ...]


def gap_statistics(g: Gdms, gibbs: GibbsState, z: float, kappa: float, r_grid: Sequence[float],
                   rel_width: float = 1e-6) -> GapStatistics:
    """Observed ``N_kappa(z, r)`` over the radius grid and the largest gap between distinct values."""
    values = []
    for r in r_grid:
        lo, hi, _ = ball_mass_bracket(g, gibbs, z, r, rel_width)
        values.append(n_kappa(0.5 * (lo + hi), kappa))
    levels = tuple(sorted(set(values)))
    gaps = np.diff(levels) if len(levels) > 1 else np.zeros(1, dtype=int)
    return GapStatistics(levels, int(gaps.max()), tuple(values))
