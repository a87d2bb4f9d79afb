"""Nested hole sequences around a center, and cylinder sandwiches of balls."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .gdms import Gdms, project
from .symbolic import StructuralError, Subshift, Word
from .thermo import GibbsState, birkhoff

NON_PSEUDO_PERIODIC = "non_pseudo_periodic"
UNIQUELY_PERIODIC = "uniquely_periodic"
UNCLASSIFIED = "unclassified"


class ResolutionError(ValueError):
    """The working depth cannot separate the inside of a ball from its outside."""


@dataclass(frozen=True)
class Classification:
    kind: str
    xi: Word | None = None

    @property
    def period(self) -> int | None:
        return None if self.xi is None else len(self.xi)

    @property
    def is_periodic(self) -> bool:
        return self.kind == UNIQUELY_PERIODIC

    def to_dict(self) -> dict:
        return {"kind": self.kind, "xi": list(self.xi) if self.xi else None, "p": self.period}


# -- centers -----------------------------------------------------------------
@dataclass(frozen=True)
class Center:
    """A point of the limit set through a (long enough) prefix of its coding."""

    letters: Word
    label: str = ""
    periodic_word: Word | None = None

    def prefix(self, n: int) -> Word:
        if n > len(self.letters):
            if self.periodic_word is None:
                raise ValueError(f"center {self.label!r} only known to depth {len(self.letters)}")
            reps = n // len(self.periodic_word) + 1
            return (self.periodic_word * reps)[:n]
        return self.letters[:n]

    @classmethod
    def periodic(cls, xi: Sequence[int], depth: int = 128, label: str = "") -> Center:
        xi = tuple(xi)
        reps = depth // len(xi) + 1
        return cls((xi * reps)[:depth], label or f"({''.join(map(str, xi))})", xi)


def sqrt2_minus_1_digits(n: int, base: int = 2) -> Word:
    """First ``n`` base-``base`` digits of sqrt(2) - 1, exactly."""
    scaled = math.isqrt(2 * base ** (2 * n)) - base ** n  # floor((sqrt2 - 1) base^n)
    digits = []
    for _ in range(n):
        scaled, d = divmod(scaled, base)
        digits.append(d)
    return tuple(reversed(digits))


def aperiodic_center(depth: int = 256, base: int = 2) -> Center:
    return Center(sqrt2_minus_1_digits(depth, base), "sqrt2-1")


def _as_fraction(z) -> Fraction:
    if isinstance(z, Fraction):
        return z
    if isinstance(z, str):
        return Fraction(z)
    return Fraction(z).limit_denominator(10 ** 12)


def codings(g: Gdms, z, depth: int, max_codings: int = 4) -> list[Word]:
    """Admissible words of length ``depth`` whose image interval contains ``z``.

    Exact rational arithmetic; points on cylinder boundaries produce several
    codings (at most ``max_codings`` are followed).
    """
    x = _as_fraction(z)
    r = [Fraction(float(v)).limit_denominator(10 ** 9) for v in g.ratios]
    c = [Fraction(float(v)).limit_denominator(10 ** 9) for v in g.translations]
    lo, hi = (Fraction(float(v)).limit_denominator(10 ** 9) for v in g.interval)
    inc = g.subshift.incidence
    # each branch: (word, point pulled back through the word)
    branches = [((), x)]
    for _ in range(depth):
        nxt = []
        for word, y in branches:
            for e in range(g.subshift.alphabet_size):
                if word and not inc[word[-1], e]:
                    continue
                a, b = r[e] * lo + c[e], r[e] * hi + c[e]
                if min(a, b) <= y <= max(a, b):
                    nxt.append((word + (e,), (y - c[e]) / r[e]))
        branches = nxt[:max_codings]
        if not branches:
            raise ValueError(f"point {z} is not in the limit set")
    return [w for w, _ in branches]


def center_from_point(g: Gdms, z, depth: int = 128) -> Center:
    return Center(codings(g, z, depth)[0], str(z))


def _primitive_root(word: Word) -> Word:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word


def classify_center(g: Gdms | Subshift, z, max_check: int = 40, tol: float = 1e-12) -> Classification:
    """Decide whether some word ``omega`` with ``|omega| <= max_check`` fixes ``z``.

    ``z`` is a :class:`Center` (symbolic) or a point of an affine system.  A
    word fixing ``z`` is a prefix of a coding of ``z`` whose powers code ``z``,
    so it suffices to test prefixes of the codings over a window of
    ``2 * max_check`` letters; the fixed point is also confirmed metrically
    when maps are available.
    """
    window = 2 * max_check
    if isinstance(z, Center):
        codes = [z.prefix(window)]
        point = None
    else:
        codes = codings(g, z, window)
        point = float(_as_fraction(z))
    fixing: set[Word] = set()
    for code in codes:
        for p in range(1, max_check + 1):
            word = code[:p]
            if all(code[i] == code[i % p] for i in range(window)):
                if point is not None and isinstance(g, Gdms) and g.is_affine:
                    if abs(g.apply(word, point) - point) > tol:
                        continue
                fixing.add(word)
    if not fixing:
        return Classification(NON_PSEUDO_PERIODIC)
    roots = {_primitive_root(w) for w in fixing}
    if len(roots) == 1:
        return Classification(UNIQUELY_PERIODIC, roots.pop())
    return Classification(UNCLASSIFIED)


# -- hole sequences ------------------------------------------------------------
@dataclass(frozen=True)
class HoleSequence:
    levels: dict[int, tuple[Word, ...]]
    classification: Classification
    center: Center | None = None
    mu: dict[int, float] = field(default_factory=dict)
    decay_rho: float = math.nan
    kind: str = "cylinder"

    def words(self, n: int) -> tuple[Word, ...]:
        return self.levels[n]

    @property
    def level_numbers(self) -> list[int]:
        return sorted(self.levels)

    def to_json(self, subshift: Subshift | None = None) -> str:
        fmt = subshift.format_word if subshift else (lambda w: "".join(map(str, w)))
        levels = [
            {"n": n, "words": [fmt(w) for w in self.levels[n]], "mu": self.mu.get(n)}
            for n in self.level_numbers
        ]
        return json.dumps({"classification": self.classification.to_dict(), "levels": levels}, indent=2)

    def with_measures(self, gibbs: GibbsState) -> HoleSequence:
        mu = {n: gibbs.measure_of_words(ws) for n, ws in self.levels.items()}
        return HoleSequence(self.levels, self.classification, self.center, mu, measured_decay(mu), self.kind)


def measured_decay(mu: dict[int, float]) -> float:
    """Smallest rho with ``mu_n <= rho^n`` on all stored levels."""
    vals = [m ** (1.0 / n) for n, m in mu.items() if n >= 1 and m > 0]
    return max(vals) if vals else 0.0


def _subshift_of(system) -> Subshift:
    return system.subshift if hasattr(system, "subshift") else system


def cylinder_hole_sequence(system, center: Center, n_max: int, gibbs: GibbsState | None = None,
                           classification: Classification | None = None, n_min: int = 1) -> HoleSequence:
    """Single-cylinder holes ``U_n = [z|_n]`` for ``n_min <= n <= n_max``."""
    s = _subshift_of(system)
    tail = center.prefix(n_max)
    if not s.is_admissible(tail):
        raise StructuralError(f"center tail {tail} is not admissible")
    if classification is None:
        classification = classify_center(system, center)
    levels = {n: (tail[:n],) for n in range(n_min, n_max + 1)}
    h = HoleSequence(levels, classification, center)
    validate_nesting(h)
    return h.with_measures(gibbs) if gibbs is not None else h


def validate_nesting(h: HoleSequence) -> None:
    ns = h.level_numbers
    for n in ns:
        if any(len(w) != n for w in h.levels[n]):
            raise ValueError(f"level {n} contains a word of the wrong length")
    for a, b in zip(ns, ns[1:]):
        parents = set(h.levels[a])
        if any(w[:a] not in parents for w in h.levels[b]):
            raise ValueError(f"level {b} is not contained in level {a}")


def periodic_inclusion_holds(h: HoleSequence) -> bool:
    """``[xi|_p] U_n`` is contained in ``U_n`` for every stored level."""
    xi = h.classification.xi
    if xi is None:
        return False
    for n in h.level_numbers:
        words = set(h.levels[n])
        if any((xi + w)[:n] not in words for w in h.levels[n]):
            return False
    return True


@dataclass(frozen=True)
class ConditionResult:
    status: str  # "pass" | "fail" | "n/a"
    value: float | None = None
    detail: str = ""


def check_U_conditions(h: HoleSequence, gibbs: GibbsState, t_states: Sequence[GibbsState] = ()) -> dict[str, ConditionResult]:
    """Evaluate (U0)-(U5) on the stored levels with measured constants."""
    out: dict[str, ConditionResult] = {}
    ns = h.level_numbers
    out["U0"] = ConditionResult("pass", detail="unions of cylinders are open")
    lengths_ok = all(len(w) == n for n in ns for w in h.levels[n])
    try:
        validate_nesting(h)
        nested = True
    except ValueError:
        nested = False
    out["U1"] = ConditionResult("pass" if lengths_ok and nested else "fail",
                                detail="level-n words have length n and levels nest")
    mu = {n: gibbs.measure_of_words(h.levels[n]) for n in ns}
    rho = measured_decay(mu)
    out["U2"] = ConditionResult("pass" if rho < 1 else "fail", rho, "mu(U_n) <= rho^n")
    if t_states:
        rho_t = max(measured_decay({n: st.measure_of_words(h.levels[n]) for n in ns}) for st in t_states)
        out["U2*"] = ConditionResult("pass" if rho_t < 1 else "fail", rho_t, "uniform over the t-grid")
    else:
        out["U2*"] = ConditionResult("n/a")
    tail_counts = [len(h.levels[n]) for n in ns[len(ns) // 2:]]
    bound = max(tail_counts)
    out["U3"] = ConditionResult("pass" if tail_counts[-1] <= bound else "fail", float(bound),
                                "bounded number of cylinders per level, so U_inf has at most that many points")
    cls = h.classification
    if cls.kind == NON_PSEUDO_PERIODIC:
        out["U4"] = ConditionResult("pass", detail="(U4A): center is not pseudo-periodic")
    elif cls.kind == UNIQUELY_PERIODIC:
        ok = periodic_inclusion_holds(h)
        out["U4"] = ConditionResult("pass" if ok else "fail", float(cls.period),
                                    "(U4B): periodic center with [xi|p] U_n in U_n")
    else:
        out["U4"] = ConditionResult("fail", detail="center unclassified")
    # (U5) can only fail through points of U_s staying away from U_inf; the
    # hole words agree with the deepest level on a prefix of growing length.
    deepest = h.levels[ns[-1]]
    agree = []
    for n in ns:
        agree.append(min(max(_common_prefix(w, d) for d in deepest) for w in h.levels[n]))
    growing = all(b >= a for a, b in zip(agree, agree[1:])) and agree[-1] >= ns[-1]
    out["U5"] = ConditionResult("pass" if growing else "fail", float(agree[-1]),
                                "holes shrink onto U_inf")
    return out


def _common_prefix(a: Word, b: Word) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def periodic_weight(gibbs: GibbsState, xi: Word) -> float:
    """``exp(S_p phi(xi^inf) - p P(phi))`` for the periodic word ``xi``."""
    p = len(xi)
    reps = (p + gibbs.depth) // p + 1
    return math.exp(birkhoff(gibbs.potential, xi * reps, p) - p * gibbs.pressure)


def theoretical_escape_limit(gibbs: GibbsState, cls: Classification) -> float | None:
    if cls.kind == NON_PSEUDO_PERIODIC:
        return 1.0
    if cls.kind == UNIQUELY_PERIODIC:
        return 1.0 - periodic_weight(gibbs, cls.xi)
    return None


# -- balls ---------------------------------------------------------------------
@dataclass(frozen=True)
class BallCover:
    """Cylinders of a ball resolved down to a working depth."""

    inside: tuple[Word, ...]      # image interval contained in the closed ball
    straddle: tuple[Word, ...]    # depth-`depth` words meeting both the ball and its complement
    mass_inside: float
    mass_straddle: float
    depth: int

    @property
    def mass_bounds(self) -> tuple[float, float]:
        return self.mass_inside, self.mass_inside + self.mass_straddle


def _interval_position(lo: float, hi: float, a: float, b: float, eps: float = 1e-15) -> int:
    """1 inside [a, b], -1 disjoint from (a, b), 0 straddling."""
    if lo >= a - eps and hi <= b + eps:
        return 1
    if hi <= a + eps or lo >= b - eps:
        return -1
    return 0


def ball_cover(g: Gdms, gibbs: GibbsState, z: float, r: float, depth: int) -> BallCover:
    s = g.subshift
    a, b = z - r, z + r
    inside, frontier = [], [()]
    for d in range(1, depth + 1):
        nxt = []
        for w in frontier:
            for e in range(s.alphabet_size):
                if w and not s.incidence[w[-1], e]:
                    continue
                child = w + (e,)
                pos = _interval_position(*project(g, child), a, b)
                if pos == 1:
                    inside.append(child)
                elif pos == 0:
                    nxt.append(child)
        frontier = nxt
    m_in = gibbs.measure_of_words(inside)
    m_st = gibbs.measure_of_words(frontier)
    return BallCover(tuple(inside), tuple(frontier), m_in, m_st, depth)


def _extend_to(s: Subshift, words: Iterable[Word], n: int) -> list[Word]:
    out = []
    for w in words:
        if len(w) >= n:
            out.append(w[:n])
            continue
        stack = [w]
        while stack:
            u = stack.pop()
            if len(u) == n:
                out.append(u)
                continue
            for e in range(s.alphabet_size - 1, -1, -1):
                if s.incidence[u[-1], e]:
                    stack.append(u + (e,))
    return sorted(set(out))


@dataclass(frozen=True)
class BallSandwich:
    center: float
    radius: float
    kappa: float
    N: int
    inner: tuple[Word, ...]
    outer: tuple[Word, ...]
    mu_ball: float
    bracket_width: float
    depth: int
    straddlers: tuple[Word, ...] = ()

    def sandwich_holds(self) -> bool:
        lo = math.exp(-self.kappa * self.N)
        return lo <= self.mu_ball <= math.exp(self.kappa) * lo


def n_kappa(mu_ball: float, kappa: float) -> int:
    """Smallest N with ``exp(-kappa N) <= mu_ball``, so ``mu_ball <= e^kappa e^{-kappa N}``."""
    if mu_ball <= 0:
        raise ValueError("ball has no mass")
    t = -math.log(mu_ball) / kappa
    n = math.ceil(t - 1e-12)
    if math.exp(-kappa * n) > mu_ball:
        n += 1
    return max(n, 0)


def ball_sandwich(g: Gdms, gibbs: GibbsState, z: float, r: float, kappa: float,
                  depth: int | None = None, max_relative_width: float = 0.5) -> BallSandwich:
    """Inner and outer length-N cylinder unions around the ball ``B(z, r)``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if r > 2 * g.diameter:
        raise ValueError("radius exceeds twice the diameter of X")
    base_depth = depth or 12
    cover = ball_cover(g, gibbs, z, r, base_depth)
    lo, hi = cover.mass_bounds
    if hi <= 0 or (hi - lo) > max_relative_width * max(lo, 1e-300):
        raise ResolutionError(f"depth {base_depth} brackets mu(B) only to [{lo:.3e}, {hi:.3e}]; raise depth")
    mu_ball = 0.5 * (lo + hi)
    N = n_kappa(mu_ball, kappa)
    work = max(base_depth, 3 * N) if depth is None else max(depth, N)
    if work != base_depth:
        cover = ball_cover(g, gibbs, z, r, work)
    s = g.subshift
    inner_long = [w for w in cover.inside if len(w) <= N]
    inner = _extend_to(s, inner_long, N) if N > 0 else []
    deep_inside = {w[:N] for w in cover.inside if len(w) > N}
    deep_straddle = {w[:N] for w in cover.straddle}
    straddlers = sorted(deep_straddle)
    # a length-N word all of whose resolved descendants are inside belongs to W-
    pure = sorted(deep_inside - deep_straddle)
    for w in pure:
        if _all_descendants_inside(g, w, z, r, work):
            inner.append(w)
        else:
            straddlers.append(w)
    inner = sorted(set(inner))
    straddlers = sorted(set(straddlers) - set(inner))
    outer = sorted(set(inner) | set(straddlers))
    return BallSandwich(z, r, kappa, N, tuple(inner), tuple(outer), mu_ball, hi - lo, work,
                        tuple(straddlers))


def _all_descendants_inside(g: Gdms, w: Word, z: float, r: float, depth: int) -> bool:
    s = g.subshift
    frontier = [w]
    for _ in range(len(w), depth):
        nxt = []
        for u in frontier:
            for e in range(s.alphabet_size):
                if s.incidence[u[-1], e]:
                    child = u + (e,)
                    pos = _interval_position(*project(g, child), z - r, z + r)
                    if pos == -1:
                        return False
                    if pos == 0:
                        nxt.append(child)
        frontier = nxt
        if not frontier:
            return True
    return not frontier


def ball_hole_sequence(g: Gdms, gibbs: GibbsState, z: float, radii: Sequence[float], kappa: float,
                       side: str = "inner", depth: int | None = None) -> tuple[HoleSequence, list[BallSandwich]]:
    """Hole sequence made of the inner (W-) or outer (W+) sandwiches of shrinking balls.

    Consecutive radii must give strictly increasing N; repeated N values are skipped.
    """
    sandwiches = [ball_sandwich(g, gibbs, z, r, kappa, depth) for r in radii]
    levels: dict[int, tuple[Word, ...]] = {}
    kept = []
    for sw in sandwiches:
        words = sw.inner if side == "inner" else sw.outer
        if sw.N in levels or not words:
            continue
        levels[sw.N] = tuple(words)
        kept.append(sw)
    cls = classify_center(g, z)
    h = HoleSequence(levels, cls, None, kind=f"ball-{side}")
    return h.with_measures(gibbs), kept
