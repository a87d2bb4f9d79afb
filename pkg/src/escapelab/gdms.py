"""One-dimensional conformal graph directed Markov systems.

Edges of the system are the letters of a :class:`Subshift`; edge ``e``
carries the contraction ``x -> ratio[e] * x + translation[e]`` of the seed
interval.  Non-affine systems may instead supply a table of
``log|phi_w'|`` values on depth-``m`` cylinders (bounded distortion lets the
geometric potential be taken constant there); such systems have a pressure
function but no projection.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .roots import BracketError, Root, decreasing_root
from .symbolic import StructuralError, Subshift
from .thermo import (
    Potential,
    PotentialFamily,
    build_transfer_matrix,
    gibbs_state,
    leading_eigendata,
    pressure_derivative,
    spectral_radius,
)


@dataclass(frozen=True, eq=False)
class Gdms:
    subshift: Subshift
    ratios: np.ndarray | None
    translations: np.ndarray | None
    interval: tuple[float, float] = (0.0, 1.0)
    log_deriv: Potential | None = None
    name: str = ""
    bdp_constant: float = 1.0
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.ratios is None and self.log_deriv is None:
            raise ValueError("need either affine ratios or a log-derivative table")
        if self.ratios is not None:
            r = np.asarray(self.ratios, dtype=float)
            c = np.asarray(self.translations, dtype=float)
            if r.shape != (self.subshift.alphabet_size,) or c.shape != r.shape:
                raise ValueError("one ratio and translation per edge")
            if not ((np.abs(r) > 0) & (np.abs(r) < 1)).all():
                raise ValueError("contraction ratios must lie in (0, 1) in absolute value")
            object.__setattr__(self, "ratios", r)
            object.__setattr__(self, "translations", c)
        if self.log_deriv is not None and (self.log_deriv.values >= 0).any():
            raise ValueError("log-derivative table must be negative (contractions)")
        if self.bdp_constant < 1:
            raise ValueError("bounded distortion constant must be >= 1")

    @property
    def is_affine(self) -> bool:
        return self.ratios is not None

    @property
    def contraction_bound(self) -> float:
        if self.log_deriv is not None:
            return float(math.exp(self.log_deriv.values.max()) * self.bdp_constant)
        return float(np.abs(self.ratios).max())

    @property
    def diameter(self) -> float:
        return self.interval[1] - self.interval[0]

    def log_derivative(self) -> Potential:
        """Geometric potential ``zeta = log|phi'_{w_1}|`` as a locally constant potential."""
        if self.log_deriv is not None:
            return self.log_deriv
        return Potential.from_letters(self.subshift, np.log(np.abs(self.ratios)))

    def family(self) -> PotentialFamily:
        return PotentialFamily(self.log_derivative())

    def affine_map(self, word: Sequence[int]) -> tuple[float, float]:
        """(R, C) with ``phi_word(x) = R x + C``."""
        self._need_affine()
        a, b = 1.0, 0.0
        for e in reversed(word):
            a, b = self.ratios[e] * a, self.ratios[e] * b + self.translations[e]
        return a, b

    def apply(self, word: Sequence[int], x: float) -> float:
        a, b = self.affine_map(word)
        return a * x + b

    def _need_affine(self):
        if not self.is_affine:
            raise StructuralError(f"system {self.name!r} has no affine maps; projection unavailable")

    def to_json(self) -> str:
        edges = []
        for e in range(self.subshift.alphabet_size):
            label = self.labels[e] if self.labels else str(e)
            entry = {"label": label}
            if self.is_affine:
                entry["ratio"] = float(self.ratios[e])
                entry["translation"] = float(self.translations[e])
            edges.append(entry)
        doc = {
            "name": self.name,
            "edges": edges,
            "incidence": self.subshift.incidence.tolist(),
            "intervals": [list(self.interval)],
        }
        if self.log_deriv is not None:
            doc["log_deriv_table"] = {
                "depth": self.log_deriv.depth,
                "values": {self.subshift.format_word(w): float(v)
                           for w, v in zip(self.log_deriv.index.words(), self.log_deriv.values)},
            }
        return json.dumps(doc, indent=2)


def parse_gdms(text: str) -> Gdms:
    doc = json.loads(text)
    edges = doc["edges"]
    k = len(edges)
    inc = np.array(doc.get("incidence", np.ones((k, k))), dtype=int)
    s = Subshift(inc)
    intervals = doc.get("intervals", [[0.0, 1.0]])
    interval = tuple(float(x) for x in intervals[0])
    ratios = translations = log_deriv = None
    if all("ratio" in e for e in edges):
        ratios = [float(e["ratio"]) for e in edges]
        translations = [float(e.get("translation", 0.0)) for e in edges]
    if "log_deriv_table" in doc:
        table = doc["log_deriv_table"]
        m = int(table["depth"])
        idx = s.cylinder_index(m)
        vals = np.empty(len(idx))
        for w, v in table["values"].items():
            vals[idx.index(s.parse_word(w))] = float(v)
        log_deriv = Potential(s, m, vals)
    return Gdms(s, ratios, translations, interval, log_deriv, doc.get("name", ""),
                float(doc.get("bdp_constant", 1.0)), tuple(e.get("label", str(i)) for i, e in enumerate(edges)))


# -- shipped instances -------------------------------------------------------
def cantor3() -> Gdms:
    return Gdms(Subshift.full(2), [1 / 3, 1 / 3], [0.0, 2 / 3], name="cantor3")


def half_quarter() -> Gdms:
    """Two maps with ratios 1/2 and 1/4 on the unit interval."""
    return Gdms(Subshift.full(2), [1 / 2, 1 / 4], [0.0, 3 / 4], name="half_quarter")


def golden_thirds() -> Gdms:
    """Middle-thirds maps constrained by the golden-mean incidence (``00`` forbidden)."""
    return Gdms(Subshift.golden_mean(), [1 / 3, 1 / 3], [0.0, 2 / 3], name="golden_thirds")


def doubling() -> Gdms:
    """Inverse branches of ``x -> 2x mod 1``."""
    return Gdms(Subshift.full(2), [1 / 2, 1 / 2], [0.0, 1 / 2], name="doubling")


def single_map(ratio: float = 0.5) -> Gdms:
    return Gdms(Subshift.full(1), [ratio], [0.0], name="single")


INSTANCES = {
    "cantor3": cantor3,
    "half_quarter": half_quarter,
    "golden_thirds": golden_thirds,
    "doubling": doubling,
}


def get_instance(name: str) -> Gdms:
    try:
        return INSTANCES[name]()
    except KeyError:
        raise KeyError(f"unknown system {name!r}; choose from {sorted(INSTANCES)}") from None


# -- geometry ----------------------------------------------------------------
def project(g: Gdms, word: Sequence[int]) -> tuple[float, float]:
    """The interval ``phi_word(X)``."""
    if not g.subshift.is_admissible(word):
        raise ValueError(f"inadmissible word {tuple(word)}")
    a, b = g.affine_map(word)
    lo, hi = g.interval
    x0, x1 = a * lo + b, a * hi + b
    return (min(x0, x1), max(x0, x1))


def project_all(g: Gdms, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Codes of all admissible length-n words with their image intervals."""
    g._need_affine()
    s, k = g.subshift, g.subshift.alphabet_size
    lo, hi = g.interval
    codes = s.word_codes(1)
    a_lo = g.ratios * lo + g.translations
    a_hi = g.ratios * hi + g.translations
    los, his = np.minimum(a_lo, a_hi), np.maximum(a_lo, a_hi)
    for depth in range(2, n + 1):
        new = s.word_codes(depth)
        head = new // k ** (depth - 1)
        tail = np.searchsorted(codes, new % k ** (depth - 1))
        r, c = g.ratios[head], g.translations[head]
        x0, x1 = r * los[tail] + c, r * his[tail] + c
        codes, los, his = new, np.minimum(x0, x1), np.maximum(x0, x1)
    return codes, los, his


def check_open_set_condition(g: Gdms, depth: int = 3, tol: float = 1e-12) -> bool:
    """Images of distinct depth-``depth`` words have disjoint interiors."""
    _, lo, hi = project_all(g, depth)
    order = np.argsort(lo)
    return bool((lo[order][1:] >= hi[order][:-1] - tol).all())


def box_counting_dimension(g: Gdms, depth: int = 12, n_scales: int = 12) -> float:
    """Slope of log N(eps) against log(1/eps) from a depth-``depth`` cylinder cover."""
    _, lo, hi = project_all(g, depth)
    finest = float((hi - lo).max())
    eps = np.geomspace(g.diameter / 8, 8 * finest, n_scales)
    counts = []
    for e in eps:
        first = np.floor(lo / e).astype(np.int64)
        last = np.maximum(np.ceil(hi / e).astype(np.int64) - 1, first)
        cells = np.unique(np.concatenate([first, last]))
        counts.append(len(cells))
    slope = np.polyfit(np.log(1 / eps), np.log(counts), 1)[0]
    return float(slope)


# -- pressure and dimension --------------------------------------------------
def pressure_t(g: Gdms, t: float, tol: float = 1e-13) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    return leading_eigendata(build_transfer_matrix(g.family().at(t)), tol).log_lambda


def pressure_t_prime(g: Gdms, t: float, tol: float = 1e-13) -> float:
    """``P'(t) = lambda'(t) / lambda(t)``."""
    fam = g.family()
    state = gibbs_state(fam.at(t), tol, n_check=0)
    return pressure_derivative(fam, state) / state.lam


def _is_primitive_graph(s: Subshift) -> bool:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    from .symbolic import graph_period

    adj = csr_matrix(s.incidence)
    n, _ = connected_components(adj, directed=True, connection="strong")
    return n == 1 and graph_period(adj) == 1


def bowen_parameter(g: Gdms, tol: float = 1e-13) -> Root:
    """Zero of ``t -> P(t)``; degenerate (value 0) when ``P(0) <= 0``.

    Systems whose incidence graph is not primitive use the spectral radius
    (maximum over components) and pure bisection.
    """
    if _is_primitive_graph(g.subshift):
        pressure_fn = lambda t: pressure_t(g, t, tol)  # noqa: E731
        deriv = lambda t: pressure_t_prime(g, t, tol)  # noqa: E731
    else:
        fam = g.family()

        def pressure_fn(t):
            tm = build_transfer_matrix(fam.at(t))
            rad = spectral_radius(tm.matrix, min(tol, 1e-14))
            return math.log(rad) + tm.log_scale if rad > 0 else -math.inf

        deriv = None
    p0 = pressure_fn(0.0)
    if p0 <= tol:
        return Root(0.0, abs(p0), degenerate=True)
    hi = 1.0
    while pressure_fn(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise BracketError("pressure stays positive; system is not contracting")
    return decreasing_root(pressure_fn, deriv, 0.0, hi, tol)


def lyapunov(g: Gdms, t: float, tol: float = 1e-13) -> float:
    """``chi = -lambda'(t) / lambda(t)``, the mean of ``-log|phi'|`` under the Gibbs state."""
    return -pressure_t_prime(g, t, tol)
