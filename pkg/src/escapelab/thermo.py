"""Locally constant potentials, transfer matrices and Gibbs states.

A depth-``m`` potential is constant on cylinders of length ``m``.  The
transfer operator ``L g(w) = sum_e g(ew) exp(phi(ew))`` then maps functions
constant on depth-``m`` cylinders to functions of the same kind, so on the
indicator basis it is an exact sparse matrix::

    L[w, v] = exp(phi(v))   if v = e w_1 ... w_{m-1} is admissible.

Rows are target cylinders, columns preimage cylinders; ``L 1 = 1`` means the
potential is normalized.  Matrix entries are stored as ``exp(phi - shift)``
with the shift kept separately, so eigenvalues are handled in log form.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from .symbolic import CylinderIndex, StructuralError, Subshift, Word, graph_period


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Potential:
    subshift: Subshift
    depth: int
    values: np.ndarray

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        vals = np.array(self.values, dtype=float)
        idx = self.subshift.cylinder_index(self.depth)
        if vals.shape != (len(idx),):
            raise ValueError(f"expected {len(idx)} values for depth {self.depth}, got {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("potential values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "index", idx)

    index: CylinderIndex = None  # filled in __post_init__

    @classmethod
    def constant(cls, s: Subshift, c: float, depth: int = 1) -> Potential:
        return cls(s, depth, np.full(len(s.word_codes(depth)), float(c)))

    @classmethod
    def from_letters(cls, s: Subshift, values: Sequence[float]) -> Potential:
        return cls(s, 1, np.asarray(values, dtype=float))

    @classmethod
    def bernoulli(cls, probs: Sequence[float]) -> Potential:
        probs = np.asarray(probs, dtype=float)
        return cls.from_letters(Subshift.full(len(probs)), np.log(probs))

    @classmethod
    def from_function(cls, s: Subshift, depth: int, fn) -> Potential:
        return cls(s, depth, np.array([fn(w) for w in s.admissible_words(depth)], dtype=float))

    def value(self, word: Sequence[int]) -> float:
        return float(self.values[self.index.index(word[: self.depth])])

    def __add__(self, other: Potential) -> Potential:
        depth = max(self.depth, other.depth)
        a, b = extend_depth(self, depth), extend_depth(other, depth)
        return Potential(self.subshift, depth, a.values + b.values)

    def scaled(self, t: float) -> Potential:
        return Potential(self.subshift, self.depth, t * self.values)

    def shifted(self, c: float) -> Potential:
        return Potential(self.subshift, self.depth, self.values + c)


def extend_depth(p: Potential, depth: int) -> Potential:
    """The same function viewed as constant on depth-``depth`` cylinders."""
    if depth < p.depth:
        raise ValueError(f"cannot decrease depth from {p.depth} to {depth}")
    if depth == p.depth:
        return p
    s = p.subshift
    codes = s.word_codes(depth)
    prefix = codes // s.alphabet_size ** (depth - p.depth)
    return Potential(s, depth, p.values[p.index.index_of_codes(prefix)])


def window_sums(p: Potential, codes: np.ndarray, length: int, n: int) -> np.ndarray:
    """Birkhoff sums ``S_n phi`` for words (given by codes) of ``length >= n + m - 1``."""
    m, k = p.depth, p.subshift.alphabet_size
    if length < n + m - 1:
        raise ValueError("words too short for an exact Birkhoff sum")
    out = np.zeros(len(codes))
    for j in range(n):
        window = (codes // k ** (length - m - j)) % k ** m
        out += p.values[p.index.index_of_codes(window)]
    return out


def birkhoff(p: Potential, word: Sequence[int], n: int) -> float:
    """``sum_{j<n} phi(sigma^j w)`` on the cylinder [word]; needs |word| >= n + m - 1."""
    if len(word) < n + p.depth - 1:
        raise ValueError(f"need at least {n + p.depth - 1} letters for an exact sum")
    return float(sum(p.value(word[j:j + p.depth]) for j in range(n)))


# -- transfer matrices -------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TransferMatrix:
    potential: Potential
    matrix: sp.csr_matrix  # entries exp(phi - log_scale)
    log_scale: float

    @property
    def index(self) -> CylinderIndex:
        return self.potential.index

    @property
    def depth(self) -> int:
        return self.potential.depth

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() * math.exp(self.log_scale)


def _successor_pattern(s: Subshift, depth: int, codes: np.ndarray):
    """(source, target) pairs: target = v_2..v_m f for admissible f after v."""
    k = s.alphabet_size
    rows, letters = np.nonzero(s.incidence[codes % k])
    targets = (codes[rows] % k ** (depth - 1)) * k + letters
    return rows, targets


def build_transfer_matrix(p: Potential) -> TransferMatrix:
    s, idx = p.subshift, p.index
    src, tgt_codes = _successor_pattern(s, p.depth, idx.codes)
    tgt = idx.index_of_codes(tgt_codes)
    assert (tgt >= 0).all()
    shift = float(p.values.max())
    data = np.exp(p.values[src] - shift)
    n = len(idx)
    mat = sp.csr_matrix((data, (tgt, src)), shape=(n, n))
    return TransferMatrix(p, mat, shift)


# -- Perron eigendata --------------------------------------------------------
@dataclass(frozen=True)
class EigenData:
    log_lambda: float
    right: np.ndarray
    left: np.ndarray
    residual: float
    gap_estimate: float
    iterations: int

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)


def _power(mat, tol: float, max_iter: int, shift: float = 0.0):
    """Power iteration from the all-ones vector; returns (lam, v, residual, iters).

    ``shift`` adds ``shift * I`` to make periodic blocks aperiodic; the
    returned eigenvalue is for ``mat`` itself.
    """
    n = mat.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 0.0
    res = math.inf
    for it in range(1, max_iter + 1):
        w = mat @ v
        if shift:
            w = w + shift * v
        total = w.sum()
        if total <= 0:
            return 0.0, v, 0.0, it
        lam = total  # v sums to one
        res = float(np.abs(w - lam * v).max() / (lam * v.max()))
        v = w / total
        if res <= tol:
            break
    return lam - shift, v, res, it


def _check_primitive(mat) -> None:
    pattern = (mat != 0).astype(np.int8)
    ncomp, _ = connected_components(pattern, directed=True, connection="strong")
    if ncomp != 1:
        raise StructuralError(f"state graph has {ncomp} strongly connected components")
    period = graph_period(pattern)
    if period != 1:
        raise StructuralError(f"state graph is periodic with period {period}")


def leading_eigendata(tm: TransferMatrix, tol: float = 1e-13, max_iter: int = 100_000) -> EigenData:
    """Perron eigenvalue with strictly positive right and left eigenvectors.

    Right vector: ``L rho = lam rho``; left vector: ``nu L = lam nu`` with
    ``sum(nu) = 1`` and ``nu . rho = 1``.
    """
    mat = tm.matrix
    _check_primitive(mat)
    lam_r, right, res_r, it_r = _power(mat, tol, max_iter)
    lam_l, left, res_l, it_l = _power(mat.T.tocsr(), tol, max_iter)
    res = max(res_r, res_l)
    if res > tol:
        raise ConvergenceError("power iteration did not converge", res)
    if (right <= 0).any() or (left <= 0).any():
        raise ConvergenceError("eigenvector lost positivity", res)
    left = left / left.sum()
    right = right / (left @ right)
    lam = float(left @ (mat @ right))  # two-sided Rayleigh quotient, since left.right == 1
    gap = _deflated_ratio(mat, lam, right, left)
    return EigenData(math.log(lam) + tm.log_scale, right, left, res, gap, max(it_r, it_l))


def _deflated_ratio(mat, lam: float, right: np.ndarray, left: np.ndarray, steps: int = 60) -> float:
    """Rough |lambda_2| / lambda from a short deflated power run."""
    n = mat.shape[0]
    if n == 1:
        return 0.0
    w = np.cos(np.arange(n) * 2.399963)  # deterministic, far from the Perron vector
    est = 0.0
    for _ in range(steps):
        w = w - right * (left @ w)
        nw = np.abs(w).max()
        if nw < 1e-300:
            return 0.0
        w = w / nw
        y = mat @ w
        y = y - right * (left @ y)
        est = np.abs(y).max()
        w = y
    return float(est / lam)


def spectral_radius(mat, tol: float = 1e-14, max_iter: int = 200_000) -> float:
    """Perron value of a nonnegative sparse matrix that may be reducible.

    The maximum over strongly connected components; components without a
    cycle contribute zero.
    """
    mat = sp.csr_matrix(mat)
    n = mat.shape[0]
    if n == 0 or mat.nnz == 0:
        return 0.0
    pattern = (mat != 0).astype(np.int8)
    ncomp, labels = connected_components(pattern, directed=True, connection="strong")
    if ncomp == 1:
        return _component_radius(mat, pattern, tol, max_iter)
    best = 0.0
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    for c in range(ncomp):
        nodes = order[bounds[c]:bounds[c + 1]]
        sub = mat[nodes][:, nodes]
        if sub.nnz == 0:
            continue
        if len(nodes) == 1:
            best = max(best, float(sub[0, 0]))
            continue
        best = max(best, _component_radius(sub, (sub != 0).astype(np.int8), tol, max_iter))
    return best


def _component_radius(mat, pattern, tol, max_iter) -> float:
    shift = 0.0
    if graph_period(pattern) > 1:
        shift = float(mat.sum(axis=0).max())
    lam, _, res, _ = _power(mat, tol, max_iter, shift)
    if res > max(tol, 1e-10):
        raise ConvergenceError("power iteration did not converge", res)
    return float(lam)


# -- Gibbs states ------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class GibbsState:
    potential: Potential
    log_lambda: float
    right: np.ndarray
    left: np.ndarray
    residual: float
    gap_estimate: float
    gibbs_constant_bound: float
    gibbs_constants: tuple[float, ...]

    @property
    def pressure(self) -> float:
        return self.log_lambda

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)

    @property
    def depth(self) -> int:
        return self.potential.depth

    @property
    def index(self) -> CylinderIndex:
        return self.potential.index

    @property
    def subshift(self) -> Subshift:
        return self.potential.subshift

    @property
    def state_measure(self) -> np.ndarray:
        return self.left * self.right

    def cylinder_measures(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Codes of all admissible words of length n and their measures."""
        s, m, k = self.subshift, self.depth, self.subshift.alphabet_size
        codes = s.word_codes(n)
        if n < m:
            prefix = self.index.codes // k ** (m - n)
            pos = np.searchsorted(codes, prefix)
            return codes, np.bincount(pos, weights=self.state_measure, minlength=len(codes))
        return codes, self._measures_of_codes(codes, n)

    def _measures_of_codes(self, codes: np.ndarray, n: int) -> np.ndarray:
        m, k = self.depth, self.subshift.alphabet_size
        idx = self.index
        first = idx.index_of_codes(codes // k ** (n - m))
        last = idx.index_of_codes(codes % k ** m)
        log_mass = np.zeros(len(codes))
        if n > m:
            log_mass = window_sums(self.potential, codes, n, n - m) - (n - m) * self.log_lambda
        return self.right[first] * np.exp(log_mass) * self.left[last]

    def cylinder_measure(self, word: Sequence[int]) -> float:
        s, m = self.subshift, self.depth
        if not s.is_admissible(word):
            return 0.0
        if len(word) == 0:
            return 1.0
        if len(word) < m:
            return float(self.state_measure[self.index.prefix_states([word])].sum())
        n = len(word)
        if s.alphabet_size ** n >= 2 ** 62:  # too long for integer codes
            idx = self.index
            log_mass = birkhoff(self.potential, word, n - m) - (n - m) * self.log_lambda if n > m else 0.0
            return float(self.right[idx.index(word[:m])] * math.exp(log_mass) * self.left[idx.index(word[-m:])])
        return float(self._measures_of_codes(np.array([s.encode(word)]), n)[0])

    def measure_of_words(self, words) -> float:
        """Measure of a union of cylinders given by words that are pairwise incomparable."""
        return float(sum(self.cylinder_measure(w) for w in words))

    def to_json(self, max_depth: int | None = None) -> str:
        n = max_depth or self.depth
        codes, mu = self.cylinder_measures(n)
        cyl = []
        for c, mass in zip(codes, mu):
            w = self.subshift.decode(c, n)
            entry = {"word": self.subshift.format_word(w), "mu": float(mass)}
            if n == self.depth:
                i = self.index.index(w)
                entry["nu"] = float(self.left[i])
                entry["rho"] = float(self.right[i])
            cyl.append(entry)
        return json.dumps({"pressure": self.pressure, "lambda": self.lam, "cylinders": cyl}, indent=2)


def _gibbs_constants(p: Potential, log_lambda: float, state: GibbsState, n_check: int) -> list[float]:
    s, m, k = p.subshift, p.depth, p.subshift.alphabet_size
    out = []
    for n in range(1, n_check + 1):
        length = n + m - 1
        ext = s.word_codes(length)
        sums = window_sums(p, ext, length, n)
        prefix = ext // k ** (length - n)
        codes, mu = state.cylinder_measures(n)
        pos = np.searchsorted(codes, prefix)
        sup = np.full(len(codes), -np.inf)
        np.maximum.at(sup, pos, sums)
        ratio = mu / np.exp(sup - n * log_lambda)
        out.append(float(max(ratio.max(), 1.0 / ratio.min())))
    return out


def gibbs_state(p: Potential, tol: float = 1e-13, n_check: int = 8, max_iter: int = 100_000) -> GibbsState:
    tm = build_transfer_matrix(p)
    eig = leading_eigendata(tm, tol, max_iter)
    state = GibbsState(p, eig.log_lambda, eig.right, eig.left, eig.residual, eig.gap_estimate, math.nan, ())
    consts = _gibbs_constants(p, eig.log_lambda, state, n_check) if n_check else []
    return GibbsState(
        p, eig.log_lambda, eig.right, eig.left, eig.residual, eig.gap_estimate,
        max(consts) if consts else math.nan, tuple(consts),
    )


def pressure(p: Potential, method: str = "spectral", n: int = 12, tol: float = 1e-13) -> float:
    if method == "spectral":
        return leading_eigendata(build_transfer_matrix(p), tol).log_lambda
    if method == "partition":
        if n < 1:
            raise ValueError("partition method needs n >= 1")
        s, m, k = p.subshift, p.depth, p.subshift.alphabet_size
        length = n + m - 1
        ext = s.word_codes(length)
        sums = window_sums(p, ext, length, n)
        prefix = ext // k ** (length - n)
        uniq, pos = np.unique(prefix, return_inverse=True)
        sup = np.full(len(uniq), -np.inf)
        np.maximum.at(sup, pos, sums)
        return float(logsumexp(sup) / n)
    raise ValueError(f"unknown pressure method {method!r}")


def normalize(g: GibbsState, tol: float = 1e-13) -> Potential:
    """Cohomologous potential with pressure zero and ``L 1 = 1``."""
    p = g.potential
    depth = max(p.depth, 2)
    if depth != p.depth:
        p = extend_depth(p, depth)
        eig = leading_eigendata(build_transfer_matrix(p), tol)
        rho, log_lam = eig.right, eig.log_lambda
    else:
        rho, log_lam = g.right, g.log_lambda
    s, k = p.subshift, p.subshift.alphabet_size
    codes = p.index.codes
    first_succ = np.argmax(s.incidence[codes % k], axis=1)
    shifted = p.index.index_of_codes((codes % k ** (depth - 1)) * k + first_succ)
    values = p.values - log_lam + np.log(rho) - np.log(rho[shifted])
    return Potential(s, depth, values)


@dataclass(frozen=True, eq=False)
class PotentialFamily:
    """``t -> base + t * ell`` with locally constant ``ell``."""

    ell: Potential
    base: Potential | None = None

    def at(self, t: float) -> Potential:
        p = self.ell.scaled(t)
        return p if self.base is None else p + self.base

    def derivative_values(self, depth: int) -> np.ndarray:
        return extend_depth(self.ell, depth).values


def pressure_derivative(family: PotentialFamily, g: GibbsState) -> float:
    """``d lambda / dt = nu(L(ell * rho))`` at the state ``g`` of ``family.at(t)``."""
    tm = build_transfer_matrix(g.potential)
    ell = family.derivative_values(g.depth)
    return float(g.left @ (tm.matrix @ (ell * g.right))) * math.exp(tm.log_scale)


# -- text format ---------------------------------------------------------------
def parse_potential(text: str, s: Subshift) -> Potential:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("depth="):
        raise ValueError("line 1: expected 'depth=<m>'")
    m = int(lines[0].split("=", 1)[1])
    idx = s.cylinder_index(m)
    values = np.full(len(idx), np.nan)
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            word_text, val = ln.split()
            word = s.parse_word(word_text)
            values[idx.index(word)] = float(val)
        except (ValueError, KeyError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if np.isnan(values).any():
        missing = [s.format_word(idx.word(i)) for i in np.flatnonzero(np.isnan(values))]
        raise ValueError(f"missing values for words {missing}")
    return Potential(s, m, values)


def format_potential(p: Potential) -> str:
    s = p.subshift
    lines = [f"depth={p.depth}"]
    lines += [f"{s.format_word(w)} {float(v)!r}" for w, v in zip(p.index.words(), p.values)]
    return "\n".join(lines) + "\n"
