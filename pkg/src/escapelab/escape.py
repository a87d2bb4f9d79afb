"""Open systems: survivor operators, escape rates and survival probabilities.

A hole is a finite set of words; a sequence ``omega`` is in the hole when it
starts with one of them.  Two exact constructions of the survivor operator
are available:

``cylinder``
    raise the state depth to the longest hole word and delete hole states
    (the textbook construction, size grows like ``k^n``);
``automaton``
    pair depth-``m`` states with the state of an Aho-Corasick automaton of
    the hole words, deleting pairs that have just completed a hole word.

Both operators have the same spectral radius; the second one stays small for
single-cylinder holes at any depth.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares
from scipy.sparse.csgraph import connected_components

from .holes import HoleSequence, theoretical_escape_limit
from .symbolic import StructuralError, Subshift, Word, graph_period
from .thermo import (
    ConvergenceError,
    GibbsState,
    Potential,
    TransferMatrix,
    _power,
    extend_depth,
    gibbs_state,
    window_sums,
)

DEFAULT_MAX_STATES = 1 << 21


# -- operators ---------------------------------------------------------------
def perturbed_operator(tm: TransferMatrix, hole_words: Sequence[Word]) -> TransferMatrix:
    """Delete rows and columns of states lying in the hole."""
    if not hole_words:
        return tm
    mask = tm.index.prefix_states(hole_words)  # raises if a word is longer than the depth
    if mask.all():
        raise StructuralError("the hole covers every state; no survivors")
    keep = sp.diags((~mask).astype(float))
    return TransferMatrix(tm.potential, sp.csr_matrix(keep @ tm.matrix @ keep), tm.log_scale)


class _AhoCorasick:
    """Dense goto table for a finite set of words over ``k`` letters."""

    def __init__(self, words: Sequence[Word], k: int):
        children: list[dict[int, int]] = [{}]
        terminal = [False]
        for w in words:
            node = 0
            for a in w:
                nxt = children[node].get(a)
                if nxt is None:
                    nxt = len(children)
                    children[node][a] = nxt
                    children.append({})
                    terminal.append(False)
                node = nxt
            terminal[node] = True
        n = len(children)
        delta = np.zeros((n, k), dtype=np.int64)
        fail = np.zeros(n, dtype=np.int64)
        term = np.array(terminal)
        queue = deque()
        for a in range(k):
            c = children[0].get(a)
            if c is not None:
                delta[0, a] = c
                queue.append(c)
        while queue:
            u = queue.popleft()
            term[u] |= term[fail[u]]
            for a in range(k):
                c = children[u].get(a)
                if c is None:
                    delta[u, a] = delta[fail[u], a]
                else:
                    fail[c] = delta[fail[u], a]
                    delta[u, a] = c
                    queue.append(c)
        self.delta, self.terminal, self.size = delta, term, n

    def run(self, letters: np.ndarray, start: np.ndarray | None = None) -> np.ndarray:
        """States after reading each row of ``letters``."""
        q = np.zeros(len(letters), dtype=np.int64) if start is None else start.copy()
        for j in range(letters.shape[1]):
            q = self.delta[q, letters[:, j]]
        return q


@dataclass(frozen=True, eq=False)
class SurvivorOperator:
    """Forward survivor chain with edge weights ``exp(base + t * ell)``.

    ``rows[i] -> cols[i]`` are the surviving transitions.  Each chain state
    sits in the depth-``depth`` cylinder ``cyl[state]``; ``kill_*`` list the
    transitions of the unpunctured chain that enter the hole, which lets
    ``1 - lam_n / lam`` be computed without cancellation.
    """

    rows: np.ndarray
    cols: np.ndarray
    base: np.ndarray
    ell: np.ndarray | None
    n_states: int
    method: str
    depth: int
    cyl: np.ndarray
    kill_rows: np.ndarray
    kill_cyl: np.ndarray
    kill_base: np.ndarray

    def log_weights(self, t: float = 0.0) -> np.ndarray:
        return self.base if self.ell is None or t == 0 else self.base + t * self.ell

    def matrix(self, t: float = 0.0) -> tuple[sp.csr_matrix, float]:
        lw = self.log_weights(t)
        shift = float(lw.max()) if lw.size else 0.0
        mat = sp.csr_matrix((np.exp(lw - shift), (self.rows, self.cols)), shape=(self.n_states,) * 2)
        return mat, shift

    def _components(self):
        if not hasattr(self, "_comp_cache"):
            pattern = sp.csr_matrix((np.ones(len(self.rows), dtype=np.int8), (self.rows, self.cols)),
                                    shape=(self.n_states,) * 2)
            ncomp, labels = connected_components(pattern, directed=True, connection="strong")
            comps = []
            order = np.argsort(labels, kind="stable")
            bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
            for c in range(ncomp):
                nodes = order[bounds[c]:bounds[c + 1]]
                sub = pattern[nodes][:, nodes]
                if sub.nnz == 0:
                    continue
                comps.append((nodes, graph_period(sub) if len(nodes) > 1 else 1))
            object.__setattr__(self, "_comp_cache", comps)
        return self._comp_cache

    def _dominant(self, t: float, tol: float, max_iter: int = 200_000):
        comps = self._components()
        if not comps:
            return None
        mat, shift = self.matrix(t)
        best = None
        for nodes, period in comps:
            sub = mat[nodes][:, nodes]
            if len(nodes) == 1:
                lam, right = float(sub[0, 0]), np.ones(1)
            else:
                s = float(sub.sum(axis=0).max()) if period > 1 else 0.0
                lam, right, res, _ = _power(sub, tol, max_iter, s)
                if res > max(tol, 1e-10):
                    raise ConvergenceError("survivor power iteration did not converge", res)
            if lam > 0 and (best is None or lam > best["lam"]):
                best = dict(nodes=nodes, period=period, sub=sub, lam=lam, right=right, shift=shift)
        return best

    @staticmethod
    def _left(dom, tol: float, max_iter: int = 200_000) -> np.ndarray:
        if len(dom["nodes"]) == 1:
            return np.ones(1)
        s = float(dom["sub"].sum(axis=0).max()) if dom["period"] > 1 else 0.0
        _, left, _, _ = _power(dom["sub"].T.tocsr(), tol, max_iter, s)
        return left

    def log_radius(self, t: float = 0.0, tol: float = 1e-14) -> float:
        """Log spectral radius, ``-inf`` when no cycle survives."""
        dom = self._dominant(t, tol)
        return -math.inf if dom is None else math.log(dom["lam"]) + dom["shift"]

    def eigendata(self, t: float = 0.0, tol: float = 1e-14) -> tuple[float, float]:
        """``(log lam_n(t), lam_n'(t) / lam_n(t))`` from the dominant component.

        The derivative is ``u (dM/dt) v / (u M v)`` with ``u``, ``v`` the left
        and right Perron vectors of the component.
        """
        dom = self._dominant(t, tol)
        if dom is None:
            return -math.inf, 0.0
        log_lam = math.log(dom["lam"]) + dom["shift"]
        if self.ell is None:
            return log_lam, 0.0
        nodes, right = dom["nodes"], dom["right"]
        left = self._left(dom, tol)
        lw = self.log_weights(t)
        dmat = sp.csr_matrix((self.ell * np.exp(lw - dom["shift"]), (self.rows, self.cols)),
                             shape=(self.n_states,) * 2)
        dsub = dmat[nodes][:, nodes]
        dlam = float(left @ (dsub @ right)) / float(left @ right)
        return log_lam, dlam / dom["lam"]

    def escape_defect(self, g: GibbsState, tol: float = 1e-14) -> float:
        """``1 - lam_n / lam`` at ``t = 0`` for the chain of the Gibbs state ``g``.

        With ``u`` the left Perron vector of the dominant survivor component
        ``C`` and ``h`` the right eigenvector of the unpunctured chain
        (conformal cylinder masses), ``(lam - lam_n) u.h`` equals the
        ``u``-weighted flux along transitions leaving ``C``.
        """
        dom = self._dominant(0.0, tol)
        if dom is None:
            return 1.0
        nodes, shift = dom["nodes"], dom["shift"]
        u = self._left(dom, tol)
        local = np.full(self.n_states, -1, dtype=np.int64)
        local[nodes] = np.arange(len(nodes))
        h = conformal_masses(g, self.depth)
        out = (local[self.rows] >= 0) & (local[self.cols] < 0)
        flux = float((u[local[self.rows[out]]] * np.exp(self.base[out] - shift) * h[self.cyl[self.cols[out]]]).sum())
        kout = local[self.kill_rows] >= 0
        flux += float((u[local[self.kill_rows[kout]]] * np.exp(self.kill_base[kout] - shift)
                       * h[self.kill_cyl[kout]]).sum())
        lam_full = math.exp(g.log_lambda - shift)
        return flux / (lam_full * float(u @ h[self.cyl[nodes]]))


def conformal_masses(g: GibbsState, depth: int) -> np.ndarray:
    """Right eigenvector of the forward chain on depth-``depth`` cylinders (``nu`` of each cylinder)."""
    m, k = g.depth, g.subshift.alphabet_size
    if depth == m:
        return g.left
    codes = g.subshift.word_codes(depth)
    last = g.index.index_of_codes(codes % k ** m)
    return np.exp(window_sums(g.potential, codes, depth, depth - m) - (depth - m) * g.log_lambda) * g.left[last]


def _check_hole(s: Subshift, hole_words: Sequence[Word]) -> list[Word]:
    words = [tuple(int(a) for a in w) for w in hole_words]
    for w in words:
        if not w:
            raise StructuralError("the empty word would make the whole space a hole")
        if not s.is_admissible(w):
            raise ValueError(f"hole word {w} is not admissible")
    return words


def survivor_operator(p: Potential, hole_words: Sequence[Word], ell: Potential | None = None,
                      method: str = "auto", max_states: int = DEFAULT_MAX_STATES) -> SurvivorOperator:
    """Survivor chain of the potential ``p`` (plus ``t * ell``) outside the hole."""
    s = p.subshift
    words = _check_hole(s, hole_words)
    longest = max((len(w) for w in words), default=0)
    depth = max(p.depth, ell.depth if ell is not None else 1)
    if method == "auto":
        method = "cylinder" if longest <= depth else "automaton"
    if method == "cylinder":
        return _cylinder_operator(p, words, ell, max(depth, longest), max_states)
    if method == "automaton":
        return _automaton_operator(p, words, ell, depth, max_states)
    raise ValueError(f"unknown survivor method {method!r}")


def _cylinder_operator(p, words, ell, depth, max_states):
    s, k = p.subshift, p.subshift.alphabet_size
    if s.count_words(depth) > max_states:
        raise StructuralError(f"depth {depth} needs more than {max_states} states; use the automaton method")
    pd = extend_depth(p, depth)
    idx = pd.index
    alive = ~idx.prefix_states(words) if words else np.ones(len(idx), dtype=bool)
    if not alive.any():
        raise StructuralError("the hole covers every state; no survivors")
    codes = idx.codes
    src, letters = np.nonzero(s.incidence[codes % k])
    tgt = idx.index_of_codes((codes[src] % k ** (depth - 1)) * k + letters)
    keep = alive[src] & alive[tgt]
    killed = alive[src] & ~alive[tgt]
    renum = np.cumsum(alive) - 1
    ell_vals = extend_depth(ell, depth).values[src[keep]] if ell is not None else None
    return SurvivorOperator(
        renum[src[keep]], renum[tgt[keep]], pd.values[src[keep]], ell_vals, int(alive.sum()), "cylinder",
        depth, np.flatnonzero(alive), renum[src[killed]], tgt[killed], pd.values[src[killed]],
    )


def _automaton_operator(p, words, ell, depth, max_states):
    s, k = p.subshift, p.subshift.alphabet_size
    pd = extend_depth(p, depth)
    ed = extend_depth(ell, depth) if ell is not None else None
    idx = pd.index
    ac = _AhoCorasick(words, k)
    q0 = ac.run(idx.letters())
    start = np.flatnonzero(~ac.terminal[q0])
    state_ids: dict[int, int] = {}
    order: list[int] = []
    for key in (start * ac.size + q0[start]).tolist():
        if key not in state_ids:
            state_ids[key] = len(order)
            order.append(key)
    rows, cols, wsrc = [], [], []
    k_rows, k_cyl, k_src = [], [], []
    frontier = np.array(order, dtype=np.int64)
    codes = idx.codes
    while frontier.size:
        w, q = np.divmod(frontier, ac.size)
        src_pos, f = np.nonzero(s.incidence[codes[w] % k])
        w_src, q_src = w[src_pos], q[src_pos]
        w_new = idx.index_of_codes((codes[w_src] % k ** (depth - 1)) * k + f)
        q_new = ac.delta[q_src, f]
        dead = ac.terminal[q_new]
        src_keys = frontier[src_pos]
        k_rows.extend(state_ids[a] for a in src_keys[dead].tolist())
        k_cyl.extend(w_new[dead].tolist())
        k_src.extend(w_src[dead].tolist())
        ok = ~dead
        nxt = []
        for a_key, b_key, wv in zip(src_keys[ok].tolist(), (w_new * ac.size + q_new)[ok].tolist(),
                                    w_src[ok].tolist()):
            b = state_ids.get(b_key)
            if b is None:
                b = state_ids[b_key] = len(order)
                order.append(b_key)
                nxt.append(b_key)
            rows.append(state_ids[a_key])
            cols.append(b)
            wsrc.append(wv)
        if len(order) > max_states:
            raise StructuralError(f"survivor automaton exceeds {max_states} states")
        frontier = np.array(nxt, dtype=np.int64)
    if not order:
        raise StructuralError("the hole covers every state; no survivors")
    wsrc = np.array(wsrc, dtype=np.int64)
    k_src = np.array(k_src, dtype=np.int64)
    ell_vals = ed.values[wsrc] if ed is not None else None
    cyl = np.array(order, dtype=np.int64) // ac.size
    return SurvivorOperator(
        np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), pd.values[wsrc], ell_vals,
        len(order), "automaton", depth, cyl, np.array(k_rows, dtype=np.int64),
        np.array(k_cyl, dtype=np.int64), pd.values[k_src] if len(k_src) else np.zeros(0),
    )


# -- escape rates ------------------------------------------------------------
@dataclass(frozen=True)
class EscapeRate:
    lambda_n: float
    log_lambda_n: float
    R_n: float

    @property
    def empty_survivor(self) -> bool:
        return math.isinf(self.R_n)


def survivor_log_lambda(p: Potential, hole_words: Sequence[Word], method: str = "auto",
                        tol: float = 1e-14) -> float:
    """Log spectral radius of the survivor operator (``-inf`` if nothing survives)."""
    if not hole_words:
        return gibbs_state(p, 1e-13, n_check=0).log_lambda
    try:
        op = survivor_operator(p, hole_words, method=method)
    except StructuralError as exc:
        if "no survivors" in str(exc):
            return -math.inf
        raise
    return op.log_radius(0.0, tol)


def _hole_words(h, n) -> list[Word]:
    if isinstance(h, HoleSequence):
        return list(h.words(n))
    return list(h)


def escape_rate(g: GibbsState, h, n: int | None = None, method: str = "auto",
                tol: float = 1e-14) -> EscapeRate:
    """``(lambda_n, R_n)`` for level ``n`` of a hole sequence (or a list of hole words).

    ``R_n = -log(1 - delta)`` with ``delta = 1 - lambda_n / lambda`` taken from
    :meth:`SurvivorOperator.escape_defect`, which keeps full relative
    precision when the hole is tiny.
    """
    words = _hole_words(h, n)
    if not words:
        return EscapeRate(g.lam, g.log_lambda, 0.0)
    try:
        op = survivor_operator(g.potential, words, method=method)
    except StructuralError as exc:
        if "no survivors" in str(exc):
            return EscapeRate(0.0, -math.inf, math.inf)
        raise
    delta = op.escape_defect(g, tol)
    if delta >= 1.0:
        return EscapeRate(0.0, -math.inf, math.inf)
    R = max(-math.log1p(-delta), 0.0)
    return EscapeRate(math.exp(g.log_lambda - R), g.log_lambda - R, R)


# -- survival probabilities ---------------------------------------------------
def _markov_chain(g: GibbsState, depth: int):
    """Stationary vector and forward transition matrix on depth-``depth`` states."""
    if depth != g.depth:
        g = gibbs_state(extend_depth(g.potential, depth), n_check=0)
    s, k, idx = g.subshift, g.subshift.alphabet_size, g.index
    codes = idx.codes
    src, letters = np.nonzero(s.incidence[codes % k])
    tgt = idx.index_of_codes((codes[src] % k ** (depth - 1)) * k + letters)
    vals = g.potential.values
    prob = np.exp(vals[src] - g.log_lambda) * g.left[tgt] / g.left[src]
    n = len(idx)
    P = sp.csr_matrix((prob, (src, tgt)), shape=(n, n))
    return g, g.state_measure, P


def log_survival_probability_exact(g: GibbsState, hole_words: Sequence[Word], k: int,
                                   first_step: int = 1, dense_limit: int = 2048) -> float:
    """``log mu{omega : sigma^i omega not in the hole, first_step <= i <= k}``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    words = _check_hole(g.subshift, hole_words)
    if not words or k < first_step:
        return 0.0
    depth = max(g.depth, max(len(w) for w in words))
    g2, pi, P = _markov_chain(g, depth)
    alive = (~g2.index.prefix_states(words)).astype(float)
    a = pi * alive if first_step == 0 else pi.copy()
    steps = k if first_step == 0 else k - first_step + 1
    if first_step > 1:
        for _ in range(first_step - 1):
            a = P.T @ a
    log_scale = 0.0
    if len(pi) <= dense_limit and steps > 64:
        Q = P.toarray() * alive[None, :]
        qpow, qlog = Q, 0.0
        e = steps
        while e:
            if e & 1:
                a = a @ qpow
                tot = a.sum()
                if tot <= 0:
                    return -math.inf
                a /= tot
                log_scale += math.log(tot) + qlog
            e >>= 1
            if e:
                qpow = qpow @ qpow
                qlog *= 2
                m = qpow.max()
                if m <= 0:
                    return -math.inf
                qpow /= m
                qlog += math.log(m)
        return log_scale + math.log(a.sum())
    PT = P.T.tocsr()
    for _ in range(steps):
        a = (PT @ a) * alive
        tot = a.sum()
        if tot <= 0:
            return -math.inf
        if tot < 1e-200:
            a /= tot
            log_scale += math.log(tot)
    return log_scale + math.log(a.sum())


def survival_probability_exact(g: GibbsState, hole_words: Sequence[Word], k: int,
                               first_step: int = 1) -> float:
    return math.exp(log_survival_probability_exact(g, hole_words, k, first_step))


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    std_error: float
    samples: int
    seed: int
    blocks: int


def _sampler(g: GibbsState, depth: int):
    g2, pi, P = _markov_chain(g, depth)
    P = P.tocsr()
    P.sort_indices()
    row_of = np.repeat(np.arange(P.shape[0]), np.diff(P.indptr))
    within = np.zeros(P.nnz)
    for r in range(P.shape[0]):
        a, b = P.indptr[r], P.indptr[r + 1]
        c = np.cumsum(P.data[a:b])
        within[a:b] = c / c[-1]
    cum = row_of + within
    cum_pi = np.cumsum(pi)
    cum_pi /= cum_pi[-1]
    return g2, cum_pi, cum, P.indices


def _mc_block(args) -> int:
    seed_seq, n, k, alive, cum_pi, cum, targets = args
    rng = np.random.default_rng(seed_seq)
    state = np.minimum(np.searchsorted(cum_pi, rng.random(n), side="right"), len(cum_pi) - 1)
    ok = np.ones(n, dtype=bool)
    last = len(cum) - 1
    for _ in range(k):
        pos = np.minimum(np.searchsorted(cum, state + rng.random(n), side="right"), last)
        state = targets[pos]
        ok &= alive[state]
    return int(ok.sum())


def monte_carlo_survival(g: GibbsState, hole_words: Sequence[Word], k: int, samples: int,
                         seed: int, blocks: int = 16, threads: int | None = None) -> MonteCarloResult:
    """Sample ``mu``-typical sequences and count those avoiding the hole at steps 1..k.

    Samples are split into ``blocks`` blocks with independent child seeds, so
    the result depends only on ``(seed, blocks)``, not on ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    words = _check_hole(g.subshift, hole_words)
    if not words or k == 0:
        return MonteCarloResult(1.0, 0.0, samples, seed, blocks)
    depth = max(g.depth, max(len(w) for w in words))
    g2, cum_pi, cum, targets = _sampler(g, depth)
    alive = ~g2.index.prefix_states(words)
    sizes = [samples // blocks + (1 if i < samples % blocks else 0) for i in range(blocks)]
    children = np.random.SeedSequence(seed).spawn(blocks)
    jobs = [(children[i], sizes[i], k, alive, cum_pi, cum, targets) for i in range(blocks) if sizes[i]]
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            counts = list(pool.map(_mc_block, jobs))
    else:
        counts = [_mc_block(j) for j in jobs]
    p = sum(counts) / samples
    return MonteCarloResult(p, math.sqrt(p * (1 - p) / samples), samples, seed, blocks)


# -- asymptotics ---------------------------------------------------------------
@dataclass(frozen=True)
class Extrapolation:
    limit: float
    uncertainty: float
    gamma: float | None
    c: float | None
    reliable: bool
    n_used: int


def extrapolate_limit(mu: Sequence[float], ratio: Sequence[float], min_points: int = 3) -> Extrapolation:
    """Fit ``ratio = L + c * mu^gamma`` by least squares on the last half of the levels.

    Residuals are weighted by ``mu^{-1/2}`` so that deep levels count, and
    ``gamma`` is kept in ``[0.2, 4]``.  The uncertainty is the change in ``L``
    when the deepest level is dropped.  A non-monotone tail is flagged.
    """
    mu = np.asarray(mu, dtype=float)
    r = np.asarray(ratio, dtype=float)
    ok = np.isfinite(r) & (mu > 0)
    mu, r = mu[ok], r[ok]
    if len(r) == 0:
        return Extrapolation(math.nan, math.inf, None, None, False, 0)
    start = len(r) // 2 if len(r) >= 2 * min_points else max(len(r) - min_points, 0)
    mu_t, r_t = mu[start:], r[start:]
    n = len(r_t)
    spread = float(r_t.max() - r_t.min()) if n else 0.0
    if n < min_points:
        return Extrapolation(float(r[-1]), spread, None, None, False, n)
    d = np.diff(r_t)
    scale = max(abs(r_t[-1]), 1e-300)
    big = np.abs(d) > 1e-9 * scale
    if not big.any():
        return Extrapolation(float(r_t[-1]), spread, None, None, True, n)
    sign = np.sign(d[big])
    monotone = bool(np.all(sign > 0) or np.all(sign < 0))
    fit = _fit_tail(mu_t, r_t)
    fit_short = _fit_tail(mu_t[:-1], r_t[:-1]) if n > min_points else fit
    L, logc, gamma, direction = fit
    return Extrapolation(float(L), float(abs(L - fit_short[0])), float(gamma),
                         float(direction * math.exp(logc)), monotone, n)


def _fit_tail(mu: np.ndarray, r: np.ndarray):
    x = np.log(mu)
    direction = 1.0 if r[0] >= r[-1] else -1.0
    w = mu ** -0.5
    w = w / w.max()

    def resid(p):
        L, logc, gamma = p
        return (r - L - direction * np.exp(logc + gamma * x)) * w

    out = least_squares(resid, [r[-1], 0.0, 1.0], bounds=([-np.inf, -60, 0.2], [np.inf, 60, 4.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    L, logc, gamma = out.x
    return L, logc, gamma, direction


@dataclass(frozen=True)
class EscapeRow:
    n: int
    mu_Un: float
    lambda_n: float
    R_n: float
    ratio: float
    side: str = "cylinder"


@dataclass(frozen=True)
class EscapeReport:
    rows: tuple[EscapeRow, ...]
    pressure: float
    extrapolation: Extrapolation | None
    theoretical: float | None
    classification: dict | None = None
    extra: dict = field(default_factory=dict)

    def side(self, side: str) -> list[EscapeRow]:
        return [r for r in self.rows if r.side == side]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "mu_Un", "lambda_n", "R_n", "ratio", "side"])
        for r in self.rows:
            w.writerow([r.n, *(repr(float(x)) for x in (r.mu_Un, r.lambda_n, r.R_n, r.ratio)), r.side])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "pressure": self.pressure,
            "theoretical_d_phi": self.theoretical,
            "classification": self.classification,
            "extrapolation": asdict(self.extrapolation) if self.extrapolation else None,
            "rows": [asdict(r) for r in self.rows],
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def map_levels(fn, items: Sequence, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, spread over a thread pool when ``threads > 1``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def escape_asymptotics(g: GibbsState, h: HoleSequence, levels: Sequence[int] | None = None,
                       method: str = "auto", threads: int = 1) -> EscapeReport:
    levels = list(levels) if levels is not None else h.level_numbers
    rates = map_levels(lambda n: escape_rate(g, h.words(n), method=method), levels, threads)
    rows = []
    for n, er in zip(levels, rates):
        mu = h.mu.get(n) if h.mu else None
        mu = g.measure_of_words(h.words(n)) if mu is None else mu
        rows.append(EscapeRow(n, mu, er.lambda_n, er.R_n, er.R_n / mu, h.kind))
    ext = extrapolate_limit([r.mu_Un for r in rows], [r.ratio for r in rows])
    theory = theoretical_escape_limit(g, h.classification)
    return EscapeReport(tuple(rows), g.pressure, ext, theory, h.classification.to_dict())


def ball_escape_asymptotics(g: GibbsState, sandwiches, method: str = "auto") -> EscapeReport:
    """Inner and outer rows for a list of ball sandwiches.

    ``ratio`` is normalized by the measure of the ball itself, so that
    ``inner ratio <= R(B) / mu(B) <= outer ratio``.
    """
    rows = []
    balls: dict[str, list[float]] = {"inner": [], "outer": []}
    for sw in sandwiches:
        for side, words in (("inner", sw.inner), ("outer", sw.outer)):
            if not words:
                continue
            er = escape_rate(g, words, method=method)
            rows.append(EscapeRow(sw.N, g.measure_of_words(words), er.lambda_n, er.R_n,
                                  er.R_n / sw.mu_ball, side))
            balls[side].append(sw.mu_ball)
    exts = {}
    for side in ("inner", "outer"):
        rs = [r for r in rows if r.side == side]
        if rs:
            exts[side] = asdict(extrapolate_limit(balls[side], [r.ratio for r in rs]))
    return EscapeReport(tuple(rows), g.pressure, None, None, None, {"ball_extrapolation": exts})
