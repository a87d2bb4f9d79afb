"""Finite-alphabet subshifts of finite type.

Words are tuples of letter indices.  Internally, admissible words of a fixed
length ``n`` are encoded as base-``k`` integers, so lexicographic order on
words coincides with numeric order on codes.  Every enumeration in the
package is built on these sorted code arrays.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


class StructuralError(ValueError):
    """Raised when the combinatorial structure forbids an operation."""


@dataclass(frozen=True, eq=False)
class Subshift:
    """One-sided subshift of finite type given by a 0/1 incidence matrix."""

    incidence: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        a = np.array(self.incidence, dtype=np.int8)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"incidence must be a non-empty square matrix, got shape {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("incidence entries must be 0 or 1")
        dead = np.flatnonzero((a.sum(axis=1) == 0) | (a.sum(axis=0) == 0))
        if dead.size:
            raise StructuralError(f"dead letters {dead.tolist()}; use Subshift.pruned()")
        a.setflags(write=False)
        object.__setattr__(self, "incidence", a)
        if self.labels is not None:
            if len(self.labels) != a.shape[0]:
                raise ValueError("one label per letter required")
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @classmethod
    def full(cls, k: int) -> Subshift:
        return cls(np.ones((k, k), dtype=np.int8))

    @classmethod
    def golden_mean(cls) -> Subshift:
        """Two letters, the word ``00`` forbidden."""
        return cls(np.array([[0, 1], [1, 1]]))

    @classmethod
    def pruned(cls, incidence, labels: Sequence[str] | None = None) -> Subshift:
        """Build a subshift after repeatedly deleting letters without successor or predecessor.

        Truncating a countable alphabet tends to leave such letters behind;
        the surviving letters keep their labels (default: original indices).
        """
        a = np.array(incidence, dtype=np.int8)
        keep = np.arange(a.shape[0])
        labels = list(labels) if labels is not None else [str(i) for i in keep]
        while True:
            sub = a[np.ix_(keep, keep)]
            ok = (sub.sum(axis=1) > 0) & (sub.sum(axis=0) > 0)
            if ok.all():
                break
            keep = keep[ok]
            if keep.size == 0:
                raise StructuralError("pruning removed every letter")
        return cls(a[np.ix_(keep, keep)], tuple(labels[i] for i in keep))

    @property
    def alphabet_size(self) -> int:
        return self.incidence.shape[0]

    # -- words --------------------------------------------------------------
    def is_admissible(self, word: Sequence[int]) -> bool:
        k = self.alphabet_size
        if any(not 0 <= e < k for e in word):
            return False
        return all(self.incidence[a, b] for a, b in zip(word, word[1:]))

    def word_codes(self, n: int) -> np.ndarray:
        """Sorted base-k codes of all admissible words of length ``n``."""
        if n < 0:
            raise ValueError("length must be non-negative")
        k = self.alphabet_size
        if n == 0:
            return np.zeros(1, dtype=np.int64)
        if k ** n >= 2 ** 62:
            raise OverflowError(f"words of length {n} over {k} letters do not fit in int64 codes")
        codes = np.arange(k, dtype=np.int64)
        for _ in range(n - 1):
            last = codes % k
            rows, cols = np.nonzero(self.incidence[last])
            codes = codes[rows] * k + cols
        return codes

    def count_words(self, n: int) -> int:
        if n == 0:
            return 1
        return int(np.linalg.matrix_power(self.incidence.astype(object), n - 1).sum())

    def encode(self, word: Sequence[int]) -> int:
        code = 0
        for e in word:
            code = code * self.alphabet_size + int(e)
        return code

    def decode(self, code: int, n: int) -> Word:
        k = self.alphabet_size
        out = []
        for _ in range(n):
            code, r = divmod(int(code), k)
            out.append(r)
        return tuple(reversed(out))

    def decode_array(self, codes: np.ndarray, n: int) -> np.ndarray:
        """Letters of each code as an (len(codes), n) array."""
        k = self.alphabet_size
        powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
        return (np.asarray(codes, dtype=np.int64)[:, None] // powers) % k

    def admissible_words(self, n: int) -> list[Word]:
        return [self.decode(c, n) for c in self.word_codes(n)]

    def cylinder_index(self, m: int) -> CylinderIndex:
        if m < 1:
            raise ValueError("depth must be >= 1")
        return CylinderIndex(self, m, self.word_codes(m))

    def format_word(self, word: Sequence[int]) -> str:
        if self.labels is not None and any(len(s) != 1 for s in self.labels):
            return ".".join(self.labels[e] for e in word)
        if self.labels is not None:
            return "".join(self.labels[e] for e in word)
        if self.alphabet_size <= 10:
            return "".join(str(e) for e in word)
        return ".".join(str(e) for e in word)

    def parse_word(self, text: str) -> Word:
        text = text.strip()
        if "." in text or (self.alphabet_size > 10 and text):
            parts = [p for p in text.split(".") if p]
        else:
            parts = list(text)
        if self.labels is not None:
            lookup = {s: i for i, s in enumerate(self.labels)}
            return tuple(lookup[p] for p in parts)
        return tuple(int(p) for p in parts)

    # -- primitivity --------------------------------------------------------
    def is_finitely_primitive(self, max_p: int = 32) -> PrimitivityResult:
        if max_p < 1:
            raise ValueError("max_p must be >= 1")
        a = self.incidence.astype(bool)
        k = self.alphabet_size
        if not _is_irreducible(a):
            return PrimitivityResult(Primitivity.NOT_PRIMITIVE, None, (), "incidence graph is not strongly connected")
        period = _period(a)
        if period > 1:
            return PrimitivityResult(Primitivity.NOT_PRIMITIVE, None, (), f"irreducible with period {period}")
        for p in range(1, max_p + 1):
            # i w j admissible iff A[i, w0] & path w & A[w_{p-1}, j]
            words = self.word_codes(p)
            letters = self.decode_array(words, p)
            first, last = letters[:, 0], letters[:, -1]
            cover = a[:, first].T[:, :, None] & a[last, :][:, None, :]  # (words, i, j)
            total = cover.any(axis=0)
            if not total.all():
                continue
            witness = _greedy_cover(cover)
            return PrimitivityResult(
                Primitivity.PRIMITIVE, p, tuple(self.decode(words[i], p) for i in witness), ""
            )
        return PrimitivityResult(
            Primitivity.INCONCLUSIVE, None, (), f"primitive incidence but no witness with p <= {max_p}"
        )


class Primitivity(enum.Enum):
    PRIMITIVE = "primitive"
    NOT_PRIMITIVE = "not_primitive"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PrimitivityResult:
    status: Primitivity
    p: int | None
    witness: tuple[Word, ...]
    reason: str = ""

    def __bool__(self) -> bool:
        return self.status is Primitivity.PRIMITIVE


def _greedy_cover(cover: np.ndarray) -> list[int]:
    full = cover.reshape(cover.shape[0], -1)
    single = np.flatnonzero(full.all(axis=1))
    if single.size:
        return [int(single[0])]
    remaining = np.ones(full.shape[1], dtype=bool)
    chosen = []
    while remaining.any():
        gains = (full & remaining).sum(axis=1)
        best = int(np.argmax(gains))
        chosen.append(best)
        remaining &= ~full[best]
    return sorted(chosen)


def _is_irreducible(a: np.ndarray) -> bool:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    n, _ = connected_components(csr_matrix(a), directed=True, connection="strong")
    return n == 1


def _period(a: np.ndarray) -> int:
    """Period of an irreducible 0/1 matrix (gcd of cycle lengths)."""
    from scipy.sparse import csr_matrix

    return graph_period(csr_matrix(a))


def graph_period(adj) -> int:
    """Period of a strongly connected sparse graph via BFS levels."""
    from scipy.sparse.csgraph import breadth_first_order

    adj = adj.tocsr()
    n = adj.shape[0]
    order, pred = breadth_first_order(adj, 0, directed=True, return_predecessors=True)
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = adj.tocoo()
    diffs = level[coo.row] + 1 - level[coo.col]
    diffs = np.abs(diffs[diffs != 0])
    if diffs.size == 0:
        return 1
    return int(np.gcd.reduce(diffs))


@dataclass(frozen=True, eq=False)
class CylinderIndex:
    """Lexicographic bijection between admissible depth-m words and 0..len-1."""

    subshift: Subshift
    depth: int
    codes: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)

    def index(self, word: Sequence[int]) -> int:
        if len(word) != self.depth:
            raise ValueError(f"expected a word of length {self.depth}")
        i = self.index_of_codes(np.array([self.subshift.encode(word)]))[0]
        if i < 0:
            raise KeyError(f"inadmissible word {tuple(word)}")
        return int(i)

    def word(self, i: int) -> Word:
        return self.subshift.decode(self.codes[i], self.depth)

    def words(self) -> list[Word]:
        return [self.subshift.decode(c, self.depth) for c in self.codes]

    def index_of_codes(self, codes: np.ndarray) -> np.ndarray:
        """Indices of the given codes, -1 where a code is not an admissible word."""
        codes = np.asarray(codes, dtype=np.int64)
        pos = np.searchsorted(self.codes, codes)
        pos_c = np.minimum(pos, len(self.codes) - 1)
        hit = self.codes[pos_c] == codes
        return np.where(hit, pos_c, -1)

    def letters(self) -> np.ndarray:
        return self.subshift.decode_array(self.codes, self.depth)

    def prefix_states(self, words: Iterable[Sequence[int]]) -> np.ndarray:
        """Boolean mask of states whose word starts with one of ``words``.

        Words longer than the depth are rejected.
        """
        mask = np.zeros(len(self.codes), dtype=bool)
        k = self.subshift.alphabet_size
        for w in words:
            if len(w) > self.depth:
                raise ValueError(f"word of length {len(w)} exceeds depth {self.depth}")
            shift = k ** (self.depth - len(w))
            lo = self.subshift.encode(w) * shift
            a, b = np.searchsorted(self.codes, [lo, lo + shift])
            mask[a:b] = True
        return mask


@dataclass(frozen=True)
class TruncationCertificate:
    """Finite part of a countable alphabet together with the mass left out."""

    kept_letters: tuple
    tail_mass_bound: float
    source: str = ""

    def __post_init__(self):
        if not self.kept_letters:
            raise ValueError("kept_letters must be non-empty")
        if not 0.0 <= self.tail_mass_bound < 1.0:
            raise ValueError("tail_mass_bound must lie in [0, 1)")


def truncate_alphabet(
    mass: Callable[[int], float], tail_target: float, *, ratio_bound: float | None = None,
    max_letters: int = 10_000, source: str = "",
) -> TruncationCertificate:
    """Keep letters 0, 1, ... of a countable alphabet until the tail is small.

    ``mass(i)`` is the measure of the i-th letter cylinder.  When the masses
    decay at least geometrically with ratio ``ratio_bound`` the tail beyond
    the last kept letter ``q`` is bounded by ``mass(q) * r / (1 - r)``;
    otherwise the complement of the kept mass (assuming total mass one) is used.
    """
    total = 0.0
    for q in range(max_letters):
        m = float(mass(q))
        total += m
        if ratio_bound is not None:
            bound = m * ratio_bound / (1.0 - ratio_bound)
        else:
            bound = max(0.0, 1.0 - total)
        if bound <= tail_target:
            return TruncationCertificate(tuple(range(q + 1)), bound, source)
    raise StructuralError(f"tail mass above {tail_target} after {max_letters} letters")


# -- text format -----------------------------------------------------------
def parse_subshift(text: str) -> Subshift:
    """Parse ``letters=<k>`` followed by k rows of 0/1 entries."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("letters="):
        raise ValueError("line 1: expected 'letters=<k>'")
    k = int(lines[0].split("=", 1)[1])
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        entries = ln.replace(",", " ").split()
        if len(entries) == 1 and len(entries[0]) == k:
            entries = list(entries[0])
        if len(entries) != k:
            raise ValueError(f"line {lineno}: expected {k} entries, got {len(entries)}")
        rows.append([int(x) for x in entries])
    if len(rows) != k:
        raise ValueError(f"expected {k} incidence rows, got {len(rows)}")
    return Subshift(np.array(rows))


def format_subshift(s: Subshift) -> str:
    rows = [" ".join(str(int(x)) for x in row) for row in s.incidence]
    return "\n".join([f"letters={s.alphabet_size}", *rows]) + "\n"
