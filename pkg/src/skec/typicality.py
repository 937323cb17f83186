"""Typical-sequence machinery: membership tests, enumeration, and book sampling.

A sequence is epsilon-typical when its per-symbol surprisal (in bits) is
within epsilon of the source entropy; the bipartite variants judge a
concatenation of two segments with different laws by one averaged surprisal
criterion.  The inequality is strict: boundary sequences are atypical, and a
sequence containing a zero-probability symbol is atypical rather than an
error.

Enumeration is exact and guarded: the full space ``|alphabet|**n`` may not
exceed ``2**24`` cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probability import JointPmf, Pmf, ProbabilityError, log2_table

ENUMERATION_GUARD = 2**24


class EnumerationGuardError(RuntimeError):
    """An exact enumeration was requested beyond the configured capacity."""


@dataclass(frozen=True)
class TypicalityParams:
    """Width and segment lengths for a bipartite typicality judgement."""

    epsilon: float
    n: int
    d: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ProbabilityError(f"epsilon must be > 0, got {self.epsilon}")
        if self.n < 0 or self.d < 0 or self.n + self.d < 1:
            raise ProbabilityError(f"segment lengths invalid: n={self.n}, d={self.d}")

    @property
    def total(self) -> int:
        return self.n + self.d


@dataclass(frozen=True)
class BipartiteWord:
    """A head segment and a tail segment, judged jointly but drawn from
    different laws."""

    head: np.ndarray
    tail: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "head", np.asarray(self.head, dtype=np.int64))
        object.__setattr__(self, "tail", np.asarray(self.tail, dtype=np.int64))
        if self.total < 1:
            raise ProbabilityError("BipartiteWord must have at least one symbol")

    @property
    def n(self) -> int:
        return self.head.size

    @property
    def d(self) -> int:
        return self.tail.size

    @property
    def total(self) -> int:
        return self.n + self.d


def surprisal_bits(seq, p: Pmf) -> float:
    """-log2 of the i.i.d. probability of ``seq`` under ``p`` (inf if impossible)."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.size and (seq.min() < 0 or seq.max() >= len(p)):
        raise ProbabilityError(f"sequence symbol outside alphabet of size {len(p)}")
    return float(-log2_table(p.probs)[seq].sum()) if seq.size else 0.0


def is_typical(seq, p: Pmf, epsilon: float) -> bool:
    """Single-law typicality: |surprisal/n - H(p)| < epsilon."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.size == 0:
        raise ProbabilityError("is_typical: sequence must be nonempty")
    s = surprisal_bits(seq, p)
    if not math.isfinite(s):
        return False
    return abs(s / seq.size - p.entropy()) < epsilon


def is_bipartite_typical(word: BipartiteWord, laws: tuple[Pmf, Pmf],
                         epsilon: float) -> bool:
    """Averaged two-segment typicality.

    With an empty tail this reduces exactly to :func:`is_typical` on the head.
    """
    p_head, p_tail = laws
    s = surprisal_bits(word.head, p_head) + surprisal_bits(word.tail, p_tail)
    if not math.isfinite(s):
        return False
    target = word.n * p_head.entropy() + word.d * p_tail.entropy()
    return abs((s - target) / word.total) < epsilon


def _pair_surprisal(xs, ys, joint: JointPmf) -> float:
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.size == 0:
        return 0.0
    return float(-log2_table(joint.probs)[xs, ys].sum())


def is_bipartite_jointly_typical(pair: tuple[BipartiteWord, BipartiteWord],
                                 laws: tuple[JointPmf, JointPmf],
                                 epsilon: float) -> bool:
    """Joint two-segment typicality of a pair of words.

    Requires both words to be marginally bipartite typical with respect to the
    marginals of the segment joints, plus the averaged joint-surprisal
    condition, so a True here implies both marginal tests pass.
    """
    x, y = pair
    j_head, j_tail = laws
    if x.n != y.n or x.d != y.d:
        raise ProbabilityError(f"segment length mismatch: ({x.n},{x.d}) vs ({y.n},{y.d})")
    if j_head.nvars != 2 or j_tail.nvars != 2:
        raise ProbabilityError("segment joints must be two-variable laws")
    x_laws = (j_head.pmf(0), j_tail.pmf(0))
    y_laws = (j_head.pmf(1), j_tail.pmf(1))
    if not (is_bipartite_typical(x, x_laws, epsilon)
            and is_bipartite_typical(y, y_laws, epsilon)):
        return False
    s = _pair_surprisal(x.head, y.head, j_head) + _pair_surprisal(x.tail, y.tail, j_tail)
    if not math.isfinite(s):
        return False
    target = x.n * j_head.entropy() + x.d * j_tail.entropy()
    return abs((s - target) / x.total) < epsilon


def _all_sequences(size: int, n: int) -> np.ndarray:
    """All ``size**n`` sequences, lexicographically ordered, shape (size**n, n)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    total = size**n
    grids = np.meshgrid(*([np.arange(size, dtype=np.int8)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).reshape(total, n)


def enumerate_typical(p: Pmf, n: int, epsilon: float) -> np.ndarray:
    """All epsilon-typical n-sequences as an int8 array in lexicographic order."""
    size = len(p)
    if n >= 1 and size**n > ENUMERATION_GUARD:
        raise EnumerationGuardError(
            f"typical-set enumeration of {size}**{n} sequences exceeds guard "
            f"{ENUMERATION_GUARD}")
    seqs = _all_sequences(size, n)
    if n == 0:
        return seqs
    lg = log2_table(p.probs)
    with np.errstate(invalid="ignore"):
        s = -lg[seqs.astype(np.int64)].sum(axis=1)
    mask = np.isfinite(s) & (np.abs(s / n - p.entropy()) < epsilon)
    return seqs[mask]


def typical_count(p: Pmf, n: int, epsilon: float) -> int:
    """Exact size of the epsilon-typical set, by summing over compositions.

    Counts sequences via their symbol-count type (surprisal depends only on
    the type), so no enumeration of the sequence space is needed: feasible up
    to n in the hundreds for small alphabets.
    """
    if n == 0:
        return 1
    size = len(p)
    lg = log2_table(p.probs)
    h = p.entropy()
    total = 0
    for counts in _compositions(n, size):
        s = 0.0
        ok = True
        for c, l in zip(counts, lg):
            if c and not math.isfinite(l):
                ok = False
                break
            s -= c * l
        if ok and abs(s / n - h) < epsilon:
            total += _multinomial(n, counts)
    return total


def typical_mass(p: Pmf, n: int, epsilon: float) -> float:
    """Exact probability mass of the epsilon-typical set, by composition sums."""
    if n == 0:
        return 1.0
    size = len(p)
    lg = log2_table(p.probs)
    h = p.entropy()
    mass = 0.0
    for counts in _compositions(n, size):
        s = 0.0
        ok = True
        for c, l in zip(counts, lg):
            if c and not math.isfinite(l):
                ok = False
                break
            s -= c * l
        if ok and abs(s / n - h) < epsilon:
            mass += _multinomial(n, counts) * math.prod(
                float(p.probs[i]) ** c for i, c in enumerate(counts) if c)
    return mass


def _compositions(n: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``n``."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def _multinomial(n: int, counts) -> int:
    out = 1
    rem = n
    for c in counts:
        out *= math.comb(rem, c)
        rem -= c
    return out


def sample_typical_book(p: Pmf, n: int, epsilon: float, count: int,
                        rng: np.random.Generator, distinct: bool = False) -> np.ndarray:
    """Sample an indexed book of ``count`` typical sequences.

    ``distinct=False`` draws independently with replacement (entries may
    repeat); ``distinct=True`` draws without replacement and requires the
    typical set to be at least ``count`` large.  Deterministic under a fixed
    generator state.
    """
    pool = enumerate_typical(p, n, epsilon)
    if pool.shape[0] == 0:
        raise ProbabilityError("typical set is empty; cannot sample a book")
    if distinct:
        if count > pool.shape[0]:
            raise ProbabilityError(
                f"requested {count} distinct sequences but typical set has "
                f"only {pool.shape[0]}")
        idx = rng.choice(pool.shape[0], size=count, replace=False)
    else:
        idx = rng.integers(0, pool.shape[0], size=count)
    return pool[idx]
