"""Exact finite-alphabet probability distributions and information measures.

Everything is computed in closed form on dense tensors: alphabets are small
(capped at 16 symbols, joint tensors at 2**20 cells) so exactness, not scale,
is the design goal.  All entropies and mutual informations are in bits
(log base 2), and all values are immutable after construction, so they can be
shared freely between concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

# Construction-time mass tolerances: drift below RENORM_TOL is silently
# renormalized, anything larger is rejected.  After normalization the mass is
# within SUM_TOL of 1 by construction.
SUM_TOL = 1e-12
RENORM_TOL = 1e-9
# Entries below this are treated as exact zeros before taking logs.
ZERO_CLIP = 1e-15

# Per-variable cap for the exact information-measure substrate (channels,
# quantizers, composed joints); flat vectors such as key-space posteriors may
# be larger, up to MAX_FLAT_CELLS.
MAX_ALPHABET = 16
MAX_JOINT_CELLS = 2**20
MAX_FLAT_CELLS = 2**24


class ProbabilityError(ValueError):
    """Invalid distribution data or an ill-posed information query."""


def entropy_bits(vec: np.ndarray) -> float:
    """Shannon entropy of a probability vector in bits, with 0*log(0) := 0."""
    v = np.asarray(vec, dtype=float).ravel()
    v = v[v > ZERO_CLIP]
    if v.size == 0:
        return 0.0
    return float(-(v * np.log2(v)).sum())


def log2_table(probs: np.ndarray) -> np.ndarray:
    """Elementwise log2 with zeros mapped to -inf (never typical / zero mass)."""
    p = np.asarray(probs, dtype=float)
    out = np.full(p.shape, -np.inf)
    np.log2(p, out=out, where=p > ZERO_CLIP)
    return out


def _clean_probs(vec, what: str) -> np.ndarray:
    v = np.asarray(vec, dtype=float).copy()
    if v.ndim == 0:
        raise ProbabilityError(f"{what}: expected a vector/tensor of probabilities")
    if np.any(v < -SUM_TOL):
        raise ProbabilityError(f"{what}: negative probability {v.min():.3e}")
    v[v < 0.0] = 0.0
    total = float(v.sum())
    if not math.isfinite(total) or abs(total - 1.0) > RENORM_TOL:
        raise ProbabilityError(f"{what}: mass {total!r} drifts more than {RENORM_TOL} from 1")
    return v / total


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet: a size plus optional distinct symbol labels."""

    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ProbabilityError(f"alphabet size must be >= 1, got {self.size}")
        if self.size > MAX_FLAT_CELLS:
            raise ProbabilityError(f"alphabet size {self.size} exceeds cap {MAX_FLAT_CELLS}")
        if self.labels is not None:
            labels = tuple(self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != self.size or len(set(labels)) != self.size:
                raise ProbabilityError("labels must be distinct and match the alphabet size")

    def __len__(self) -> int:
        return self.size

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)


BIT = Alphabet(2)


@dataclass(frozen=True)
class Pmf:
    """A probability mass function over a finite alphabet."""

    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        v = _clean_probs(self.probs, "Pmf")
        if v.ndim != 1 or v.size != self.alphabet.size:
            raise ProbabilityError(
                f"Pmf: expected {self.alphabet.size} entries, got shape {v.shape}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "probs", v)

    @classmethod
    def from_probs(cls, probs) -> "Pmf":
        v = np.asarray(probs, dtype=float)
        return cls(Alphabet(v.size), v)

    @classmethod
    def uniform(cls, alphabet: Alphabet | int) -> "Pmf":
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        return cls(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))

    @classmethod
    def point_mass(cls, alphabet: Alphabet | int, symbol: int) -> "Pmf":
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        v = np.zeros(alphabet.size)
        v[symbol] = 1.0
        return cls(alphabet, v)

    @classmethod
    def bernoulli(cls, p: float) -> "Pmf":
        return cls(BIT, np.array([1.0 - p, p]))

    def entropy(self) -> float:
        return entropy_bits(self.probs)

    def __len__(self) -> int:
        return self.alphabet.size


@dataclass(frozen=True)
class ConditionalPmf:
    """A channel: one output distribution per input symbol.

    The output may factor over several variables (e.g. a broadcast channel has
    a legitimate output and an eavesdropper output); ``table`` then has shape
    ``(input, out_1, ..., out_k)`` and each per-input slice sums to 1.
    """

    input_alphabet: Alphabet
    output_alphabets: tuple[Alphabet, ...]
    table: np.ndarray

    def __post_init__(self):
        outs = tuple(self.output_alphabets)
        object.__setattr__(self, "output_alphabets", outs)
        for a in (self.input_alphabet,) + outs:
            if a.size > MAX_ALPHABET:
                raise ProbabilityError(
                    f"channel variable alphabet size {a.size} exceeds cap {MAX_ALPHABET}")
        t = np.asarray(self.table, dtype=float)
        want = (self.input_alphabet.size,) + tuple(a.size for a in outs)
        if t.shape != want:
            raise ProbabilityError(f"ConditionalPmf: expected shape {want}, got {t.shape}")
        flat = t.reshape(self.input_alphabet.size, -1)
        rows = np.stack([_clean_probs(row, f"ConditionalPmf row {i}") for i, row in enumerate(flat)])
        t = rows.reshape(want)
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @property
    def output_alphabet(self) -> Alphabet:
        if len(self.output_alphabets) == 1:
            return self.output_alphabets[0]
        return Alphabet(int(np.prod([a.size for a in self.output_alphabets])))

    @property
    def rows(self) -> np.ndarray:
        return self.table.reshape(self.input_alphabet.size, -1)

    def row(self, x: int) -> Pmf:
        return Pmf(self.output_alphabet, self.rows[x])

    @classmethod
    def from_rows(cls, rows, input_alphabet: Alphabet | None = None,
                  output_alphabet: Alphabet | None = None) -> "ConditionalPmf":
        r = np.asarray(rows, dtype=float)
        inp = input_alphabet or Alphabet(r.shape[0])
        out = output_alphabet or Alphabet(r.shape[1])
        return cls(inp, (out,), r)

    @classmethod
    def identity(cls, alphabet: Alphabet | int) -> "ConditionalPmf":
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        return cls(alphabet, (alphabet,), np.eye(alphabet.size))

    @classmethod
    def constant(cls, input_alphabet: Alphabet | int, output_size: int = 1,
                 symbol: int = 0) -> "ConditionalPmf":
        """A channel whose output does not depend on the input."""
        if isinstance(input_alphabet, int):
            input_alphabet = Alphabet(input_alphabet)
        out = Alphabet(output_size)
        t = np.zeros((input_alphabet.size, output_size))
        t[:, symbol] = 1.0
        return cls(input_alphabet, (out,), t)

    @classmethod
    def bsc(cls, p: float) -> "ConditionalPmf":
        return cls(BIT, (BIT,), np.array([[1.0 - p, p], [p, 1.0 - p]]))


@dataclass(frozen=True)
class JointPmf:
    """A joint law over 2..5 variables, stored as a dense tensor."""

    alphabets: tuple[Alphabet, ...]
    probs: np.ndarray

    def __post_init__(self):
        alphabets = tuple(self.alphabets)
        object.__setattr__(self, "alphabets", alphabets)
        if not 1 <= len(alphabets) <= 5:
            raise ProbabilityError(f"JointPmf supports 1..5 variables, got {len(alphabets)}")
        for a in alphabets:
            if a.size > MAX_ALPHABET:
                raise ProbabilityError(
                    f"joint variable alphabet size {a.size} exceeds cap {MAX_ALPHABET}")
        t = np.asarray(self.probs, dtype=float)
        want = tuple(a.size for a in alphabets)
        if t.shape != want:
            raise ProbabilityError(f"JointPmf: expected shape {want}, got {t.shape}")
        if t.size > MAX_JOINT_CELLS:
            raise ProbabilityError(f"JointPmf: {t.size} cells exceed cap {MAX_JOINT_CELLS}")
        t = _clean_probs(t.ravel(), "JointPmf").reshape(want)
        t.flags.writeable = False
        object.__setattr__(self, "probs", t)

    @property
    def nvars(self) -> int:
        return len(self.alphabets)

    def marginal(self, keep: Iterable[int]) -> "JointPmf":
        keep = sorted(set(int(i) for i in keep))
        if not keep:
            raise ProbabilityError("marginalize: keep set must be nonempty")
        if keep[0] < 0 or keep[-1] >= self.nvars:
            raise ProbabilityError(f"marginalize: index out of range in {keep}")
        drop = tuple(i for i in range(self.nvars) if i not in keep)
        probs = self.probs.sum(axis=drop) if drop else self.probs
        return JointPmf(tuple(self.alphabets[i] for i in keep), probs)

    def pmf(self, var: int) -> Pmf:
        m = self.marginal([var])
        return Pmf(m.alphabets[0], m.probs)

    def entropy(self, vars: Iterable[int] | None = None) -> float:
        if vars is None:
            return entropy_bits(self.probs)
        return entropy_bits(self.marginal(vars).probs)


def entropy(p: Union[Pmf, JointPmf]) -> float:
    """Shannon entropy in bits of a Pmf (or of a whole joint law)."""
    if isinstance(p, (Pmf, JointPmf)):
        return entropy_bits(p.probs)
    return entropy_bits(np.asarray(p))


def _check_indices(j: JointPmf, idx: Sequence[int], distinct: bool = True) -> None:
    for i in idx:
        if not 0 <= i < j.nvars:
            raise ProbabilityError(f"variable index {i} out of range for {j.nvars} variables")
    if distinct and len(set(idx)) != len(idx):
        raise ProbabilityError(f"variable indices must be distinct, got {tuple(idx)}")


def mutual_information(j: JointPmf, vars: tuple[int, int]) -> float:
    """I(A;B) = H(A) + H(B) - H(A,B) in bits."""
    a, b = vars
    _check_indices(j, (a, b))
    return j.entropy([a]) + j.entropy([b]) - j.entropy([a, b])


def conditional_entropy(j: JointPmf, vars: Iterable[int], given: Iterable[int]) -> float:
    """H(vars | given) = H(vars, given) - H(given)."""
    vars, given = list(vars), list(given)
    _check_indices(j, vars + given)
    return j.entropy(vars + given) - j.entropy(given)


def conditional_mutual_information(j: JointPmf, a: int, b: int, c: int) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C) in bits."""
    _check_indices(j, (a, b, c))
    return (j.entropy([a, c]) + j.entropy([b, c])
            - j.entropy([c]) - j.entropy([a, b, c]))


Factor = Union[Pmf, ConditionalPmf]

_AXIS_LETTERS = "abcdefghij"


def compose_markov(factors: Sequence[Factor],
                   wiring: Sequence[tuple[int, ...]]) -> JointPmf:
    """Build the joint law of a Markov-factorized system.

    Each factor introduces new variables, numbered in order of introduction:
    a :class:`Pmf` introduces one source variable (its wiring entry must be
    empty), and a :class:`ConditionalPmf` introduces one variable per output
    alphabet, wired to exactly one previously introduced parent.  The result
    is the product of all factors, so the marginal of each factor's variables
    is consistent with that factor by construction.

    Raises on alphabet mismatch between wired variables and on wiring that
    references a not-yet-introduced variable (which would make a cycle).
    """
    if len(factors) != len(wiring):
        raise ProbabilityError("compose_markov: one wiring entry per factor required")
    alphabets: list[Alphabet] = []
    probs = np.array(1.0)
    for k, (factor, parents) in enumerate(zip(factors, wiring)):
        parents = tuple(int(p) for p in parents)
        n = len(alphabets)
        if isinstance(factor, Pmf):
            if parents:
                raise ProbabilityError(f"factor {k}: a Pmf takes no parents, got {parents}")
            new_alphabets = (factor.alphabet,)
            table = factor.probs
            sub_in = ""
        elif isinstance(factor, ConditionalPmf):
            if len(parents) != 1:
                raise ProbabilityError(f"factor {k}: a ConditionalPmf takes exactly one parent")
            (p,) = parents
            if not 0 <= p < n:
                raise ProbabilityError(
                    f"factor {k}: parent {p} not introduced yet (cyclic or forward wiring)")
            if alphabets[p].size != factor.input_alphabet.size:
                raise ProbabilityError(
                    f"factor {k}: parent alphabet size {alphabets[p].size} != "
                    f"factor input size {factor.input_alphabet.size}")
            new_alphabets = factor.output_alphabets
            table = factor.table
            sub_in = _AXIS_LETTERS[p]
        else:
            raise ProbabilityError(f"factor {k}: unsupported factor type {type(factor)!r}")
        if n + len(new_alphabets) > len(_AXIS_LETTERS):
            raise ProbabilityError("compose_markov: too many variables")
        new_letters = _AXIS_LETTERS[n:n + len(new_alphabets)]
        existing = _AXIS_LETTERS[:n]
        probs = np.einsum(f"{existing},{sub_in}{new_letters}->{existing}{new_letters}",
                          probs, table)
        alphabets.extend(new_alphabets)
    return JointPmf(tuple(alphabets), probs)


def marginalize(j: JointPmf, keep: Iterable[int]) -> JointPmf:
    """Sum out all variables not in ``keep``; total mass is preserved."""
    return j.marginal(keep)


def push_through(p: Pmf, channel: ConditionalPmf) -> Pmf:
    """Output marginal of ``channel`` when its input is distributed as ``p``."""
    if channel.input_alphabet.size != p.alphabet.size:
        raise ProbabilityError("push_through: input alphabet mismatch")
    return Pmf(channel.output_alphabet, p.probs @ channel.rows)
