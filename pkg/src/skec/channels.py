"""Broadcast-channel models: construction, classification, and sampling.

A :class:`Dmbc` is a one-input / two-output memoryless channel (legitimate
receiver plus eavesdropper); a :class:`TwoDmbcSetup` is the forward/backward
pair the key-establishment protocol runs over.  Classification decides whether
a channel factors into independent component channels and whether one output
is a stochastically degraded version of the other, with an explicit degrading
channel as a checkable witness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .probability import Alphabet, ConditionalPmf, Pmf, push_through

# Witness quality: composing the returned degrading channel with the stronger
# marginal must reproduce the weaker marginal within this per-cell tolerance.
WITNESS_TOL = 1e-9
FACTOR_TOL = 1e-10


class ChannelError(ValueError):
    """Invalid channel construction or query."""


class Order(enum.Enum):
    """Which receiver the broadcast channel favors, if comparable."""

    FAVOR_LEGIT = "favor_legit"
    FAVOR_EVE = "favor_eve"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class Dmbc:
    """A discrete memoryless broadcast channel X -> (Y, Z).

    ``law`` maps each input symbol to a joint distribution over the product of
    the legitimate output and the eavesdropper output.
    """

    law: ConditionalPmf

    def __post_init__(self):
        if len(self.law.output_alphabets) != 2:
            raise ChannelError("Dmbc law must have exactly two output variables (legit, eve)")

    @property
    def input_alphabet(self) -> Alphabet:
        return self.law.input_alphabet

    @property
    def legit_alphabet(self) -> Alphabet:
        return self.law.output_alphabets[0]

    @property
    def eve_alphabet(self) -> Alphabet:
        return self.law.output_alphabets[1]

    @property
    def tensor(self) -> np.ndarray:
        """P(y, z | x) with shape (|X|, |Y|, |Z|)."""
        return self.law.table

    def legit_marginal(self) -> ConditionalPmf:
        return ConditionalPmf(self.input_alphabet, (self.legit_alphabet,),
                              self.tensor.sum(axis=2))

    def eve_marginal(self) -> ConditionalPmf:
        return ConditionalPmf(self.input_alphabet, (self.eve_alphabet,),
                              self.tensor.sum(axis=1))


@dataclass(frozen=True)
class TwoDmbcSetup:
    """The two-way setup: a forward and an (independent) backward channel."""

    forward: Dmbc
    backward: Dmbc


@dataclass(frozen=True)
class DegradednessReport:
    independent_components: bool
    order: Order
    witness: ConditionalPmf | None = None

    def __post_init__(self):
        if self.order is not Order.INCOMPARABLE and self.witness is None:
            raise ChannelError("comparable order requires a degrading-channel witness")


def make_bsc_pair(p_legit: float, p_eve: float) -> Dmbc:
    """Binary-input channel with independent symmetric crossovers to each output.

    Crossovers are restricted to [0, 0.5]; that is the canonical form (a channel
    with p > 0.5 is the same channel with output symbols relabeled).
    """
    for name, p in (("p_legit", p_legit), ("p_eve", p_eve)):
        if not 0.0 <= p <= 1.0:
            raise ChannelError(f"{name}={p} outside [0, 1]")
        if p > 0.5:
            raise ChannelError(f"{name}={p} > 0.5: relabel output symbols to use the "
                               "canonical crossover in [0, 0.5]")
    y = np.array([[1.0 - p_legit, p_legit], [p_legit, 1.0 - p_legit]])
    z = np.array([[1.0 - p_eve, p_eve], [p_eve, 1.0 - p_eve]])
    table = y[:, :, None] * z[:, None, :]
    bit = Alphabet(2)
    return Dmbc(ConditionalPmf(bit, (bit, bit), table))


def make_independent_pair(legit: ConditionalPmf, eve: ConditionalPmf) -> Dmbc:
    """Broadcast channel whose two outputs are conditionally independent given X."""
    if legit.input_alphabet.size != eve.input_alphabet.size:
        raise ChannelError("legit and eve components must share the input alphabet")
    table = legit.rows[:, :, None] * eve.rows[:, None, :]
    return Dmbc(ConditionalPmf(legit.input_alphabet,
                               (legit.output_alphabet, eve.output_alphabet), table))


def is_independent_components(d: Dmbc) -> bool:
    """True iff P(y,z|x) factors as P(y|x) P(z|x) within 1e-10 per cell."""
    t = d.tensor
    product = t.sum(axis=2)[:, :, None] * t.sum(axis=1)[:, None, :]
    return bool(np.max(np.abs(t - product)) <= FACTOR_TOL)


def _find_degrading_channel(strong: np.ndarray, weak: np.ndarray) -> np.ndarray | None:
    """Row-stochastic M with strong @ M == weak, or None if none exists.

    Solved as a linear program minimizing the total absolute residual of
    ``strong @ M - weak`` subject to M being a proper channel matrix; accepted
    only if the witness reproduces ``weak`` within WITNESS_TOL per cell.
    """
    nx, na = strong.shape
    _, nb = weak.shape
    n_m = na * nb
    n_t = nx * nb
    # Variables: [vec(M), t] with t >= |(strong M - weak)|, minimize sum(t).
    c = np.concatenate([np.zeros(n_m), np.ones(n_t)])
    # strong @ M - weak <= t  and  weak - strong @ M <= t
    a_rows = []
    b_vals = []
    for x in range(nx):
        for z in range(nb):
            coeff = np.zeros(n_m + n_t)
            for yy in range(na):
                coeff[yy * nb + z] = strong[x, yy]
            tcol = np.zeros(n_m + n_t)
            tcol[n_m + x * nb + z] = 1.0
            a_rows.append(coeff - tcol)
            b_vals.append(weak[x, z])
            a_rows.append(-coeff - tcol)
            b_vals.append(-weak[x, z])
    a_ub = np.array(a_rows)
    b_ub = np.array(b_vals)
    # Row sums of M equal 1.
    a_eq = np.zeros((na, n_m + n_t))
    for yy in range(na):
        a_eq[yy, yy * nb:(yy + 1) * nb] = 1.0
    b_eq = np.ones(na)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * (n_m + n_t), method="highs")
    if not res.success:
        return None
    m = res.x[:n_m].reshape(na, nb)
    m = np.clip(m, 0.0, None)
    m /= m.sum(axis=1, keepdims=True)
    if np.max(np.abs(strong @ m - weak)) > WITNESS_TOL:
        return None
    return m


def degradedness_check(d: Dmbc) -> DegradednessReport:
    """Classify which output is a degraded version of the other.

    Searches for a channel M with P(z|x) = sum_y P(y|x) M(z|y) (the legitimate
    receiver is favored) or the reverse.  When both directions are feasible
    (e.g. identical marginals) the report says ``FAVOR_LEGIT``; when neither
    is, the channel is incomparable.
    """
    independent = is_independent_components(d)
    p_y = d.tensor.sum(axis=2)
    p_z = d.tensor.sum(axis=1)
    m = _find_degrading_channel(p_y, p_z)
    if m is not None:
        witness = ConditionalPmf.from_rows(m, d.legit_alphabet, d.eve_alphabet)
        return DegradednessReport(independent, Order.FAVOR_LEGIT, witness)
    m = _find_degrading_channel(p_z, p_y)
    if m is not None:
        witness = ConditionalPmf.from_rows(m, d.eve_alphabet, d.legit_alphabet)
        return DegradednessReport(independent, Order.FAVOR_EVE, witness)
    return DegradednessReport(independent, Order.INCOMPARABLE, None)


def is_sd_setup(setup: TwoDmbcSetup) -> bool:
    """True iff both channels factor into independent components and are comparable."""
    for d in (setup.forward, setup.backward):
        report = degradedness_check(d)
        if not report.independent_components or report.order is Order.INCOMPARABLE:
            return False
    return True


def sample(d: Dmbc, x: int, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one (y, z) pair from the channel law at input ``x``."""
    ys, zs = sample_block(d, np.array([x]), rng)
    return int(ys[0]), int(zs[0])


def sample_block(d: Dmbc, xs, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Memoryless elementwise sampling of a whole input block."""
    xs = np.asarray(xs, dtype=np.int64)
    nx = d.input_alphabet.size
    if xs.size and (xs.min() < 0 or xs.max() >= nx):
        raise ChannelError(f"input symbol outside alphabet of size {nx}")
    nz = d.eve_alphabet.size
    if xs.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy()
    cum = np.cumsum(d.law.rows, axis=1)
    u = rng.random(xs.size)
    flat = (cum[xs] < u[:, None]).sum(axis=1)
    flat = np.minimum(flat, cum.shape[1] - 1)
    return flat // nz, flat % nz


def input_output_joint(d: Dmbc, p_x: Pmf) -> "JointPmf":
    """Joint law of (X, Y, Z) for input law ``p_x``."""
    from .probability import compose_markov

    return compose_markov([p_x, d.law], [(), (0,)])


def legit_output_law(d: Dmbc, p_x: Pmf) -> Pmf:
    return push_through(p_x, d.legit_marginal())


def eve_output_law(d: Dmbc, p_x: Pmf) -> Pmf:
    return push_through(p_x, d.eve_marginal())
