"""The executable two-round key-establishment protocol.

One session: the initiator sends an i.i.d. block over the first channel; the
responder quantizes what it received, appends fresh randomness, extends the
concatenation with a parity-check word from a sampled systematic code, and
replies over the second channel; the initiator decodes the information word by
exhaustive bipartite joint-typicality search, and both sides derive the key by
looking the information word up in a balanced random partition (the cell index
is the key, the within-cell index is sacrificed for secrecy).

Two variants are provided.  The *special* variant quantizes with the identity
(the information head is the raw received block) and draws the reply's fresh
part uniformly from a typical-set book.  The *general* variant runs the full
construction with an arbitrary auxiliary system: an explicit quantizer book, a
two-layer parity-book hierarchy, and a memoryless randomizing map between the
information carrier and the reply channel's input.

Exhaustive decoding scans ``2**eta`` candidate pairs; that exponent is capped
at 24 (override via the ``SKEC_GUARD_ETA`` environment variable for expert
use).  Everything is deterministic under a fixed generator: the draw order
within a session is fixed, and selection draws are skipped when only one
candidate exists (which also keeps the general variant's transcript aligned
with the special one when the auxiliary system is degenerate).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bounds import DirectionAux, direction_informations, direction_joints, ratio_planner
from .channels import TwoDmbcSetup, legit_output_law, sample_block
from .probability import Alphabet, Pmf, ProbabilityError, entropy_bits, log2_table
from .typicality import EnumerationGuardError, sample_typical_book, typical_count

ETA_GUARD_DEFAULT = 24

# Wilson-interval critical value for the reported error-rate confidence width.
_WILSON_Z = 1.959963984540054


def eta_guard() -> int:
    """Candidate-scan exponent cap; ``SKEC_GUARD_ETA`` overrides (expert use)."""
    raw = os.environ.get("SKEC_GUARD_ETA")
    if raw is None:
        return ETA_GUARD_DEFAULT
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"SKEC_GUARD_ETA must be an integer, got {raw!r}") from exc


class PlanError(ValueError):
    """Inconsistent block plan."""


# ---------------------------------------------------------------------------
# Block plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockPlan:
    """Integer block lengths, book exponents and key sizes for one protocol run.

    All exponents are bits; real-valued design quantities are floored into
    integers with the slack absorbed so that ``gamma = eta - kappa`` stays
    nonnegative.  ``n_b_info``/``n_b_parity`` are the reply's fresh-information
    and appended-check lengths (the general variant's first/second reply
    sub-blocks play the same roles).
    """

    variant: str
    n_f: int
    n_b_info: int
    n_b_parity: int
    alpha: float
    beta: float
    epsilon: float
    eta_f: int
    eta_b: int
    eta_f1: int
    eta_f2: int
    eta_b1: int
    eta_b2: int
    kappa: int
    r_sk: float
    p_x1: Pmf
    p_x2: Pmf

    def __post_init__(self):
        if self.variant not in ("special", "general"):
            raise PlanError(f"unknown variant {self.variant!r}")
        for name in ("n_f", "n_b_info", "n_b_parity", "eta_f", "eta_b",
                     "eta_f1", "eta_f2", "eta_b1", "eta_b2", "kappa"):
            if getattr(self, name) < 0:
                raise PlanError(f"{name} must be nonnegative")
        if self.n_f < 1 or self.n_b < 1:
            raise PlanError("both rounds need at least one channel use")
        if self.eta_f1 + self.eta_f2 != self.eta_f:
            raise PlanError("forward book exponent must split exactly")
        if self.eta_b1 + self.eta_b2 != self.eta_b:
            raise PlanError("reply book exponent must split exactly")
        if self.gamma < 0:
            raise PlanError(f"kappa={self.kappa} exceeds eta={self.eta}")
        if self.epsilon <= 0:
            raise PlanError("epsilon must be positive")
        n = self.n_total
        if self.variant == "special":
            if not 5 * n * self.epsilon < self.n_f * self.alpha:
                raise PlanError("epsilon too large: need 5*N*eps < n_f*alpha")
        else:
            if not 3 * n * self.epsilon < self.n_b * self.beta:
                raise PlanError("epsilon too large: need 3*N*eps < n_b*beta")

    @property
    def n_b(self) -> int:
        return self.n_b_info + self.n_b_parity

    @property
    def n_total(self) -> int:
        return self.n_f + self.n_b

    @property
    def eta(self) -> int:
        return self.eta_f + self.eta_b

    @property
    def eta_1(self) -> int:
        return self.eta_f1 + self.eta_b1

    @property
    def eta_2(self) -> int:
        return self.eta_f2 + self.eta_b2

    @property
    def gamma(self) -> int:
        return self.eta - self.kappa

    @property
    def n_keys(self) -> int:
        return 1 << self.kappa


def _clamped_kappa(n_total: int, r_sk: float, eta: int, kappa: int | None) -> int:
    if kappa is None:
        kappa = round(n_total * r_sk)
    return max(0, min(int(kappa), eta))


def plan_special(setup: TwoDmbcSetup, n_total: int, alpha: float = 0.05,
                 p_xf: Pmf | None = None, p_xb: Pmf | None = None,
                 epsilon: float | None = None, n_f: int | None = None,
                 kappa: int | None = None) -> BlockPlan:
    """Plan the special (identity-quantizer) variant.

    Splits ``n_total`` with the constraint-tight ratio planner, then sizes the
    books from exact typical-set counts.  ``kappa`` defaults to the rounded
    design key size and may be overridden (it is clamped into ``[0, eta]``).
    """
    p_xf = p_xf or Pmf.uniform(setup.forward.input_alphabet)
    p_xb = p_xb or Pmf.uniform(setup.backward.input_alphabet)
    fwd = setup.forward.tensor
    bwd = setup.backward.tensor
    p_y1 = legit_output_law(setup.forward, p_xf)

    pxy = p_xf.probs[:, None] * fwd.sum(axis=2)
    pxz = p_xf.probs[:, None] * fwd.sum(axis=1)
    i_y1_x1 = entropy_bits(pxy.sum(axis=0)) + entropy_bits(p_xf.probs) - entropy_bits(pxy)
    h_y1_given_x1 = entropy_bits(pxy) - entropy_bits(p_xf.probs)
    pyz = np.einsum("x,xyz->yz", p_xf.probs, fwd)
    i_y1_z1 = (entropy_bits(pyz.sum(axis=1)) + entropy_bits(pyz.sum(axis=0))
               - entropy_bits(pyz))
    bxy = p_xb.probs[:, None] * bwd.sum(axis=2)
    bxz = p_xb.probs[:, None] * bwd.sum(axis=1)
    i_x2_y2 = entropy_bits(bxy.sum(axis=0)) + entropy_bits(p_xb.probs) - entropy_bits(bxy)
    i_x2_z2 = entropy_bits(bxz.sum(axis=0)) + entropy_bits(p_xb.probs) - entropy_bits(bxz)

    lengths = ratio_planner(h_y1_given_x1, i_x2_y2, p_xb.entropy(), alpha,
                            n_total, n_f=n_f)
    if epsilon is None:
        epsilon = lengths.n_f * alpha / (6.0 * n_total)
    r_sk = (lengths.n_f * (i_y1_x1 - i_y1_z1)
            + lengths.n_b * (i_x2_y2 - i_x2_z2)) / n_total
    eta_f = _floor_log2_count(p_y1, lengths.n_f, epsilon)
    eta_b = _floor_log2_count(p_xb, lengths.n_b_info, epsilon)
    kap = _clamped_kappa(n_total, r_sk, eta_f + eta_b, kappa)
    return BlockPlan(variant="special", n_f=lengths.n_f,
                     n_b_info=lengths.n_b_info, n_b_parity=lengths.n_b_parity,
                     alpha=alpha, beta=lengths.n_f * alpha / lengths.n_b,
                     epsilon=epsilon, eta_f=eta_f, eta_b=eta_b,
                     eta_f1=eta_f, eta_f2=0, eta_b1=eta_b, eta_b2=0,
                     kappa=kap, r_sk=r_sk, p_x1=p_xf, p_x2=p_xb)


def _floor_log2_count(p: Pmf, n: int, epsilon: float) -> int:
    count = typical_count(p, n, epsilon)
    if count < 1:
        raise PlanError(f"typical set empty at n={n}, eps={epsilon}")
    return int(math.floor(math.log2(count)))


def plan_general(setup: TwoDmbcSetup, aux: DirectionAux, n_total: int,
                 alpha: float = 0.05, epsilon: float | None = None,
                 n_f: int | None = None, kappa: int | None = None) -> BlockPlan:
    """Plan the general variant for one direction's auxiliary system.

    The reply's check part is sized so that its information rate covers the
    quantization-rate load (within one symbol); book exponents follow the
    design rates, floored, with the layer splits clamped into range.
    """
    infos = direction_informations(setup.forward, setup.backward, aux)
    load = infos.i_v_y1_given_x1 + 3.0 * alpha
    if infos.i_w1_y2 <= 0:
        raise PlanError("reply channel carries no information at this auxiliary system")

    def feasible(nf: int) -> bool:
        return nf * load <= (n_total - nf) * infos.i_w1_y2

    if n_f is None:
        n_f = 0
        for cand in range(1, n_total):
            if feasible(cand):
                n_f = cand
        if n_f == 0:
            raise PlanError(f"no forward length in [1, {n_total - 1}] satisfies "
                            f"n_f*{load:.6g} <= n_b*{infos.i_w1_y2:.6g}")
    elif not (1 <= n_f <= n_total - 1 and feasible(n_f)):
        raise PlanError(f"requested n_f={n_f} infeasible at n_total={n_total}")
    n_b = n_total - n_f
    n_b2 = min(int(math.floor(n_f * load / infos.i_w1_y2)), n_b - 1)
    n_b1 = n_b - n_b2
    beta = n_f * alpha / n_b
    if epsilon is None:
        epsilon = min(n_f * alpha, n_b * beta) / (6.0 * n_total)
    eta_f = max(int(math.floor(n_f * (infos.i_v_y1 + alpha))), 0)
    eta_b = max(int(math.floor(n_b1 * (infos.i_w1_y2 - beta))), 0)
    eta_f2 = min(max(int(math.floor(n_b2 * infos.i_w2_y2)), 0), eta_f)
    eta_b2 = min(max(int(math.floor(n_b1 * infos.i_w2_y2)), 0), eta_b)
    r_sk = (n_f * infos.r_s1 + n_b * infos.r_s2) / n_total
    kap = _clamped_kappa(n_total, r_sk, eta_f + eta_b, kappa)
    return BlockPlan(variant="general", n_f=n_f, n_b_info=n_b1, n_b_parity=n_b2,
                     alpha=alpha, beta=beta, epsilon=epsilon,
                     eta_f=eta_f, eta_b=eta_b,
                     eta_f1=eta_f - eta_f2, eta_f2=eta_f2,
                     eta_b1=eta_b - eta_b2, eta_b2=eta_b2,
                     kappa=kap, r_sk=r_sk,
                     p_x1=aux.p_x1, p_x2=aux.induced_p_x2)


# ---------------------------------------------------------------------------
# Key partition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeyPartition:
    """Balanced random partition of information-word index pairs into keys.

    Pairs are indexed as ``(f << eta_b) | b``; every key has exactly
    ``2**gamma`` preimages.
    """

    eta_f: int
    eta_b: int
    kappa: int
    key_of: np.ndarray

    @property
    def gamma(self) -> int:
        return self.eta_f + self.eta_b - self.kappa

    @property
    def n_keys(self) -> int:
        return 1 << self.kappa

    def derive(self, f: int, b: int) -> int:
        if not (0 <= f < (1 << self.eta_f) and 0 <= b < (1 << self.eta_b)):
            raise IndexError(f"index pair ({f}, {b}) out of range")
        return int(self.key_of[(f << self.eta_b) | b])


def balanced_partition(eta_f: int, eta_b: int, kappa: int,
                       rng: np.random.Generator) -> KeyPartition:
    """Shuffle-and-chunk partition: seeded, uniform over balanced partitions."""
    eta = eta_f + eta_b
    if kappa > eta:
        raise PlanError(f"kappa={kappa} exceeds eta={eta}")
    n = 1 << eta
    gamma = eta - kappa
    perm = rng.permutation(n)
    key_of = np.empty(n, dtype=np.int64)
    key_of[perm] = np.arange(n, dtype=np.int64) >> gamma
    key_of.flags.writeable = False
    return KeyPartition(eta_f=eta_f, eta_b=eta_b, kappa=kappa, key_of=key_of)


def derive_key(holder, f: int, b: int) -> int:
    """Key index of the information-word pair ``(f, b)``."""
    partition = holder.partition if hasattr(holder, "partition") else holder
    return partition.derive(f, b)


# ---------------------------------------------------------------------------
# Books and the systematic code (special variant)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpecialBooks:
    """Indexed typical-sequence books for the special variant."""

    y_book: np.ndarray
    x_book: np.ndarray
    y_index: dict = field(repr=False)
    x_index: dict = field(repr=False)

    @classmethod
    def from_arrays(cls, y_book: np.ndarray, x_book: np.ndarray) -> "SpecialBooks":
        return cls(y_book=y_book, x_book=x_book,
                   y_index={row.tobytes(): i for i, row in enumerate(y_book)},
                   x_index={row.tobytes(): i for i, row in enumerate(x_book)})


def build_special_books(setup: TwoDmbcSetup, plan: BlockPlan,
                        rng: np.random.Generator) -> SpecialBooks:
    """Sample the two distinct typical-sequence books of the special variant."""
    p_y1 = legit_output_law(setup.forward, plan.p_x1)
    y_book = sample_typical_book(p_y1, plan.n_f, plan.epsilon,
                                 1 << plan.eta_f, rng, distinct=True)
    x_book = sample_typical_book(plan.p_x2, plan.n_b_info, plan.epsilon,
                                 1 << plan.eta_b, rng, distinct=True)
    return SpecialBooks.from_arrays(y_book, x_book)


@dataclass
class SystematicCode:
    """A systematic code over the protocol's books.

    Encoding keeps the information word verbatim and appends a parity-check
    word; decoding maps the initiator's known block plus the received reply to
    an information-word guess, or None.
    """

    n_f: int
    n_b_info: int
    n_b_parity: int
    books: SpecialBooks
    parity_fn: Callable[[int, int], np.ndarray]
    index_decoder: Callable[[np.ndarray, np.ndarray], Optional[tuple[int, int]]]
    parity_book: np.ndarray | None = None  # (F, B, n_b_parity) when materialized

    def parity(self, f: int, b: int) -> np.ndarray:
        return self.parity_fn(f, b)

    def full_parity_book(self) -> np.ndarray:
        if self.parity_book is not None:
            return self.parity_book
        return np.stack([
            np.stack([self.parity(f, b) for b in range(self.books.x_book.shape[0])])
            for f in range(self.books.y_book.shape[0])])

    def encode(self, head, info) -> tuple[np.ndarray, np.ndarray]:
        """(head_info, tail_info) -> (head_info, tail_info || parity)."""
        head = np.asarray(head, dtype=np.int8)
        info = np.asarray(info, dtype=np.int8)
        f = self.books.y_index.get(head.tobytes())
        b = self.books.x_index.get(info.tobytes())
        if f is None or b is None:
            raise KeyError("encode: information word not in the books")
        return head, np.concatenate([info, self.parity(f, b)])

    def decode(self, known_head, received) -> Optional[tuple[np.ndarray, np.ndarray]]:
        pair = self.index_decoder(np.asarray(known_head, dtype=np.int64),
                                  np.asarray(received, dtype=np.int64))
        if pair is None:
            return None
        f, b = pair
        return self.books.y_book[f], self.books.x_book[b]


def _gather_sum(table: np.ndarray, book: np.ndarray,
                received: np.ndarray | None = None) -> np.ndarray:
    """Per-row sums of table lookups, chunked to bound transient memory.

    ``table`` is 1-D (lookup by book symbol) or 2-D (lookup by book symbol and
    the aligned received symbol).
    """
    rows, width = book.shape
    if width == 0:
        return np.zeros(rows)
    out = np.empty(rows)
    chunk = max(1, (1 << 22) // width)
    for s in range(0, rows, chunk):
        blk = book[s:s + chunk]
        vals = table[blk] if received is None else table[blk, received]
        out[s:s + chunk] = vals.sum(axis=1)
    return out


def _typicality_mask(joint_s: np.ndarray, marg_s: np.ndarray, n_total: int,
                     joint_target: float, marg_target: float, epsilon: float,
                     received_ok: bool) -> np.ndarray:
    if not received_ok:
        return np.zeros(joint_s.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        ok_joint = np.abs(joint_s - joint_target) / n_total < epsilon
        ok_marg = np.abs(marg_s - marg_target) / n_total < epsilon
    return ok_joint & ok_marg & np.isfinite(joint_s) & np.isfinite(marg_s)


def _received_bipartite_ok(head, lg_head: np.ndarray, h_head: float,
                           tail, lg_tail: np.ndarray, h_tail: float,
                           epsilon: float) -> bool:
    s = -lg_head[head].sum() - lg_tail[tail].sum()
    if not math.isfinite(s):
        return False
    n = len(head) + len(tail)
    return abs(s - (len(head) * h_head + len(tail) * h_tail)) / n < epsilon


class _SpecialTables:
    """Single-letter laws and log tables shared by the special codec and Eve."""

    def __init__(self, setup: TwoDmbcSetup, plan: BlockPlan):
        fwd = setup.forward.tensor
        bwd = setup.backward.tensor
        pxyz = plan.p_x1.probs[:, None, None] * fwd
        self.j_head = pxyz.sum(axis=2).T            # P(Y1, X1)
        self.p_y1 = self.j_head.sum(axis=1)
        self.p_x1 = plan.p_x1.probs
        pyz = pxyz.sum(axis=0)                      # P(Y1, Z1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(self.p_y1[:, None] > 0, pyz / self.p_y1[:, None], 0.0)
        self.lg_z1_given_y1 = log2_table(cond)
        self.j_tail = plan.p_x2.probs[:, None] * bwd.sum(axis=2)  # P(X2, Y2)
        self.p_x2 = plan.p_x2.probs
        self.p_y2 = self.j_tail.sum(axis=0)
        self.lg_z2_given_x2 = log2_table(bwd.sum(axis=1))

        self.lg_j_head = log2_table(self.j_head)
        self.lg_j_tail = log2_table(self.j_tail)
        self.lg_p_y1 = log2_table(self.p_y1)
        self.lg_p_x1 = log2_table(self.p_x1)
        self.lg_p_x2 = log2_table(self.p_x2)
        self.lg_p_y2 = log2_table(self.p_y2)
        self.h_j_head = entropy_bits(self.j_head)
        self.h_j_tail = entropy_bits(self.j_tail)
        self.h_p_y1 = entropy_bits(self.p_y1)
        self.h_p_x1 = entropy_bits(self.p_x1)
        self.h_p_x2 = entropy_bits(self.p_x2)
        self.h_p_y2 = entropy_bits(self.p_y2)


def make_random_code(setup: TwoDmbcSetup, plan: BlockPlan, books: SpecialBooks,
                     rng: np.random.Generator) -> SystematicCode:
    """Random-coding systematic code: i.i.d. parity book, typicality decoder."""
    n_pairs_f = books.y_book.shape[0]
    n_pairs_b = books.x_book.shape[0]
    parity_book = _sample_iid_block(plan.p_x2.probs,
                                    (n_pairs_f, n_pairs_b, plan.n_b_parity), rng)
    tables = _SpecialTables(setup, plan)
    n_total = plan.n_total

    def index_decoder(x1: np.ndarray, received: np.ndarray):
        y2_info = received[:plan.n_b_info]
        y2_par = received[plan.n_b_info:]
        head_j = _gather_sum(-tables.lg_j_head, books.y_book, x1)
        info_j = _gather_sum(-tables.lg_j_tail, books.x_book, y2_info)
        par_j = _parity_scores(-tables.lg_j_tail, parity_book, y2_par)
        joint_s = head_j[:, None] + info_j[None, :] + par_j
        head_m = _gather_sum(-tables.lg_p_y1, books.y_book)
        info_m = _gather_sum(-tables.lg_p_x2, books.x_book)
        par_m = _parity_scores(-tables.lg_p_x2, parity_book, None)
        marg_s = head_m[:, None] + info_m[None, :] + par_m
        joint_target = plan.n_f * tables.h_j_head + plan.n_b * tables.h_j_tail
        marg_target = plan.n_f * tables.h_p_y1 + plan.n_b * tables.h_p_x2
        rec_ok = _received_bipartite_ok(x1, tables.lg_p_x1, tables.h_p_x1,
                                        received, tables.lg_p_y2, tables.h_p_y2,
                                        plan.epsilon)
        mask = _typicality_mask(joint_s, marg_s, n_total, joint_target,
                                marg_target, plan.epsilon, rec_ok)
        hits = np.argwhere(mask)
        if hits.shape[0] != 1:
            return None
        return int(hits[0, 0]), int(hits[0, 1])

    return SystematicCode(n_f=plan.n_f, n_b_info=plan.n_b_info,
                          n_b_parity=plan.n_b_parity, books=books,
                          parity_fn=lambda f, b: parity_book[f, b],
                          index_decoder=index_decoder, parity_book=parity_book)


def make_repetition_code(plan: BlockPlan, books: SpecialBooks) -> SystematicCode:
    """Deterministic binary code: parity cyclically repeats the information word,
    decoding is minimum Hamming distance with ties mapped to None."""
    if books.y_book.max(initial=0) > 1 or books.x_book.max(initial=0) > 1:
        raise ProbabilityError("repetition parity is defined over binary alphabets")
    info_len = plan.n_f + plan.n_b_info

    def parity_fn(f: int, b: int) -> np.ndarray:
        info = np.concatenate([books.y_book[f], books.x_book[b]])
        reps = np.tile(info, (plan.n_b_parity + info_len - 1) // info_len + 1)
        return reps[:plan.n_b_parity].astype(np.int8)

    def index_decoder(x1: np.ndarray, received: np.ndarray):
        nf_book, nb_book = books.y_book.shape[0], books.x_book.shape[0]
        dist = np.empty((nf_book, nb_book))
        for f in range(nf_book):
            dh = int((books.y_book[f] != x1[:plan.n_f]).sum())
            for b in range(nb_book):
                reply = np.concatenate([books.x_book[b], parity_fn(f, b)])
                dist[f, b] = dh + int((reply != received).sum())
        best = dist.min()
        hits = np.argwhere(dist == best)
        if hits.shape[0] != 1:
            return None
        return int(hits[0, 0]), int(hits[0, 1])

    return SystematicCode(n_f=plan.n_f, n_b_info=plan.n_b_info,
                          n_b_parity=plan.n_b_parity, books=books,
                          parity_fn=parity_fn, index_decoder=index_decoder)


def _parity_scores(table: np.ndarray, parity_book: np.ndarray,
                   received: np.ndarray | None) -> np.ndarray:
    """Sum of table lookups over the parity positions, one value per book cell."""
    lead = parity_book.shape[:-1]
    width = parity_book.shape[-1]
    if width == 0:
        return np.zeros(lead)
    flat = parity_book.reshape(-1, width)
    return _gather_sum(table, flat, received).reshape(lead)


def _sample_iid_block(probs: np.ndarray, shape, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(probs)
    u = rng.random(shape)
    out = (cum[..., :] < u[..., None]).sum(axis=-1)
    return np.minimum(out, probs.size - 1).astype(np.int8)


def _sample_conditional_block(rows: np.ndarray, driver: np.ndarray,
                              rng: np.random.Generator) -> np.ndarray:
    """One draw per position from rows[driver[j]]; skipped (no rng use) when the
    map is deterministic."""
    if np.all((rows == 0.0) | (rows == 1.0)):
        return rows.argmax(axis=1)[driver].astype(np.int8)
    cum = np.cumsum(rows, axis=1)
    u = rng.random(driver.size)
    out = (cum[driver] < u[:, None]).sum(axis=1)
    return np.minimum(out, rows.shape[1] - 1).astype(np.int8)


# ---------------------------------------------------------------------------
# General-variant codebook
# ---------------------------------------------------------------------------

class _GeneralTables:
    """Single-letter laws of the general variant, derived from the auxiliary
    system: quantizer-side, decoder-side and eavesdropper-side tables."""

    def __init__(self, setup: TwoDmbcSetup, aux: DirectionAux):
        j1, j2 = direction_joints(setup.forward, setup.backward, aux)
        # j1 vars: X1, Y1, Z1, V; j2 vars: W1, W2, X2, Y2, Z2
        p_vy = j1.marginal([1, 3]).probs.T          # (v, y1)
        self.j_quant = p_vy
        self.p_v = p_vy.sum(axis=1)
        self.p_y1 = p_vy.sum(axis=0)
        self.j_head = j1.marginal([0, 3]).probs.T   # (v, x1)
        self.p_x1 = self.j_head.sum(axis=0)
        p_vz = j1.marginal([2, 3]).probs.T          # (v, z1)
        self.p_z1 = p_vz.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.lg_z1_given_v = log2_table(
                np.where(self.p_v[:, None] > 0, p_vz / self.p_v[:, None], 0.0))
        self.j_head_eve = p_vz                      # (v, z1)

        self.j_tail = j2.marginal([0, 3]).probs     # (w1, y2)
        self.p_w1 = self.j_tail.sum(axis=1)
        self.p_y2 = self.j_tail.sum(axis=0)
        p_w1z = j2.marginal([0, 4]).probs           # (w1, z2)
        self.p_z2 = p_w1z.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.lg_z2_given_w1 = log2_table(
                np.where(self.p_w1[:, None] > 0, p_w1z / self.p_w1[:, None], 0.0))
        self.j_tail_eve = p_w1z
        p_w1w2 = j2.marginal([0, 1]).probs          # (w1, w2)
        self.p_w2 = p_w1w2.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.w1_given_w2 = np.where(self.p_w2[None, :] > 0,
                                        p_w1w2 / self.p_w2[None, :], 0.0).T

        for name in ("j_quant", "j_head", "j_tail", "j_head_eve", "j_tail_eve"):
            arr = getattr(self, name)
            setattr(self, "lg_" + name, log2_table(arr))
            setattr(self, "h_" + name, entropy_bits(arr))
        for name in ("p_v", "p_y1", "p_x1", "p_w1", "p_y2", "p_z1", "p_z2"):
            arr = getattr(self, name)
            setattr(self, "lg_" + name, log2_table(arr))
            setattr(self, "h_" + name, entropy_bits(arr))


@dataclass
class IccCodebook:
    """All sampled books, index maps and the key partition of one general-variant
    instance, plus the derived single-letter tables the codec needs."""

    plan: BlockPlan
    aux: DirectionAux
    v_book: np.ndarray
    w1_book: np.ndarray
    parity_w2: np.ndarray
    parity_w1: np.ndarray
    partition: KeyPartition
    tables: _GeneralTables = field(repr=False)
    v_index: dict = field(repr=False)
    w1_index: dict = field(repr=False)

    @property
    def f1_count(self) -> int:
        return 1 << self.plan.eta_f1

    @property
    def b1_count(self) -> int:
        return 1 << self.plan.eta_b1

    def split_f(self, f: int) -> tuple[int, int]:
        return divmod(f, self.f1_count)

    def split_b(self, b: int) -> tuple[int, int]:
        return divmod(b, self.b1_count)

    def parity(self, f: int, b: int) -> np.ndarray:
        f2, f1 = self.split_f(f)
        b2, b1 = self.split_b(b)
        return self.parity_w1[f2, b2, f1, b1]

    def encode_pair(self, f: int, b: int) -> np.ndarray:
        return np.concatenate([self.w1_book[b], self.parity(f, b)])

    def derive_key(self, f: int, b: int) -> int:
        return self.partition.derive(f, b)

    def pair_parity_matrix(self, table: np.ndarray,
                           received: np.ndarray | None) -> np.ndarray:
        """Parity score for every (f, b) pair, arranged as an (F, B) matrix."""
        scores = _parity_scores(table, self.parity_w1, received)
        # (f2, b2, f1, b1) -> (f2, f1, b2, b1) -> (F, B)
        scores = scores.transpose(0, 2, 1, 3)
        return scores.reshape(self.v_book.shape[0], self.w1_book.shape[0])


def build_codebook(setup: TwoDmbcSetup, aux: DirectionAux, plan: BlockPlan,
                   rng: np.random.Generator) -> IccCodebook:
    """Sample every book of the general variant, in a fixed draw order.

    Order: quantizer book (with replacement), reply information book (distinct),
    outer parity book, inner parity books in outer-index order, key partition.
    Byte-identical on replay with the same seed.
    """
    if plan.eta > eta_guard():
        raise EnumerationGuardError(
            f"plan.eta={plan.eta} exceeds the candidate-scan guard {eta_guard()}")
    tables = _GeneralTables(setup, aux)
    p_v = Pmf(Alphabet(tables.p_v.size), tables.p_v)
    p_w1 = Pmf(Alphabet(tables.p_w1.size), tables.p_w1)
    v_book = sample_typical_book(p_v, plan.n_f, plan.epsilon,
                                 1 << plan.eta_f, rng, distinct=False)
    w1_book = sample_typical_book(p_w1, plan.n_b_info, plan.epsilon,
                                  1 << plan.eta_b, rng, distinct=True)
    f2_count, b2_count = 1 << plan.eta_f2, 1 << plan.eta_b2
    f1_count, b1_count = 1 << plan.eta_f1, 1 << plan.eta_b1
    parity_w2 = _sample_iid_block(tables.p_w2,
                                  (f2_count, b2_count, plan.n_b_parity), rng)
    parity_w1 = np.empty((f2_count, b2_count, f1_count, b1_count, plan.n_b_parity),
                         dtype=np.int8)
    for f2 in range(f2_count):
        for b2 in range(b2_count):
            w2_word = parity_w2[f2, b2].astype(np.int64)
            rows = tables.w1_given_w2[w2_word]      # (n_b_parity, |W1|)
            cum = np.cumsum(rows, axis=1)
            u = rng.random((f1_count * b1_count, plan.n_b_parity))
            draw = (cum[None, :, :] < u[:, :, None]).sum(axis=2)
            draw = np.minimum(draw, rows.shape[1] - 1)
            parity_w1[f2, b2] = draw.reshape(f1_count, b1_count,
                                             plan.n_b_parity).astype(np.int8)
    partition = balanced_partition(plan.eta_f, plan.eta_b, plan.kappa, rng)
    return IccCodebook(plan=plan, aux=aux, v_book=v_book, w1_book=w1_book,
                       parity_w2=parity_w2, parity_w1=parity_w1,
                       partition=partition, tables=tables,
                       v_index={row.tobytes(): i for i, row in enumerate(v_book)},
                       w1_index={row.tobytes(): i for i, row in enumerate(w1_book)})


def encode(codebook: IccCodebook, v_seq, w1_head) -> tuple[np.ndarray, np.ndarray]:
    """Systematic encoding: the information pair stays verbatim, the looked-up
    parity word is appended to the reply."""
    v_seq = np.asarray(v_seq, dtype=np.int8)
    w1_head = np.asarray(w1_head, dtype=np.int8)
    f = codebook.v_index.get(v_seq.tobytes())
    b = codebook.w1_index.get(w1_head.tobytes())
    if f is None or b is None:
        raise KeyError("encode: information word not in the books")
    return v_seq, codebook.encode_pair(f, b)


def _decode_pair(codebook: IccCodebook, x1: np.ndarray, y2: np.ndarray,
                 epsilon: float) -> Optional[tuple[int, int]]:
    plan = codebook.plan
    t = codebook.tables
    y2_info = y2[:plan.n_b_info]
    y2_par = y2[plan.n_b_info:]
    head_j = _gather_sum(-t.lg_j_head, codebook.v_book, x1)
    info_j = _gather_sum(-t.lg_j_tail, codebook.w1_book, y2_info)
    joint_s = head_j[:, None] + info_j[None, :] + codebook.pair_parity_matrix(
        -t.lg_j_tail, y2_par)
    head_m = _gather_sum(-t.lg_p_v, codebook.v_book)
    info_m = _gather_sum(-t.lg_p_w1, codebook.w1_book)
    marg_s = head_m[:, None] + info_m[None, :] + codebook.pair_parity_matrix(
        -t.lg_p_w1, None)
    joint_target = plan.n_f * t.h_j_head + plan.n_b * t.h_j_tail
    marg_target = plan.n_f * t.h_p_v + plan.n_b * t.h_p_w1
    rec_ok = _received_bipartite_ok(x1, t.lg_p_x1, t.h_p_x1,
                                    y2, t.lg_p_y2, t.h_p_y2, epsilon)
    mask = _typicality_mask(joint_s, marg_s, plan.n_total, joint_target,
                            marg_target, epsilon, rec_ok)
    hits = np.argwhere(mask)
    if hits.shape[0] != 1:
        return None
    return int(hits[0, 0]), int(hits[0, 1])


def decode(codebook: IccCodebook, x_f, y_b,
           epsilon: float | None = None) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Exhaustive bipartite jointly-typical decoding; None unless exactly one
    candidate re-encodes to a word that passes against the received pair."""
    eps = codebook.plan.epsilon if epsilon is None else epsilon
    pair = _decode_pair(codebook, np.asarray(x_f, dtype=np.int64),
                        np.asarray(y_b, dtype=np.int64), eps)
    if pair is None:
        return None
    f, b = pair
    return codebook.v_book[f], codebook.w1_book[b]


def _quantize_candidates(codebook: IccCodebook, y1: np.ndarray) -> np.ndarray:
    """Book entries jointly typical with the received first-round block."""
    plan = codebook.plan
    t = codebook.tables
    s_rec = float(-t.lg_p_y1[y1].sum())
    if not (math.isfinite(s_rec)
            and abs(s_rec / plan.n_f - t.h_p_y1) < plan.epsilon):
        return np.empty(0, dtype=np.int64)
    joint_s = _gather_sum(-t.lg_j_quant, codebook.v_book, y1)
    marg_s = _gather_sum(-t.lg_p_v, codebook.v_book)
    mask = _typicality_mask(joint_s, marg_s, plan.n_f, plan.n_f * t.h_j_quant,
                            plan.n_f * t.h_p_v, plan.epsilon, True)
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Views:
    alice: tuple[np.ndarray, np.ndarray]
    bob: tuple[np.ndarray, np.ndarray]
    eve: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SessionOutcome:
    """One protocol run: the key pair, all views, and how the run ended.

    ``decode_mismatch`` means both keys exist but differ; a decoded pair that
    lands in the right partition cell still counts as ``ok``.
    """

    s: int | None
    s_hat: int | None
    views: Views
    failure_mode: str

    @property
    def ok(self) -> bool:
        return self.failure_mode == "ok"


_EMPTY = np.zeros(0, dtype=np.int8)


def _outcome(s, s_hat, x1, y1, z1, x2, y2, z2) -> SessionOutcome:
    if s is None:
        mode = "bob_null"
    elif s_hat is None:
        mode = "alice_null"
    elif s_hat != s:
        mode = "decode_mismatch"
    else:
        mode = "ok"
    return SessionOutcome(s=s, s_hat=s_hat,
                          views=Views(alice=(x1, y2), bob=(y1, x2), eve=(z1, z2)),
                          failure_mode=mode)


def run_session_special(setup: TwoDmbcSetup, plan: BlockPlan, code: SystematicCode,
                        partition: KeyPartition,
                        rng: np.random.Generator) -> SessionOutcome:
    """One special-variant session.

    Draw order: initiator block, first channel, reply information index,
    second channel.  The responder aborts (NULL) when the received block is
    not in its book.
    """
    x1 = _sample_iid_block(plan.p_x1.probs, plan.n_f, rng)
    y1, z1 = sample_block(setup.forward, x1, rng)
    f = code.books.y_index.get(y1.astype(np.int8).tobytes())
    if f is None:
        return _outcome(None, None, x1, y1.astype(np.int8), z1.astype(np.int8),
                        _EMPTY, _EMPTY, _EMPTY)
    b = int(rng.integers(code.books.x_book.shape[0]))
    _, x2 = code.encode(code.books.y_book[f], code.books.x_book[b])
    y2, z2 = sample_block(setup.backward, x2, rng)
    s = partition.derive(f, b)
    pair = code.index_decoder(x1.astype(np.int64), y2)
    s_hat = None if pair is None else partition.derive(*pair)
    return _outcome(s, s_hat, x1, y1.astype(np.int8), z1.astype(np.int8),
                    x2, y2.astype(np.int8), z2.astype(np.int8))


def run_session_general(setup: TwoDmbcSetup, aux: DirectionAux,
                        codebook: IccCodebook, plan: BlockPlan,
                        rng: np.random.Generator) -> SessionOutcome:
    """One general-variant session.

    Draw order: initiator block, first channel, quantizer pick (skipped when
    unique), reply information index, carrier-to-input map (skipped when
    deterministic), second channel.
    """
    t = codebook.tables
    x1 = _sample_iid_block(t.p_x1, plan.n_f, rng)
    y1, z1 = sample_block(setup.forward, x1, rng)
    candidates = _quantize_candidates(codebook, y1)
    if candidates.size == 0:
        return _outcome(None, None, x1, y1.astype(np.int8), z1.astype(np.int8),
                        _EMPTY, _EMPTY, _EMPTY)
    f = int(candidates[0] if candidates.size == 1
            else candidates[rng.integers(candidates.size)])
    b = int(rng.integers(codebook.w1_book.shape[0]))
    w1_full = codebook.encode_pair(f, b)
    x2 = _sample_conditional_block(aux.p_x2_given_w1.rows,
                                   w1_full.astype(np.int64), rng)
    y2, z2 = sample_block(setup.backward, x2, rng)
    s = codebook.derive_key(f, b)
    pair = _decode_pair(codebook, x1.astype(np.int64), y2, plan.epsilon)
    s_hat = None if pair is None else codebook.derive_key(*pair)
    return _outcome(s, s_hat, x1, y1.astype(np.int8), z1.astype(np.int8),
                    x2, y2.astype(np.int8), z2.astype(np.int8))


# ---------------------------------------------------------------------------
# Eavesdropper-side computations
# ---------------------------------------------------------------------------

def _logsumexp2(a: np.ndarray) -> float:
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    return m + math.log2(float(np.exp2(a - m).sum()))


def _pair_posterior_keys(log_pair: np.ndarray, key_of: np.ndarray,
                         n_keys: int) -> Pmf:
    flat = log_pair.ravel()
    m = float(np.max(flat))
    if not math.isfinite(m):
        # Observation impossible under the model; fall back to the uniform key law.
        return Pmf.uniform(Alphabet(n_keys))
    w = np.exp2(flat - m)
    per_key = np.bincount(key_of, weights=w, minlength=n_keys)
    return Pmf(Alphabet(n_keys), per_key / per_key.sum())


def eve_posterior(codebook: IccCodebook, setup: TwoDmbcSetup, plan: BlockPlan,
                  z_f, z_b) -> Pmf:
    """Exact within-model posterior over keys given the eavesdropper's view.

    The model: the information pair carries the product-law prior of its book
    entries (the reply index exactly uniform), and the view is read through
    the memoryless single-letter conditionals induced by the auxiliary system.
    This dominates any typicality-based check decoding built on the same
    observations.
    """
    if plan.eta > eta_guard():
        raise EnumerationGuardError(
            f"plan.eta={plan.eta} exceeds the candidate-scan guard {eta_guard()}")
    t = codebook.tables
    z1 = np.asarray(z_f, dtype=np.int64)
    z2 = np.asarray(z_b, dtype=np.int64)
    prior_f = _gather_sum(t.lg_p_v, codebook.v_book)
    prior_f -= _logsumexp2(prior_f)
    like_f = _gather_sum(t.lg_z1_given_v, codebook.v_book, z1)
    like_b = _gather_sum(t.lg_z2_given_w1, codebook.w1_book, z2[:plan.n_b_info])
    like_par = codebook.pair_parity_matrix(t.lg_z2_given_w1, z2[plan.n_b_info:])
    log_pair = (prior_f + like_f)[:, None] + like_b[None, :] + like_par
    return _pair_posterior_keys(log_pair, codebook.partition.key_of,
                                codebook.partition.n_keys)


def eve_posterior_special(code: SystematicCode, partition: KeyPartition,
                          setup: TwoDmbcSetup, plan: BlockPlan, z_f, z_b) -> Pmf:
    """Special-variant analogue of :func:`eve_posterior`.

    Here the within-model posterior is the true conditional law of the key
    given the view: the books hold the actual transmitted words, so the
    memoryless likelihoods are exact.
    """
    t = _SpecialTables(setup, plan)
    z1 = np.asarray(z_f, dtype=np.int64)
    z2 = np.asarray(z_b, dtype=np.int64)
    prior_f = _gather_sum(t.lg_p_y1, code.books.y_book)
    prior_f -= _logsumexp2(prior_f)
    like_f = _gather_sum(t.lg_z1_given_y1, code.books.y_book, z1)
    like_b = _gather_sum(t.lg_z2_given_x2, code.books.x_book, z2[:plan.n_b_info])
    like_par = _parity_scores(t.lg_z2_given_x2, code.full_parity_book(),
                              z2[plan.n_b_info:])
    log_pair = (prior_f + like_f)[:, None] + like_b[None, :] + like_par
    return _pair_posterior_keys(log_pair, partition.key_of, partition.n_keys)


def check_decode(codebook: IccCodebook, s: int, f2: int, b2: int, z_f, z_b,
                 epsilon: float | None = None) -> Optional[tuple[int, int]]:
    """The eavesdropper's check decoder: scan the key cell restricted to the
    known outer indices and return the unique candidate whose codeword is
    bipartite jointly typical with the view, else None."""
    plan = codebook.plan
    t = codebook.tables
    eps = plan.epsilon if epsilon is None else epsilon
    z1 = np.asarray(z_f, dtype=np.int64)
    z2 = np.asarray(z_b, dtype=np.int64)
    n_b = codebook.w1_book.shape[0]
    pairs = np.flatnonzero(codebook.partition.key_of == s)
    fs, bs = pairs // n_b, pairs % n_b
    keep = (fs // codebook.f1_count == f2) & (bs // codebook.b1_count == b2)
    fs, bs = fs[keep], bs[keep]
    if fs.size == 0:
        return None
    rec_ok = _received_bipartite_ok(z1, t.lg_p_z1, t.h_p_z1,
                                    z2, t.lg_p_z2, t.h_p_z2, eps)
    hits = []
    for f, b in zip(fs, bs):
        v_seq = codebook.v_book[f].astype(np.int64)
        w_seq = codebook.encode_pair(f, b).astype(np.int64)
        joint_s = (-t.lg_j_head_eve[v_seq, z1].sum()
                   - t.lg_j_tail_eve[w_seq, z2].sum())
        marg_s = -t.lg_p_v[v_seq].sum() - t.lg_p_w1[w_seq].sum()
        joint_t = plan.n_f * t.h_j_head_eve + plan.n_b * t.h_j_tail_eve
        marg_t = plan.n_f * t.h_p_v + plan.n_b * t.h_p_w1
        ok = bool(_typicality_mask(np.array(joint_s), np.array(marg_s),
                                   plan.n_total, joint_t, marg_t, eps, rec_ok))
        if ok:
            hits.append((int(f), int(b)))
            if len(hits) > 1:
                return None
    return hits[0] if len(hits) == 1 else None


# ---------------------------------------------------------------------------
# Protocol variants and evaluation
# ---------------------------------------------------------------------------

@dataclass
class SpecialProtocol:
    code: SystematicCode
    partition: KeyPartition

    def run(self, setup: TwoDmbcSetup, plan: BlockPlan,
            rng: np.random.Generator) -> SessionOutcome:
        return run_session_special(setup, plan, self.code, self.partition, rng)

    def posterior(self, setup: TwoDmbcSetup, plan: BlockPlan, z_f, z_b) -> Pmf:
        return eve_posterior_special(self.code, self.partition, setup, plan, z_f, z_b)


@dataclass
class GeneralProtocol:
    aux: DirectionAux
    codebook: IccCodebook

    def run(self, setup: TwoDmbcSetup, plan: BlockPlan,
            rng: np.random.Generator) -> SessionOutcome:
        return run_session_general(setup, self.aux, self.codebook, plan, rng)

    def posterior(self, setup: TwoDmbcSetup, plan: BlockPlan, z_f, z_b) -> Pmf:
        return eve_posterior(self.codebook, setup, plan, z_f, z_b)


def special_protocol(setup: TwoDmbcSetup, plan: BlockPlan,
                     rng: np.random.Generator) -> SpecialProtocol:
    """Build books, random code and key partition in one fixed draw order."""
    if plan.eta > eta_guard():
        raise EnumerationGuardError(
            f"plan.eta={plan.eta} exceeds the candidate-scan guard {eta_guard()}")
    books = build_special_books(setup, plan, rng)
    code = make_random_code(setup, plan, books, rng)
    partition = balanced_partition(plan.eta_f, plan.eta_b, plan.kappa, rng)
    return SpecialProtocol(code=code, partition=partition)


def general_protocol(setup: TwoDmbcSetup, aux: DirectionAux, plan: BlockPlan,
                     rng: np.random.Generator) -> GeneralProtocol:
    return GeneralProtocol(aux=aux, codebook=build_codebook(setup, aux, plan, rng))


@dataclass(frozen=True)
class EvaluationReport:
    """Aggregated empirical uniformity / reliability / secrecy metrics."""

    sessions: int
    p_error: float
    p_error_half_width: float
    key_entropy: float
    key_entropy_plugin: float
    leakage: float | None
    leakage_se: float | None
    rate: float
    kappa: int
    n_total: int
    r_sk: float
    failure_counts: dict[str, int]
    key_counts: dict[int, int]
    delta: float | None = None
    checks: dict[str, bool] | None = None
    outcomes: tuple[SessionOutcome, ...] | None = None


def _wilson_half_width(k: int, n: int) -> float:
    if n == 0:
        return 1.0
    z = _WILSON_Z
    phat = k / n
    denom = 1.0 + z * z / n
    return z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom


def _miller_madow(counts: np.ndarray, n: int) -> tuple[float, float]:
    """(plug-in, bias-corrected) entropy estimates from key counts."""
    if n == 0:
        return 0.0, 0.0
    p = counts[counts > 0] / n
    plug = float(-(p * np.log2(p)).sum())
    corrected = plug + (p.size - 1) / (2.0 * n * math.log(2.0))
    return plug, corrected


def evaluate(setup: TwoDmbcSetup, plan: BlockPlan, protocol, sessions: int,
             rng: np.random.Generator, delta: float | None = None,
             compute_leakage: bool = True, workers: int = 1,
             keep_outcomes: bool = False) -> EvaluationReport:
    """Run seeded independent sessions and aggregate the three criteria.

    Reliability counts NULL sessions as errors.  Key entropy is the plug-in
    entropy of the empirical key distribution with the Miller-Madow bias
    correction.  Leakage is the gap between the empirical prior's entropy and
    the mean posterior entropy over the eavesdropper's views, computed with
    the exact within-model posterior when the candidate-scan guard allows
    (None otherwise).
    """
    if sessions < 1:
        raise ValueError(f"sessions must be >= 1, got {sessions}")
    child_rngs = rng.spawn(sessions)
    want_leakage = compute_leakage and plan.eta <= eta_guard()

    def one(i: int):
        outcome = protocol.run(setup, plan, child_rngs[i])
        post_h = None
        if want_leakage and outcome.s is not None:
            z1, z2 = outcome.views.eve
            post_h = protocol.posterior(setup, plan, z1, z2).entropy()
        return outcome, post_h

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(sessions)))
    else:
        results = [one(i) for i in range(sessions)]

    failure_counts = {"ok": 0, "bob_null": 0, "alice_null": 0, "decode_mismatch": 0}
    key_counts_arr = np.zeros(plan.n_keys, dtype=np.int64)
    post_entropies = []
    for outcome, post_h in results:
        failure_counts[outcome.failure_mode] += 1
        if outcome.s is not None:
            key_counts_arr[outcome.s] += 1
        if post_h is not None:
            post_entropies.append(post_h)
    errors = sessions - failure_counts["ok"]
    p_error = errors / sessions
    keyed = int(key_counts_arr.sum())
    plug, corrected = _miller_madow(key_counts_arr, keyed)
    # the true key entropy cannot exceed the key size; cap the bias-corrected
    # estimate accordingly
    corrected = min(corrected, float(plan.kappa))
    leakage = None
    leakage_se = None
    if want_leakage and post_entropies:
        # Bias-corrected empirical prior against exact per-view posteriors.
        posts = np.asarray(post_entropies)
        leakage = corrected - float(posts.mean())
        leakage_se = float(posts.std(ddof=1) / math.sqrt(posts.size)) \
            if posts.size > 1 else 0.0
    rate = corrected / plan.n_total
    checks = None
    if delta is not None:
        secrecy_ok = True
        if leakage is not None and corrected > 0:
            secrecy_ok = leakage / corrected < delta
        checks = {
            "uniformity": rate > plan.r_sk - delta,
            "reliability": p_error < delta,
            "secrecy": secrecy_ok,
        }
    return EvaluationReport(
        sessions=sessions, p_error=p_error,
        p_error_half_width=_wilson_half_width(errors, sessions),
        key_entropy=corrected, key_entropy_plugin=plug, leakage=leakage,
        leakage_se=leakage_se,
        rate=rate, kappa=plan.kappa, n_total=plan.n_total, r_sk=plan.r_sk,
        failure_counts=failure_counts,
        key_counts={int(k): int(c) for k, c in enumerate(key_counts_arr) if c},
        delta=delta, checks=checks,
        outcomes=tuple(r[0] for r in results) if keep_outcomes else None)
