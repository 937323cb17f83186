"""Secret-key rate expressions and their maximizers.

Quantities computed here, all in bits per channel use:

- the four per-round secrecy components (first-round quantization rate minus
  eavesdropper leakage, second-round wiretap-style rate),
- the general two-round lower bound (second-round component clamped at zero),
- the interactive-coding achievable rate (same objective, unclamped),
- the simplified lower bound for stochastically-degraded setups with
  independent component channels, and the capacity under an i.i.d.-only
  sender (which equals that lower bound),
- the conditional-mutual-information upper bound,
- integer block-length planning for the executable protocol.

The maximizations are non-concave in the auxiliary channels, so the search is
multi-start projected coordinate ascent over probability simplices and every
reported value is a certified achievable value (each probed point is
feasible), not a global-optimality certificate.  The block-length ratio enters
all objectives only through tau = n_first/(n_first+n_second); tau is optimized
on a 512-point grid with golden-section refinement, with the strict rate
constraint relaxed to a reported nonnegative slack of at least 1e-9.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channels import Dmbc, TwoDmbcSetup, is_sd_setup
from .probability import (MAX_ALPHABET, Alphabet, ConditionalPmf, JointPmf, Pmf,
                          ProbabilityError, compose_markov,
                          conditional_mutual_information, entropy_bits,
                          mutual_information, push_through)

CONSTRAINT_SLACK = 1e-9
TAU_GRID = 512


class NotSdSetupError(RuntimeError):
    """An sd-only bound was requested for a setup that is not sd."""


class InfeasiblePlanError(RuntimeError):
    """No integer block split satisfies the rate constraint at the given total."""


@dataclass(frozen=True)
class DirectionAux:
    """Auxiliary system for one direction of the protocol.

    The initiator sends i.i.d. symbols with law ``p_x1`` over the first
    channel; the responder quantizes its first-round output through
    ``p_v_given_y1`` and, for the reply, draws the information carrier from
    ``p_w1``, derives the outer layer through ``p_w2_given_w1`` and feeds the
    second channel through ``p_x2_given_w1``.  Built this way, the required
    conditional-independence structure holds by construction.
    """

    p_x1: Pmf
    p_v_given_y1: ConditionalPmf
    p_w1: Pmf
    p_w2_given_w1: ConditionalPmf
    p_x2_given_w1: ConditionalPmf

    def __post_init__(self):
        if self.p_w2_given_w1.input_alphabet.size != self.p_w1.alphabet.size:
            raise ProbabilityError("w2 layer must be driven by w1")
        if self.p_x2_given_w1.input_alphabet.size != self.p_w1.alphabet.size:
            raise ProbabilityError("second-round channel input must be driven by w1")

    @property
    def induced_p_x2(self) -> Pmf:
        """Law of the second channel's input (w1 pushed through the input map)."""
        return push_through(self.p_w1, self.p_x2_given_w1)


@dataclass(frozen=True)
class AuxiliarySystem:
    """Auxiliary systems for both directions (``a``: forward first; ``b``: backward first)."""

    a: DirectionAux
    b: DirectionAux


@dataclass(frozen=True)
class RateComponents:
    """The four secrecy-rate components, in bits per channel use (may be negative)."""

    r_a_s1: float
    r_a_s2: float
    r_b_s1: float
    r_b_s2: float


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 32
    max_sweeps: int = 40
    tol: float = 1e-7
    tau_grid: int = TAU_GRID
    seed: int = 0
    v_card: int | None = None
    w1_card: int | None = None
    w2_card: int | None = None
    workers: int = 1


@dataclass(frozen=True)
class BoundReport:
    """Outcome of one direction's maximization."""

    value: float
    ratio: float
    argmax: DirectionAux | None
    constraint_slack: float
    feasible: bool
    restarts: int
    evaluations: int
    tolerance: float
    diagnostic: str | None = None


@dataclass(frozen=True)
class BoundPair:
    """Per-direction reports plus their combined maximum."""

    a: BoundReport
    b: BoundReport

    @property
    def value(self) -> float:
        return max(self.a.value, self.b.value)


@dataclass(frozen=True)
class BlockLengths:
    """Integer channel-use split: reply = information part + appended check part."""

    n_f: int
    n_b: int
    n_b_info: int
    n_b_parity: int


@dataclass(frozen=True)
class DirectionInformations:
    """Single-letter informations of one direction at a fixed auxiliary system."""

    i_v_x1: float
    i_v_z1: float
    i_v_y1: float
    i_v_y1_given_x1: float
    i_w1_y2: float
    i_w2_y2: float
    i_w1_y2_given_w2: float
    i_w1_z2_given_w2: float

    @property
    def r_s1(self) -> float:
        return self.i_v_x1 - self.i_v_z1

    @property
    def r_s2(self) -> float:
        return self.i_w1_y2_given_w2 - self.i_w1_z2_given_w2


# ---------------------------------------------------------------------------
# Clean (composed-joint) evaluation of the rate components
# ---------------------------------------------------------------------------

def direction_joints(first: Dmbc, second: Dmbc,
                     aux: DirectionAux) -> tuple[JointPmf, JointPmf]:
    """The two composed joints of one direction.

    Returns ``(first_joint, second_joint)`` with variable orders
    ``(X1, Y1, Z1, V)`` and ``(W1, W2, X2, Y2, Z2)``.
    """
    if aux.p_x1.alphabet.size != first.input_alphabet.size:
        raise ProbabilityError("first-round input law does not match the channel")
    if aux.p_v_given_y1.input_alphabet.size != first.legit_alphabet.size:
        raise ProbabilityError("quantizer input does not match the first-round output")
    if aux.p_x2_given_w1.output_alphabet.size != second.input_alphabet.size:
        raise ProbabilityError("second-round input map does not match the channel")
    j1 = compose_markov([aux.p_x1, first.law, aux.p_v_given_y1],
                        [(), (0,), (1,)])
    j2 = compose_markov([aux.p_w1, aux.p_w2_given_w1, aux.p_x2_given_w1, second.law],
                        [(), (0,), (0,), (2,)])
    return j1, j2


def direction_informations(first: Dmbc, second: Dmbc,
                           aux: DirectionAux) -> DirectionInformations:
    """All single-letter informations used by the bounds and the block planner."""
    j1, j2 = direction_joints(first, second, aux)
    # j1 vars: X1=0, Y1=1, Z1=2, V=3; j2 vars: W1=0, W2=1, X2=2, Y2=3, Z2=4
    return DirectionInformations(
        i_v_x1=mutual_information(j1, (3, 0)),
        i_v_z1=mutual_information(j1, (3, 2)),
        i_v_y1=mutual_information(j1, (3, 1)),
        i_v_y1_given_x1=conditional_mutual_information(j1, 3, 1, 0),
        i_w1_y2=mutual_information(j2, (0, 3)),
        i_w2_y2=mutual_information(j2, (1, 3)),
        i_w1_y2_given_w2=conditional_mutual_information(j2, 0, 3, 1),
        i_w1_z2_given_w2=conditional_mutual_information(j2, 0, 4, 1),
    )


def rate_components(setup: TwoDmbcSetup, aux: AuxiliarySystem) -> RateComponents:
    """Evaluate the four secrecy-rate components exactly at ``aux``."""
    ia = direction_informations(setup.forward, setup.backward, aux.a)
    ib = direction_informations(setup.backward, setup.forward, aux.b)
    return RateComponents(r_a_s1=ia.r_s1, r_a_s2=ia.r_s2,
                          r_b_s1=ib.r_s1, r_b_s2=ib.r_s2)


def identity_direction_aux(first: Dmbc, second: Dmbc) -> DirectionAux:
    """The plug-in system: quantizer mirrors the output, reply feeds the raw input."""
    return DirectionAux(
        p_x1=Pmf.uniform(first.input_alphabet),
        p_v_given_y1=ConditionalPmf.identity(first.legit_alphabet),
        p_w1=Pmf.uniform(second.input_alphabet),
        p_w2_given_w1=ConditionalPmf.constant(second.input_alphabet, 1),
        p_x2_given_w1=ConditionalPmf.identity(second.input_alphabet),
    )


def degenerate_aux_system(setup: TwoDmbcSetup) -> AuxiliarySystem:
    return AuxiliarySystem(a=identity_direction_aux(setup.forward, setup.backward),
                           b=identity_direction_aux(setup.backward, setup.forward))


# ---------------------------------------------------------------------------
# Fast array evaluator used inside the optimizers
# ---------------------------------------------------------------------------

class _GeneralEvaluator:
    """Raw-array objective for one direction of the general bound.

    Parameter blocks, in order: first-round input law; one quantizer row per
    first-round output symbol; the information-carrier law; one outer-layer
    row per carrier symbol; one channel-input row per carrier symbol.
    """

    kind = "general"

    def __init__(self, first: Dmbc, second: Dmbc, cfg: SearchConfig):
        self.t1 = first.tensor
        self.t1y = self.t1.sum(axis=2)
        self.t1z = self.t1.sum(axis=1)
        self.t2 = second.tensor
        self.t2y = self.t2.sum(axis=2)
        self.t2z = self.t2.sum(axis=1)
        self.nx1, self.ny1, self.nz1 = self.t1.shape
        self.nx2 = self.t2.shape[0]
        self.nv = cfg.v_card or min(self.ny1 + 2, MAX_ALPHABET)
        self.nw1 = cfg.w1_card or min(self.nx2 + 2, MAX_ALPHABET)
        self.nw2 = cfg.w2_card or self.nw1

    def block_sizes(self) -> list[int]:
        return ([self.nx1] + [self.nv] * self.ny1 + [self.nw1]
                + [self.nw2] * self.nw1 + [self.nx2] * self.nw1)

    def informations(self, blocks) -> tuple[float, float, float, float, float]:
        """(r_s1, i_v_y1_given_x1, r_s2, i_w1_y2) pieces of the objective."""
        ny1, nw1 = self.ny1, self.nw1
        p_x = blocks[0]
        q_v = np.vstack(blocks[1:1 + ny1])
        p_w1 = blocks[1 + ny1]
        q_w2 = np.vstack(blocks[2 + ny1:2 + ny1 + nw1])
        q_x2 = np.vstack(blocks[2 + ny1 + nw1:2 + ny1 + 2 * nw1])

        pxy = p_x[:, None] * self.t1y
        py = pxy.sum(axis=0)
        pz = p_x @ self.t1z
        pyz = np.einsum("x,xyz->yz", p_x, self.t1)
        pxv = pxy @ q_v
        pv = py @ q_v
        pyv = py[:, None] * q_v
        pvz = q_v.T @ pyz
        hx = entropy_bits(p_x)
        hy = entropy_bits(py)
        hz = entropy_bits(pz)
        hv = entropy_bits(pv)
        hxv = entropy_bits(pxv)
        hyv = entropy_bits(pyv)
        i_v_x = hv + hx - hxv
        i_v_z = hv + hz - entropy_bits(pvz)
        i_v_y_given_x = (hxv - hx) - (hyv - hy)

        pw1x = p_w1[:, None] * q_x2
        pw1y = pw1x @ self.t2y
        pw1z = pw1x @ self.t2z
        pw1w2 = p_w1[:, None] * q_w2
        ty = pw1y[:, None, :] * q_w2[:, :, None]
        tz = pw1z[:, None, :] * q_w2[:, :, None]
        hw1w2 = entropy_bits(pw1w2)
        hw2 = entropy_bits(pw1w2.sum(axis=0))
        i_w1_y2_g = hw1w2 + entropy_bits(ty.sum(axis=0)) - hw2 - entropy_bits(ty)
        i_w1_z2_g = hw1w2 + entropy_bits(tz.sum(axis=0)) - hw2 - entropy_bits(tz)
        i_w1_y2 = (entropy_bits(p_w1) + entropy_bits(pw1y.sum(axis=0))
                   - entropy_bits(pw1y))
        return (i_v_x - i_v_z, i_v_y_given_x, i_w1_y2_g - i_w1_z2_g, i_w1_y2)

    def pieces(self, blocks, clamp: bool) -> tuple[float, float, float, float]:
        r_s1, i_v, r_s2, i_w = self.informations(blocks)
        b = max(r_s2, 0.0) if clamp else r_s2
        return r_s1, b, i_v, i_w

    def initial_blocks(self, rng: np.random.Generator | None, probe: int):
        if rng is None:
            return self._canonical(probe)
        return [rng.dirichlet(np.ones(sz)) for sz in self.block_sizes()]

    def _canonical(self, probe: int):
        one_hot = lambda size, i: np.eye(size)[i]
        blocks = [np.full(self.nx1, 1.0 / self.nx1)]
        for y in range(self.ny1):
            blocks.append(one_hot(self.nv, 0 if probe == 1 else y % self.nv))
        p_w1 = np.zeros(self.nw1)
        p_w1[:self.nx2] = 1.0 / self.nx2
        blocks.append(p_w1)
        blocks.extend(one_hot(self.nw2, 0) for _ in range(self.nw1))
        blocks.extend(one_hot(self.nx2, w % self.nx2) for w in range(self.nw1))
        return blocks

    def to_aux(self, blocks) -> DirectionAux:
        ny1, nw1 = self.ny1, self.nw1
        x1 = Alphabet(self.nx1)
        y1 = Alphabet(ny1)
        w1 = Alphabet(nw1)
        return DirectionAux(
            p_x1=Pmf(x1, blocks[0]),
            p_v_given_y1=ConditionalPmf.from_rows(np.vstack(blocks[1:1 + ny1]), y1),
            p_w1=Pmf(w1, blocks[1 + ny1]),
            p_w2_given_w1=ConditionalPmf.from_rows(
                np.vstack(blocks[2 + ny1:2 + ny1 + nw1]), w1),
            p_x2_given_w1=ConditionalPmf.from_rows(
                np.vstack(blocks[2 + ny1 + nw1:2 + ny1 + 2 * nw1]), w1,
                Alphabet(self.nx2)),
        )


class _SdEvaluator:
    """Raw-array objective for one direction of the sd-setup lower bound.

    Blocks: first-round input law; one quantizer row per first-round output;
    the second channel's input law (the carrier feeds the channel directly).
    """

    kind = "sd"

    def __init__(self, first: Dmbc, second: Dmbc, cfg: SearchConfig):
        self.t1 = first.tensor
        self.t2 = second.tensor
        self.t2y = self.t2.sum(axis=2)
        self.t2z = self.t2.sum(axis=1)
        self.nx1, self.ny1, self.nz1 = self.t1.shape
        self.nx2 = self.t2.shape[0]
        self.nv = cfg.v_card or min(self.ny1 + 2, MAX_ALPHABET)

    def block_sizes(self) -> list[int]:
        return [self.nx1] + [self.nv] * self.ny1 + [self.nx2]

    def pieces(self, blocks, clamp: bool = True) -> tuple[float, float, float, float]:
        ny1 = self.ny1
        p_x = blocks[0]
        q_v = np.vstack(blocks[1:1 + ny1])
        p_x2 = blocks[1 + ny1]

        pxyz = p_x[:, None, None] * self.t1
        pvxz = np.einsum("xyz,yv->vxz", pxyz, q_v)
        pxz = pxyz.sum(axis=1)
        pz = pxz.sum(axis=0)
        i_v_x_given_z = (entropy_bits(pvxz.sum(axis=1)) + entropy_bits(pxz)
                         - entropy_bits(pz) - entropy_bits(pvxz))
        pxy = pxyz.sum(axis=2)
        py = pxy.sum(axis=0)
        pxv = pxy @ q_v
        pyv = py[:, None] * q_v
        i_v_y_given_x = ((entropy_bits(pxv) - entropy_bits(p_x))
                         - (entropy_bits(pyv) - entropy_bits(py)))

        p2y = p_x2 @ self.t2y
        p2z = p_x2 @ self.t2z
        hx2 = entropy_bits(p_x2)
        i_x2_y2 = hx2 + entropy_bits(p2y) - entropy_bits(p_x2[:, None] * self.t2y)
        i_x2_z2 = hx2 + entropy_bits(p2z) - entropy_bits(p_x2[:, None] * self.t2z)
        b = max(i_x2_y2 - i_x2_z2, 0.0)
        return i_v_x_given_z, b, i_v_y_given_x, i_x2_y2

    def initial_blocks(self, rng: np.random.Generator | None, probe: int):
        if rng is None:
            one_hot = lambda size, i: np.eye(size)[i]
            blocks = [np.full(self.nx1, 1.0 / self.nx1)]
            for y in range(self.ny1):
                blocks.append(one_hot(self.nv, 0 if probe == 1 else y % self.nv))
            blocks.append(np.full(self.nx2, 1.0 / self.nx2))
            return blocks
        return [rng.dirichlet(np.ones(sz)) for sz in self.block_sizes()]

    def to_aux(self, blocks) -> DirectionAux:
        ny1 = self.ny1
        x2 = Alphabet(self.nx2)
        return DirectionAux(
            p_x1=Pmf(Alphabet(self.nx1), blocks[0]),
            p_v_given_y1=ConditionalPmf.from_rows(np.vstack(blocks[1:1 + ny1]),
                                                  Alphabet(ny1)),
            p_w1=Pmf(x2, blocks[1 + ny1]),
            p_w2_given_w1=ConditionalPmf.constant(x2, 1),
            p_x2_given_w1=ConditionalPmf.identity(x2),
        )


# ---------------------------------------------------------------------------
# tau handling and ascent
# ---------------------------------------------------------------------------

def _tau_upper(i_v: float, i_w: float) -> float:
    """Largest ratio allowed by the rate constraint, with the strictness slack."""
    if i_w <= CONSTRAINT_SLACK:
        return 0.0
    if i_v <= 0.0:
        return 1.0
    return (i_w - CONSTRAINT_SLACK) / (i_v + i_w)


def _value_at(pieces, tau: float) -> float:
    a, b = pieces[0], pieces[1]
    return tau * a + (1.0 - tau) * b


def _best_value(pieces, grid: int) -> float:
    """Max over feasible grid ratios; -inf when no grid point is feasible."""
    a, b, i_v, i_w = pieces
    tau_ub = _tau_upper(i_v, i_w)
    lo = 1.0 / grid
    if tau_ub <= lo:
        return -math.inf
    hi = min((grid - 1) / grid, tau_ub)
    return max(_value_at(pieces, lo), _value_at(pieces, hi))


def _refine_tau(pieces, grid: int) -> tuple[float, float]:
    """Grid sweep plus golden-section refinement; returns (value, tau)."""
    a, b, i_v, i_w = pieces
    tau_ub = _tau_upper(i_v, i_w)
    taus = np.arange(1, grid) / grid
    taus = taus[taus <= tau_ub]
    if taus.size == 0:
        return -math.inf, math.nan
    vals = taus * a + (1.0 - taus) * b
    k = int(np.argmax(vals))
    lo = taus[k - 1] if k > 0 else taus[k] / 2
    hi = min(taus[k + 1] if k + 1 < taus.size else taus[k] + 1.0 / grid, tau_ub)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1 = _value_at(pieces, x1)
    f2 = _value_at(pieces, x2)
    for _ in range(60):
        if hi - lo < 1e-13:
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = _value_at(pieces, x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = _value_at(pieces, x1)
    best_tau = x1 if f1 >= f2 else x2
    best_val = max(f1, f2, float(vals[k]))
    if float(vals[k]) >= max(f1, f2):
        best_tau = taus[k]
    return float(best_val), float(best_tau)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, v.size + 1) > 0)[0][-1]
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


_LINE_STEPS = (1.0, 0.25, 0.0625, 0.015625)


def _ascend(value_fn, blocks, max_sweeps: int, tol: float) -> tuple[float, list, int]:
    """Projected coordinate ascent over the simplex blocks."""
    val = value_fn(blocks)
    evals = 1
    if not math.isfinite(val):
        return val, blocks, evals
    h = 1e-6
    stall = 0
    for _ in range(max_sweeps):
        sweep_start = val
        for bi, x in enumerate(blocks):
            if x.size == 1:
                continue
            grad = np.empty(x.size)
            ok = True
            for i in range(x.size):
                xp = x.copy()
                xp[i] += h
                blocks[bi] = xp
                fi = value_fn(blocks)
                evals += 1
                if not math.isfinite(fi):
                    ok = False
                    break
                grad[i] = (fi - val) / h
            blocks[bi] = x
            if not ok:
                continue
            grad -= grad.mean()  # tangent component on the simplex
            gmax = np.max(np.abs(grad))
            if gmax < 1e-14:
                continue
            base = 0.25 / gmax
            for step in _LINE_STEPS:
                cand = _project_simplex(x + base * step * grad)
                blocks[bi] = cand
                v = value_fn(blocks)
                evals += 1
                if math.isfinite(v) and v > val + 1e-15:
                    val = v
                    x = cand
                    break
            else:
                blocks[bi] = x
        gain = val - sweep_start
        if gain < tol:
            stall += 1
            if stall >= 2:
                break
        else:
            stall = 0
    return val, blocks, evals


def _search_direction(evaluator, cfg: SearchConfig, clamp: bool):
    """Multi-start ascent of one direction's objective; deterministic under seed."""
    grid = cfg.tau_grid

    def value_fn(blocks):
        return _best_value(evaluator.pieces(blocks, clamp), grid)

    seeds = np.random.SeedSequence(cfg.seed).spawn(max(cfg.restarts, 1))

    def run(idx: int):
        if idx < 2:
            blocks = evaluator.initial_blocks(None, idx)
        else:
            blocks = evaluator.initial_blocks(np.random.default_rng(seeds[idx]), idx)
        return _ascend(value_fn, blocks, cfg.max_sweeps, cfg.tol)

    indices = range(max(cfg.restarts, 1))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, indices))
    else:
        results = [run(i) for i in indices]
    evals = sum(r[2] for r in results)
    best_idx = max(indices, key=lambda i: (results[i][0], -i))
    best_val, best_blocks, _ = results[best_idx]
    return best_val, best_blocks, evals


def _report_from_blocks(evaluator, blocks, cfg: SearchConfig, clamp: bool,
                        evals: int) -> BoundReport:
    pieces = evaluator.pieces(blocks, clamp)
    value, tau = _refine_tau(pieces, cfg.tau_grid)
    if not math.isfinite(value):
        return BoundReport(value=0.0, ratio=math.nan, argmax=None,
                           constraint_slack=math.nan, feasible=False,
                           restarts=cfg.restarts, evaluations=evals,
                           tolerance=cfg.tol,
                           diagnostic="infeasible: no ratio satisfies the rate "
                                      "constraint for any probed auxiliary system")
    _, _, i_v, i_w = pieces
    slack = float((1.0 - tau) * i_w - tau * i_v)
    diagnostic = None
    if value < 0.0:
        diagnostic = (f"best feasible objective is negative ({value:.6g}); "
                      "reporting the zero-rate floor")
        value = 0.0
    return BoundReport(value=value, ratio=tau, argmax=evaluator.to_aux(blocks),
                       constraint_slack=max(slack, 0.0), feasible=True,
                       restarts=cfg.restarts, evaluations=evals,
                       tolerance=cfg.tol, diagnostic=diagnostic)


def _general_pair(setup: TwoDmbcSetup, cfg: SearchConfig):
    """Run clamped and unclamped searches for both directions, cross-seeding each
    objective with the other's argmax so the clamped value always dominates."""
    out = {}
    for name, first, second in (("a", setup.forward, setup.backward),
                                ("b", setup.backward, setup.forward)):
        ev = _GeneralEvaluator(first, second, cfg)
        val_c, blocks_c, evals_c = _search_direction(ev, cfg, clamp=True)
        val_u, blocks_u, evals_u = _search_direction(ev, cfg, clamp=False)
        # Cross-evaluate: the clamped objective at the unclamped argmax (and
        # vice versa) is always admissible for the other bound.
        grid = cfg.tau_grid
        cross_c = (_best_value(ev.pieces(blocks_u, True), grid)
                   if math.isfinite(val_u) else -math.inf)
        cross_u = (_best_value(ev.pieces(blocks_c, False), grid)
                   if math.isfinite(val_c) else -math.inf)
        pick_c = blocks_c if val_c >= cross_c else blocks_u
        pick_u = blocks_u if val_u >= cross_u else blocks_c
        report_c = _report_from_blocks(ev, pick_c, cfg, True, evals_c) \
            if math.isfinite(max(val_c, cross_c)) else \
            _report_from_blocks(ev, blocks_c, cfg, True, evals_c)
        report_u = _report_from_blocks(ev, pick_u, cfg, False, evals_u) \
            if math.isfinite(max(val_u, cross_u)) else \
            _report_from_blocks(ev, blocks_u, cfg, False, evals_u)
        out[name] = (report_c, report_u)
    clamped = BoundPair(a=out["a"][0], b=out["b"][0])
    unclamped = BoundPair(a=out["a"][1], b=out["b"][1])
    return clamped, unclamped


def lower_bound_and_icc(setup: TwoDmbcSetup,
                        search: SearchConfig | None = None) -> tuple[BoundPair, BoundPair]:
    """Compute the general lower bound and the interactive-coding rate together.

    One call runs both searches per direction and cross-seeds them, which makes
    the ordering ``icc <= lower`` hold structurally (the clamped objective
    pointwise dominates the unclamped one at any probe).
    """
    cfg = search or SearchConfig()
    return _general_pair(setup, cfg)


def lower_bound_general(setup: TwoDmbcSetup,
                        search: SearchConfig | None = None) -> BoundPair:
    """General two-round lower bound (second-round component clamped at zero)."""
    return lower_bound_and_icc(setup, search)[0]


def icc_rate(setup: TwoDmbcSetup, search: SearchConfig | None = None) -> BoundPair:
    """Interactive-coding achievable rate (second-round component unclamped)."""
    return lower_bound_and_icc(setup, search)[1]


def lower_bound_sd(setup: TwoDmbcSetup,
                   search: SearchConfig | None = None) -> BoundPair:
    """Simplified lower bound for stochastically-degraded independent-channel setups."""
    if not is_sd_setup(setup):
        raise NotSdSetupError(
            "not an sd setup: both channels must factor into independent "
            "components and be degradedness-comparable")
    cfg = search or SearchConfig()
    reports = {}
    for name, first, second in (("a", setup.forward, setup.backward),
                                ("b", setup.backward, setup.forward)):
        ev = _SdEvaluator(first, second, cfg)
        val, blocks, evals = _search_direction(ev, cfg, clamp=True)
        reports[name] = _report_from_blocks(ev, blocks, cfg, True, evals)
    return BoundPair(a=reports["a"], b=reports["b"])


def capacity_sd_iid(setup: TwoDmbcSetup,
                    search: SearchConfig | None = None) -> float:
    """Secret-key capacity when one party may only send i.i.d. symbols.

    Equals the combined sd lower bound; valid only on sd setups.
    """
    return lower_bound_sd(setup, search).value


# ---------------------------------------------------------------------------
# Upper bound
# ---------------------------------------------------------------------------

def _cmi_lyz(tensor: np.ndarray, p_x: np.ndarray) -> float:
    """I(X;Y|Z) of a broadcast channel at input law p_x."""
    pxyz = p_x[:, None, None] * tensor
    pxz = pxyz.sum(axis=1)
    pyz = pxyz.sum(axis=0)
    pz = pxz.sum(axis=0)
    return (entropy_bits(pxz) + entropy_bits(pyz)
            - entropy_bits(pz) - entropy_bits(pxyz))


def _maximize_cmi(tensor: np.ndarray, restarts: int, seed: int) -> float:
    nx = tensor.shape[0]
    if nx == 2:
        ps = np.linspace(0.0, 1.0, 1001)
        vals = [_cmi_lyz(tensor, np.array([1.0 - p, p])) for p in ps]
        k = int(np.argmax(vals))
        lo = ps[max(k - 1, 0)]
        hi = ps[min(k + 1, ps.size - 1)]
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        x1, x2 = hi - phi * (hi - lo), lo + phi * (hi - lo)
        f = lambda p: _cmi_lyz(tensor, np.array([1.0 - p, p]))
        f1, f2 = f(x1), f(x2)
        for _ in range(80):
            if f1 < f2:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + phi * (hi - lo)
                f2 = f(x2)
            else:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - phi * (hi - lo)
                f1 = f(x1)
        return max(vals[k], f1, f2)
    best = -math.inf
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    for r in range(restarts):
        if r == 0:
            p = np.full(nx, 1.0 / nx)
        else:
            p = np.random.default_rng(seeds[r]).dirichlet(np.ones(nx))
        blocks = [p]
        val, _, _ = _ascend(lambda bl: _cmi_lyz(tensor, bl[0]), blocks, 200, 1e-10)
        best = max(best, val)
    return best


def upper_bound(setup: TwoDmbcSetup, restarts: int = 8, seed: int = 0) -> float:
    """Conditional-mutual-information upper bound on the secret-key capacity."""
    fwd = _maximize_cmi(setup.forward.tensor, restarts, seed)
    bwd = _maximize_cmi(setup.backward.tensor, restarts, seed + 1)
    return max(fwd, bwd)


# ---------------------------------------------------------------------------
# Integer block planning
# ---------------------------------------------------------------------------

def ratio_planner(h_y1_given_x1: float, i_x2_y2: float, h_x2: float,
                  alpha: float, n_total: int,
                  n_f: int | None = None) -> BlockLengths:
    """Split ``n_total`` channel uses into forward and reply blocks.

    Picks the largest forward length whose quantization-rate load fits the
    reply channel's information rate (or validates a caller-chosen one), then
    sizes the reply's fresh-information part so that exactly the residual
    information budget is spent on it; the remainder becomes the appended
    check part.  Lengths are floored, so the sizing identity holds within one
    symbol.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if n_total < 2:
        raise InfeasiblePlanError(f"need at least 2 channel uses, got {n_total}")
    load = h_y1_given_x1 + alpha

    def feasible(nf: int) -> bool:
        return nf * load <= (n_total - nf) * i_x2_y2

    if n_f is None:
        n_f = 0
        for cand in range(1, n_total):
            if feasible(cand):
                n_f = cand
        if n_f == 0:
            raise InfeasiblePlanError(
                f"no forward length in [1, {n_total - 1}] satisfies "
                f"n_f*({h_y1_given_x1:.6g}+{alpha:.6g}) <= n_b*{i_x2_y2:.6g}")
    elif not (1 <= n_f <= n_total - 1 and feasible(n_f)):
        raise InfeasiblePlanError(
            f"requested n_f={n_f} violates n_f*({load:.6g}) <= n_b*{i_x2_y2:.6g} "
            f"at n_total={n_total}")
    n_b = n_total - n_f
    budget = n_b * i_x2_y2 - n_f * load
    n_b_info = min(int(math.floor(budget / h_x2)) if h_x2 > 0 else 0, n_b)
    return BlockLengths(n_f=n_f, n_b=n_b, n_b_info=n_b_info,
                        n_b_parity=n_b - n_b_info)
