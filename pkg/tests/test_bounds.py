import dataclasses
import math

import numpy as np
import pytest

from skec.bounds import (AuxiliarySystem, BlockLengths, DirectionAux,
                         InfeasiblePlanError, NotSdSetupError, SearchConfig,
                         capacity_sd_iid, degenerate_aux_system,
                         direction_informations,
                         identity_direction_aux, lower_bound_and_icc,
                         lower_bound_general, lower_bound_sd, rate_components,
                         ratio_planner, upper_bound)
from skec.bounds import _GeneralEvaluator, _SdEvaluator
from skec.channels import TwoDmbcSetup, make_bsc_pair
from skec.probability import Alphabet, ConditionalPmf, Pmf

from oracles import binary_entropy as h, bsc_cascade

FAST = SearchConfig(restarts=8, seed=0)


def bsc_setup(pf, qf, pb=None, qb=None):
    pb = pf if pb is None else pb
    qb = qf if qb is None else qb
    return TwoDmbcSetup(make_bsc_pair(pf, qf), make_bsc_pair(pb, qb))


def random_direction_aux(rng, first, second, nv=3, nw1=3, nw2=2):
    ny = first.legit_alphabet.size
    nx2 = second.input_alphabet.size
    return DirectionAux(
        p_x1=Pmf.from_probs(rng.dirichlet(np.ones(first.input_alphabet.size))),
        p_v_given_y1=ConditionalPmf.from_rows(rng.dirichlet(np.ones(nv), size=ny)),
        p_w1=Pmf.from_probs(rng.dirichlet(np.ones(nw1))),
        p_w2_given_w1=ConditionalPmf.from_rows(rng.dirichlet(np.ones(nw2), size=nw1)),
        p_x2_given_w1=ConditionalPmf.from_rows(rng.dirichlet(np.ones(nx2), size=nw1)),
    )


# ---------------------------------------------------------------------------
# rate components
# ---------------------------------------------------------------------------

def test_constant_quantizer_zero_first_component():
    setup = bsc_setup(0.1, 0.3)
    aux_a = dataclasses.replace(
        identity_direction_aux(setup.forward, setup.backward),
        p_v_given_y1=ConditionalPmf.constant(2, 1))
    aux = AuxiliarySystem(a=aux_a,
                          b=identity_direction_aux(setup.backward, setup.forward))
    rc = rate_components(setup, aux)
    assert rc.r_a_s1 == pytest.approx(0.0, abs=1e-12)


def test_second_component_closed_form():
    # Backward crossovers (0.05, 0.25), trivial outer layer, carrier = input:
    # r_a_s2 = h(0.25) - h(0.05).
    setup = bsc_setup(0.1, 0.3, 0.05, 0.25)
    rc = rate_components(setup, degenerate_aux_system(setup))
    assert rc.r_a_s2 == pytest.approx(h(0.25) - h(0.05), abs=1e-12)
    assert abs(rc.r_a_s2 - 0.5249) < 2e-4


def test_first_component_closed_form():
    # Forward crossovers (0.1, 0.3), quantizer = identity:
    # r_a_s1 = I(Y;X) - I(Y;Z) = h(cascade) - h(0.1).
    setup = bsc_setup(0.1, 0.3)
    rc = rate_components(setup, degenerate_aux_system(setup))
    expected = h(bsc_cascade(0.1, 0.3)) - h(0.1)
    assert rc.r_a_s1 == pytest.approx(expected, abs=1e-12)
    assert abs(rc.r_a_s1 - 0.4559) < 2e-4


def test_components_bounded_by_unconditioned_mi():
    rng = np.random.default_rng(0)
    setup = bsc_setup(0.1, 0.3)
    for _ in range(10):
        aux = AuxiliarySystem(
            a=random_direction_aux(rng, setup.forward, setup.backward),
            b=random_direction_aux(rng, setup.backward, setup.forward))
        rc = rate_components(setup, aux)
        ia = direction_informations(setup.forward, setup.backward, aux.a)
        ib = direction_informations(setup.backward, setup.forward, aux.b)
        assert rc.r_a_s1 <= ia.i_v_x1 + 1e-12
        assert rc.r_a_s2 <= ia.i_w1_y2_given_w2 + 1e-12
        assert rc.r_b_s1 <= ib.i_v_x1 + 1e-12
        assert rc.r_b_s2 <= ib.i_w1_y2_given_w2 + 1e-12


def test_alphabet_mismatch_rejected():
    setup = bsc_setup(0.1, 0.3)
    bad = dataclasses.replace(identity_direction_aux(setup.forward, setup.backward),
                              p_x1=Pmf.uniform(3))
    with pytest.raises(Exception):
        direction_informations(setup.forward, setup.backward, bad)


def test_fast_evaluator_matches_clean_path():
    rng = np.random.default_rng(1)
    setup = bsc_setup(0.07, 0.22, 0.14, 0.33)
    ev = _GeneralEvaluator(setup.forward, setup.backward,
                           SearchConfig(v_card=3, w1_card=3, w2_card=2))
    for _ in range(10):
        aux = random_direction_aux(rng, setup.forward, setup.backward)
        blocks = ([np.array(aux.p_x1.probs)]
                  + [np.array(r) for r in aux.p_v_given_y1.rows]
                  + [np.array(aux.p_w1.probs)]
                  + [np.array(r) for r in aux.p_w2_given_w1.rows]
                  + [np.array(r) for r in aux.p_x2_given_w1.rows])
        r_s1, i_v, r_s2, i_w = ev.informations(blocks)
        infos = direction_informations(setup.forward, setup.backward, aux)
        assert r_s1 == pytest.approx(infos.r_s1, abs=1e-12)
        assert r_s2 == pytest.approx(infos.r_s2, abs=1e-12)
        assert i_v == pytest.approx(infos.i_v_y1_given_x1, abs=1e-12)
        assert i_w == pytest.approx(infos.i_w1_y2, abs=1e-12)


# ---------------------------------------------------------------------------
# lower bound and icc rate
# ---------------------------------------------------------------------------

def test_pure_noise_legit_channels_infeasible_zero():
    report = lower_bound_general(bsc_setup(0.5, 0.3), FAST)
    assert report.value == 0.0
    assert not report.a.feasible and "infeasible" in report.a.diagnostic


def test_lower_bound_dominates_plugin():
    setup = bsc_setup(0.1, 0.3)
    lower = lower_bound_general(setup, FAST)
    tau = 1.0 - h(0.1)  # constraint-tight ratio for the plug-in system
    plug = (tau * (h(bsc_cascade(0.1, 0.3)) - h(0.1))
            + (1.0 - tau) * (h(0.3) - h(0.1)))
    assert lower.value >= plug - 1e-6


def test_eve_noiseless_gives_zero():
    lower, icc = lower_bound_and_icc(bsc_setup(0.1, 0.0), FAST)
    assert lower.value <= 1e-9
    assert icc.value <= 1e-9


def test_icc_never_exceeds_clamped_bound():
    rng = np.random.default_rng(2)
    for _ in range(4):
        ps = rng.uniform(0.0, 0.45, size=4)
        setup = bsc_setup(*ps)
        lower, icc = lower_bound_and_icc(setup, SearchConfig(restarts=4, seed=3))
        assert icc.value <= lower.value + 1e-9
        assert icc.a.value <= lower.a.value + 1e-9
        assert icc.b.value <= lower.b.value + 1e-9


def test_icc_equals_clamped_when_second_round_has_secrecy():
    # Eve strictly noisier in both directions: the optimal second-round
    # component is nonnegative, so clamping changes nothing.
    lower, icc = lower_bound_and_icc(bsc_setup(0.05, 0.25), SearchConfig(seed=4))
    assert abs(icc.value - lower.value) <= 1e-3


def test_icc_falls_below_clamp_with_forced_nontrivial_carrier():
    # Backward eve less noisy: at the plug-in system (carrier = full input)
    # the unclamped objective pays the negative second-round component.
    setup = TwoDmbcSetup(make_bsc_pair(0.1, 0.3), make_bsc_pair(0.3, 0.05))
    infos = direction_informations(setup.forward, setup.backward,
                                   identity_direction_aux(setup.forward,
                                                          setup.backward))
    assert infos.r_s2 < -0.1
    tau_ub = infos.i_w1_y2 / (infos.i_v_y1_given_x1 + infos.i_w1_y2)
    clamped = tau_ub * infos.r_s1
    unclamped = tau_ub * infos.r_s1 + (1 - tau_ub) * infos.r_s2
    assert unclamped < clamped - 0.1


def test_reports_reproducible_under_seed():
    setup = bsc_setup(0.1, 0.2)
    r1 = lower_bound_general(setup, SearchConfig(restarts=4, seed=11))
    r2 = lower_bound_general(setup, SearchConfig(restarts=4, seed=11))
    assert r1.a.value == r2.a.value and r1.a.ratio == r2.a.ratio
    assert r1.b.value == r2.b.value
    np.testing.assert_array_equal(r1.a.argmax.p_x1.probs, r2.a.argmax.p_x1.probs)


def test_report_invariants():
    lower = lower_bound_general(bsc_setup(0.1, 0.3), FAST)
    for rep in (lower.a, lower.b):
        assert rep.value >= 0.0
        assert rep.constraint_slack >= 0.0
        assert rep.restarts == FAST.restarts


def test_workers_do_not_change_results():
    setup = bsc_setup(0.12, 0.28)
    a = lower_bound_general(setup, SearchConfig(restarts=4, seed=5, workers=1))
    b = lower_bound_general(setup, SearchConfig(restarts=4, seed=5, workers=4))
    assert a.a.value == b.a.value and a.b.value == b.b.value


# ---------------------------------------------------------------------------
# sd lower bound, capacity, upper bound
# ---------------------------------------------------------------------------

def test_sd_bound_rejects_non_sd_setup():
    rows = np.zeros((2, 2, 2))
    noisy = ConditionalPmf.bsc(0.2)
    for x in range(2):
        for y in range(2):
            rows[x, y, y] = noisy.table[x, y]
    from skec.channels import Dmbc

    degraded = Dmbc(ConditionalPmf(Alphabet(2), (Alphabet(2), Alphabet(2)), rows))
    with pytest.raises(NotSdSetupError):
        lower_bound_sd(TwoDmbcSetup(degraded, make_bsc_pair(0.1, 0.3)), FAST)


def test_sd_pure_noise_legit_zero():
    report = lower_bound_sd(bsc_setup(0.5, 0.3), FAST)
    assert report.value == 0.0


def test_sd_matches_general_when_eve_pure_noise():
    setup = bsc_setup(0.1, 0.5)
    sd = lower_bound_sd(setup, SearchConfig(restarts=16, seed=6))
    general = lower_bound_general(setup, SearchConfig(restarts=16, seed=6))
    assert abs(sd.value - general.value) <= 1e-3


def test_sd_dominates_plugin():
    sd = lower_bound_sd(bsc_setup(0.1, 0.3), FAST)
    tau = 1.0 - h(0.1)
    plug = (tau * (h(bsc_cascade(0.1, 0.3)) - h(0.1))
            + (1.0 - tau) * (h(0.3) - h(0.1)))
    assert sd.a.value >= plug - 1e-6


def test_sd_first_component_identity():
    # On independent-component channels the first component evaluated as a
    # difference of mutual informations equals its conditional form exactly.
    rng = np.random.default_rng(7)
    setup = bsc_setup(0.1, 0.3)
    ev = _SdEvaluator(setup.forward, setup.backward, SearchConfig(v_card=3))
    for _ in range(20):
        aux = random_direction_aux(rng, setup.forward, setup.backward, nv=3)
        infos = direction_informations(setup.forward, setup.backward, aux)
        blocks = ([np.array(aux.p_x1.probs)]
                  + [np.array(r) for r in aux.p_v_given_y1.rows]
                  + [np.array(aux.induced_p_x2.probs)])
        i_v_x_given_z = ev.pieces(blocks)[0]
        assert infos.r_s1 == pytest.approx(i_v_x_given_z, abs=1e-10)


def test_capacity_sd_iid_symmetric_directions():
    sd = lower_bound_sd(bsc_setup(0.1, 0.3), SearchConfig(restarts=16, seed=8))
    assert abs(sd.a.value - sd.b.value) <= 1e-3
    assert capacity_sd_iid(bsc_setup(0.1, 0.3),
                           SearchConfig(restarts=16, seed=8)) == sd.value


def test_upper_bound_noiseless_everyone_zero():
    assert upper_bound(bsc_setup(0.0, 0.0)) == pytest.approx(0.0, abs=1e-9)


def test_upper_bound_closed_form():
    got = upper_bound(bsc_setup(0.1, 0.3, 0.2, 0.3))
    assert got == pytest.approx(h(bsc_cascade(0.1, 0.3)) - h(0.1), abs=1e-9)


def test_upper_bound_uniform_optimum_confirmed_by_grid():
    tensor = make_bsc_pair(0.1, 0.3).tensor
    from skec.bounds import _cmi_lyz

    vals = [_cmi_lyz(tensor, np.array([1 - p, p]))
            for p in np.linspace(0.001, 0.999, 999)]
    assert max(vals) <= _cmi_lyz(tensor, np.array([0.5, 0.5])) + 1e-9


def test_order_lower_le_upper_small_grid():
    for pl, pe in [(0.0, 0.2), (0.1, 0.1), (0.2, 0.05)]:
        setup = bsc_setup(pl, pe)
        lower = lower_bound_general(setup, SearchConfig(restarts=4, seed=9))
        assert lower.value <= upper_bound(setup) + 1e-6


def test_degrading_eve_never_raises_components():
    rng = np.random.default_rng(10)
    base = bsc_setup(0.1, 0.2)
    aux = AuxiliarySystem(
        a=random_direction_aux(rng, base.forward, base.backward),
        b=random_direction_aux(rng, base.backward, base.forward))
    rc = rate_components(base, aux)
    for extra in (0.05, 0.15, 0.3):
        worse = bsc_setup(0.1, bsc_cascade(0.2, extra))
        rc2 = rate_components(worse, aux)
        assert rc2.r_a_s1 >= rc.r_a_s1 - 1e-10
        assert rc2.r_a_s2 >= rc.r_a_s2 - 1e-10
        assert rc2.r_b_s1 >= rc.r_b_s1 - 1e-10
        assert rc2.r_b_s2 >= rc.r_b_s2 - 1e-10


# ---------------------------------------------------------------------------
# block planner
# ---------------------------------------------------------------------------

def test_ratio_planner_noiseless_arithmetic():
    # h = 0, i = 1, alpha = 0.05: info part is n_b minus ceil(n_f * alpha).
    bl = ratio_planner(0.0, 1.0, 1.0, 0.05, 8, n_f=6)
    assert bl == BlockLengths(n_f=6, n_b=2, n_b_info=1, n_b_parity=1)
    assert bl.n_b_info == bl.n_b - math.ceil(6 * 0.05)


def test_ratio_planner_zero_reply_capacity_infeasible():
    with pytest.raises(InfeasiblePlanError):
        ratio_planner(0.5, 0.0, 1.0, 0.05, 16)


def test_ratio_planner_identity_within_one_symbol():
    h_y, i_xy, h_x = h(0.1), 1 - h(0.1), 1.0
    bl = ratio_planner(h_y, i_xy, h_x, 0.05, 32)
    budget = bl.n_b * i_xy - bl.n_f * (h_y + 0.05)
    assert budget >= 0.0
    assert bl.n_b_info * h_x <= budget < (bl.n_b_info + 1) * h_x
    assert bl.n_b == bl.n_b_info + bl.n_b_parity
    # tight: one more forward use would violate the constraint
    assert (bl.n_f + 1) * (h_y + 0.05) > (32 - bl.n_f - 1) * i_xy
