import math

import numpy as np
import pytest

from skec.probability import (Alphabet, ConditionalPmf, JointPmf, Pmf,
                              ProbabilityError, compose_markov,
                              conditional_mutual_information, entropy,
                              marginalize, mutual_information, push_through)

from oracles import (binary_entropy, bsc_cascade, conditional_mi_cells,
                     entropy_cells, marginal_cells, mutual_information_cells,
                     product_joint_loops)

# Frozen closed-form values (binary entropy evaluated independently).
H_011 = binary_entropy(0.11)   # 0.4999159582...
H_030 = binary_entropy(0.30)


def random_joint(rng, sizes):
    t = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    return JointPmf(tuple(Alphabet(s) for s in sizes), t)


def test_entropy_uniform_binary():
    assert entropy(Pmf.uniform(2)) == pytest.approx(1.0, abs=1e-12)


def test_entropy_point_mass():
    assert entropy(Pmf.point_mass(4, 2)) == 0.0


def test_entropy_bernoulli_011():
    # h(0.11) ~ 0.49993 bits
    assert entropy(Pmf.bernoulli(0.11)) == pytest.approx(H_011, abs=1e-12)
    assert abs(entropy(Pmf.bernoulli(0.11)) - 0.49993) < 2e-5


def test_entropy_bounds_and_equality_cases():
    rng = np.random.default_rng(0)
    for _ in range(50):
        size = int(rng.integers(2, 6))
        p = Pmf.from_probs(rng.dirichlet(np.ones(size)))
        h = p.entropy()
        assert -1e-12 <= h <= math.log2(size) + 1e-12
    assert Pmf.uniform(8).entropy() == pytest.approx(3.0, abs=1e-12)


def test_mutual_information_identity_channel():
    j = compose_markov([Pmf.uniform(2), ConditionalPmf.identity(2)], [(), (0,)])
    assert mutual_information(j, (0, 1)) == pytest.approx(1.0, abs=1e-12)


def test_mutual_information_independent():
    x = Pmf.uniform(2)
    y = Pmf.from_probs([0.3, 0.7])
    j = JointPmf((Alphabet(2), Alphabet(2)), np.outer(x.probs, y.probs))
    assert mutual_information(j, (0, 1)) == pytest.approx(0.0, abs=1e-12)


def test_mutual_information_bsc_011():
    j = compose_markov([Pmf.uniform(2), ConditionalPmf.bsc(0.11)], [(), (0,)])
    got = mutual_information(j, (0, 1))
    assert got == pytest.approx(1.0 - H_011, abs=1e-12)
    assert abs(got - 0.50007) < 2e-5


def test_mutual_information_symmetric_in_indices():
    rng = np.random.default_rng(1)
    j = random_joint(rng, (3, 4))
    assert mutual_information(j, (0, 1)) == pytest.approx(
        mutual_information(j, (1, 0)), abs=1e-12)


def test_mi_index_out_of_range():
    j = random_joint(np.random.default_rng(2), (2, 2))
    with pytest.raises(ProbabilityError):
        mutual_information(j, (0, 2))
    with pytest.raises(ProbabilityError):
        conditional_mutual_information(j, 0, 1, 5)


def test_cmi_eve_sees_bob_exactly():
    # Z == Y: conditioning on Z determines Y, so I(X;Y|Z) = 0.
    x = Pmf.uniform(2)
    chan = ConditionalPmf.bsc(0.2)
    probs = np.zeros((2, 2, 2))
    for xx in range(2):
        for yy in range(2):
            probs[xx, yy, yy] = x.probs[xx] * chan.table[xx, yy]
    j = JointPmf((Alphabet(2),) * 3, probs)
    assert conditional_mutual_information(j, 0, 1, 2) == pytest.approx(0.0, abs=1e-12)


def test_cmi_independent_crossovers_closed_form():
    # X uniform; Y, Z through independent crossovers 0.1, 0.3:
    # I(X;Y|Z) = h(cascade) - h(0.1), cross-checked against the cell oracle.
    x = Pmf.uniform(2)
    cy, cz = ConditionalPmf.bsc(0.1), ConditionalPmf.bsc(0.3)
    probs = np.einsum("x,xy,xz->xyz", x.probs, cy.table, cz.table)
    j = JointPmf((Alphabet(2),) * 3, probs)
    got = conditional_mutual_information(j, 0, 1, 2)
    closed = binary_entropy(bsc_cascade(0.1, 0.3)) - binary_entropy(0.1)
    assert got == pytest.approx(closed, abs=1e-12)
    assert abs(got - 0.4559) < 2e-4
    oracle = conditional_mi_cells(probs.transpose(0, 1, 2))
    assert got == pytest.approx(oracle, abs=1e-10)


def test_cmi_independent_conditioner_reduces_to_mi():
    rng = np.random.default_rng(3)
    ab = rng.dirichlet(np.ones(6)).reshape(2, 3)
    c = rng.dirichlet(np.ones(2))
    probs = ab[:, :, None] * c[None, None, :]
    j = JointPmf((Alphabet(2), Alphabet(3), Alphabet(2)), probs)
    assert conditional_mutual_information(j, 0, 1, 2) == pytest.approx(
        mutual_information(j, (0, 1)), abs=1e-12)


def test_compose_markov_identity_diagonal():
    p = Pmf.from_probs([0.25, 0.75])
    j = compose_markov([p, ConditionalPmf.identity(2)], [(), (0,)])
    assert j.probs[0, 0] == pytest.approx(0.25)
    assert j.probs[1, 1] == pytest.approx(0.75)
    assert j.probs[0, 1] == 0.0 and j.probs[1, 0] == 0.0


def test_compose_markov_doubly_stochastic_uniform_marginals():
    j = compose_markov(
        [Pmf.uniform(2), ConditionalPmf.bsc(0.2), ConditionalPmf.bsc(0.35)],
        [(), (0,), (1,)])
    for var in range(3):
        np.testing.assert_allclose(j.pmf(var).probs, [0.5, 0.5], atol=1e-12)


def test_compose_markov_five_variable_chain_against_loop_oracle():
    # W2 <- W1 -> X -> (Y, Z) on binary alphabets with stated crossovers.
    p_w1 = Pmf.from_probs([0.6, 0.4])
    q_w2 = ConditionalPmf.bsc(0.15)
    q_x = ConditionalPmf.bsc(0.25)
    chan = ConditionalPmf(Alphabet(2), (Alphabet(2), Alphabet(2)),
                          np.einsum("xy,xz->xyz", ConditionalPmf.bsc(0.1).table,
                                    ConditionalPmf.bsc(0.3).table))
    j = compose_markov([p_w1, q_w2, q_x, chan], [(), (0,), (0,), (2,)])
    oracle = product_joint_loops(
        [p_w1.probs.tolist(), q_w2.table.tolist(), q_x.table.tolist(),
         chan.table.tolist()],
        [(), (0,), (0,), (2,)], (2, 2, 2, 2, 2))
    for assignment, expected in oracle.items():
        assert j.probs[assignment] == pytest.approx(expected, abs=1e-14)


def test_compose_markov_rejects_bad_wiring():
    p = Pmf.uniform(2)
    chan = ConditionalPmf.bsc(0.1)
    with pytest.raises(ProbabilityError):
        compose_markov([p, chan], [(), (1,)])     # parent not yet introduced
    with pytest.raises(ProbabilityError):
        compose_markov([p, ConditionalPmf.identity(3)], [(), (0,)])  # size mismatch


def test_marginalize_recovers_product_factor():
    a = Pmf.from_probs([0.2, 0.8])
    b = Pmf.from_probs([0.5, 0.3, 0.2])
    j = JointPmf((Alphabet(2), Alphabet(3)), np.outer(a.probs, b.probs))
    np.testing.assert_allclose(marginalize(j, [0]).probs, a.probs, atol=1e-14)
    np.testing.assert_allclose(marginalize(j, [1]).probs, b.probs, atol=1e-14)


def test_marginalize_keep_all_is_identity():
    j = random_joint(np.random.default_rng(4), (2, 3))
    np.testing.assert_array_equal(marginalize(j, [0, 1]).probs, j.probs)


def test_marginalize_three_to_pair_matches_hand_enumeration():
    j = random_joint(np.random.default_rng(5), (2, 3, 2))
    got = marginalize(j, [0, 2]).probs
    expected = marginal_cells(j.probs, (0, 2))
    np.testing.assert_allclose(got, expected, atol=1e-14)
    with pytest.raises(ProbabilityError):
        marginalize(j, [])


def test_chain_rule_on_random_joints():
    rng = np.random.default_rng(6)
    for _ in range(30):
        j = random_joint(rng, (int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        h_ab = j.entropy()
        h_a = j.entropy([0])
        h_b_given_a = j.entropy([0, 1]) - j.entropy([0])
        assert h_ab == pytest.approx(h_a + h_b_given_a, abs=1e-10)


def test_data_processing_on_markov_chain():
    rng = np.random.default_rng(7)
    for _ in range(25):
        p_x = Pmf.from_probs(rng.dirichlet(np.ones(2)))
        chan1 = ConditionalPmf.from_rows(rng.dirichlet(np.ones(3), size=2))
        chan2 = ConditionalPmf.from_rows(rng.dirichlet(np.ones(2), size=3))
        j = compose_markov([p_x, chan1, chan2], [(), (0,), (1,)])
        assert mutual_information(j, (2, 0)) <= mutual_information(j, (1, 0)) + 1e-10


def test_degrading_eve_never_helps():
    rng = np.random.default_rng(8)
    for _ in range(25):
        p_v_z = random_joint(rng, (3, 2))  # (V, Z)
        extra = ConditionalPmf.from_rows(rng.dirichlet(np.ones(2), size=2))
        degraded = p_v_z.probs @ extra.rows
        j2 = JointPmf((Alphabet(3), Alphabet(2)), degraded)
        assert mutual_information(j2, (0, 1)) <= \
            mutual_information(p_v_z, (0, 1)) + 1e-10


def test_measures_match_cell_oracle():
    rng = np.random.default_rng(9)
    for _ in range(40):
        j2 = random_joint(rng, (int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        assert entropy(j2) == pytest.approx(entropy_cells(j2.probs), abs=1e-9)
        assert mutual_information(j2, (0, 1)) == pytest.approx(
            mutual_information_cells(j2.probs), abs=1e-9)
        j3 = random_joint(rng, (2, 3, 2))
        assert conditional_mutual_information(j3, 0, 1, 2) == pytest.approx(
            conditional_mi_cells(j3.probs), abs=1e-9)


def test_constructor_mass_policy():
    drifted = np.array([0.5, 0.5 + 5e-10])
    p = Pmf.from_probs(drifted)  # renormalized silently
    assert abs(p.probs.sum() - 1.0) < 1e-12
    with pytest.raises(ProbabilityError):
        Pmf.from_probs([0.5, 0.6])  # drift above 1e-9
    with pytest.raises(ProbabilityError):
        Pmf.from_probs([1.2, -0.2])


def test_alphabet_labels_validated():
    with pytest.raises(ProbabilityError):
        Alphabet(2, labels=("a", "a"))
    assert Alphabet(2, labels=("a", "b")).label(1) == "b"
    with pytest.raises(ProbabilityError):
        Alphabet(0)


def test_push_through_marginal():
    p = Pmf.from_probs([0.3, 0.7])
    chan = ConditionalPmf.bsc(0.1)
    out = push_through(p, chan)
    np.testing.assert_allclose(out.probs, [0.3 * 0.9 + 0.7 * 0.1,
                                           0.3 * 0.1 + 0.7 * 0.9], atol=1e-14)
