import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from therbligs.core import NULL_TUPLE, ObjectVocabulary, TherbligTuple, Verb, validate_sequence
from therbligs.losses import (
    BETA,
    DELTA,
    GAMMA,
    LossInstance,
    NonDifferentiableError,
    combined_rule_loss,
    contact_vector,
    derive_states,
    finite_diff_check,
    grad_rule_loss,
    gumbel_softmax,
    loss_C,
    loss_EC,
    loss_NC,
    one_hot_step,
    standard_gumbel,
    step_dim,
)

from conftest import all_states, all_tuples


def tt(verb, obj=None):
    return TherbligTuple(verb, obj)


def one_hots(seq, n):
    return [one_hot_step(t, n) for t in seq]


class TestEffectVectors:
    def test_beta_gamma_delta(self):
        # verb order (Re, M, G, R, U, O, H)
        assert BETA.tolist() == [0, 0, 1, -1, 0, 0, 0]
        assert GAMMA.tolist() == [-1, 0, -1, 0, 0, 0, 0]
        assert DELTA.tolist() == [0, 1, 0, 1, 1, 1, 0]


class TestGumbelSoftmax:
    def test_argmax_limit(self):
        y = gumbel_softmax([2.0, 1.0, 0.0], 1e-6, [0.0, 0.0, 0.0])
        assert np.allclose(y, [1, 0, 0], atol=1e-9)

    def test_symmetry(self):
        y = gumbel_softmax([0.0, 0.0, 0.0], 1.0, [0.0, 0.0, 0.0])
        assert np.allclose(y, [1 / 3] * 3)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            gumbel_softmax([0.0], 0.0, [0.0])
        with pytest.raises(ValueError):
            gumbel_softmax([np.inf], 1.0, [0.0])
        with pytest.raises(ValueError):
            gumbel_softmax([0.0, 1.0], 1.0, [0.0])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.integers(0, 10**6))
    def test_simplex_preservation(self, logits, seed):
        rng = np.random.default_rng(seed)
        noise = standard_gumbel(rng, len(logits))
        y = gumbel_softmax(logits, 1.0, noise)
        assert np.all(y >= 0)
        assert abs(y.sum() - 1.0) <= 1e-9

    def test_gumbel_max_law(self):
        # argmax frequency of index 0 for logits [1, 0] is e/(e+1)
        rng = np.random.default_rng(42)
        logits = np.array([1.0, 0.0])
        draws = 100_000
        noise = standard_gumbel(rng, (draws, 2))
        freq = np.mean(np.argmax(logits + noise, axis=1) == 0)
        p = math.e / (math.e + 1)
        sigma = math.sqrt(p * (1 - p) / draws)
        assert abs(freq - p) <= 4 * sigma


class TestDeriveStates:
    def test_grasp_adds(self):
        states = derive_states(np.zeros(2), one_hots([tt(Verb.GRASP, 0)], 2))
        assert np.allclose(states[1], [1, 0])

    def test_release_subtracts(self):
        states = derive_states(np.array([1.0, 0.0]), one_hots([tt(Verb.RELEASE, 0)], 2))
        assert np.allclose(states[1], [0, 0])

    def test_half_mass_grasp(self):
        n = 2
        p = 0.5 * one_hot_step(tt(Verb.GRASP, 0), n) + 0.5 * one_hot_step(NULL_TUPLE, n)
        states = derive_states(np.zeros(n), [p])
        assert np.allclose(states[1], [0.5, 0])

    @given(st.integers(0, 10**6))
    @settings(max_examples=25)
    def test_linearity_in_each_step(self, seed):
        rng = np.random.default_rng(seed)
        n = 3
        d = step_dim(n)
        c0 = rng.random(n)
        p1, p2 = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
        lam = rng.random()
        mixed = derive_states(c0, [lam * p1 + (1 - lam) * p2])[-1]
        blend = lam * derive_states(c0, [p1])[-1] + (1 - lam) * derive_states(c0, [p2])[-1]
        assert np.allclose(mixed, blend)


class TestLossExamples:
    def test_loss_c_grasp_reaches_goal(self):
        n = 3
        c0, c1 = np.zeros(n), contact_vector({0}, n)
        steps = one_hots([tt(Verb.GRASP, 0)], n)
        assert loss_C(c0, c1, steps, "corrected") == 0.0
        assert loss_C(c0, c1, steps, "literal") == 0.0

    def test_loss_c_reach_misses_goal(self):
        n = 3
        c0, c1 = np.zeros(n), contact_vector({0}, n)
        steps = one_hots([tt(Verb.REACH, 0)], n)
        assert loss_C(c0, c1, steps, "corrected", "l1") == 1.0

    def test_loss_c_empty(self):
        assert loss_C(np.zeros(2), np.zeros(2), []) == 0.0

    def test_loss_ec_examples(self):
        n = 3
        held = contact_vector({0}, n)
        assert loss_EC(held, one_hots([tt(Verb.GRASP, 0)], n)) == 1.0
        assert loss_EC(np.zeros(n), one_hots([tt(Verb.REACH, 0)], n)) == 0.0
        assert loss_EC(held, one_hots([tt(Verb.MOVE, 0)], n)) == 0.0

    def test_loss_nc_examples(self):
        n = 3
        assert loss_NC(np.zeros(n), one_hots([tt(Verb.MOVE, 2)], n)) == 1.0
        assert loss_NC(contact_vector({2}, n), one_hots([tt(Verb.USE, 2)], n)) == 0.0
        assert loss_NC(np.zeros(n), one_hots([NULL_TUPLE], n)) == 0.0

    def test_combined_consistent_sequence(self):
        n = 3
        seq = [tt(Verb.REACH, 0), tt(Verb.GRASP, 0), tt(Verb.MOVE, 0), tt(Verb.RELEASE, 0)]
        report = combined_rule_loss(np.zeros(n), np.zeros(n), one_hots(seq, n))
        assert (report.l_c, report.l_ec, report.l_nc, report.total) == (0, 0, 0, 0)

    def test_combined_double_grasp(self):
        # grasping an already-held object: Rule 2 fires, Rule 1 does not
        # (contact sets saturate, so corrected L_C stays zero)
        n = 3
        held = contact_vector({0}, n)
        report = combined_rule_loss(held, held, one_hots([tt(Verb.GRASP, 0)], n))
        assert (report.l_c, report.l_ec, report.l_nc) == (0.0, 1.0, 0.0)
        assert report.total == 1.0

    def test_literal_penalizes_valid_reach(self):
        # the printed form charges |0 - (-1)| = 1 for a legal reach
        n = 2
        assert loss_EC(np.zeros(n), one_hots([tt(Verb.REACH, 0)], n), "literal", "l1") == 1.0


class TestDiscreteBridge:
    @pytest.mark.parametrize("n_objects,max_len", [(2, 2), (3, 2)])
    def test_components_match_rules(self, n_objects, max_len):
        vocab = ObjectVocabulary.generic(n_objects)
        alphabet = all_tuples(n_objects, include_null=False)
        for c_start in all_states(n_objects):
            c0 = contact_vector(c_start, n_objects)
            for length in range(max_len + 1):
                for seq in itertools.product(alphabet, repeat=length):
                    for c_end in all_states(n_objects):
                        report = validate_sequence(
                            c_start, seq, c_end, strict_hold=False, n_max=max_len
                        )
                        rules = {v.rule for v in report.violations}
                        c1 = contact_vector(c_end, n_objects)
                        steps = one_hots(seq, n_objects)
                        assert (loss_C(c0, c1, steps) == 0) == (1 not in rules)
                        assert (loss_EC(c0, steps) == 0) == (2 not in rules)
                        assert (loss_NC(c0, steps) == 0) == (3 not in rules)


class TestGradients:
    def _random_instance(self, seed, n=3, K=3, tau=1.0):
        rng = np.random.default_rng(seed)
        d = step_dim(n)
        logits = rng.normal(size=(K, d))
        noise = standard_gumbel(rng, (K, d))
        c0 = rng.integers(0, 2, n).astype(float)
        c1 = rng.integers(0, 2, n).astype(float)
        return logits, c0, c1, tau, noise

    @pytest.mark.parametrize("mode,norm", [
        ("corrected", "l1"), ("corrected", "l2"), ("literal", "l2"), ("literal", "l1"),
    ])
    def test_finite_difference_agreement(self, mode, norm):
        logits, c0, c1, tau, noise = self._random_instance(7)
        err = finite_diff_check(logits, c0, c1, tau, noise, mode, norm)
        assert err <= 1e-4

    def test_empty_sequence_has_empty_gradient(self):
        logits = np.zeros((0, step_dim(2)))
        err = finite_diff_check(logits, np.zeros(2), np.zeros(2), 1.0, logits)
        assert err == 0.0

    def test_sharp_temperature(self):
        # at tau = 0.1 the probabilities saturate quickly, so the perturbed
        # logits are kept moderate and h is raised to beat FD cancellation
        rng = np.random.default_rng(11)
        n, K = 3, 3
        d = step_dim(n)
        logits = 0.1 * rng.normal(size=(K, d))
        noise = 0.1 * standard_gumbel(rng, (K, d))
        c0 = rng.integers(0, 2, n).astype(float)
        c1 = rng.integers(0, 2, n).astype(float)
        err = finite_diff_check(logits, c0, c1, 0.1, noise, h=1e-4)
        assert err <= 1e-3

    def test_symmetry_equal_gradients(self):
        # uniform logits and a setup symmetric under swapping objects 0 and 1
        n, K = 2, 1
        logits = np.zeros((K, step_dim(n)))
        noise = np.zeros_like(logits)
        g = grad_rule_loss(logits, np.zeros(n), np.zeros(n), 1.0, noise)
        mat = g[0, :-1].reshape(n, 7)
        assert np.allclose(mat[0], mat[1])

    def test_literal_l1_refuses_kinks(self):
        n = 2
        logits = np.zeros((1, step_dim(n)))
        noise = np.zeros_like(logits)
        # uniform probabilities from a held state put a zero residual entry
        with pytest.raises(NonDifferentiableError):
            grad_rule_loss(logits, contact_vector({0}, n), contact_vector({0}, n),
                           1.0, noise, mode="literal", norm="l1")

    def test_minimum_has_no_feasible_descent(self):
        # hard one-hot steps at a consistent sequence sit at the corrected
        # loss minimum: no simplex-feasible direction decreases any component
        n = 2
        seq = [tt(Verb.GRASP, 0), tt(Verb.RELEASE, 0)]
        probs = np.stack([one_hot_step(t, n) for t in seq])
        c0 = np.zeros(n)
        base = combined_rule_loss(c0, c0, probs)
        assert base.total == 0.0
        rng = np.random.default_rng(3)
        eps = 1e-6
        for _ in range(30):
            # mix toward a random simplex point: stays feasible for small eps
            target = np.stack([rng.dirichlet(np.ones(probs.shape[1])) for _ in seq])
            moved = combined_rule_loss(c0, c0, (1 - eps) * probs + eps * target)
            assert moved.l_c >= -1e-12
            assert moved.l_ec >= -1e-12
            assert moved.l_nc >= -1e-12
            assert moved.total >= base.total - 1e-12

    def test_gradcheck_rejects_bad_h(self):
        logits, c0, c1, tau, noise = self._random_instance(5)
        with pytest.raises(ValueError):
            finite_diff_check(logits, c0, c1, tau, noise, h=1.0)


class TestLossInstanceJson:
    def test_roundtrip(self, kitchen):
        rng = np.random.default_rng(0)
        d = step_dim(len(kitchen))
        inst = LossInstance(
            vocab=kitchen,
            c_start=contact_vector({0}, 3),
            c_end=np.zeros(3),
            logits=rng.normal(size=(2, d)),
            tau=0.7,
            noise=standard_gumbel(rng, (2, d)),
            mode="corrected",
            norm="l2",
        )
        back = LossInstance.from_json(inst.to_json())
        assert back.loss().to_dict() == inst.loss().to_dict()
        assert np.allclose(back.grad(), inst.grad())

    def test_contact_names_accepted(self, kitchen):
        doc = {
            "vocab": list(kitchen.names),
            "c_start": ["knife"],
            "c_end": [],
            "logits": [[0.0] * step_dim(3)],
        }
        import json

        inst = LossInstance.from_json(json.dumps(doc))
        assert inst.c_start.tolist() == [1, 0, 0]
        assert inst.mode == "corrected"
