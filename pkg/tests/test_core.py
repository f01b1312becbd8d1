import itertools

import pytest
from hypothesis import given, strategies as st

from therbligs.core import (
    HandContact,
    NULL_TUPLE,
    ObjectVocabulary,
    SequenceError,
    TherbligTuple,
    Verb,
    VocabularyError,
    apply_tuple,
    candidate_tuples,
    candidate_tuples_with_goal,
    check_sequence,
    format_contacts,
    format_sequence,
    format_tuple,
    hand_to_set,
    pad_sequence,
    parse_contacts,
    parse_sequence,
    parse_tuple,
    step_violations,
    strip_padding,
    validate_sequence,
)

from conftest import all_states, all_tuples


def tt(verb, obj=None):
    return TherbligTuple(verb, obj)


class TestVocabulary:
    def test_bijection(self, kitchen):
        assert len(kitchen) == 3
        for i, name in enumerate(kitchen):
            assert kitchen.index(name) == i
            assert kitchen.name(i) == name

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(VocabularyError):
            ObjectVocabulary(["a", "a"])
        with pytest.raises(VocabularyError):
            ObjectVocabulary([])
        with pytest.raises(VocabularyError):
            ObjectVocabulary(["a", ""])

    def test_unknown_lookups(self, kitchen):
        with pytest.raises(VocabularyError):
            kitchen.index("fork")
        with pytest.raises(VocabularyError):
            kitchen.name(3)


class TestTuples:
    def test_null_carries_no_object(self):
        with pytest.raises(ValueError):
            TherbligTuple(Verb.NULL, 0)
        with pytest.raises(ValueError):
            TherbligTuple(Verb.GRASP, None)

    def test_eight_verbs_with_unique_codes(self):
        codes = [v.value for v in Verb]
        assert len(codes) == 8
        assert len(set(codes)) == 8
        assert list(Verb)[-1] is Verb.NULL

    def test_sequence_null_only_suffix(self):
        check_sequence([tt(Verb.REACH, 0), NULL_TUPLE, NULL_TUPLE])
        with pytest.raises(SequenceError):
            check_sequence([NULL_TUPLE, tt(Verb.REACH, 0)])
        with pytest.raises(SequenceError):
            check_sequence([tt(Verb.REACH, 0)] * 7)

    def test_pad_and_strip(self):
        seq = (tt(Verb.GRASP, 0),)
        padded = pad_sequence(seq)
        assert len(padded) == 6
        assert strip_padding(padded) == seq


class TestHandContact:
    def test_union(self, kitchen):
        k = kitchen.index("knife")
        assert hand_to_set(HandContact(right=k), kitchen) == {k}
        assert hand_to_set(HandContact(), kitchen) == frozenset()
        b = kitchen.index("bowl")
        assert hand_to_set(HandContact(right=b, left=b), kitchen) == {b}

    def test_out_of_range(self, kitchen):
        with pytest.raises(VocabularyError):
            hand_to_set(HandContact(right=9), kitchen)


class TestApplyTuple:
    def test_grasp_inserts(self):
        assert apply_tuple(frozenset(), tt(Verb.GRASP, 0)) == {0}

    def test_release_removes(self):
        assert apply_tuple(frozenset({0}), tt(Verb.RELEASE, 0)) == frozenset()

    def test_move_preserves(self):
        assert apply_tuple(frozenset({0}), tt(Verb.MOVE, 0)) == {0}

    @given(st.sets(st.integers(0, 3)), st.integers(0, 3))
    def test_grasp_release_inverse(self, state, o):
        state = frozenset(state) - {o}
        assert apply_tuple(apply_tuple(state, tt(Verb.GRASP, o)), tt(Verb.RELEASE, o)) == state


class TestStepViolations:
    def test_rule2_grasp_held(self):
        vs = step_violations(frozenset({0}), tt(Verb.GRASP, 0))
        assert [v.rule for v in vs] == [2]

    def test_rule3_move_unheld(self):
        vs = step_violations(frozenset(), tt(Verb.MOVE, 2))
        assert [v.rule for v in vs] == [3]

    def test_reach_unheld_is_legal(self):
        assert step_violations(frozenset(), tt(Verb.REACH, 0)) == ()

    def test_null_never_violates(self):
        assert step_violations(frozenset({0, 1}), NULL_TUPLE) == ()

    def test_hold_strict_vs_lenient(self):
        assert step_violations(frozenset(), tt(Verb.HOLD, 0), strict_hold=True)
        assert not step_violations(frozenset(), tt(Verb.HOLD, 0), strict_hold=False)
        assert not step_violations(frozenset({0}), tt(Verb.HOLD, 0), strict_hold=True)


class TestValidateSequence:
    def test_consistent_pick_place(self, kitchen):
        seq = parse_sequence("Re:knife;G:knife;M:knife;R:knife", kitchen)
        report = validate_sequence(frozenset(), seq, frozenset())
        assert report.ok
        assert report.derived_states[0] == frozenset()
        assert report.derived_states[-1] == frozenset()

    def test_rule1_on_net_mismatch(self, kitchen):
        seq = parse_sequence("Re:knife;G:knife", kitchen)
        report = validate_sequence(frozenset(), seq, frozenset())
        assert [v.rule for v in report.violations] == [1]
        assert report.derived_states[-1] == {kitchen.index("knife")}

    def test_rule2_step_index(self, kitchen):
        k = kitchen.index("knife")
        report = validate_sequence(frozenset({k}), (tt(Verb.GRASP, k),), frozenset({k}))
        assert [(v.rule, v.step) for v in report.violations] == [(2, 0)]

    def test_too_long_raises(self):
        with pytest.raises(SequenceError):
            validate_sequence(frozenset(), (tt(Verb.REACH, 0),) * 7, frozenset())

    @given(
        st.lists(
            st.tuples(st.sampled_from([Verb.REACH, Verb.MOVE, Verb.GRASP, Verb.RELEASE]),
                      st.integers(0, 2)),
            max_size=6,
        ),
        st.sets(st.integers(0, 2)),
    )
    def test_fold_validate_agreement(self, raw, start):
        seq = tuple(tt(v, o) for v, o in raw)
        state = frozenset(start)
        for t in seq:
            state = apply_tuple(state, t)
        # Rule 1 fires exactly when the fold misses the target
        ok_report = validate_sequence(frozenset(start), seq, state)
        assert not any(v.rule == 1 for v in ok_report.violations)
        wrong = state ^ {0}
        bad_report = validate_sequence(frozenset(start), seq, wrong)
        assert any(v.rule == 1 for v in bad_report.violations)

    @given(
        st.sets(st.integers(0, 2)),
        st.lists(
            st.tuples(st.sampled_from([v for v in Verb if v is not Verb.NULL]), st.integers(0, 2)),
            max_size=6,
        ),
    )
    def test_accepted_roundtrip_balances_grasp_release(self, start, raw):
        seq = tuple(tt(v, o) for v, o in raw)
        report = validate_sequence(frozenset(start), seq, frozenset(start))
        if report.ok:
            for o in range(3):
                grasps = sum(1 for t in seq if t.verb is Verb.GRASP and t.obj == o)
                releases = sum(1 for t in seq if t.verb is Verb.RELEASE and t.obj == o)
                assert grasps == releases


class TestCandidateTuples:
    @pytest.mark.parametrize("n_objects", [1, 2, 3, 4])
    def test_soundness_completeness_exhaustive(self, n_objects):
        vocab = ObjectVocabulary.generic(n_objects)
        for strict in (True, False):
            for state in all_states(n_objects):
                cands = candidate_tuples(state, vocab, strict)
                for t in all_tuples(n_objects):
                    legal = t.is_null or not step_violations(state, t, strict)
                    assert (t in cands) == legal

    @pytest.mark.parametrize("n_objects", [1, 2, 3, 4, 5, 6])
    def test_strict_count_closed_form(self, n_objects):
        vocab = ObjectVocabulary.generic(n_objects)
        for state in all_states(n_objects):
            count = len(candidate_tuples(state, vocab, strict_hold=True))
            assert count == 5 * len(state) + 2 * (n_objects - len(state)) + 1

    def test_spec_counts(self, kitchen):
        assert len(candidate_tuples(frozenset(), kitchen)) == 7
        assert len(candidate_tuples(frozenset({0}), kitchen)) == 10


class TestCandidateTuplesWithGoal:
    def test_one_step_to_grasp(self, kitchen):
        k = kitchen.index("knife")
        cands = candidate_tuples_with_goal(frozenset(), frozenset({k}), 1, kitchen)
        assert cands == {tt(Verb.GRASP, k)}

    def test_one_step_noop(self, kitchen):
        cands = candidate_tuples_with_goal(frozenset(), frozenset(), 1, kitchen)
        expected = {NULL_TUPLE} | {tt(Verb.REACH, o) for o in range(3)}
        assert cands == expected

    def test_release_then_regrasp(self, kitchen):
        k = kitchen.index("knife")
        cands = candidate_tuples_with_goal(frozenset({k}), frozenset({k}), 2, kitchen)
        assert tt(Verb.RELEASE, k) in cands
        assert tt(Verb.MOVE, k) in cands
        assert NULL_TUPLE in cands

    def test_unreachable_goal_yields_empty(self, kitchen):
        cands = candidate_tuples_with_goal(frozenset(), frozenset({0, 1, 2}), 2, kitchen)
        assert cands == frozenset()

    def test_remaining_must_be_positive(self, kitchen):
        with pytest.raises(ValueError):
            candidate_tuples_with_goal(frozenset(), frozenset(), 0, kitchen)

    @pytest.mark.parametrize("n_objects,remaining", [(2, 3), (3, 2)])
    def test_subset_of_unconstrained(self, n_objects, remaining):
        vocab = ObjectVocabulary.generic(n_objects)
        for state in all_states(n_objects):
            for goal in all_states(n_objects):
                goal_cands = candidate_tuples_with_goal(state, goal, remaining, vocab)
                assert goal_cands <= candidate_tuples(state, vocab)


class TestTextForms:
    def test_tuple_roundtrip(self, kitchen):
        for text in ("G:knife", "Re:tomato", "-"):
            assert format_tuple(parse_tuple(text, kitchen), kitchen) == text

    def test_sequence_roundtrip(self, kitchen):
        text = "Re:knife;G:knife;M:knife;R:knife;-"
        assert format_sequence(parse_sequence(text, kitchen), kitchen) == text

    def test_contacts_roundtrip(self, kitchen):
        for text in ("[]", "[knife]", "[knife,bowl]"):
            assert format_contacts(parse_contacts(text, kitchen), kitchen) == text

    def test_malformed(self, kitchen):
        with pytest.raises(ValueError):
            parse_tuple("Grab knife", kitchen)
        with pytest.raises(ValueError):
            parse_tuple("X:knife", kitchen)
        with pytest.raises(ValueError):
            parse_contacts("knife", kitchen)
