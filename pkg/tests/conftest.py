import itertools

import pytest

from therbligs.core import ObjectVocabulary, TherbligTuple, Verb

NON_NULL_VERBS = [v for v in Verb if v is not Verb.NULL]


@pytest.fixture
def kitchen():
    return ObjectVocabulary(["knife", "bowl", "tomato"])


def all_states(n_objects):
    """Every contact set over n_objects indices."""
    out = []
    for r in range(n_objects + 1):
        out.extend(frozenset(c) for c in itertools.combinations(range(n_objects), r))
    return out


def all_tuples(n_objects, include_null=True):
    out = [TherbligTuple(v, o) for o in range(n_objects) for v in NON_NULL_VERBS]
    if include_null:
        out.append(TherbligTuple(Verb.NULL))
    return out
