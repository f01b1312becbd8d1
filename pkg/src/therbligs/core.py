"""Therblig vocabulary, contact-state transitions, and the three consistency rules.

Everything here is a pure function over immutable values: contact states are
frozensets of object indices, sequences are tuples of TherbligTuple.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

DEFAULT_MAX_STEPS = 6


class Verb(Enum):
    """The seven Therblig verbs plus the null (empty) step."""

    REACH = "Re"
    MOVE = "M"
    GRASP = "G"
    RELEASE = "R"
    USE = "U"
    ORIENT = "O"
    HOLD = "H"
    NULL = "-"

    @property
    def code(self) -> str:
        return self.value

    @property
    def is_null(self) -> bool:
        return self is Verb.NULL


# Canonical verb order used by the loss effect vectors. Null is excluded:
# it has no row in the effect matrices.
VERB_ORDER: Tuple[Verb, ...] = (
    Verb.REACH,
    Verb.MOVE,
    Verb.GRASP,
    Verb.RELEASE,
    Verb.USE,
    Verb.ORIENT,
    Verb.HOLD,
)
VERB_INDEX = {v: i for i, v in enumerate(VERB_ORDER)}
VERB_BY_CODE = {v.value: v for v in Verb}

# Verbs that only make sense on an object already in contact (Rule 3).
# Hold joins them under strict_hold.
_NEEDS_CONTACT = frozenset({Verb.MOVE, Verb.ORIENT, Verb.USE, Verb.RELEASE})
# Verbs forbidden on an object already in contact (Rule 2).
_NEEDS_NO_CONTACT = frozenset({Verb.REACH, Verb.GRASP})

ContactSet = FrozenSet[int]

EMPTY_CONTACTS: ContactSet = frozenset()


class VocabularyError(ValueError):
    pass


class ObjectVocabulary:
    """Ordered set of object class names with a name <-> index bijection."""

    def __init__(self, names: Iterable[str]):
        names = list(names)
        if not names:
            raise VocabularyError("vocabulary must contain at least one object class")
        if any(not n for n in names):
            raise VocabularyError("object class names must be non-empty")
        if len(set(names)) != len(names):
            raise VocabularyError("object class names must be unique")
        self._names: Tuple[str, ...] = tuple(names)
        self._index = {n: i for i, n in enumerate(self._names)}

    @classmethod
    def generic(cls, size: int) -> "ObjectVocabulary":
        return cls(f"obj{i}" for i in range(size))

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self):
        return iter(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, ObjectVocabulary) and self._names == other._names

    def __hash__(self) -> int:
        return hash(self._names)

    def __repr__(self) -> str:
        return f"ObjectVocabulary({list(self._names)!r})"

    @property
    def names(self) -> Tuple[str, ...]:
        return self._names

    def name(self, index: int) -> str:
        self.check_index(index)
        return self._names[index]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise VocabularyError(f"unknown object class {name!r}") from None

    def check_index(self, index: int) -> None:
        if not 0 <= index < len(self._names):
            raise VocabularyError(
                f"object index {index} out of range for |C|={len(self._names)}"
            )


@dataclass(frozen=True, order=True)
class TherbligTuple:
    """One (verb, object) atom. Null carries no object."""

    verb: Verb = field(compare=False)
    obj: Optional[int] = field(default=None, compare=False)
    # sort key keeps candidate enumeration deterministic and defines equality
    sort_key: Tuple[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.verb.is_null:
            if self.obj is not None:
                raise ValueError("null Therblig carries no object")
        else:
            if self.obj is None:
                raise ValueError(f"{self.verb.code} requires an object index")
            if self.obj < 0:
                raise ValueError("object index must be non-negative")
        key = (
            VERB_INDEX.get(self.verb, len(VERB_ORDER)),
            -1 if self.obj is None else self.obj,
        )
        object.__setattr__(self, "sort_key", key)

    @property
    def is_null(self) -> bool:
        return self.verb.is_null


NULL_TUPLE = TherbligTuple(Verb.NULL)

TherbligSequence = Tuple[TherbligTuple, ...]


@dataclass(frozen=True)
class HandContact:
    """Per-hand held object class; at most one class per hand."""

    right: Optional[int] = None
    left: Optional[int] = None

    def to_set(self, vocab: ObjectVocabulary) -> ContactSet:
        return hand_to_set(self, vocab)


@dataclass(frozen=True)
class RuleViolation:
    rule: int
    step: Optional[int] = None
    tup: Optional[TherbligTuple] = None
    message: str = ""

    def __post_init__(self):
        if self.rule not in (1, 2, 3):
            raise ValueError("rule must be 1, 2 or 3")
        if self.rule in (2, 3) and self.step is None:
            raise ValueError("rule 2/3 violations carry a step index")


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[RuleViolation, ...]
    derived_states: Tuple[ContactSet, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


class SequenceError(ValueError):
    pass


def check_sequence(seq: Sequence[TherbligTuple], n_max: int = DEFAULT_MAX_STEPS) -> TherbligSequence:
    """Enforce the sequence invariants: length cap and null-only-as-suffix."""
    seq = tuple(seq)
    if len(seq) > n_max:
        raise SequenceError(f"sequence length {len(seq)} exceeds cap N={n_max}")
    seen_null = False
    for t in seq:
        if t.is_null:
            seen_null = True
        elif seen_null:
            raise SequenceError("null steps are only valid as a trailing suffix")
    return seq


def strip_padding(seq: Sequence[TherbligTuple]) -> TherbligSequence:
    return tuple(t for t in seq if not t.is_null)


def pad_sequence(seq: Sequence[TherbligTuple], n_max: int = DEFAULT_MAX_STEPS) -> TherbligSequence:
    seq = check_sequence(seq, n_max)
    return seq + (NULL_TUPLE,) * (n_max - len(seq))


def hand_to_set(hands: HandContact, vocab: ObjectVocabulary) -> ContactSet:
    """Union of the classes held by either hand; both hands on one class collapse."""
    out = set()
    for idx in (hands.right, hands.left):
        if idx is not None:
            vocab.check_index(idx)
            out.add(idx)
    return frozenset(out)


def set_to_hand(state: ContactSet) -> HandContact:
    """Inverse of hand_to_set for states of size <= 2 (right gets the lower index)."""
    objs = sorted(state)
    if len(objs) > 2:
        raise ValueError("two hands hold at most two object classes")
    right = objs[0] if objs else None
    left = objs[1] if len(objs) > 1 else None
    return HandContact(right=right, left=left)


def apply_tuple(state: ContactSet, t: TherbligTuple) -> ContactSet:
    """Contact-set transition: grasp inserts, release removes, everything else is identity.

    Total on purpose; rule checking lives in step_violations.
    """
    if t.verb is Verb.GRASP:
        return state | {t.obj}
    if t.verb is Verb.RELEASE:
        return state - {t.obj}
    return state


def step_violations(
    state: ContactSet, t: TherbligTuple, strict_hold: bool = True
) -> Tuple[RuleViolation, ...]:
    """Rule 2/3 violations of a single step against the current contact state."""
    if t.is_null:
        return ()
    if t.verb in _NEEDS_NO_CONTACT and t.obj in state:
        return (
            RuleViolation(
                rule=2,
                step=0,
                tup=t,
                message=f"{t.verb.code} on object {t.obj} already in contact",
            ),
        )
    needs_contact = _NEEDS_CONTACT | ({Verb.HOLD} if strict_hold else frozenset())
    if t.verb in needs_contact and t.obj not in state:
        return (
            RuleViolation(
                rule=3,
                step=0,
                tup=t,
                message=f"{t.verb.code} on object {t.obj} not in contact",
            ),
        )
    return ()


def validate_sequence(
    c_start: ContactSet,
    seq: Sequence[TherbligTuple],
    c_end: ContactSet,
    strict_hold: bool = True,
    n_max: int = DEFAULT_MAX_STEPS,
) -> ValidationReport:
    """Fold the sequence from c_start, collecting Rule 2/3 violations per step and a
    single Rule 1 violation when the final derived state differs from c_end."""
    seq = check_sequence(seq, n_max)
    violations = []
    states = [frozenset(c_start)]
    state = states[0]
    for k, t in enumerate(seq):
        for v in step_violations(state, t, strict_hold):
            violations.append(RuleViolation(rule=v.rule, step=k, tup=t, message=v.message))
        state = apply_tuple(state, t)
        states.append(state)
    c_end = frozenset(c_end)
    if state != c_end:
        violations.append(
            RuleViolation(
                rule=1,
                message=f"derived final contacts {sorted(state)} != annotated {sorted(c_end)}",
            )
        )
    return ValidationReport(tuple(violations), tuple(states))


def candidate_tuples(
    state: ContactSet, vocab: ObjectVocabulary, strict_hold: bool = True
) -> FrozenSet[TherbligTuple]:
    """All single steps legal from `state` (no Rule 2/3 violation), plus Null."""
    out = {NULL_TUPLE}
    held_verbs = list(_NEEDS_CONTACT) + ([Verb.HOLD] if strict_hold else [])
    free_verbs = list(_NEEDS_NO_CONTACT) + ([] if strict_hold else [Verb.HOLD])
    for o in range(len(vocab)):
        verbs = held_verbs if o in state else free_verbs
        # lenient Hold is legal everywhere
        if not strict_hold and o in state:
            verbs = verbs + [Verb.HOLD]
        for v in verbs:
            out.add(TherbligTuple(v, o))
    return frozenset(out)


def _reachable(state: ContactSet, goal: ContactSet, steps: int) -> bool:
    # Grasp/release toggle one membership per step and are never blocked on the
    # way to the goal, so BFS depth equals the symmetric difference size.
    return len(state ^ goal) <= steps


def candidate_tuples_with_goal(
    state: ContactSet,
    c_end: ContactSet,
    remaining: int,
    vocab: ObjectVocabulary,
    strict_hold: bool = True,
) -> FrozenSet[TherbligTuple]:
    """Legal next steps that still allow reaching c_end within the remaining slots.

    Null stands for "stop here" (trailing padding), so it survives the filter
    only when the goal is already met. An empty result signals that c_end is
    unreachable and the bracketing contact annotations need revision.
    """
    if remaining < 1:
        raise ValueError("remaining must be >= 1")
    state = frozenset(state)
    c_end = frozenset(c_end)
    out = set()
    for t in candidate_tuples(state, vocab, strict_hold):
        if t.is_null:
            if state == c_end:
                out.add(t)
        elif _reachable(apply_tuple(state, t), c_end, remaining - 1):
            out.add(t)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Canonical text forms: "G:knife", "-" for null, sequences joined by ";",
# contact sets as "[knife,bowl]".
# ---------------------------------------------------------------------------


def format_tuple(t: TherbligTuple, vocab: ObjectVocabulary) -> str:
    if t.is_null:
        return Verb.NULL.code
    return f"{t.verb.code}:{vocab.name(t.obj)}"


def parse_tuple(text: str, vocab: ObjectVocabulary) -> TherbligTuple:
    text = text.strip()
    if text == Verb.NULL.code:
        return NULL_TUPLE
    code, sep, name = text.partition(":")
    if not sep:
        raise ValueError(f"malformed Therblig tuple {text!r} (expected VERB:object)")
    verb = VERB_BY_CODE.get(code.strip())
    if verb is None or verb.is_null:
        raise ValueError(f"unknown verb code {code!r}")
    return TherbligTuple(verb, vocab.index(name.strip()))


def format_sequence(seq: Sequence[TherbligTuple], vocab: ObjectVocabulary) -> str:
    return ";".join(format_tuple(t, vocab) for t in seq)


def parse_sequence(
    text: str, vocab: ObjectVocabulary, n_max: int = DEFAULT_MAX_STEPS
) -> TherbligSequence:
    text = text.strip()
    if not text:
        return ()
    return check_sequence([parse_tuple(p, vocab) for p in text.split(";")], n_max)


def format_contacts(state: ContactSet, vocab: ObjectVocabulary) -> str:
    return "[" + ",".join(vocab.name(i) for i in sorted(state)) + "]"


def parse_contacts(text: str, vocab: ObjectVocabulary) -> ContactSet:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"malformed contact set {text!r} (expected [a,b,...])")
    inner = text[1:-1].strip()
    if not inner:
        return EMPTY_CONTACTS
    return frozenset(vocab.index(p.strip()) for p in inner.split(","))
