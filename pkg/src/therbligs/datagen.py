"""Brute-force consistency oracle and seeded synthetic trajectory generation."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Set, Tuple

from .core import (
    ContactSet,
    DEFAULT_MAX_STEPS,
    NULL_TUPLE,
    ObjectVocabulary,
    TherbligSequence,
    TherbligTuple,
    Verb,
    apply_tuple,
    candidate_tuples_with_goal,
    set_to_hand,
    step_violations,
    validate_sequence,
)
from .records import Record, make_record, write_records

MAX_ORACLE_OBJECTS = 6
MAX_ORACLE_LEN = 6
MAX_ORACLE_SEQUENCES = 10**7


def _non_null_alphabet(vocab: ObjectVocabulary) -> List[TherbligTuple]:
    out = [
        TherbligTuple(v, o)
        for o in range(len(vocab))
        for v in (Verb.REACH, Verb.MOVE, Verb.GRASP, Verb.RELEASE, Verb.USE, Verb.ORIENT, Verb.HOLD)
    ]
    return sorted(out)


def brute_force_by_final(
    c_start: ContactSet,
    vocab: ObjectVocabulary,
    max_len: int,
    strict_hold: bool = True,
) -> Dict[ContactSet, Set[TherbligSequence]]:
    """All violation-free sequences up to max_len from c_start, keyed by final state.

    Enumerates the full non-null tuple alphabet depth-first. A violating
    prefix can never be repaired (step checks depend only on the running
    state, which ignores illegal steps' legality), so pruning at the first
    violation enumerates exactly the violation-free set.
    """
    if len(vocab) > MAX_ORACLE_OBJECTS or max_len > MAX_ORACLE_LEN:
        raise ValueError(
            f"oracle guard: |C| <= {MAX_ORACLE_OBJECTS} and max_len <= {MAX_ORACLE_LEN}"
        )
    alphabet = _non_null_alphabet(vocab)
    if len(alphabet) ** max_len > MAX_ORACLE_SEQUENCES:
        raise ValueError("oracle guard: enumeration would exceed 1e7 sequences")
    out: Dict[ContactSet, Set[TherbligSequence]] = {}

    def visit(state: ContactSet, prefix: Tuple[TherbligTuple, ...]):
        out.setdefault(state, set()).add(prefix)
        if len(prefix) == max_len:
            return
        for t in alphabet:
            if not step_violations(state, t, strict_hold):
                visit(apply_tuple(state, t), prefix + (t,))

    visit(frozenset(c_start), ())
    return out


def brute_force_consistent(
    c_start: ContactSet,
    c_end: ContactSet,
    vocab: ObjectVocabulary,
    max_len: int,
    strict_hold: bool = True,
) -> Set[TherbligSequence]:
    """Exactly the padding-free sequences up to max_len with an empty ValidationReport."""
    by_final = brute_force_by_final(c_start, vocab, max_len, strict_hold)
    return set(by_final.get(frozenset(c_end), set()))


def chain_consistent(
    c_start: ContactSet,
    c_end: ContactSet,
    vocab: ObjectVocabulary,
    max_len: int,
    strict_hold: bool = True,
) -> Set[TherbligSequence]:
    """All sequences producible by stepping through candidate_tuples_with_goal.

    The dual route to brute_force_consistent: a sequence is emitted whenever
    the running state meets the goal, and extended with every non-null
    candidate while slots remain.
    """
    out: Set[TherbligSequence] = set()
    goal = frozenset(c_end)
    memo: Dict[Tuple[ContactSet, int], List[TherbligTuple]] = {}

    def visit(state: ContactSet, prefix: Tuple[TherbligTuple, ...], remaining: int):
        if state == goal:
            out.add(prefix)
        if remaining < 1:
            return
        key = (state, remaining)
        cands = memo.get(key)
        if cands is None:
            cands = [
                t
                for t in candidate_tuples_with_goal(state, c_end, remaining, vocab, strict_hold)
                if not t.is_null
            ]
            memo[key] = cands
        for t in cands:
            visit(apply_tuple(state, t), prefix + (t,), remaining - 1)

    visit(frozenset(c_start), (), max_len)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Chained rule-consistent chunks: each sequence maps its start contacts to
    the next chunk's start contacts."""

    chunks: Tuple[Tuple[ContactSet, TherbligSequence], ...]
    final_contacts: ContactSet
    vocab: ObjectVocabulary
    seed: int

    def contact_states(self) -> List[ContactSet]:
        return [c for c, _ in self.chunks] + [self.final_contacts]


def gen_trajectory(
    vocab: ObjectVocabulary,
    chunks: int,
    n_max: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
    strict_hold: bool = True,
    max_contacts: int = 2,
) -> Trajectory:
    """Seeded random trajectory; every chunk is consistent by construction.

    Contact states are capped at max_contacts objects so they stay
    representable as per-hand contacts in the record format.
    """
    if chunks < 1:
        raise ValueError("chunks must be >= 1")
    rng = random.Random(seed)
    objects = list(range(len(vocab)))
    state: ContactSet = frozenset()
    out = []
    for _ in range(chunks):
        goal = _pick_goal(rng, state, objects, n_max, max_contacts)
        seq = _fill_chunk(rng, state, goal, vocab, n_max, strict_hold)
        report = validate_sequence(state, seq, goal, strict_hold=strict_hold, n_max=n_max)
        assert report.ok, "generator produced a violating chunk"
        out.append((state, seq))
        state = goal
    return Trajectory(tuple(out), state, vocab, seed)


def _pick_goal(rng, state, objects, n_max, max_contacts) -> ContactSet:
    flips = rng.randint(0, min(n_max, len(objects)))
    goal = set(state)
    for o in rng.sample(objects, flips):
        if o in goal:
            goal.discard(o)
        elif len(goal) < max_contacts:
            goal.add(o)
    # dropping additions keeps |goal| bounded; the symmetric difference only shrinks
    return frozenset(goal)


def _fill_chunk(rng, state, goal, vocab, n_max, strict_hold) -> TherbligSequence:
    seq = []
    remaining = n_max
    while remaining > 0:
        cands = sorted(candidate_tuples_with_goal(state, goal, remaining, vocab, strict_hold))
        t = rng.choice(cands)
        if t.is_null:
            break
        seq.append(t)
        state = apply_tuple(state, t)
        remaining -= 1
    return tuple(seq)


def verb_histogram(trajectories) -> Dict[str, int]:
    """Verb frequency over generated chunks (null counted once per empty chunk)."""
    counts: Dict[str, int] = {v.code: 0 for v in Verb}
    for traj in trajectories:
        for _, seq in traj.chunks:
            if not seq:
                counts[Verb.NULL.code] += 1
            for t in seq:
                counts[t.verb.code] += 1
    return counts


def trajectory_records(traj: Trajectory, video_id: str, frames_per_chunk: int = 100) -> List[Record]:
    out = []
    states = traj.contact_states()
    for i, (c_start, seq) in enumerate(traj.chunks):
        start = i * frames_per_chunk
        end = start + frames_per_chunk
        out.append(
            make_record(
                segment_id=f"{video_id}_{start:07d}_{end:07d}",
                video_id=video_id,
                start_frame=start,
                end_frame=end,
                c_prev=set_to_hand(c_start),
                c_next=set_to_hand(states[i + 1]),
                seq=seq,
                vocab=traj.vocab,
                source="synthetic",
            )
        )
    return out


def gen_dataset(
    vocab: ObjectVocabulary,
    videos: int,
    chunks_per_video: int,
    out_path,
    n_max: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
    strict_hold: bool = True,
) -> int:
    """Write a seeded synthetic dataset in the canonical JSONL record format.

    Deterministic: identical parameters yield byte-identical files.
    """
    records: List[Record] = []
    for v in range(videos):
        traj = gen_trajectory(
            vocab, chunks_per_video, n_max=n_max, seed=seed * 1_000_003 + v, strict_hold=strict_hold
        )
        records.extend(trajectory_records(traj, video_id=f"vid{v:04d}"))
    return write_records(out_path, records)
