"""Canonical JSON-lines annotation records, shared by datagen, metrics and the
annotation service.

One record per 100-frame chunk:
  {"segment_id", "video_id", "start_frame", "end_frame",
   "c_prev": {"right": name|null, "left": name|null}, "c_next": {...},
   "therbligs": [{"verb": code, "object": name}, ...],
   "source": "human" | "synthetic"}

Files start with a "#" comment header line; readers skip comment lines.
"""
from __future__ import annotations

import json
from typing import Dict, Iterable, List, Optional, Tuple

from .core import (
    HandContact,
    NULL_TUPLE,
    ObjectVocabulary,
    TherbligSequence,
    TherbligTuple,
    VERB_BY_CODE,
    Verb,
    check_sequence,
)

HEADER = "# therblig annotation records v1"

Record = Dict


def hand_to_doc(h: HandContact, vocab: ObjectVocabulary) -> Dict[str, Optional[str]]:
    return {
        "right": None if h.right is None else vocab.name(h.right),
        "left": None if h.left is None else vocab.name(h.left),
    }


def hand_from_doc(doc: Dict, vocab: ObjectVocabulary) -> HandContact:
    def idx(value):
        if value in (None, "", "none"):
            return None
        return vocab.index(value)

    return HandContact(right=idx(doc.get("right")), left=idx(doc.get("left")))


def sequence_to_doc(seq: TherbligSequence, vocab: ObjectVocabulary) -> List[Dict]:
    out = []
    for t in seq:
        if t.is_null:
            out.append({"verb": Verb.NULL.code, "object": None})
        else:
            out.append({"verb": t.verb.code, "object": vocab.name(t.obj)})
    return out


def sequence_from_doc(doc: List[Dict], vocab: ObjectVocabulary, n_max: int = 6) -> TherbligSequence:
    steps = []
    for item in doc:
        verb = VERB_BY_CODE.get(item.get("verb"))
        if verb is None:
            raise ValueError(f"unknown verb code {item.get('verb')!r}")
        if verb.is_null:
            steps.append(NULL_TUPLE)
        else:
            steps.append(TherbligTuple(verb, vocab.index(item["object"])))
    return check_sequence(steps, n_max)


def make_record(
    segment_id: str,
    video_id: str,
    start_frame: int,
    end_frame: int,
    c_prev: HandContact,
    c_next: HandContact,
    seq: TherbligSequence,
    vocab: ObjectVocabulary,
    source: str = "human",
) -> Record:
    return {
        "segment_id": segment_id,
        "video_id": video_id,
        "start_frame": start_frame,
        "end_frame": end_frame,
        "c_prev": hand_to_doc(c_prev, vocab),
        "c_next": hand_to_doc(c_next, vocab),
        "therbligs": sequence_to_doc(seq, vocab),
        "source": source,
    }


def check_record(rec: Record) -> Record:
    required = (
        "segment_id",
        "video_id",
        "start_frame",
        "end_frame",
        "c_prev",
        "c_next",
        "therbligs",
        "source",
    )
    missing = [k for k in required if k not in rec]
    if missing:
        raise ValueError(f"record missing fields: {missing}")
    if rec["source"] not in ("human", "synthetic"):
        raise ValueError(f"unknown record source {rec['source']!r}")
    return rec


def dump_record(rec: Record) -> str:
    return json.dumps(check_record(rec), sort_keys=True)


def write_records(path, records: Iterable[Record]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(HEADER + "\n")
        for rec in records:
            fh.write(dump_record(rec) + "\n")
            count += 1
    return count


def read_records(path) -> List[Record]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            out.append(check_record(json.loads(line)))
    return out


def vocabulary_from_records(records: Iterable[Record]) -> ObjectVocabulary:
    """Infer an object vocabulary from the names mentioned in records."""
    names = set()
    for rec in records:
        for side in ("c_prev", "c_next"):
            for hand in ("right", "left"):
                v = rec[side].get(hand)
                if v:
                    names.add(v)
        for item in rec["therbligs"]:
            if item.get("object"):
                names.add(item["object"])
    if not names:
        names = {"obj0"}
    return ObjectVocabulary(sorted(names))
