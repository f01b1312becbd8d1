"""Two-stage annotation backend: segment ingestion, stage-1 contact consensus,
stage-2 rule-filtered Therblig annotation, persistence and export.

Persistence is an append-only JSON-lines event log; the in-memory index is
rebuilt by replaying the log on startup. All mutations go through one lock.
"""
from __future__ import annotations

import csv
import io
import json
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from fastapi import Body, FastAPI, HTTPException, Query, Request, UploadFile
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .core import (
    DEFAULT_MAX_STEPS,
    HandContact,
    ObjectVocabulary,
    SequenceError,
    apply_tuple,
    candidate_tuples_with_goal,
    format_tuple,
    hand_to_set,
    step_violations,
    validate_sequence,
)
from .records import (
    HEADER,
    Record,
    dump_record,
    hand_from_doc,
    hand_to_doc,
    make_record,
    sequence_from_doc,
)

MIN_RESPONSES = 5


class StoreError(ValueError):
    pass


class DuplicateResponse(StoreError):
    pass


@dataclass
class SegmentRecord:
    segment_id: str
    video_id: str
    start_frame: int
    end_frame: int
    image: str = ""
    clip: str = ""
    verb: Optional[str] = None
    noun: Optional[str] = None


@dataclass
class ContactTask:
    """Stage-1 task: the contact state at one chunk boundary frame."""

    task_id: str
    video_id: str
    frame: int
    responses: List[Tuple[str, Optional[str], Optional[str]]] = field(default_factory=list)

    def workers(self):
        return {w for w, _, _ in self.responses}

    def consensus(self) -> Dict:
        """Per-hand mode over pooled responses; resolved once >= 5 responses
        exist and each hand has a unique mode (ties solicit one more vote)."""
        status = "needs_more"
        right = left = None
        support = {"right": {}, "left": {}}
        if self.responses:
            r_counts = Counter(r for _, r, _ in self.responses)
            l_counts = Counter(l for _, _, l in self.responses)
            support = {
                "right": {str(k): v for k, v in r_counts.items()},
                "left": {str(k): v for k, v in l_counts.items()},
            }
            if len(self.responses) >= MIN_RESPONSES:
                r_mode = _unique_mode(r_counts)
                l_mode = _unique_mode(l_counts)
                if r_mode is not _TIE and l_mode is not _TIE:
                    status = "resolved"
                    right, left = r_mode, l_mode
        return {
            "task_id": self.task_id,
            "video_id": self.video_id,
            "frame": self.frame,
            "n_responses": len(self.responses),
            "status": status,
            "right": right,
            "left": left,
            "support": support,
        }


_TIE = object()


def _unique_mode(counts: Counter):
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return _TIE
    return ranked[0][0]


class AnnotationStore:
    """Append-only event log with an in-memory index."""

    def __init__(self, path, vocab: ObjectVocabulary, n_max: int = DEFAULT_MAX_STEPS,
                 strict_hold: bool = True):
        self.path = str(path)
        self.vocab = vocab
        self.n_max = n_max
        self.strict_hold = strict_hold
        self.lock = threading.Lock()
        self.segments: Dict[str, SegmentRecord] = {}
        self.contact_tasks: Dict[str, ContactTask] = {}
        self.annotations: Dict[str, Record] = {}
        self._replay()

    # -- persistence --------------------------------------------------------

    def _replay(self):
        try:
            fh = open(self.path, encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                event = json.loads(line)
                self._apply(event)

    def _append(self, event: Dict):
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _apply(self, event: Dict):
        kind = event["event"]
        if kind == "segment":
            seg = SegmentRecord(**event["segment"])
            self.segments[seg.segment_id] = seg
            for frame in (seg.start_frame, seg.end_frame):
                tid = f"{seg.video_id}:{frame}"
                self.contact_tasks.setdefault(tid, ContactTask(tid, seg.video_id, frame))
        elif kind == "contact_response":
            task = self.contact_tasks[event["task_id"]]
            task.responses.append((event["worker"], event["right"], event["left"]))
        elif kind == "annotation":
            rec = event["record"]
            self.annotations[rec["segment_id"]] = rec
        else:
            raise StoreError(f"unknown event kind {kind!r}")

    def _commit(self, event: Dict):
        self._apply(event)
        self._append(event)

    # -- ingestion ----------------------------------------------------------

    def ingest_csv(self, text: str) -> Dict:
        """Rows: video_id, start_frame, stop_frame[, verb, noun]. Idempotent on
        (video_id, start, end); malformed rows are reported and skipped."""
        reader = csv.DictReader(io.StringIO(text))
        required = {"video_id", "start_frame", "stop_frame"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise StoreError(f"CSV header must declare columns {sorted(required)}")
        added, skipped, errors = 0, 0, []
        with self.lock:
            for lineno, row in enumerate(reader, start=2):
                try:
                    video = (row["video_id"] or "").strip()
                    start = int(row["start_frame"])
                    end = int(row["stop_frame"])
                    if not video:
                        raise ValueError("empty video_id")
                    if start >= end:
                        raise ValueError(f"start_frame {start} >= stop_frame {end}")
                except (ValueError, TypeError) as exc:
                    errors.append({"line": lineno, "error": str(exc)})
                    continue
                seg_id = f"{video}_{start:07d}_{end:07d}"
                if seg_id in self.segments:
                    skipped += 1
                    continue
                seg = SegmentRecord(
                    segment_id=seg_id,
                    video_id=video,
                    start_frame=start,
                    end_frame=end,
                    image=f"{video}/{end}.jpg",
                    clip=f"{video}/{start}_{end}.mp4",
                    verb=(row.get("verb") or None),
                    noun=(row.get("noun") or None),
                )
                self._commit({"event": "segment", "segment": seg.__dict__})
                added += 1
        return {"added": added, "skipped": skipped, "errors": errors}

    # -- stage 1 ------------------------------------------------------------

    def next_contact_task(self, worker: str) -> Optional[Dict]:
        with self.lock:
            for tid in sorted(self.contact_tasks):
                task = self.contact_tasks[tid]
                c = task.consensus()
                if c["status"] != "resolved" and worker not in task.workers():
                    return {
                        "task_id": tid,
                        "video_id": task.video_id,
                        "frame": task.frame,
                        "image": f"{task.video_id}/{task.frame}.jpg",
                        "clip": f"{task.video_id}/{task.frame}.mp4",
                        "options": list(self.vocab.names),
                    }
        return None

    def submit_contact_response(
        self, task_id: str, worker: str, right: Optional[str], left: Optional[str]
    ) -> Dict:
        for name in (right, left):
            if name is not None:
                self.vocab.index(name)  # raises on unknown class
        with self.lock:
            task = self.contact_tasks.get(task_id)
            if task is None:
                raise KeyError(task_id)
            if worker in task.workers():
                raise DuplicateResponse(f"worker {worker!r} already responded to {task_id}")
            self._commit(
                {
                    "event": "contact_response",
                    "task_id": task_id,
                    "worker": worker,
                    "right": right,
                    "left": left,
                }
            )
            return task.consensus()

    def consensus_for_frame(self, video_id: str, frame: int) -> Dict:
        task = self.contact_tasks.get(f"{video_id}:{frame}")
        if task is None:
            raise KeyError(f"{video_id}:{frame}")
        return task.consensus()

    # -- stage 2 ------------------------------------------------------------

    def open_therblig_task(self, segment_id: str) -> Dict:
        seg = self.segments.get(segment_id)
        if seg is None:
            raise KeyError(segment_id)
        prev = self.consensus_for_frame(seg.video_id, seg.start_frame)
        nxt = self.consensus_for_frame(seg.video_id, seg.end_frame)
        if prev["status"] != "resolved" or nxt["status"] != "resolved":
            raise StoreError(f"stage-1 incomplete for segment {segment_id}")
        return {
            "task_id": segment_id,
            "video_id": seg.video_id,
            "start_frame": seg.start_frame,
            "end_frame": seg.end_frame,
            "image": seg.image,
            "clip": seg.clip,
            "c_prev": {"right": prev["right"], "left": prev["left"]},
            "c_next": {"right": nxt["right"], "left": nxt["left"]},
            "vocabulary": list(self.vocab.names),
            "n_max": self.n_max,
        }

    def next_therblig_task(self, worker: str) -> Optional[Dict]:
        with self.lock:
            for seg_id in sorted(self.segments):
                if seg_id in self.annotations:
                    continue
                try:
                    return self.open_therblig_task(seg_id)
                except (StoreError, KeyError):
                    continue
        return None

    def _fold_partial(self, c_prev: HandContact, partial) -> Tuple:
        state = hand_to_set(c_prev, self.vocab)
        for k, t in enumerate(partial):
            if t.is_null:
                raise SequenceError("partial sequences must not contain null steps")
            if step_violations(state, t, self.strict_hold):
                raise StoreError(f"partial sequence already violates a rule at step {k}")
            state = apply_tuple(state, t)
        return state

    def next_candidates(
        self, segment_id: str, c_prev: HandContact, c_next: HandContact, partial
    ) -> List[str]:
        if segment_id not in self.segments:
            raise KeyError(segment_id)
        if len(partial) >= self.n_max:
            return []
        state = self._fold_partial(c_prev, partial)
        goal = hand_to_set(c_next, self.vocab)
        cands = candidate_tuples_with_goal(
            state, goal, self.n_max - len(partial), self.vocab, self.strict_hold
        )
        return [format_tuple(t, self.vocab) for t in sorted(cands)]

    def submit_annotation(
        self, segment_id: str, worker: str, c_prev: HandContact, c_next: HandContact, seq
    ) -> Tuple[bool, List[Dict]]:
        """Server-side re-validation; only consistent records are persisted."""
        seg = self.segments.get(segment_id)
        if seg is None:
            raise KeyError(segment_id)
        report = validate_sequence(
            hand_to_set(c_prev, self.vocab),
            seq,
            hand_to_set(c_next, self.vocab),
            strict_hold=self.strict_hold,
            n_max=self.n_max,
        )
        if not report.ok:
            return False, [
                {
                    "rule": v.rule,
                    "step": v.step,
                    "tuple": None if v.tup is None else format_tuple(v.tup, self.vocab),
                    "message": v.message,
                }
                for v in report.violations
            ]
        rec = make_record(
            segment_id=segment_id,
            video_id=seg.video_id,
            start_frame=seg.start_frame,
            end_frame=seg.end_frame,
            c_prev=c_prev,
            c_next=c_next,
            seq=seq,
            vocab=self.vocab,
            source="human",
        )
        rec["worker"] = worker
        with self.lock:
            self._commit({"event": "annotation", "record": rec})
        return True, []

    def export(self, video_id: Optional[str] = None) -> str:
        with self.lock:
            lines = [HEADER]
            for seg_id in sorted(self.annotations):
                rec = self.annotations[seg_id]
                if video_id and rec["video_id"] != video_id:
                    continue
                lines.append(dump_record(rec))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------


class ContactResponseBody(BaseModel):
    worker: str
    right: Optional[str] = None
    left: Optional[str] = None


class HandDoc(BaseModel):
    right: Optional[str] = None
    left: Optional[str] = None


class CandidatesBody(BaseModel):
    c_prev: HandDoc
    c_next: HandDoc
    partial: List[Dict] = []


class SubmitBody(BaseModel):
    worker: str
    c_prev: HandDoc
    c_next: HandDoc
    therbligs: List[Dict]


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="therblig annotation service")
    app.state.store = store

    def parse_hand(doc: HandDoc) -> HandContact:
        try:
            return hand_from_doc(doc.model_dump(), store.vocab)
        except ValueError as exc:
            raise HTTPException(422, str(exc))

    def parse_seq(doc: List[Dict]):
        try:
            return sequence_from_doc(doc, store.vocab, store.n_max)
        except (ValueError, SequenceError) as exc:
            raise HTTPException(422, str(exc))

    @app.get("/vocab")
    def vocab():
        return {"objects": list(store.vocab.names), "n_max": store.n_max}

    @app.post("/ingest")
    async def ingest(request: Request, file: Optional[UploadFile] = None):
        if file is not None:
            text = (await file.read()).decode("utf-8")
        else:
            text = (await request.body()).decode("utf-8")
        try:
            return store.ingest_csv(text)
        except StoreError as exc:
            raise HTTPException(422, str(exc))

    @app.get("/tasks/contact/next")
    def contact_next(worker: str = Query(...)):
        task = store.next_contact_task(worker)
        if task is None:
            raise HTTPException(404, "no open contact tasks for this worker")
        return task

    @app.post("/tasks/contact/{task_id}/response")
    def contact_response(task_id: str, body: ContactResponseBody):
        try:
            return store.submit_contact_response(task_id, body.worker, body.right, body.left)
        except KeyError:
            raise HTTPException(404, f"unknown contact task {task_id!r}")
        except DuplicateResponse as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:
            raise HTTPException(422, str(exc))

    @app.get("/tasks/therblig/next")
    def therblig_next(worker: str = Query(...)):
        task = store.next_therblig_task(worker)
        if task is None:
            raise HTTPException(404, "no open therblig tasks")
        return task

    @app.post("/tasks/therblig/{task_id}/candidates")
    def candidates(task_id: str, body: CandidatesBody):
        try:
            return {
                "candidates": store.next_candidates(
                    task_id,
                    parse_hand(body.c_prev),
                    parse_hand(body.c_next),
                    parse_seq(body.partial),
                )
            }
        except KeyError:
            raise HTTPException(404, f"unknown segment {task_id!r}")
        except (StoreError, SequenceError) as exc:
            raise HTTPException(422, str(exc))

    @app.post("/tasks/therblig/{task_id}/submit")
    def submit(task_id: str, body: SubmitBody):
        try:
            accepted, violations = store.submit_annotation(
                task_id,
                body.worker,
                parse_hand(body.c_prev),
                parse_hand(body.c_next),
                parse_seq(body.therbligs),
            )
        except KeyError:
            raise HTTPException(404, f"unknown segment {task_id!r}")
        if accepted:
            return {"status": "accepted", "segment_id": task_id}
        raise HTTPException(
            status_code=422,
            detail={"status": "rejected", "violations": violations},
        )

    @app.get("/export")
    def export(video: Optional[str] = None):
        return PlainTextResponse(store.export(video), media_type="application/jsonl")

    return app
