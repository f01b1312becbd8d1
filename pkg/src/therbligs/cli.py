"""Command-line entry point. Machine-readable JSON on stdout, diagnostics on stderr."""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import core, datagen, losses, metrics, records
from .core import DEFAULT_MAX_STEPS, ObjectVocabulary
from .service import AnnotationStore, create_app


def _emit(doc) -> None:
    click.echo(json.dumps(doc, sort_keys=True))


def _fail(message: str, code: int = 1):
    _emit({"error": message})
    sys.exit(code)


def _load_vocab(path) -> ObjectVocabulary:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return ObjectVocabulary(json.loads(text))
    return ObjectVocabulary(line.strip() for line in text.splitlines() if line.strip())


def _vocab_for_records(vocab_path, recs) -> ObjectVocabulary:
    if vocab_path:
        return _load_vocab(vocab_path)
    return records.vocabulary_from_records(recs)


@click.group()
def main():
    """Therblig rule engine, losses, metrics, data generation and annotation service."""


@main.command()
@click.argument("records_file", type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--n", "n_max", type=int, default=DEFAULT_MAX_STEPS, show_default=True)
@click.option("--strict-hold/--no-strict-hold", default=True, show_default=True)
def validate(records_file, vocab_path, n_max, strict_hold):
    """Validate every record in a JSONL file; exit 1 if any violation."""
    recs = records.read_records(records_file)
    vocab = _vocab_for_records(vocab_path, recs)
    reports = []
    total = 0
    for rec in recs:
        seq = records.sequence_from_doc(rec["therbligs"], vocab, n_max)
        report = core.validate_sequence(
            records.hand_from_doc(rec["c_prev"], vocab).to_set(vocab),
            seq,
            records.hand_from_doc(rec["c_next"], vocab).to_set(vocab),
            strict_hold=strict_hold,
            n_max=n_max,
        )
        total += len(report.violations)
        reports.append(
            {
                "segment_id": rec["segment_id"],
                "ok": report.ok,
                "violations": [
                    {"rule": v.rule, "step": v.step, "message": v.message}
                    for v in report.violations
                ],
            }
        )
    _emit({"records": len(reports), "total_violations": total, "reports": reports})
    sys.exit(0 if total == 0 else 1)


@main.command("filter")
@click.option("--state", required=True, help='Contact set, e.g. "[knife]"')
@click.option("--goal", default=None, help="Optional goal contact set for look-ahead filtering")
@click.option("--remaining", type=int, default=DEFAULT_MAX_STEPS, show_default=True)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), required=True)
@click.option("--strict-hold/--no-strict-hold", default=True, show_default=True)
def filter_cmd(state, goal, remaining, vocab_path, strict_hold):
    """List the rule-consistent candidate tuples from a contact state."""
    vocab = _load_vocab(vocab_path)
    try:
        c = core.parse_contacts(state, vocab)
        if goal is None:
            cands = core.candidate_tuples(c, vocab, strict_hold)
        else:
            cands = core.candidate_tuples_with_goal(
                c, core.parse_contacts(goal, vocab), remaining, vocab, strict_hold
            )
    except ValueError as exc:
        _fail(str(exc))
    _emit(
        {
            "state": state,
            "count": len(cands),
            "candidates": [core.format_tuple(t, vocab) for t in sorted(cands)],
        }
    )


@main.command("metrics")
@click.option("--pred", type=click.Path(exists=True), required=True)
@click.option("--gt", type=click.Path(exists=True), required=True)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--n", "n_max", type=int, default=DEFAULT_MAX_STEPS, show_default=True)
@click.option("--strict-hold/--no-strict-hold", default=True, show_default=True)
@click.option("--frames", is_flag=True, help="Treat inputs as JSON arrays of frame labels")
@click.option("--csv-out", type=click.Path(), default=None, help="Append per-video CSV rows")
def metrics_cmd(pred, gt, vocab_path, n_max, strict_hold, frames, csv_out):
    """Compare prediction and ground-truth files and emit a metrics report."""
    if frames:
        p = json.loads(Path(pred).read_text(encoding="utf-8"))
        g = json.loads(Path(gt).read_text(encoding="utf-8"))
        report = {
            "frame_accuracy": metrics.frame_accuracy(p, g),
            "segmental_edit_distance": metrics.segmental_edit_distance(p, g),
            "segmental_edit_score": metrics.segmental_edit_score(p, g),
        }
        for k in (10, 25, 50):
            precision, recall, f1 = metrics.f1_at_k(p, g, k)
            report[f"f1@{k}"] = {"precision": precision, "recall": recall, "f1": f1}
        _emit(report)
        return
    pred_recs = {r["segment_id"]: r for r in records.read_records(pred)}
    gt_recs = {r["segment_id"]: r for r in records.read_records(gt)}
    vocab = _vocab_for_records(vocab_path, list(pred_recs.values()) + list(gt_recs.values()))
    shared = sorted(set(pred_recs) & set(gt_recs))
    if not shared:
        _fail("prediction and ground truth share no segment ids")
    rows = []
    for seg_id in shared:
        pr, gr = pred_recs[seg_id], gt_recs[seg_id]
        p_seq = records.sequence_from_doc(pr["therbligs"], vocab, n_max)
        g_seq = records.sequence_from_doc(gr["therbligs"], vocab, n_max)
        rows.append(
            {
                "segment_id": seg_id,
                "video_id": gr["video_id"],
                "elementwise_accuracy": metrics.elementwise_accuracy(p_seq, g_seq, n_max),
                "levenshtein": metrics.sequence_levenshtein(p_seq, g_seq),
                "logical_consistency": metrics.logical_consistency(
                    p_seq,
                    records.hand_from_doc(pr["c_prev"], vocab).to_set(vocab),
                    records.hand_from_doc(pr["c_next"], vocab).to_set(vocab),
                    strict_hold=strict_hold,
                    n_max=n_max,
                ),
            }
        )
    report = {
        "segments": len(rows),
        "elementwise_accuracy": sum(r["elementwise_accuracy"] for r in rows) / len(rows),
        "levenshtein": sum(r["levenshtein"] for r in rows) / len(rows),
        "logical_consistency": sum(r["logical_consistency"] for r in rows) / len(rows),
        "per_segment": rows,
    }
    if csv_out:
        _write_video_csv(csv_out, rows)
    _emit(report)


def _write_video_csv(path, rows):
    import csv as _csv
    from collections import defaultdict

    by_video = defaultdict(list)
    for r in rows:
        by_video[r["video_id"]].append(r)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["video_id", "segments", "elementwise_accuracy", "levenshtein", "logical_consistency"])
        for vid in sorted(by_video):
            rs = by_video[vid]
            w.writerow(
                [
                    vid,
                    len(rs),
                    sum(r["elementwise_accuracy"] for r in rs) / len(rs),
                    sum(r["levenshtein"] for r in rs) / len(rs),
                    sum(r["logical_consistency"] for r in rs) / len(rs),
                ]
            )


@main.command()
@click.argument("instance_file", type=click.Path(exists=True))
def loss(instance_file):
    """Evaluate the combined rule loss on a serialized loss instance."""
    try:
        inst = losses.LossInstance.from_json(Path(instance_file).read_text(encoding="utf-8"))
        _emit(inst.loss().to_dict())
    except ValueError as exc:
        _fail(str(exc))


@main.command()
@click.argument("instance_file", type=click.Path(exists=True))
@click.option("--h", "h", type=float, default=1e-5, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
def gradcheck(instance_file, h, tol):
    """Compare analytic gradients against central finite differences."""
    try:
        inst = losses.LossInstance.from_json(Path(instance_file).read_text(encoding="utf-8"))
        err = float(inst.gradcheck(h))
    except ValueError as exc:
        _fail(str(exc))
    _emit({"max_rel_err": err, "tol": tol, "ok": err <= tol})
    sys.exit(0 if err <= tol else 1)


@main.command()
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--vocab-size", type=int, default=5, show_default=True)
@click.option("--videos", type=int, default=10, show_default=True)
@click.option("--chunks", type=int, default=4, show_default=True)
@click.option("--n", "n_max", type=int, default=DEFAULT_MAX_STEPS, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict-hold/--no-strict-hold", default=True, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def gen(vocab_path, vocab_size, videos, chunks, n_max, seed, strict_hold, out):
    """Generate a seeded synthetic dataset in the canonical JSONL format."""
    vocab = _load_vocab(vocab_path) if vocab_path else ObjectVocabulary.generic(vocab_size)
    count = datagen.gen_dataset(
        vocab, videos, chunks, out, n_max=n_max, seed=seed, strict_hold=strict_hold
    )
    _emit({"records": count, "path": str(out), "seed": seed})


def _store_from_options(store_path, vocab_path, n_max, strict_hold) -> AnnotationStore:
    path = store_path or os.environ.get("THERBLIG_STORE") or "therblig_store.jsonl"
    if vocab_path:
        vocab = _load_vocab(vocab_path)
    else:
        vocab = ObjectVocabulary.generic(5)
    return AnnotationStore(path, vocab, n_max=n_max, strict_hold=strict_hold)


@main.command()
@click.argument("csv_file", type=click.Path(exists=True))
@click.option("--store", "store_path", type=click.Path(), default=None,
              help="Store path (default: $THERBLIG_STORE or ./therblig_store.jsonl)")
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--n", "n_max", type=int, default=DEFAULT_MAX_STEPS, show_default=True)
@click.option("--strict-hold/--no-strict-hold", default=True, show_default=True)
def ingest(csv_file, store_path, vocab_path, n_max, strict_hold):
    """Ingest an action-segment CSV into the annotation store."""
    store = _store_from_options(store_path, vocab_path, n_max, strict_hold)
    try:
        result = store.ingest_csv(Path(csv_file).read_text(encoding="utf-8"))
    except ValueError as exc:
        _fail(str(exc))
    _emit(result)


@main.command()
@click.option("--addr", default="127.0.0.1:8077", show_default=True, help="HOST:PORT")
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--n", "n_max", type=int, default=DEFAULT_MAX_STEPS, show_default=True)
@click.option("--strict-hold/--no-strict-hold", default=True, show_default=True)
def serve(addr, store_path, vocab_path, n_max, strict_hold):
    """Run the two-stage annotation HTTP service."""
    import uvicorn

    host, _, port = addr.partition(":")
    store = _store_from_options(store_path, vocab_path, n_max, strict_hold)
    app = create_app(store)
    click.echo(f"serving on {host}:{port or 8077} (store: {store.path})", err=True)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8077), log_level="warning")


if __name__ == "__main__":
    main()
