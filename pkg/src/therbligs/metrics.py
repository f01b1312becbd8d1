"""Evaluation metrics: sequence-level (accuracy, edit distance, consistency)
and frame-level temporal segmentation metrics (accuracy, edit score, F1@k)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, List, Sequence, Tuple

from .core import (
    ContactSet,
    DEFAULT_MAX_STEPS,
    TherbligTuple,
    pad_sequence,
    strip_padding,
    validate_sequence,
)


def elementwise_accuracy(
    pred: Sequence[TherbligTuple],
    gt: Sequence[TherbligTuple],
    n_max: int = DEFAULT_MAX_STEPS,
) -> float:
    """Fraction of the N padded slots whose (verb, object) match exactly.

    Both sequences are padded with Null to the cap, so stopping early at the
    right point counts as correct slots.
    """
    p = pad_sequence(pred, n_max)
    g = pad_sequence(gt, n_max)
    return sum(a == b for a, b in zip(p, g)) / n_max


def levenshtein(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Minimal insert/delete/substitute count, standard dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[len(b)]


def sequence_levenshtein(
    pred: Sequence[TherbligTuple], gt: Sequence[TherbligTuple]
) -> int:
    """Edit distance between two Therblig sequences, padding stripped first."""
    return levenshtein(strip_padding(pred), strip_padding(gt))


def logical_consistency(
    pred: Sequence[TherbligTuple],
    c_start: ContactSet,
    c_end: ContactSet,
    strict_hold: bool = True,
    n_max: int = DEFAULT_MAX_STEPS,
) -> float:
    """Rule 1-3 violation count normalized by the non-null predicted length."""
    report = validate_sequence(c_start, pred, c_end, strict_hold=strict_hold, n_max=n_max)
    return len(report.violations) / max(1, len(strip_padding(pred)))


# ---------------------------------------------------------------------------
# Frame-level temporal segmentation metrics.
# ---------------------------------------------------------------------------

FrameLabeling = Sequence[Hashable]


@dataclass(frozen=True)
class Segment:
    label: Hashable
    start: int  # inclusive
    end: int    # exclusive

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("segment start must precede end")

    def __len__(self) -> int:
        return self.end - self.start


def segments_from_frames(frames: FrameLabeling) -> List[Segment]:
    """Maximal runs of equal labels; concatenation reproduces the input."""
    if not len(frames):
        raise ValueError("frame labeling must be non-empty")
    out = []
    start = 0
    for i in range(1, len(frames)):
        if frames[i] != frames[i - 1]:
            out.append(Segment(frames[start], start, i))
            start = i
    out.append(Segment(frames[start], start, len(frames)))
    return out


def frames_from_segments(segments: Sequence[Segment]) -> List[Hashable]:
    out: List[Hashable] = []
    for s in segments:
        out.extend([s.label] * len(s))
    return out


def frame_accuracy(pred: FrameLabeling, gt: FrameLabeling) -> float:
    if len(pred) != len(gt):
        raise ValueError("frame labelings must have equal length")
    return sum(p == g for p, g in zip(pred, gt)) / len(gt)


def segmental_edit_distance(pred: FrameLabeling, gt: FrameLabeling) -> int:
    """Raw edit distance between the run-length label strings."""
    return levenshtein(
        [s.label for s in segments_from_frames(pred)],
        [s.label for s in segments_from_frames(gt)],
    )


def segmental_edit_score(pred: FrameLabeling, gt: FrameLabeling) -> float:
    """Normalized edit similarity in [0, 100]."""
    p = [s.label for s in segments_from_frames(pred)]
    g = [s.label for s in segments_from_frames(gt)]
    return 100.0 * (1.0 - levenshtein(p, g) / max(len(p), len(g)))


def _iou(a: Segment, b: Segment) -> float:
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = max(a.end, b.end) - min(a.start, b.start)
    # segments from one labeling never have zero union
    return inter / union


def f1_at_k(pred: FrameLabeling, gt: FrameLabeling, k: float) -> Tuple[float, float, float]:
    """Segmental (precision, recall, F1) at IoU threshold k percent.

    Each predicted segment greedily claims the unmatched same-label ground
    truth segment of highest IoU; the claim is a true positive when the IoU
    reaches k/100, a false positive otherwise. Unclaimed ground truth
    segments are false negatives.
    """
    if len(pred) != len(gt):
        raise ValueError("frame labelings must have equal length")
    if not 0 < k < 100:
        raise ValueError("k must lie in (0, 100)")
    pred_segs = segments_from_frames(pred)
    gt_segs = segments_from_frames(gt)
    used = [False] * len(gt_segs)
    tp = fp = 0
    for ps in pred_segs:
        best_iou, best_j = 0.0, -1
        for j, gs in enumerate(gt_segs):
            if used[j] or gs.label != ps.label:
                continue
            iou = _iou(ps, gs)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= k / 100.0:
            used[best_j] = True
            tp += 1
        else:
            fp += 1
    fn = used.count(False)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
