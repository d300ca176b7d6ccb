"""Proposal recall and average precision over frames of oriented boxes."""

import io
from dataclasses import dataclass

import numpy as np

from .geom import boxes_to_array
from .iou import iou_3d_matrix

RECALL_CSV_HEADER = "rois,iou_threshold,matched,total_gt,recall"
PR_CSV_HEADER = "recall,precision"


@dataclass
class RecallReport:
    rois_count: int
    iou_threshold: float
    recall: float
    matched: int
    total_gt: int
    degenerate: bool = False  # true when there were no ground truths


@dataclass
class PRCurve:
    recalls: np.ndarray
    precisions: np.ndarray
    ap: float


def _as_frame_arrays(proposals_per_frame):
    """Accept per-frame ScoredBox lists or (boxes, scores) array pairs."""
    frames = []
    for frame in proposals_per_frame:
        if isinstance(frame, tuple):
            boxes, scores = frame
            frames.append((np.asarray(boxes, dtype=np.float64).reshape(-1, 7),
                           np.asarray(scores, dtype=np.float64).reshape(-1)))
        else:
            frames.append((boxes_to_array([d.box for d in frame]),
                           np.array([d.score for d in frame], dtype=np.float64)))
    return frames


def _as_gt_arrays(gts_per_frame):
    return [g if isinstance(g, np.ndarray) else boxes_to_array(g) for g in gts_per_frame]


def proposal_recall(proposals_per_frame, gts_per_frame, rois, iou_thr):
    """Fraction of ground truths covered by the top-``rois`` proposals.

    A ground truth counts as matched (once) when any of the frame's kept
    proposals reaches ``iou_thr`` volume IoU with it.
    """
    if rois < 1:
        raise ValueError("rois must be at least 1")
    if len(proposals_per_frame) != len(gts_per_frame):
        raise ValueError("proposal and ground-truth frame counts differ")
    frames = _as_frame_arrays(proposals_per_frame)
    gts = _as_gt_arrays(gts_per_frame)
    matched = 0
    total = 0
    for (boxes, scores), gt in zip(frames, gts):
        total += len(gt)
        if len(gt) == 0 or len(boxes) == 0:
            continue
        top = np.argsort(-scores, kind="stable")[:rois]
        ious = iou_3d_matrix(gt, boxes[top])
        matched += int(np.count_nonzero(ious.max(axis=1) >= iou_thr))
    if total == 0:
        return RecallReport(rois, iou_thr, 0.0, 0, 0, degenerate=True)
    return RecallReport(rois, iou_thr, matched / total, matched, total)


def average_precision(dets_per_frame, gts_per_frame, iou_thr, mode="11"):
    """Interpolated AP with greedy score-descending matching.

    Each ground truth is matched at most once. ``mode`` picks the recall
    grid: "11" for {0, 0.1, ..., 1.0} or "40" for {1/40, ..., 40/40}.
    """
    if mode not in ("11", "40"):
        raise ValueError("mode must be '11' or '40'")
    if len(dets_per_frame) != len(gts_per_frame):
        raise ValueError("detection and ground-truth frame counts differ")
    frames = _as_frame_arrays(dets_per_frame)
    gts = _as_gt_arrays(gts_per_frame)
    total_gt = sum(len(g) for g in gts)

    records = []  # (score, frame, det index)
    for fi, (boxes, scores) in enumerate(frames):
        for di in range(len(boxes)):
            records.append((scores[di], fi, di))
    records.sort(key=lambda r: (-r[0], r[1], r[2]))

    iou_tables = [
        iou_3d_matrix(boxes, gt) if len(boxes) and len(gt) else np.zeros((len(boxes), len(gt)))
        for (boxes, _), gt in zip(frames, gts)
    ]
    gt_used = [np.zeros(len(g), dtype=bool) for g in gts]
    tp = np.zeros(len(records))
    for k, (_, fi, di) in enumerate(records):
        ious = iou_tables[fi][di].copy()
        if ious.size == 0:
            continue
        ious[gt_used[fi]] = -1.0
        j = int(np.argmax(ious))
        if ious[j] >= iou_thr:
            tp[k] = 1.0
            gt_used[fi][j] = True

    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(records) + 1)
    precisions = cum_tp / ranks if len(records) else np.zeros(0)
    recalls = cum_tp / total_gt if total_gt else np.zeros(len(records))

    grid = np.linspace(0.0, 1.0, 11) if mode == "11" else np.arange(1, 41) / 40.0
    interp = np.zeros(len(grid))
    for i, r in enumerate(grid):
        above = precisions[recalls >= r - 1e-12]
        interp[i] = above.max() if len(above) else 0.0
    return PRCurve(recalls=recalls, precisions=precisions, ap=float(interp.mean()))


def recall_table(reports):
    """Line-oriented text table of recall reports."""
    out = io.StringIO()
    out.write(f"{'rois':>6} {'iou':>6} {'matched':>8} {'total':>6} {'recall':>8}\n")
    for r in reports:
        out.write(f"{r.rois_count:>6d} {r.iou_threshold:>6.2f} {r.matched:>8d} "
                  f"{r.total_gt:>6d} {r.recall:>8.4f}\n")
    return out.getvalue()


def write_recall_csv(path, reports):
    with open(path, "w") as f:
        f.write(RECALL_CSV_HEADER + "\n")
        for r in reports:
            f.write(f"{r.rois_count},{r.iou_threshold},{r.matched},{r.total_gt},{r.recall:.6f}\n")


def write_pr_csv(path, curve: PRCurve):
    with open(path, "w") as f:
        f.write(PR_CSV_HEADER + "\n")
        for r, p in zip(curve.recalls, curve.precisions):
            f.write(f"{r:.6f},{p:.6f}\n")
