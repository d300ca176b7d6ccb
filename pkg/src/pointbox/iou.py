"""Oriented IoU in bird's-eye view and 3D, plus greedy oriented NMS."""

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .geom import Box3D, boxes_to_array

_DEGENERATE_AREA = 1e-12


@dataclass
class ScoredBox:
    box: Box3D
    score: float

    def __post_init__(self):
        if not np.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be finite and in [0, 1], got {self.score}")


def _check_footprints(*boxes):
    for b in boxes:
        if b[4] * b[5] < _DEGENERATE_AREA:
            raise ValueError("degenerate (zero-area) box footprint")


def bev_iou(a: Box3D, b: Box3D):
    """Exact IoU of the two oriented ground-plane rectangles."""
    aa, ba = a.as_array(), b.as_array()
    _check_footprints(aa, ba)
    inter = kernels.quad_inter_area(kernels.bev_quad(aa), kernels.bev_quad(ba))
    union = a.w * a.l + b.w * b.l - inter
    return inter / union


def iou_3d(a: Box3D, b: Box3D):
    """Volume IoU: clipped footprint area times vertical overlap."""
    aa, ba = a.as_array(), b.as_array()
    _check_footprints(aa, ba)
    inter_area = kernels.quad_inter_area(kernels.bev_quad(aa), kernels.bev_quad(ba))
    h_overlap = max(0.0, min(a.y + a.h / 2, b.y + b.h / 2) - max(a.y - a.h / 2, b.y - b.h / 2))
    inter = inter_area * h_overlap
    union = a.volume + b.volume - inter
    return inter / union


def bev_iou_matrix(boxes_a, boxes_b):
    """(N, M) ground-plane IoU for two (N, 7) / (M, 7) box arrays."""
    boxes_a = np.ascontiguousarray(np.asarray(boxes_a, dtype=np.float64).reshape(-1, 7))
    boxes_b = np.ascontiguousarray(np.asarray(boxes_b, dtype=np.float64).reshape(-1, 7))
    inter = kernels.bev_inter_pairwise(boxes_a, boxes_b)
    area_a = boxes_a[:, 4] * boxes_a[:, 5]
    area_b = boxes_b[:, 4] * boxes_b[:, 5]
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def iou_3d_matrix(boxes_a, boxes_b):
    """(N, M) volume IoU for two box arrays."""
    boxes_a = np.ascontiguousarray(np.asarray(boxes_a, dtype=np.float64).reshape(-1, 7))
    boxes_b = np.ascontiguousarray(np.asarray(boxes_b, dtype=np.float64).reshape(-1, 7))
    inter_area = kernels.bev_inter_pairwise(boxes_a, boxes_b)
    top = np.minimum(
        (boxes_a[:, 1] + boxes_a[:, 3] / 2)[:, None], (boxes_b[:, 1] + boxes_b[:, 3] / 2)[None, :]
    )
    bot = np.maximum(
        (boxes_a[:, 1] - boxes_a[:, 3] / 2)[:, None], (boxes_b[:, 1] - boxes_b[:, 3] / 2)[None, :]
    )
    inter = inter_area * np.clip(top - bot, 0.0, None)
    vol_a = boxes_a[:, 3] * boxes_a[:, 4] * boxes_a[:, 5]
    vol_b = boxes_b[:, 3] * boxes_b[:, 4] * boxes_b[:, 5]
    return inter / (vol_a[:, None] + vol_b[None, :] - inter)


def nms_indices(boxes, scores, iou_threshold, max_keep):
    """Greedy score-descending suppression on an (N, 7) array.

    A candidate is suppressed when its BEV IoU with an already kept box
    exceeds ``iou_threshold`` strictly. Score ties fall back to input
    order, so the result is deterministic. Returns kept indices, best
    score first.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    boxes = np.ascontiguousarray(np.asarray(boxes, dtype=np.float64).reshape(-1, 7))
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(boxes) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-scores, kind="stable").astype(np.int64)
    return kernels.nms_bev(boxes, order, float(iou_threshold), int(max_keep))


def oriented_nms(dets, iou_threshold, max_keep):
    """NMS over a list of :class:`ScoredBox`; output sorted by score."""
    if len(dets) == 0:
        return []
    boxes = boxes_to_array([d.box for d in dets])
    scores = np.array([d.score for d in dets])
    keep = nms_indices(boxes, scores, iou_threshold, max_keep)
    return [dets[i] for i in keep]


def mc_iou_3d(a: Box3D, b: Box3D, n_samples=1_000_000, seed=0):
    """Monte-Carlo volume-IoU estimate (sampling-based, no polygon clipping)."""
    inter = kernels.mc_inter_volume(
        np.ascontiguousarray(a.as_array()),
        np.ascontiguousarray(b.as_array()),
        int(n_samples),
        int(seed),
    )
    return inter / (a.volume + b.volume - inter)
