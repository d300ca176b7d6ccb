"""Training-target assignment and scene augmentation.

Points are labeled from the ground-truth boxes directly (interior points
are foreground); a margin-enlarged shell around each box is ignored so
that near-boundary points supervise neither class. Proposals are labeled
by their best volume IoU against the ground truths. Scene augmentation
applies a mirror flip, a global scale and a global yaw rotation jointly
to points and boxes; ground-truth pasting copies whole boxes with their
interior points from a donor pool into non-overlapping spots.
"""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geom import Box3D, PointCloud, boxes_to_array, points_in_box, wrap_angle
from .iou import bev_iou_matrix, iou_3d_matrix
from .pool import enlarge_box

POSITIVE_IOU = 0.6
NEGATIVE_IOU = 0.45
REGRESSION_IOU = 0.55


class PointLabel(IntEnum):
    BACKGROUND = 0
    FOREGROUND = 1
    IGNORED = 2


@dataclass
class ProposalLabel:
    cls: str  # "positive" | "negative" | "ignored"
    regression_gt: Box3D | None
    max_iou: float


@dataclass
class AugmentConfig:
    flip_prob: float = 0.5
    scale_range: tuple = (0.95, 1.05)
    rot_range: float = np.deg2rad(10.0)
    gtaug_pool: list = field(default_factory=list)  # (Box3D, PointCloud) donors
    gtaug_max_boxes: int = 10


def label_points(cloud: PointCloud, gt_boxes, ignore_margin):
    """Per-point labels; the margin adds ``ignore_margin`` on each side."""
    if ignore_margin < 0:
        raise ValueError("ignore_margin must be nonnegative")
    labels = np.full(len(cloud), PointLabel.BACKGROUND, dtype=np.int64)
    if not gt_boxes:
        return labels
    fg = np.zeros(len(cloud), dtype=bool)
    near = np.zeros(len(cloud), dtype=bool)
    for box in gt_boxes:
        fg |= points_in_box(cloud.xyz, box)
        near |= points_in_box(cloud.xyz, enlarge_box(box, 2.0 * ignore_margin))
    labels[near & ~fg] = PointLabel.IGNORED
    labels[fg] = PointLabel.FOREGROUND
    return labels


def label_proposals(proposals, gt_boxes, pos_iou=POSITIVE_IOU, neg_iou=NEGATIVE_IOU,
                    reg_iou=REGRESSION_IOU):
    """Classify proposals by max volume IoU and attach regression targets.

    Max IoU at or above ``pos_iou`` is positive, below ``neg_iou``
    negative, in between ignored for classification; the best-IoU ground
    truth is attached whenever the max reaches ``reg_iou``.
    """
    if not proposals:
        return []
    if not gt_boxes:
        return [ProposalLabel("negative", None, 0.0) for _ in proposals]
    ious = iou_3d_matrix(boxes_to_array(proposals), boxes_to_array(gt_boxes))
    best = ious.argmax(axis=1)
    out = []
    for i, p in enumerate(proposals):
        m = float(ious[i, best[i]])
        cls = "positive" if m >= pos_iou else ("negative" if m < neg_iou else "ignored")
        out.append(ProposalLabel(cls, gt_boxes[best[i]] if m >= reg_iou else None, m))
    return out


def _flip(xyz, boxes):
    xyz = xyz * np.array([-1.0, 1.0, 1.0])
    boxes = boxes.copy()
    boxes[:, 0] = -boxes[:, 0]
    boxes[:, 6] = wrap_angle(np.pi - boxes[:, 6])
    return xyz, boxes


def augment_scene(cloud: PointCloud, gt_boxes, cfg: AugmentConfig, rng_seed):
    """Jointly flip / scale / rotate the cloud and its boxes (seeded)."""
    rng = np.random.default_rng(rng_seed)
    do_flip = rng.random() < cfg.flip_prob
    scale = rng.uniform(*cfg.scale_range)
    rot = rng.uniform(-cfg.rot_range, cfg.rot_range)

    xyz = cloud.xyz.copy()
    boxes = boxes_to_array(gt_boxes)
    if do_flip:
        xyz, boxes = _flip(xyz, boxes)
    xyz *= scale
    boxes[:, :3] *= scale
    boxes[:, 3:6] *= scale
    c, s = np.cos(rot), np.sin(rot)
    rot_xz = np.array([[c, -s], [s, c]])
    xyz[:, [0, 2]] = xyz[:, [0, 2]] @ rot_xz.T
    boxes[:, [0, 2]] = boxes[:, [0, 2]] @ rot_xz.T
    boxes[:, 6] = wrap_angle(boxes[:, 6] + rot)
    return PointCloud(xyz, cloud.intensity.copy()), [Box3D.from_array(b) for b in boxes]


def gt_aug(cloud: PointCloud, gt_boxes, cfg: AugmentConfig, rng_seed):
    """Paste donor boxes (and their points) that overlap nothing in BEV."""
    if not cfg.gtaug_pool:
        raise ValueError("gtaug_pool is empty")
    rng = np.random.default_rng(rng_seed)
    candidates = rng.permutation(len(cfg.gtaug_pool))[: cfg.gtaug_max_boxes]
    boxes = list(gt_boxes)
    xyz = [cloud.xyz]
    intensity = [cloud.intensity]
    for ci in candidates:
        box, pts = cfg.gtaug_pool[ci]
        if boxes:
            overlap = bev_iou_matrix(box.as_array(), boxes_to_array(boxes))
            if overlap.max() > 0.0:
                continue
        boxes.append(box)
        xyz.append(pts.xyz)
        intensity.append(pts.intensity)
    return PointCloud(np.concatenate(xyz), np.concatenate(intensity)), boxes
