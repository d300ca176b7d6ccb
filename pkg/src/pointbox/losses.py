"""Loss functions with values and hand-derived analytic gradients.

Building blocks (focal, smooth L1, softmax cross-entropy) plus the
composite stage-1 regression loss, the stage-2 refinement loss, and the
ablation variants (RB, RCB, CN, PBB, BB). No autodiff anywhere: every
gradient here is derived by hand and checked against central finite
differences in the test suite.

Composite losses read their predictions from flat per-row vectors whose
column structure is described by the layout classes below.
"""

from dataclasses import dataclass

import numpy as np

from . import codec
from .codec import ClassMeanSize, HyperParams, RefineTargetArrays, Stage1TargetArrays
from .geom import CORNER_SIGNS, box_corners_array

PROB_EPS = 1e-7
SMOOTH_L1_CUTOVER = 1.0


@dataclass(frozen=True)
class FocalParams:
    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")


@dataclass
class LossValueGrad:
    value: float
    grad: np.ndarray
    degenerate: bool = False


@dataclass
class RefineLossResult:
    value: float
    grad_cls: np.ndarray
    grad_reg: np.ndarray


# ---------------------------------------------------------------------------
# elementwise building blocks


def focal_values(p, is_foreground, fp: FocalParams = FocalParams()):
    """Per-element focal loss values and d/dp gradients."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    fg = np.asarray(is_foreground, dtype=bool)
    pt = np.where(fg, p, 1.0 - p)
    at = np.where(fg, fp.alpha, 1.0 - fp.alpha)
    one_m = 1.0 - pt
    log_pt = np.log(pt)
    values = -at * one_m**fp.gamma * log_pt
    if fp.gamma == 0.0:
        d_pt = -at / pt
    else:
        d_pt = at * fp.gamma * one_m ** (fp.gamma - 1.0) * log_pt - at * one_m**fp.gamma / pt
    grads = np.where(fg, d_pt, -d_pt)
    return values, grads


def focal_loss(p, is_foreground, fp: FocalParams = FocalParams()):
    """Focal loss for a single predicted foreground probability."""
    v, g = focal_values(np.array([p]), np.array([is_foreground]), fp)
    return LossValueGrad(float(v[0]), float(g[0]))


def smooth_l1_values(pred, target):
    """Per-element smooth L1 values and d/dpred gradients."""
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    ad = np.abs(d)
    quad = ad < SMOOTH_L1_CUTOVER
    values = np.where(quad, 0.5 * d * d, ad - 0.5)
    grads = np.clip(d, -1.0, 1.0)
    return values, grads


def smooth_l1(pred, target):
    v, g = smooth_l1_values(np.array([pred]), np.array([target]))
    return LossValueGrad(float(v[0]), float(g[0]))


def softmax_ce_rows(logits, true_bins):
    """Row-wise softmax cross-entropy; returns (values (N,), grads (N, K))."""
    logits = np.asarray(logits, dtype=np.float64)
    bins = np.asarray(true_bins, dtype=np.int64)
    if np.any(bins < 0) or np.any(bins >= logits.shape[1]):
        raise IndexError("true bin index outside the logit range")
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    z = ex.sum(axis=1, keepdims=True)
    rows = np.arange(len(logits))
    values = np.log(z[:, 0]) + m[:, 0] - logits[rows, bins]
    grads = ex / z
    grads[rows, bins] -= 1.0
    return values, grads


def softmax_ce(logits, true_bin):
    """Cross-entropy of one logit vector against a class index."""
    v, g = softmax_ce_rows(np.asarray(logits, dtype=np.float64)[None, :], np.array([true_bin]))
    return LossValueGrad(float(v[0]), g[0])


# ---------------------------------------------------------------------------
# prediction-vector layouts


class Stage1PredLayout:
    """Columns of a per-point stage-1 prediction row.

    Order: x-bin logits, z-bin logits, yaw-bin logits, then the scalar
    residual predictions (x, z, yaw, y, h, w, l).
    """

    def __init__(self, hp: HyperParams):
        k, n = hp.loc_bins, hp.orient_bins
        self.x_bins = slice(0, k)
        self.z_bins = slice(k, 2 * k)
        self.theta_bins = slice(2 * k, 2 * k + n)
        base = 2 * k + n
        self.res_x = base
        self.res_z = base + 1
        self.res_theta = base + 2
        self.res_y = base + 3
        self.res_h = base + 4
        self.res_w = base + 5
        self.res_l = base + 6
        self.width = base + 7


class RefinePredLayout:
    """Columns of a per-proposal refinement prediction row (same scheme)."""

    def __init__(self, hp: HyperParams):
        k, n = hp.refine_loc_bins, hp.refine_orient_bins
        self.x_bins = slice(0, k)
        self.z_bins = slice(k, 2 * k)
        self.theta_bins = slice(2 * k, 2 * k + n)
        base = 2 * k + n
        self.res_x = base
        self.res_z = base + 1
        self.res_theta = base + 2
        self.res_y = base + 3
        self.res_h = base + 4
        self.res_w = base + 5
        self.res_l = base + 6
        self.width = base + 7


class VariantPredLayout:
    """Width and yaw-column structure of each ablation head."""

    def __init__(self, kind, hp: HyperParams):
        if kind not in codec.VARIANTS:
            raise ValueError(f"unknown variant {kind!r}")
        self.kind = kind
        if kind in ("RB", "CN"):
            self.width = 7
        elif kind == "RCB":
            self.width = 8
        elif kind == "PBB":
            self.direct = slice(0, 6)
            self.theta_bins = slice(6, 6 + hp.orient_bins)
            self.res_theta = 6 + hp.orient_bins
            self.width = 6 + hp.orient_bins + 1
        else:  # BB
            self.width = Stage1PredLayout(hp).width


# ---------------------------------------------------------------------------
# composite losses


def _bin_and_residual_terms(preds, spec):
    """Shared CE + smooth-L1 assembly for the bin-based composite losses."""
    grad = np.zeros_like(preds)
    total = 0.0
    for sl, bins in spec["bins"]:
        v, g = softmax_ce_rows(preds[:, sl], bins)
        total += v.sum()
        grad[:, sl] += g
    for col, target in spec["residuals"]:
        v, g = smooth_l1_values(preds[:, col], target)
        total += v.sum()
        grad[:, col] += g
    return total, grad


def stage1_loss(preds, targets: Stage1TargetArrays, hp: HyperParams, n_pos=None):
    """Mean per-foreground-point loss: bin CE + residual smooth L1 terms.

    ``preds`` is (N, Stage1PredLayout.width) for the N foreground points;
    an empty batch yields a zero loss flagged as degenerate.
    """
    preds = np.asarray(preds, dtype=np.float64)
    layout = Stage1PredLayout(hp)
    if n_pos is None:
        n_pos = len(preds)
    if n_pos <= 0 or len(preds) == 0:
        return LossValueGrad(0.0, np.zeros_like(preds), degenerate=True)
    if preds.shape[1] != layout.width:
        raise ValueError(f"expected {layout.width} prediction columns, got {preds.shape[1]}")
    spec = {
        "bins": [
            (layout.x_bins, targets.bin_x),
            (layout.z_bins, targets.bin_z),
            (layout.theta_bins, targets.bin_theta),
        ],
        "residuals": [
            (layout.res_x, targets.res_x),
            (layout.res_z, targets.res_z),
            (layout.res_theta, targets.res_theta),
            (layout.res_y, targets.res_y),
            (layout.res_h, targets.res_h),
            (layout.res_w, targets.res_w),
            (layout.res_l, targets.res_l),
        ],
    }
    total, grad = _bin_and_residual_terms(preds, spec)
    return LossValueGrad(total / n_pos, grad / n_pos)


def refine_loss(cls_logits, labels, reg_preds, reg_targets: RefineTargetArrays, hp: HyperParams):
    """Mean confidence CE over all proposals plus mean regression loss
    over the positive ones (zero regression term when there are none)."""
    cls_logits = np.asarray(cls_logits, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(cls_logits) == 0:
        raise ValueError("refine_loss needs at least one labeled proposal")
    v_cls, g_cls = softmax_ce_rows(cls_logits, labels)
    value = v_cls.mean()
    grad_cls = g_cls / len(cls_logits)

    reg_preds = np.asarray(reg_preds, dtype=np.float64)
    layout = RefinePredLayout(hp)
    if reg_preds.size == 0:
        return RefineLossResult(float(value), grad_cls, np.zeros((0, layout.width)))
    spec = {
        "bins": [
            (layout.x_bins, reg_targets.bin_dx),
            (layout.z_bins, reg_targets.bin_dz),
            (layout.theta_bins, reg_targets.bin_dtheta),
        ],
        "residuals": [
            (layout.res_x, reg_targets.res_dx),
            (layout.res_z, reg_targets.res_dz),
            (layout.res_theta, reg_targets.res_dtheta),
            (layout.res_y, reg_targets.res_dy),
            (layout.res_h, reg_targets.res_dh),
            (layout.res_w, reg_targets.res_dw),
            (layout.res_l, reg_targets.res_dl),
        ],
    }
    total, grad_reg = _bin_and_residual_terms(reg_preds, spec)
    n = len(reg_preds)
    return RefineLossResult(float(value + total / n), grad_cls, grad_reg / n)


def corner_loss(preds, points, gt_boxes, mean: ClassMeanSize, hp: HyperParams):
    """Smooth L1 over the 24 corner coordinates of the decoded predicted
    box against the ground truth or its half-turn twin, whichever is
    closer; averaged over corners and instances."""
    preds = np.asarray(preds, dtype=np.float64).reshape(-1, 7)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    gts = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 7)
    n = len(preds)
    boxes = codec.decode_variant_batch("RB", points, preds, mean, hp)
    pred_corners = box_corners_array(boxes)
    gt_flip = gts.copy()
    gt_flip[:, 6] += np.pi
    loss_per = np.empty((2, n))
    grads_c = np.empty((2, n, 8, 3))
    for i, g in enumerate((gts, gt_flip)):
        v, dv = smooth_l1_values(pred_corners, box_corners_array(g))
        loss_per[i] = v.reshape(n, -1).mean(axis=1)
        grads_c[i] = dv / 24.0
    pick = np.argmin(loss_per, axis=0)
    value = loss_per[pick, np.arange(n)].mean()
    gc = grads_c[pick, np.arange(n)]  # (N, 8, 3)

    # chain corner gradients back to the 7 box parameters
    c, s = np.cos(boxes[:, 6]), np.sin(boxes[:, 6])
    half = 0.5 * boxes[:, [5, 3, 4]]
    local = CORNER_SIGNS[None, :, :] * half[:, None, :]  # (N, 8, (l,h,w))
    d_center = gc.sum(axis=1)  # (N, 3)
    d_h = (gc[:, :, 1] * CORNER_SIGNS[None, :, 1] * 0.5).sum(axis=1)
    d_w = ((gc[:, :, 0] * -s[:, None] + gc[:, :, 2] * c[:, None]) * CORNER_SIGNS[None, :, 2] * 0.5).sum(axis=1)
    d_l = ((gc[:, :, 0] * c[:, None] + gc[:, :, 2] * s[:, None]) * CORNER_SIGNS[None, :, 0] * 0.5).sum(axis=1)
    dcx_dtheta = -s[:, None] * local[:, :, 0] - c[:, None] * local[:, :, 2]
    dcz_dtheta = c[:, None] * local[:, :, 0] - s[:, None] * local[:, :, 2]
    d_theta = (gc[:, :, 0] * dcx_dtheta + gc[:, :, 2] * dcz_dtheta).sum(axis=1)

    grad = np.empty((n, 7))
    grad[:, 0] = d_center[:, 0] * hp.center_norm
    grad[:, 1] = d_center[:, 1]
    grad[:, 2] = d_center[:, 2] * hp.center_norm
    grad[:, 3] = d_h
    grad[:, 4] = d_w
    grad[:, 5] = d_l
    grad[:, 6] = d_theta
    return LossValueGrad(float(value), grad / n)


def variant_loss(kind, preds, targets, hp: HyperParams, mean: ClassMeanSize = None,
                 points=None, gt_boxes=None):
    """Dispatch to the regression loss of one ablation encoding.

    RB / RCB take flat target vectors, PBB additionally classifies the yaw
    bin, CN compares decoded corners against ``gt_boxes`` anchored at
    ``points``, and BB is the full stage-1 loss.
    """
    if kind == "BB":
        return stage1_loss(preds, targets, hp)
    if kind == "CN":
        return corner_loss(preds, points, gt_boxes, mean, hp)
    preds = np.asarray(preds, dtype=np.float64)
    n = len(preds)
    if kind in ("RB", "RCB"):
        t = np.asarray(targets, dtype=np.float64)
        v, g = smooth_l1_values(preds, t)
        return LossValueGrad(float(v.sum() / n), g / n)
    if kind == "PBB":
        layout = VariantPredLayout("PBB", hp)
        t = np.asarray(targets, dtype=np.float64)
        grad = np.zeros_like(preds)
        v_d, g_d = smooth_l1_values(preds[:, layout.direct], t[:, :6])
        v_b, g_b = softmax_ce_rows(preds[:, layout.theta_bins], np.rint(t[:, 6]).astype(np.int64))
        v_r, g_r = smooth_l1_values(preds[:, layout.res_theta], t[:, 7])
        grad[:, layout.direct] = g_d
        grad[:, layout.theta_bins] = g_b
        grad[:, layout.res_theta] = g_r
        return LossValueGrad(float((v_d.sum() + v_b.sum() + v_r.sum()) / n), grad / n)
    raise ValueError(f"unknown variant {kind!r}")


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
