"""Bin-based box target encoding and decoding.

Two codecs plus ablation encodings:

  * stage-1: encodes a ground-truth box relative to an interior point.
    Ground-plane center offsets are split into a classification bin of
    uniform size plus a normalized residual inside the bin; the vertical
    offset and the sizes (relative to a class mean size) are direct
    residuals; yaw is binned over the full circle the same way as the
    center axes.
  * refinement: encodes a ground-truth box relative to a proposal box,
    both expressed in the proposal's canonical frame, with a smaller
    search range and yaw binned over a quarter turn only.
  * variants RB / RCB / PBB: direct-residual, residual-with-cos-sin, and
    partial-bin (yaw bins only) encodings used by the loss ablation.

All encoders come in scalar (dataclass) and batch (array) forms; batch
forms are the implementation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geom import Box3D, wrap_angle

QUARTER_PI = math.pi / 4.0


class EncodeError(ValueError):
    """Raised when a target falls outside the codec's representable range."""


def _check_integral(value, what):
    n = round(value)
    if abs(value - n) > 1e-9 or n < 1:
        raise ValueError(f"{what} must be a positive integer, got {value}")
    return int(n)


@dataclass(frozen=True)
class HyperParams:
    """Codec geometry: search ranges, bin sizes and bin counts.

    ``center_norm`` is the residual normalizer for the binned center
    axes; it equals the bin size, which makes those residuals
    dimensionless in [-0.5, 0.5].
    """

    search_range: float = 3.0
    bin_size: float = 0.5
    orient_bins: int = 12
    refine_range: float = 1.5
    refine_orient_bin: float = math.pi / 18.0
    context_width: float = 1.0
    center_norm: float | None = None

    def __post_init__(self):
        if self.center_norm is None:
            object.__setattr__(self, "center_norm", self.bin_size)
        for name in ("search_range", "bin_size", "refine_range", "refine_orient_bin", "center_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.context_width < 0:
            raise ValueError("context_width must be nonnegative")
        if self.orient_bins < 1:
            raise ValueError("orient_bins must be positive")
        if abs(self.center_norm - self.bin_size) > 1e-12:
            raise ValueError("center_norm must equal bin_size")
        _check_integral(2 * self.search_range / self.bin_size, "2*search_range/bin_size")
        _check_integral(2 * self.refine_range / self.bin_size, "2*refine_range/bin_size")
        _check_integral(math.pi / 2 / self.refine_orient_bin, "quarter-turn/refine_orient_bin")

    @property
    def loc_bins(self):
        return round(2 * self.search_range / self.bin_size)

    @property
    def refine_loc_bins(self):
        return round(2 * self.refine_range / self.bin_size)

    @property
    def refine_orient_bins(self):
        return round(math.pi / 2 / self.refine_orient_bin)


@dataclass(frozen=True)
class ClassMeanSize:
    h: float
    w: float
    l: float

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError("mean sizes must be positive")

    def as_array(self):
        return np.array([self.h, self.w, self.l])


DEFAULT_MEAN_SIZE = ClassMeanSize(h=1.5, w=1.6, l=3.9)


@dataclass
class StageOneTargets:
    bin_x: int
    res_x: float
    bin_z: int
    res_z: float
    res_y: float
    bin_theta: int
    res_theta: float
    res_h: float
    res_w: float
    res_l: float


@dataclass
class RefineTargets:
    bin_dx: int
    res_dx: float
    bin_dz: int
    res_dz: float
    res_dy: float
    bin_dtheta: int
    res_dtheta: float
    res_dh: float
    res_dw: float
    res_dl: float


@dataclass
class Stage1TargetArrays:
    bin_x: np.ndarray
    res_x: np.ndarray
    bin_z: np.ndarray
    res_z: np.ndarray
    res_y: np.ndarray
    bin_theta: np.ndarray
    res_theta: np.ndarray
    res_h: np.ndarray
    res_w: np.ndarray
    res_l: np.ndarray

    def __len__(self):
        return len(self.bin_x)

    def row(self, i):
        return StageOneTargets(
            int(self.bin_x[i]), float(self.res_x[i]),
            int(self.bin_z[i]), float(self.res_z[i]), float(self.res_y[i]),
            int(self.bin_theta[i]), float(self.res_theta[i]),
            float(self.res_h[i]), float(self.res_w[i]), float(self.res_l[i]),
        )

    @classmethod
    def from_rows(cls, rows):
        return cls(
            bin_x=np.array([r.bin_x for r in rows], dtype=np.int64),
            res_x=np.array([r.res_x for r in rows]),
            bin_z=np.array([r.bin_z for r in rows], dtype=np.int64),
            res_z=np.array([r.res_z for r in rows]),
            res_y=np.array([r.res_y for r in rows]),
            bin_theta=np.array([r.bin_theta for r in rows], dtype=np.int64),
            res_theta=np.array([r.res_theta for r in rows]),
            res_h=np.array([r.res_h for r in rows]),
            res_w=np.array([r.res_w for r in rows]),
            res_l=np.array([r.res_l for r in rows]),
        )


@dataclass
class RefineTargetArrays:
    bin_dx: np.ndarray
    res_dx: np.ndarray
    bin_dz: np.ndarray
    res_dz: np.ndarray
    res_dy: np.ndarray
    bin_dtheta: np.ndarray
    res_dtheta: np.ndarray
    res_dh: np.ndarray
    res_dw: np.ndarray
    res_dl: np.ndarray

    def __len__(self):
        return len(self.bin_dx)

    def row(self, i):
        return RefineTargets(
            int(self.bin_dx[i]), float(self.res_dx[i]),
            int(self.bin_dz[i]), float(self.res_dz[i]), float(self.res_dy[i]),
            int(self.bin_dtheta[i]), float(self.res_dtheta[i]),
            float(self.res_dh[i]), float(self.res_dw[i]), float(self.res_dl[i]),
        )


# ---------------------------------------------------------------------------
# shared 1D codecs


def _encode_center_axis(offset, search_range, bin_size, norm, axis_name):
    """offset -> (bin, residual). Valid offsets lie in [-range, +range)."""
    shifted = offset + search_range
    bins = np.floor(shifted / bin_size)
    n_bins = round(2 * search_range / bin_size)
    bad = (bins < 0) | (bins >= n_bins)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EncodeError(
            f"center offset {np.asarray(offset).reshape(-1)[i]:+.3f} m on axis "
            f"{axis_name} outside the [-{search_range}, {search_range}) search range"
        )
    res = (shifted - (bins * bin_size + bin_size / 2)) / norm
    return bins.astype(np.int64), res


def _decode_center_axis(bins, res, search_range, bin_size, norm):
    return bins * bin_size + bin_size / 2 - search_range + norm * res


def encode_full_angle(theta, n_bins):
    """Full-circle yaw codec: bin over [-pi, pi), residual in bin widths."""
    width = 2 * math.pi / n_bins
    shifted = np.asarray(wrap_angle(theta)) + math.pi
    bins = np.minimum(np.floor(shifted / width), n_bins - 1)
    res = (shifted - (bins * width + width / 2)) / width
    return bins.astype(np.int64), res


def decode_full_angle(bins, res, n_bins):
    width = 2 * math.pi / n_bins
    return wrap_angle(-math.pi + (np.asarray(bins) + 0.5) * width + np.asarray(res) * width)


# Yaw differences outside the quarter-turn window by at most this much are
# clamped onto the window edge instead of rejected.
ANGLE_CLAMP_SLACK = math.pi / 16.0

_angle_clamps = 0


def angle_clamp_count():
    """Number of refine encodings whose yaw difference needed clamping."""
    return _angle_clamps


def reset_angle_clamp_count():
    global _angle_clamps
    _angle_clamps = 0


def _encode_quarter_angle(delta, hp: HyperParams):
    """Quarter-turn yaw codec; residual normalizer is 2/bin-width."""
    global _angle_clamps
    delta = np.asarray(delta, dtype=np.float64)
    over = np.abs(delta) > QUARTER_PI
    if np.any(np.abs(delta) > QUARTER_PI + ANGLE_CLAMP_SLACK):
        i = int(np.argmax(np.abs(delta) > QUARTER_PI + ANGLE_CLAMP_SLACK))
        raise EncodeError(
            f"yaw difference {delta.reshape(-1)[i]:+.4f} rad exceeds the quarter-turn "
            f"window by more than {ANGLE_CLAMP_SLACK:.4f} rad"
        )
    if np.any(over):
        _angle_clamps += int(np.count_nonzero(over))
        delta = np.clip(delta, -QUARTER_PI, QUARTER_PI)
    omega = hp.refine_orient_bin
    shifted = delta + QUARTER_PI
    bins = np.minimum(np.floor(shifted / omega), hp.refine_orient_bins - 1)
    res = (2.0 / omega) * (shifted - (bins * omega + omega / 2))
    return bins.astype(np.int64), res


def _decode_quarter_angle(bins, res, hp: HyperParams):
    omega = hp.refine_orient_bin
    return np.asarray(bins) * omega + omega / 2 + (omega / 2) * np.asarray(res) - QUARTER_PI


# ---------------------------------------------------------------------------
# stage-1 codec


def encode_stage1_batch(points, gt_boxes, mean: ClassMeanSize, hp: HyperParams):
    """Encode (N, 7) ground-truth boxes against their (N, 3) interior points."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 7)
    bin_x, res_x = _encode_center_axis(
        gt[:, 0] - points[:, 0], hp.search_range, hp.bin_size, hp.center_norm, "x"
    )
    bin_z, res_z = _encode_center_axis(
        gt[:, 2] - points[:, 2], hp.search_range, hp.bin_size, hp.center_norm, "z"
    )
    bin_t, res_t = encode_full_angle(gt[:, 6], hp.orient_bins)
    return Stage1TargetArrays(
        bin_x=bin_x, res_x=res_x, bin_z=bin_z, res_z=res_z,
        res_y=gt[:, 1] - points[:, 1],
        bin_theta=bin_t, res_theta=res_t,
        res_h=gt[:, 3] - mean.h, res_w=gt[:, 4] - mean.w, res_l=gt[:, 5] - mean.l,
    )


def decode_stage1_batch(points, t: Stage1TargetArrays, mean: ClassMeanSize, hp: HyperParams):
    """Invert the stage-1 encoding; returns (N, 7) boxes."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty((len(points), 7))
    out[:, 0] = points[:, 0] + _decode_center_axis(
        t.bin_x, t.res_x, hp.search_range, hp.bin_size, hp.center_norm
    )
    out[:, 2] = points[:, 2] + _decode_center_axis(
        t.bin_z, t.res_z, hp.search_range, hp.bin_size, hp.center_norm
    )
    out[:, 1] = points[:, 1] + t.res_y
    out[:, 6] = decode_full_angle(t.bin_theta, t.res_theta, hp.orient_bins)
    out[:, 3] = mean.h + t.res_h
    out[:, 4] = mean.w + t.res_w
    out[:, 5] = mean.l + t.res_l
    return out


def encode_stage1(fg_point, gt: Box3D, mean: ClassMeanSize, hp: HyperParams):
    t = encode_stage1_batch(np.asarray(fg_point).reshape(1, 3), gt.as_array(), mean, hp)
    return t.row(0)


def decode_stage1(point, t: StageOneTargets, mean: ClassMeanSize, hp: HyperParams):
    arrays = Stage1TargetArrays.from_rows([t])
    return Box3D.from_array(decode_stage1_batch(np.asarray(point).reshape(1, 3), arrays, mean, hp)[0])


# ---------------------------------------------------------------------------
# refinement codec


def _local_frame_offsets(proposals, gts):
    """Ground-truth centers expressed in each proposal's canonical frame."""
    c = np.cos(proposals[:, 6])
    s = np.sin(proposals[:, 6])
    dx = gts[:, 0] - proposals[:, 0]
    dy = gts[:, 1] - proposals[:, 1]
    dz = gts[:, 2] - proposals[:, 2]
    return c * dx + s * dz, dy, -s * dx + c * dz


def encode_refine_batch(proposals, gt_boxes, mean: ClassMeanSize, hp: HyperParams):
    """Encode (N, 7) ground truths against (N, 7) proposals in canonical frames.

    Ground-truth yaw is first flipped by a half turn when that brings it
    closer to the proposal's yaw (a box and its half-turn twin occupy the
    same volume), then the difference must fall in the quarter-turn
    window, up to the clamping slack.
    """
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 7)
    gts = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 7)
    lx, ly, lz = _local_frame_offsets(proposals, gts)
    bin_dx, res_dx = _encode_center_axis(lx, hp.refine_range, hp.bin_size, hp.center_norm, "x")
    bin_dz, res_dz = _encode_center_axis(lz, hp.refine_range, hp.bin_size, hp.center_norm, "z")
    delta = wrap_angle(gts[:, 6] - proposals[:, 6])
    flip = np.abs(delta) > math.pi / 2
    delta = np.where(flip, wrap_angle(delta + math.pi), delta)
    bin_dt, res_dt = _encode_quarter_angle(delta, hp)
    return RefineTargetArrays(
        bin_dx=bin_dx, res_dx=res_dx, bin_dz=bin_dz, res_dz=res_dz, res_dy=ly,
        bin_dtheta=bin_dt, res_dtheta=res_dt,
        res_dh=gts[:, 3] - mean.h, res_dw=gts[:, 4] - mean.w, res_dl=gts[:, 5] - mean.l,
    )


def decode_refine_batch(proposals, t: RefineTargetArrays, mean: ClassMeanSize, hp: HyperParams):
    """Invert the refinement encoding back to sensor-frame (N, 7) boxes."""
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 7)
    lx = _decode_center_axis(t.bin_dx, t.res_dx, hp.refine_range, hp.bin_size, hp.center_norm)
    lz = _decode_center_axis(t.bin_dz, t.res_dz, hp.refine_range, hp.bin_size, hp.center_norm)
    c = np.cos(proposals[:, 6])
    s = np.sin(proposals[:, 6])
    out = np.empty((len(proposals), 7))
    out[:, 0] = proposals[:, 0] + c * lx - s * lz
    out[:, 1] = proposals[:, 1] + t.res_dy
    out[:, 2] = proposals[:, 2] + s * lx + c * lz
    out[:, 6] = wrap_angle(proposals[:, 6] + _decode_quarter_angle(t.bin_dtheta, t.res_dtheta, hp))
    out[:, 3] = mean.h + t.res_dh
    out[:, 4] = mean.w + t.res_dw
    out[:, 5] = mean.l + t.res_dl
    return out


def encode_refine(proposal: Box3D, gt: Box3D, mean: ClassMeanSize, hp: HyperParams):
    t = encode_refine_batch(proposal.as_array(), gt.as_array(), mean, hp)
    return t.row(0)


def decode_refine(proposal: Box3D, t: RefineTargets, mean: ClassMeanSize, hp: HyperParams):
    arrays = RefineTargetArrays(
        bin_dx=np.array([t.bin_dx]), res_dx=np.array([t.res_dx]),
        bin_dz=np.array([t.bin_dz]), res_dz=np.array([t.res_dz]),
        res_dy=np.array([t.res_dy]),
        bin_dtheta=np.array([t.bin_dtheta]), res_dtheta=np.array([t.res_dtheta]),
        res_dh=np.array([t.res_dh]), res_dw=np.array([t.res_dw]), res_dl=np.array([t.res_dl]),
    )
    return Box3D.from_array(decode_refine_batch(proposal.as_array(), arrays, mean, hp)[0])


# ---------------------------------------------------------------------------
# ablation variant codecs

VARIANTS = ("RB", "RCB", "CN", "PBB", "BB")

# target-vector widths for the flat encodings
VARIANT_TARGET_DIMS = {"RB": 7, "RCB": 8, "PBB": 8}


def _direct_offsets(points, gts, mean, hp):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 7)
    for axis, col in (("x", 0), ("z", 2)):
        off = gts[:, col] - points[:, col]
        bad = (off < -hp.search_range) | (off >= hp.search_range)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise EncodeError(
                f"center offset {off[i]:+.3f} m on axis {axis} outside the "
                f"[-{hp.search_range}, {hp.search_range}) search range"
            )
    out = np.empty((len(points), 6))
    out[:, 0] = (gts[:, 0] - points[:, 0]) / hp.center_norm
    out[:, 1] = gts[:, 1] - points[:, 1]
    out[:, 2] = (gts[:, 2] - points[:, 2]) / hp.center_norm
    out[:, 3] = gts[:, 3] - mean.h
    out[:, 4] = gts[:, 4] - mean.w
    out[:, 5] = gts[:, 5] - mean.l
    return out, gts


def encode_variant_batch(kind, points, gt_boxes, mean: ClassMeanSize, hp: HyperParams):
    """Flat (N, D) target vectors for the RB / RCB / PBB encodings.

    Layouts (first six columns shared): normalized x offset, y offset,
    normalized z offset, h/w/l residuals, then the yaw columns:
    RB = wrapped yaw; RCB = (cos yaw, sin yaw); PBB = (bin index, residual).
    """
    if kind not in VARIANT_TARGET_DIMS:
        raise ValueError(f"unknown variant {kind!r} (expected one of RB, RCB, PBB)")
    base, gts = _direct_offsets(points, gt_boxes, mean, hp)
    if kind == "RB":
        return np.column_stack([base, wrap_angle(gts[:, 6])])
    if kind == "RCB":
        return np.column_stack([base, np.cos(gts[:, 6]), np.sin(gts[:, 6])])
    bins, res = encode_full_angle(gts[:, 6], hp.orient_bins)
    return np.column_stack([base, bins.astype(np.float64), res])


def decode_variant_batch(kind, points, targets, mean: ClassMeanSize, hp: HyperParams):
    """Invert :func:`encode_variant_batch`; returns (N, 7) boxes."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(targets, dtype=np.float64)
    out = np.empty((len(points), 7))
    out[:, 0] = points[:, 0] + hp.center_norm * t[:, 0]
    out[:, 1] = points[:, 1] + t[:, 1]
    out[:, 2] = points[:, 2] + hp.center_norm * t[:, 2]
    out[:, 3] = mean.h + t[:, 3]
    out[:, 4] = mean.w + t[:, 4]
    out[:, 5] = mean.l + t[:, 5]
    if kind == "RB":
        out[:, 6] = wrap_angle(t[:, 6])
    elif kind == "RCB":
        out[:, 6] = np.arctan2(t[:, 7], t[:, 6])
    elif kind == "PBB":
        out[:, 6] = decode_full_angle(np.rint(t[:, 6]).astype(np.int64), t[:, 7], hp.orient_bins)
    else:
        raise ValueError(f"unknown variant {kind!r}")
    return out


def encode_variant(kind, fg_point, gt: Box3D, mean: ClassMeanSize, hp: HyperParams):
    return encode_variant_batch(kind, np.asarray(fg_point).reshape(1, 3), gt.as_array(), mean, hp)[0]


def decode_variant(kind, point, target_vector, mean: ClassMeanSize, hp: HyperParams):
    arr = decode_variant_batch(
        kind, np.asarray(point).reshape(1, 3), np.asarray(target_vector).reshape(1, -1), mean, hp
    )
    return Box3D.from_array(arr[0])
