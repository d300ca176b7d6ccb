"""Core 3D box and point geometry.

Frame conventions, shared by every module in this package:

  * Y is the vertical (up) axis; the X-Z plane is the ground plane.
  * yaw is measured in the ground plane, positive rotating +X toward +Z,
    and stored normalized to [-pi, pi).
  * A box's length ``l`` runs along its heading (the local X' axis),
    width ``w`` across it (local Z'), height ``h`` along Y.
  * Points on a box face count as inside, so membership is deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Normalize an angle (or array of angles) to [-pi, pi)."""
    return (theta + np.pi) % TWO_PI - np.pi


@dataclass
class Box3D:
    """Oriented 3D bounding box: center, sizes and yaw about the vertical axis."""

    x: float
    y: float
    z: float
    h: float
    w: float
    l: float
    theta: float

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError(f"box sizes must be positive, got h={self.h} w={self.w} l={self.l}")
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("box parameters must be finite")
        self.theta = float(wrap_angle(self.theta))

    def as_array(self):
        return np.array([self.x, self.y, self.z, self.h, self.w, self.l, self.theta], dtype=np.float64)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=np.float64)
        return cls(*a[:7])

    @property
    def volume(self):
        return self.h * self.w * self.l

    @property
    def center(self):
        return np.array([self.x, self.y, self.z])


@dataclass
class PointCloud:
    """Point positions (N, 3) plus per-point reflectance in [0, 1]."""

    xyz: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
        if len(self.xyz) != len(self.intensity):
            raise ValueError(
                f"xyz has {len(self.xyz)} points but intensity has {len(self.intensity)} values"
            )
        if len(self.intensity) and (self.intensity.min() < 0 or self.intensity.max() > 1):
            raise ValueError("intensities must lie in [0, 1]")

    def __len__(self):
        return len(self.xyz)


@dataclass
class CanonicalFrame:
    """A box-centered frame: origin at the center, local X' along the heading."""

    origin: np.ndarray
    yaw: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.yaw = float(wrap_angle(self.yaw))

    @classmethod
    def of_box(cls, box: Box3D):
        return cls(box.center, box.theta)


def rotation_about_y(theta):
    """World-from-local rotation for yaw ``theta`` (maps +X' to the heading)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


# Local corner sign pattern: bottom face first, counter-clockwise in the
# (x, z) plane (positive shoelace orientation), then the top face in the
# same order. Columns are (length, height, width) half-extent signs.
CORNER_SIGNS = np.array(
    [
        [+1, -1, +1],
        [-1, -1, +1],
        [-1, -1, -1],
        [+1, -1, -1],
        [+1, +1, +1],
        [-1, +1, +1],
        [-1, +1, -1],
        [+1, +1, -1],
    ],
    dtype=np.float64,
)


def box_corners(box: Box3D):
    """The 8 vertices of a box, (8, 3), in the documented fixed order."""
    local = CORNER_SIGNS * (0.5 * np.array([box.l, box.h, box.w]))
    return box.center + local @ rotation_about_y(box.theta).T


def box_corners_array(boxes):
    """Vectorised corners for an (N, 7) box array -> (N, 8, 3)."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 7)
    half = 0.5 * boxes[:, [5, 3, 4]]  # (l, h, w) half extents
    local = CORNER_SIGNS[None, :, :] * half[:, None, :]
    c, s = np.cos(boxes[:, 6]), np.sin(boxes[:, 6])
    out = np.empty((len(boxes), 8, 3))
    out[:, :, 0] = boxes[:, None, 0] + c[:, None] * local[:, :, 0] - s[:, None] * local[:, :, 2]
    out[:, :, 1] = boxes[:, None, 1] + local[:, :, 1]
    out[:, :, 2] = boxes[:, None, 2] + s[:, None] * local[:, :, 0] + c[:, None] * local[:, :, 2]
    return out


def bev_corners(box: Box3D):
    """Ground-plane footprint, (4, 2) in (x, z), counter-clockwise."""
    return kernels.bev_quad(np.ascontiguousarray(box.as_array()))


def points_in_box(xyz, box: Box3D):
    """Boolean mask over an (N, 3) array; boundary points count as inside."""
    xyz = np.ascontiguousarray(np.asarray(xyz, dtype=np.float64).reshape(-1, 3))
    return kernels.points_in_box_mask(xyz, np.ascontiguousarray(box.as_array()))


def point_in_box(p, box: Box3D):
    """Single-point membership test."""
    return bool(points_in_box(np.asarray(p, dtype=np.float64).reshape(1, 3), box)[0])


def canonical_transform(points, frame: CanonicalFrame):
    """Map sensor-frame points into the box frame (translate, then de-rotate).

    The frame heading lands on the local X' axis; the vertical axis is
    unchanged. Accepts a single point (3,) or an array (..., 3).
    """
    p = np.asarray(points, dtype=np.float64)
    return (p - frame.origin) @ rotation_about_y(frame.yaw)


def canonical_inverse(points_local, frame: CanonicalFrame):
    """Exact inverse of :func:`canonical_transform`."""
    p = np.asarray(points_local, dtype=np.float64)
    return p @ rotation_about_y(frame.yaw).T + frame.origin


def sensor_distance(points):
    """Euclidean distance from the sensor origin, per point."""
    return np.linalg.norm(np.asarray(points, dtype=np.float64), axis=-1)


def boxes_to_array(boxes):
    """Stack Box3D instances into an (N, 7) array."""
    if len(boxes) == 0:
        return np.zeros((0, 7))
    return np.stack([b.as_array() for b in boxes])


def boxes_from_array(arr):
    return [Box3D.from_array(row) for row in np.asarray(arr, dtype=np.float64).reshape(-1, 7)]
