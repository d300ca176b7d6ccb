"""KITTI-format file I/O and frame conversions.

File formats (all bit-exactly as used by the public benchmark):

  * point clouds: binary little-endian float32 quadruples (x, y, z, r);
  * object labels: whitespace-separated 15-field text lines, detections
    add the score as a 16th field;
  * calibration: ``key: v0 v1 ...`` rows holding named matrices.

Internally everything lives in one sensor frame: the rectified-camera
frame with the Y axis negated so that Y points up and X-Z is the ground
plane. Label locations (bottom-center, camera frame, Y down) and yaws
are converted at the boundary; velodyne points are brought over through
the calibration matrices.
"""

from dataclasses import dataclass

import numpy as np

from .geom import Box3D, PointCloud, box_corners, wrap_angle

_DONTCARE = "DontCare"

# minimum 2D height (px), max occlusion, max truncation per difficulty
_DIFFICULTY = ((40.0, 0, 0.15), (25.0, 1, 0.30), (25.0, 2, 0.50))


@dataclass
class KittiObject:
    class_name: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: np.ndarray  # (4,): left, top, right, bottom in pixels
    h: float
    w: float
    l: float
    location: np.ndarray  # (3,): bottom-center, rectified camera frame
    rotation_y: float
    score: float | None = None

    def __post_init__(self):
        self.bbox2d = np.asarray(self.bbox2d, dtype=np.float64).reshape(4)
        self.location = np.asarray(self.location, dtype=np.float64).reshape(3)

    @property
    def is_dontcare(self):
        return self.class_name == _DONTCARE

    def difficulty(self):
        """0 easy / 1 moderate / 2 hard, -1 when no level admits the object."""
        height = self.bbox2d[3] - self.bbox2d[1]
        for level, (min_h, max_occ, max_trunc) in enumerate(_DIFFICULTY):
            if height >= min_h and self.occlusion <= max_occ and self.truncation <= max_trunc:
                return level
        return -1


@dataclass
class Calib:
    velo_to_cam: np.ndarray  # (3, 4)
    rect: np.ndarray  # (3, 3)
    cam_proj: np.ndarray  # (3, 4)

    def __post_init__(self):
        self.velo_to_cam = np.asarray(self.velo_to_cam, dtype=np.float64).reshape(3, 4)
        self.rect = np.asarray(self.rect, dtype=np.float64).reshape(3, 3)
        self.cam_proj = np.asarray(self.cam_proj, dtype=np.float64).reshape(3, 4)
        for name in ("velo_to_cam", "rect", "cam_proj"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")
        if np.max(np.abs(self.rect @ self.rect.T - np.eye(3))) > 1e-3:
            raise ValueError("rect must be approximately orthonormal")

    @classmethod
    def identity(cls):
        return cls(np.hstack([np.eye(3), np.zeros((3, 1))]), np.eye(3),
                   np.hstack([np.eye(3), np.zeros((3, 1))]))


def read_velodyne(path):
    """Parse a velodyne ``.bin`` into a cloud (still in the velodyne frame)."""
    raw = np.fromfile(path, dtype=np.uint8)
    if len(raw) % 16 != 0:
        raise ValueError(f"{path}: size {len(raw)} is not a multiple of 16 bytes")
    data = raw.view("<f4").reshape(-1, 4).astype(np.float64)
    return PointCloud(data[:, :3], data[:, 3])


def write_velodyne(path, cloud: PointCloud):
    data = np.column_stack([cloud.xyz, cloud.intensity]).astype("<f4")
    data.tofile(path)


def velo_to_internal(points, calib: Calib):
    """Velodyne-frame points -> internal sensor frame (through the camera)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = p @ calib.velo_to_cam[:, :3].T + calib.velo_to_cam[:, 3]
    rect = cam @ calib.rect.T
    rect[:, 1] *= -1.0
    return rect


def _parse_line(line, line_no, path):
    tokens = line.split()
    if len(tokens) not in (15, 16):
        raise ValueError(f"{path}:{line_no}: expected 15 or 16 fields, got {len(tokens)}")
    try:
        vals = [float(t) for t in tokens[1:]]
    except ValueError as e:
        raise ValueError(f"{path}:{line_no}: non-numeric field ({e})") from None
    return KittiObject(
        class_name=tokens[0],
        truncation=vals[0],
        occlusion=int(vals[1]),
        alpha=vals[2],
        bbox2d=np.array(vals[3:7]),
        h=vals[7], w=vals[8], l=vals[9],
        location=np.array(vals[10:13]),
        rotation_y=vals[13],
        score=vals[14] if len(vals) == 15 else None,
    )


def read_labels(path):
    """Parse a label or detection file; malformed lines carry their number."""
    objects = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if line.strip():
                objects.append(_parse_line(line, line_no, path))
    return objects


def _format_object(obj: KittiObject):
    fields = [
        obj.class_name,
        f"{obj.truncation:.2f}", f"{obj.occlusion:d}", f"{obj.alpha:.2f}",
        *(f"{v:.2f}" for v in obj.bbox2d),
        f"{obj.h:.2f}", f"{obj.w:.2f}", f"{obj.l:.2f}",
        *(f"{v:.2f}" for v in obj.location),
        f"{obj.rotation_y:.2f}",
    ]
    if obj.score is not None:
        fields.append(f"{obj.score:.6f}")
    return " ".join(fields)


def write_labels(path, objects):
    with open(path, "w") as f:
        for obj in objects:
            f.write(_format_object(obj) + "\n")


def write_detections(path, objects):
    """Write a detection file: every object must carry a score."""
    for i, obj in enumerate(objects):
        if obj.score is None:
            raise ValueError(f"object {i} has no score")
    write_labels(path, objects)


def read_calib(path):
    """Parse a calibration file (P2, R0_rect, Tr_velo_to_cam rows)."""
    rows = {}
    with open(path) as f:
        for line in f:
            if ":" not in line:
                continue
            key, _, rest = line.partition(":")
            values = rest.split()
            if values:
                rows[key.strip()] = np.array([float(v) for v in values])
    try:
        return Calib(
            velo_to_cam=rows["Tr_velo_to_cam"].reshape(3, 4),
            rect=rows["R0_rect"].reshape(3, 3),
            cam_proj=rows["P2"].reshape(3, 4),
        )
    except KeyError as e:
        raise ValueError(f"{path}: missing calibration row {e}") from None


def label_to_box(obj: KittiObject, calib: Calib):
    """Convert a label to an internal-frame box.

    The camera-frame bottom-center moves up (camera -Y) by half the
    height to reach the box center, then the frame mirror maps it into
    the internal frame; yaw flips sign because the mirror reverses the
    rotation sense.
    """
    if obj.is_dontcare or not (obj.h > 0 and obj.w > 0 and obj.l > 0):
        raise ValueError(f"cannot convert {obj.class_name!r} object with dims "
                         f"({obj.h}, {obj.w}, {obj.l}) to a box")
    center_cam = obj.location + np.array([0.0, -obj.h / 2.0, 0.0])
    return Box3D(
        x=center_cam[0], y=-center_cam[1], z=center_cam[2],
        h=obj.h, w=obj.w, l=obj.l,
        theta=wrap_angle(-obj.rotation_y),
    )


def project_to_image(points_internal, calib: Calib):
    """Project internal-frame points through the camera matrix -> (N, 2) pixels."""
    p = np.asarray(points_internal, dtype=np.float64).reshape(-1, 3).copy()
    p[:, 1] *= -1.0  # back to the rectified camera frame
    hom = p @ calib.cam_proj[:, :3].T + calib.cam_proj[:, 3]
    depth = hom[:, 2]
    if np.any(depth <= 1e-9):
        raise ValueError("cannot project points at or behind the camera plane")
    return hom[:, :2] / depth[:, None]


def box_to_label(box: Box3D, calib: Calib, class_name="Car", score=None,
                 truncation=0.0, occlusion=0):
    """Inverse of :func:`label_to_box`; the 2D bbox is the projected hull."""
    bottom_internal = np.array([box.x, box.y - box.h / 2.0, box.z])
    location = bottom_internal * np.array([1.0, -1.0, 1.0])
    rotation_y = float(wrap_angle(-box.theta))
    alpha = float(wrap_angle(rotation_y - np.arctan2(location[0], location[2])))
    pix = project_to_image(box_corners(box), calib)
    bbox2d = np.array([pix[:, 0].min(), pix[:, 1].min(), pix[:, 0].max(), pix[:, 1].max()])
    return KittiObject(
        class_name=class_name, truncation=truncation, occlusion=occlusion,
        alpha=alpha, bbox2d=bbox2d, h=box.h, w=box.w, l=box.l,
        location=location, rotation_y=rotation_y, score=score,
    )


def labels_to_boxes(objects, calib: Calib):
    """Convert all non-DontCare objects; returns (boxes, kept indices)."""
    boxes, kept = [], []
    for i, obj in enumerate(objects):
        if obj.is_dontcare:
            continue
        boxes.append(label_to_box(obj, calib))
        kept.append(i)
    return boxes, kept
