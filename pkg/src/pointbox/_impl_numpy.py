"""Pure numpy kernel implementations.

Reference semantics for the numba backend in ``_impl_numba``; both modules
expose the same functions. Boxes are rows ``(x, y, z, h, w, l, theta)``
with the length ``l`` along the heading, width ``w`` across it and height
``h`` vertical (Y axis). Ground-plane footprints live in the (x, z) plane.
"""

import numpy as np

# Intersection areas below this count as zero (degenerate slivers).
AREA_EPS = 1e-12

_MC_CHUNK = 262144


def bev_quad(box):
    """Ground-plane footprint of one box as a (4, 2) CCW quad in (x, z)."""
    cx, cz, w, l, theta = box[0], box[2], box[4], box[5], box[6]
    c, s = np.cos(theta), np.sin(theta)
    lx = np.array([l, -l, -l, l]) * 0.5
    lz = np.array([w, w, -w, -w]) * 0.5
    return np.stack([cx + c * lx - s * lz, cz + s * lx + c * lz], axis=1)


def bev_quads(boxes):
    """Vectorised footprints for an (N, 7) box array -> (N, 4, 2)."""
    cx, cz, w, l, theta = (boxes[:, i] for i in (0, 2, 4, 5, 6))
    c, s = np.cos(theta), np.sin(theta)
    sx = np.array([0.5, -0.5, -0.5, 0.5])
    sz = np.array([0.5, 0.5, -0.5, -0.5])
    lx = l[:, None] * sx
    lz = w[:, None] * sz
    x = cx[:, None] + c[:, None] * lx - s[:, None] * lz
    z = cz[:, None] + s[:, None] * lx + c[:, None] * lz
    return np.stack([x, z], axis=2)


def _polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def quad_inter_area(qa, qb):
    """Intersection area of two convex CCW quads via half-plane clipping."""
    poly = np.asarray(qa, dtype=np.float64)
    for e in range(4):
        if len(poly) == 0:
            return 0.0
        e1 = qb[e]
        e2 = qb[(e + 1) % 4]
        dx, dz = e2[0] - e1[0], e2[1] - e1[1]
        side = dx * (poly[:, 1] - e1[1]) - dz * (poly[:, 0] - e1[0])
        prev = np.roll(poly, 1, axis=0)
        prev_side = np.roll(side, 1)
        inside = side >= 0.0
        crossing = inside != (prev_side >= 0.0)
        denom = np.where(crossing, prev_side - side, 1.0)
        t = prev_side / denom
        cut = prev + t[:, None] * (poly - prev)
        # interleave: the crossing point on edge (prev -> v) precedes v
        cand = np.stack([cut, poly], axis=1).reshape(-1, 2)
        mask = np.stack([crossing, inside], axis=1).reshape(-1)
        poly = cand[mask]
    area = _polygon_area(poly)
    return 0.0 if area < AREA_EPS else float(area)


def points_in_box_mask(xyz, box):
    """Boolean mask of points inside (or on the boundary of) one box."""
    c, s = np.cos(box[6]), np.sin(box[6])
    dx = xyz[:, 0] - box[0]
    dy = xyz[:, 1] - box[1]
    dz = xyz[:, 2] - box[2]
    lx = c * dx + s * dz
    lz = -s * dx + c * dz
    return (
        (np.abs(lx) <= box[5] * 0.5)
        & (np.abs(dy) <= box[3] * 0.5)
        & (np.abs(lz) <= box[4] * 0.5)
    )


def bev_inter_pairwise(boxes_a, boxes_b):
    """(N, M) matrix of ground-plane intersection areas."""
    qa = bev_quads(boxes_a)
    qb = bev_quads(boxes_b)
    out = np.empty((len(boxes_a), len(boxes_b)))
    for i in range(len(boxes_a)):
        for j in range(len(boxes_b)):
            out[i, j] = quad_inter_area(qa[i], qb[j])
    return out


def nms_bev(boxes, order, thr, max_keep):
    """Greedy suppression over ground-plane IoU.

    ``order`` lists candidate indices best-first; a candidate is dropped
    when its IoU with any kept box exceeds ``thr`` (strictly).
    """
    quads = bev_quads(boxes)
    areas = boxes[:, 4] * boxes[:, 5]
    keep = []
    for i in order:
        ok = True
        for j in keep:
            inter = quad_inter_area(quads[i], quads[j])
            if inter / (areas[i] + areas[j] - inter) > thr:
                ok = False
                break
        if ok:
            keep.append(i)
            if len(keep) >= max_keep:
                break
    return np.asarray(keep, dtype=np.int64)


def _aabb(box):
    cx, cy, cz, h, w, l, theta = box
    c, s = abs(np.cos(theta)), abs(np.sin(theta))
    ex = 0.5 * (l * c + w * s)
    ez = 0.5 * (l * s + w * c)
    lo = np.array([cx - ex, cy - 0.5 * h, cz - ez])
    hi = np.array([cx + ex, cy + 0.5 * h, cz + ez])
    return lo, hi


def mc_inter_volume(box_a, box_b, n_samples, seed):
    """Monte-Carlo estimate of the intersection volume of two boxes.

    Uniform sampling over the intersection of the boxes' axis-aligned
    bounds; independent of the polygon-clipping path.
    """
    lo_a, hi_a = _aabb(box_a)
    lo_b, hi_b = _aabb(box_b)
    lo = np.maximum(lo_a, lo_b)
    hi = np.minimum(hi_a, hi_b)
    if np.any(hi <= lo):
        return 0.0
    vol = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(_MC_CHUNK, n_samples - done)
        pts = rng.uniform(lo, hi, size=(m, 3))
        mask = points_in_box_mask(pts, box_a) & points_in_box_mask(pts, box_b)
        hits += int(np.count_nonzero(mask))
        done += m
    return vol * hits / n_samples
