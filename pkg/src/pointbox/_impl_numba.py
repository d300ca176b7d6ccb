"""Numba kernel implementations (see _impl_numpy for the semantics)."""

import numpy as np
from numba import njit

AREA_EPS = 1e-12

_U64_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 5.421010862427522e-20  # 2**-64


@njit(cache=True, inline="always")
def _splitmix(state):
    state = (state + _SM_GAMMA) & _U64_MASK
    z = state
    z = ((z ^ (z >> np.uint64(30))) * _SM_M1) & _U64_MASK
    z = ((z ^ (z >> np.uint64(27))) * _SM_M2) & _U64_MASK
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _bev_quad_into(box, qx, qz):
    cx, cz, w, l, theta = box[0], box[2], box[4], box[5], box[6]
    c = np.cos(theta)
    s = np.sin(theta)
    hl = 0.5 * l
    hw = 0.5 * w
    qx[0] = cx + c * hl - s * hw
    qz[0] = cz + s * hl + c * hw
    qx[1] = cx - c * hl - s * hw
    qz[1] = cz - s * hl + c * hw
    qx[2] = cx - c * hl + s * hw
    qz[2] = cz - s * hl - c * hw
    qx[3] = cx + c * hl + s * hw
    qz[3] = cz + s * hl - c * hw


@njit(cache=True)
def _clip_area(ax, az, bx, bz):
    px = np.empty(16)
    pz = np.empty(16)
    ox = np.empty(16)
    oz = np.empty(16)
    for i in range(4):
        px[i] = ax[i]
        pz[i] = az[i]
    n = 4
    for e in range(4):
        if n == 0:
            return 0.0
        e1x, e1z = bx[e], bz[e]
        dx = bx[(e + 1) % 4] - e1x
        dz = bz[(e + 1) % 4] - e1z
        m = 0
        sx, sz = px[n - 1], pz[n - 1]
        s_side = dx * (sz - e1z) - dz * (sx - e1x)
        for j in range(n):
            vx, vz = px[j], pz[j]
            v_side = dx * (vz - e1z) - dz * (vx - e1x)
            if (v_side >= 0.0) != (s_side >= 0.0):
                t = s_side / (s_side - v_side)
                ox[m] = sx + t * (vx - sx)
                oz[m] = sz + t * (vz - sz)
                m += 1
            if v_side >= 0.0:
                ox[m] = vx
                oz[m] = vz
                m += 1
            sx, sz, s_side = vx, vz, v_side
        for j in range(m):
            px[j] = ox[j]
            pz[j] = oz[j]
        n = m
    if n < 3:
        return 0.0
    acc = 0.0
    for j in range(n):
        k = (j + 1) % n
        acc += px[j] * pz[k] - px[k] * pz[j]
    area = 0.5 * abs(acc)
    if area < AREA_EPS:
        return 0.0
    return area


@njit(cache=True)
def quad_inter_area(qa, qb):
    return _clip_area(
        np.ascontiguousarray(qa[:, 0]),
        np.ascontiguousarray(qa[:, 1]),
        np.ascontiguousarray(qb[:, 0]),
        np.ascontiguousarray(qb[:, 1]),
    )


@njit(cache=True)
def bev_quad(box):
    qx = np.empty(4)
    qz = np.empty(4)
    _bev_quad_into(box, qx, qz)
    out = np.empty((4, 2))
    for i in range(4):
        out[i, 0] = qx[i]
        out[i, 1] = qz[i]
    return out


@njit(cache=True)
def bev_quads(boxes):
    n = boxes.shape[0]
    out = np.empty((n, 4, 2))
    qx = np.empty(4)
    qz = np.empty(4)
    for i in range(n):
        _bev_quad_into(boxes[i], qx, qz)
        for j in range(4):
            out[i, j, 0] = qx[j]
            out[i, j, 1] = qz[j]
    return out


@njit(cache=True)
def points_in_box_mask(xyz, box):
    n = xyz.shape[0]
    out = np.empty(n, dtype=np.bool_)
    c = np.cos(box[6])
    s = np.sin(box[6])
    hh = 0.5 * box[3]
    hw = 0.5 * box[4]
    hl = 0.5 * box[5]
    for i in range(n):
        dx = xyz[i, 0] - box[0]
        dy = xyz[i, 1] - box[1]
        dz = xyz[i, 2] - box[2]
        lx = c * dx + s * dz
        lz = -s * dx + c * dz
        out[i] = abs(lx) <= hl and abs(dy) <= hh and abs(lz) <= hw
    return out


@njit(cache=True)
def bev_inter_pairwise(boxes_a, boxes_b):
    na = boxes_a.shape[0]
    nb = boxes_b.shape[0]
    qax = np.empty((na, 4))
    qaz = np.empty((na, 4))
    qbx = np.empty((nb, 4))
    qbz = np.empty((nb, 4))
    for i in range(na):
        _bev_quad_into(boxes_a[i], qax[i], qaz[i])
    for j in range(nb):
        _bev_quad_into(boxes_b[j], qbx[j], qbz[j])
    out = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            out[i, j] = _clip_area(qax[i], qaz[i], qbx[j], qbz[j])
    return out


@njit(cache=True)
def nms_bev(boxes, order, thr, max_keep):
    n = order.shape[0]
    keep = np.empty(n, dtype=np.int64)
    kx = np.empty((n, 4))
    kz = np.empty((n, 4))
    ka = np.empty(n)
    qx = np.empty(4)
    qz = np.empty(4)
    nk = 0
    for oi in range(n):
        i = order[oi]
        _bev_quad_into(boxes[i], qx, qz)
        area = boxes[i, 4] * boxes[i, 5]
        ok = True
        for j in range(nk):
            inter = _clip_area(qx, qz, kx[j], kz[j])
            if inter / (area + ka[j] - inter) > thr:
                ok = False
                break
        if ok:
            keep[nk] = i
            for j in range(4):
                kx[nk, j] = qx[j]
                kz[nk, j] = qz[j]
            ka[nk] = area
            nk += 1
            if nk >= max_keep:
                break
    return keep[:nk]


@njit(cache=True)
def mc_inter_volume(box_a, box_b, n_samples, seed):
    lo = np.empty(3)
    hi = np.empty(3)
    for d in range(3):
        lo[d] = -np.inf
        hi[d] = np.inf
    for b in (box_a, box_b):
        c = abs(np.cos(b[6]))
        s = abs(np.sin(b[6]))
        ex = 0.5 * (b[5] * c + b[4] * s)
        ez = 0.5 * (b[5] * s + b[4] * c)
        lo[0] = max(lo[0], b[0] - ex)
        hi[0] = min(hi[0], b[0] + ex)
        lo[1] = max(lo[1], b[1] - 0.5 * b[3])
        hi[1] = min(hi[1], b[1] + 0.5 * b[3])
        lo[2] = max(lo[2], b[2] - ez)
        hi[2] = min(hi[2], b[2] + ez)
    if hi[0] <= lo[0] or hi[1] <= lo[1] or hi[2] <= lo[2]:
        return 0.0
    vol = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2])

    ca, sa = np.cos(box_a[6]), np.sin(box_a[6])
    cb, sb = np.cos(box_b[6]), np.sin(box_b[6])
    state = np.uint64(seed)
    hits = 0
    for _ in range(n_samples):
        state, z = _splitmix(state)
        x = lo[0] + (hi[0] - lo[0]) * (z * _TO_UNIT)
        state, z = _splitmix(state)
        y = lo[1] + (hi[1] - lo[1]) * (z * _TO_UNIT)
        state, z = _splitmix(state)
        w = lo[2] + (hi[2] - lo[2]) * (z * _TO_UNIT)

        dx = x - box_a[0]
        dz = w - box_a[2]
        lx = ca * dx + sa * dz
        lz = -sa * dx + ca * dz
        if (
            abs(lx) <= 0.5 * box_a[5]
            and abs(y - box_a[1]) <= 0.5 * box_a[3]
            and abs(lz) <= 0.5 * box_a[4]
        ):
            dx = x - box_b[0]
            dz = w - box_b[2]
            lx = cb * dx + sb * dz
            lz = -sb * dx + cb * dz
            if (
                abs(lx) <= 0.5 * box_b[5]
                and abs(y - box_b[1]) <= 0.5 * box_b[3]
                and abs(lz) <= 0.5 * box_b[4]
            ):
                hits += 1
    return vol * hits / n_samples
