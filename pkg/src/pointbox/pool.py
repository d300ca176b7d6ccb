"""Region pooling: gather the points of a proposal box into its canonical frame.

A proposal is first enlarged by the context width so nearby points are
included; kept points are expressed in the proposal's canonical frame
together with their reflectance, predicted segmentation mask, distance to
the sensor (computed before the transform, so depth information survives)
and any per-point feature vectors carried over from the first stage.
"""

from dataclasses import dataclass

import numpy as np

from .codec import HyperParams
from .geom import Box3D, CanonicalFrame, PointCloud, canonical_transform, points_in_box, sensor_distance


def enlarge_box(box: Box3D, eta):
    """Grow each size by ``eta`` meters; center and heading unchanged."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return Box3D(box.x, box.y, box.z, box.h + eta, box.w + eta, box.l + eta, box.theta)


@dataclass
class PooledRegion:
    """Fixed-size sample of a proposal's points, canonical frame.

    Per-point columns: ``local_xyz`` (K, 3), ``intensity`` (K,),
    ``seg_mask`` (K,), ``sensor_dist`` (K,) and ``features`` (K, C) in
    that concatenation order.
    """

    proposal: Box3D
    local_xyz: np.ndarray
    intensity: np.ndarray
    seg_mask: np.ndarray
    sensor_dist: np.ndarray
    features: np.ndarray

    def __len__(self):
        return len(self.local_xyz)

    def feature_matrix(self):
        """All columns concatenated: (K, 3 + 3 + C)."""
        return np.column_stack(
            [self.local_xyz, self.intensity, self.seg_mask, self.sensor_dist, self.features]
        )


def pool_region(cloud: PointCloud, seg_mask, stage1_feats, proposal: Box3D,
                hp: HyperParams, sample_count, rng_seed):
    """Pool one proposal; returns None for regions with no inside points.

    Sampling is seeded and without replacement whenever the region holds
    at least ``sample_count`` points, with replacement otherwise.
    """
    seg_mask = np.asarray(seg_mask).reshape(-1)
    stage1_feats = np.asarray(stage1_feats, dtype=np.float64).reshape(len(cloud), -1)
    if len(seg_mask) != len(cloud):
        raise ValueError("seg_mask length must match the cloud")
    inside = points_in_box(cloud.xyz, enlarge_box(proposal, hp.context_width))
    idx = np.flatnonzero(inside)
    if len(idx) == 0:
        return None
    rng = np.random.default_rng(rng_seed)
    pick = rng.choice(idx, size=sample_count, replace=len(idx) < sample_count)
    xyz = cloud.xyz[pick]
    dist = sensor_distance(xyz)
    local = canonical_transform(xyz, CanonicalFrame.of_box(proposal))
    return PooledRegion(
        proposal=proposal,
        local_xyz=local,
        intensity=cloud.intensity[pick],
        seg_mask=seg_mask[pick].astype(np.float64),
        sensor_dist=dist,
        features=stage1_feats[pick],
    )


def subsample_points(cloud: PointCloud, budget, rng_seed):
    """Fix the cloud size to ``budget`` points.

    Larger clouds are sampled without replacement; smaller ones keep every
    point and randomly repeat points to fill the budget.
    """
    n = len(cloud)
    if n == 0:
        raise ValueError("cannot subsample an empty cloud")
    rng = np.random.default_rng(rng_seed)
    if n >= budget:
        idx = rng.choice(n, size=budget, replace=False)
    else:
        idx = np.concatenate([np.arange(n), rng.choice(n, size=budget - n, replace=True)])
    return PointCloud(cloud.xyz[idx], cloud.intensity[idx])
