"""Ground-plane fitting, segmentation, and tiling into ground elements.

One plane is fit per scene with RANSAC and refined by least squares over
its inliers.  Ground points from all frames are merged before tiling, so a
tile is a single static element whose box row repeats across frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import KIND_GROUND, SceneElement
from .config import PipelineConfig, RansacConfig
from .errors import DegenerateInput


@dataclass(frozen=True)
class GroundPlane:
    """Plane {p : n.p + d = 0} with unit normal n, n_z >= 0."""

    normal: np.ndarray
    offset: float
    inlier_count: int

    def distances(self, points: np.ndarray) -> np.ndarray:
        """Unsigned point-plane distances, (N,)."""
        return np.abs(points @ self.normal + self.offset)


def _canonicalize(normal: np.ndarray, offset: float) -> tuple[np.ndarray, float]:
    norm = np.linalg.norm(normal)
    normal = normal / norm
    offset = offset / norm
    if normal[2] < 0:
        normal, offset = -normal, -offset
    return normal, offset


def _least_squares_plane(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Total-least-squares plane: smallest singular vector of the centered cloud."""
    centroid = points.mean(axis=0)
    _, sing, vt = np.linalg.svd(points - centroid, full_matrices=False)
    if sing[-2] < 1e-12:
        raise DegenerateInput("points are collinear; plane is underdetermined")
    normal = vt[-1]
    offset = -float(normal @ centroid)
    return _canonicalize(normal, offset)


def fit_ground_plane(points: np.ndarray, config: RansacConfig,
                     seed: int = 0) -> GroundPlane:
    """RANSAC plane fit, deterministic under ``seed``.

    Hypotheses are 3-point samples drawn from a lexicographically sorted
    copy of the cloud, so the result does not depend on input ordering.
    The winning hypothesis (most inliers, earliest iteration on ties) is
    refined by a least-squares fit over its inliers.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = points.shape[0]
    if n < 3:
        raise DegenerateInput(f"need at least 3 points to fit a plane, got {n}")

    order = np.lexsort((points[:, 2], points[:, 1], points[:, 0]))
    pts = points[order]
    rng = np.random.default_rng(seed)

    if n > config.max_score_points:
        score_idx = rng.choice(n, size=config.max_score_points, replace=False)
        score_pts = pts[np.sort(score_idx)]
    else:
        score_pts = pts

    best_count = -1
    best_plane: tuple[np.ndarray, float] | None = None
    for _ in range(config.iters):
        i, j, k = rng.choice(n, size=3, replace=False)
        a, b, c = pts[i], pts[j], pts[k]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue  # collinear sample
        normal = normal / norm
        offset = -float(normal @ a)
        count = int((np.abs(score_pts @ normal + offset)
                     <= config.inlier_threshold_m).sum())
        if count > best_count:
            best_count = count
            best_plane = (normal, offset)

    if best_plane is None:
        raise DegenerateInput("all RANSAC samples were collinear")

    normal, offset = best_plane
    inliers = pts[np.abs(pts @ normal + offset) <= config.inlier_threshold_m]
    if inliers.shape[0] >= 3:
        try:
            normal, offset = _least_squares_plane(inliers)
        except DegenerateInput:
            normal, offset = _canonicalize(normal, offset)
    else:
        normal, offset = _canonicalize(normal, offset)

    final_count = int((np.abs(points @ normal + offset)
                       <= config.inlier_threshold_m).sum())
    return GroundPlane(normal=normal, offset=offset, inlier_count=final_count)


def segment_ground(points: np.ndarray, plane: GroundPlane,
                   threshold: float) -> np.ndarray:
    """Boolean mask: true iff the point lies within ``threshold`` of the plane."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return plane.distances(points) <= threshold


def tile_cells(points_xy: np.ndarray, tile_size: float) -> np.ndarray:
    """Integer (cx, cy) cell index per point; cells are [k*s, (k+1)*s)."""
    return np.floor(points_xy / tile_size).astype(np.int64)


def tile_ground(points: np.ndarray, tile_size: float, max_tiles: int,
                T: int) -> tuple[list[SceneElement], np.ndarray]:
    """Tile merged ground points into at most ``max_tiles`` elements.

    The grid is anchored at the world origin.  Each occupied cell becomes
    one element positioned at (cell center x, cell center y, mean z of its
    points) with zero size and heading, valid in every frame.  If occupied
    cells exceed the budget the cells with the most points win (ties broken
    by lexicographic cell index).

    Returns ``(elements, tile_index)`` where ``tile_index[i]`` is the
    element's position in the returned list for point i, or -1 if the
    point's cell was dropped.  Token ids are assigned later.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = points.shape[0]
    if n == 0:
        return [], np.empty(0, dtype=np.int64)

    cells = tile_cells(points[:, :2], tile_size)
    uniq, inverse, counts = np.unique(cells, axis=0, return_inverse=True,
                                      return_counts=True)

    keep = np.arange(uniq.shape[0])
    if uniq.shape[0] > max_tiles:
        # Most points first; np.unique already sorted cells lexicographically,
        # so a stable sort on -count keeps the lexicographic tie order.
        keep = np.argsort(-counts, kind="stable")[:max_tiles]
        keep = np.sort(keep)

    slot_of_cell = np.full(uniq.shape[0], -1, dtype=np.int64)
    slot_of_cell[keep] = np.arange(keep.shape[0])

    sums_z = np.bincount(inverse, weights=points[:, 2], minlength=uniq.shape[0])
    mean_z = sums_z / counts

    elements = []
    for slot, cell_idx in enumerate(keep):
        cx, cy = uniq[cell_idx]
        center = np.array([(cx + 0.5) * tile_size, (cy + 0.5) * tile_size,
                           mean_z[cell_idx]])
        row = np.concatenate([center, np.zeros(4)])
        elements.append(SceneElement(
            token_id=-1,
            kind=KIND_GROUND,
            boxes=np.tile(row, (T, 1)),
            frame_valid=np.ones(T, dtype=bool),
            source_id=int(cell_idx),
        ))

    return elements, slot_of_cell[inverse]


def fit_and_segment(bundle_frames, config: PipelineConfig) -> tuple[GroundPlane, list[np.ndarray]]:
    """Fit one plane on all frames merged, then mask each frame against it."""
    merged = np.concatenate([f.points for f in bundle_frames], axis=0)
    plane = fit_ground_plane(merged, config.ransac, seed=config.seed)
    masks = [segment_ground(f.points, plane, config.ransac.inlier_threshold_m)
             for f in bundle_frames]
    return plane, masks
