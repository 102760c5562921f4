"""Deterministic synthetic scenes with ground-truth labels.

Scenes are built from primitives whose decomposition is known in closed
form: a flat (optionally sloped) ground sheet, box-shaped agent shells on
constant-velocity trajectories, and static clutter blobs standing in for
open-set objects.  Camera feature maps encode (camera id, semantic label)
so pooled features can be checked analytically: the feature of a pixel
showing label L from camera k is one_hot(L) * (k + 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundle import (
    AgentBox,
    CameraFrame,
    PointCloudFrame,
    SceneBundle,
    normalize_heading,
)
from .decompose import LABEL_AGENT, LABEL_GROUND, LABEL_OPENSET, PointPartition


@dataclass(frozen=True)
class SceneSpec:
    """Knobs for the synthetic scene generator."""

    n_agents: int = 4
    n_clutter: int = 6
    area_m: float = 60.0
    T: int = 11
    cameras: int = 2
    D: int = 256  # matches the default pipeline feature dimension
    ground_points_per_frame: int = 600
    agent_points: int = 150   # per agent per frame
    clutter_points: int = 60  # per blob per frame
    slope: float = 0.0
    dt_s: float = 0.1
    min_speed: float = 0.5
    max_speed: float = 1.5
    agent_clearance_m: float = 0.4   # gap between box bottom and ground
    clutter_z_m: float = 0.8
    clutter_radius_m: float = 0.35
    min_separation_m: float = 8.0
    feature_res: int = 32

    def __post_init__(self):
        if self.D < 3:
            raise ValueError("D must be >= 3 to hold the label channels")
        if self.T <= 0 or self.area_m <= 0:
            raise ValueError("T and area_m must be > 0")

    @staticmethod
    def from_json(path) -> "SceneSpec":
        with open(path) as fh:
            return SceneSpec(**json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticScene:
    """A generated bundle plus its ground truth."""

    bundle: SceneBundle
    truth: PointPartition
    spec: SceneSpec
    agent_specs: list[dict] = field(default_factory=list)
    clutter_centers: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))


def _place_centers(rng, n, area, margin, min_sep, max_tries=10_000):
    centers = []
    tries = 0
    while len(centers) < n:
        tries += 1
        if tries > max_tries:
            raise ValueError(
                f"could not place {n} objects with separation {min_sep} in "
                f"area {area}; enlarge the area or reduce the count")
        cand = rng.uniform(margin, area - margin, size=2)
        if all(np.linalg.norm(cand - c) >= min_sep for c in centers):
            centers.append(cand)
    return np.array(centers).reshape(-1, 2)


def _sample_box_shell(rng, size, n):
    """Uniform points on the surface of an axis-aligned box at the origin."""
    l, w, h = size
    areas = np.array([w * h, w * h, l * h, l * h, l * w, l * w])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    a = rng.uniform(-0.5, 0.5, size=n)
    b = rng.uniform(-0.5, 0.5, size=n)
    pts = np.empty((n, 3))
    for i, (axis, sign) in enumerate(((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))):
        sel = face == i
        if axis == 0:
            pts[sel] = np.stack([np.full(sel.sum(), sign * l / 2),
                                 a[sel] * w, b[sel] * h], axis=1)
        elif axis == 1:
            pts[sel] = np.stack([a[sel] * l,
                                 np.full(sel.sum(), sign * w / 2),
                                 b[sel] * h], axis=1)
        else:
            pts[sel] = np.stack([a[sel] * l, b[sel] * w,
                                 np.full(sel.sum(), sign * h / 2)], axis=1)
    return pts


def _sample_ball(rng, radius, n):
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=n) ** (1.0 / 3.0)
    return direction * r[:, None]


def _camera_pose(yaw: float, center: np.ndarray):
    """World->camera rotation for a camera at ``center`` looking along yaw."""
    c, s = math.cos(yaw), math.sin(yaw)
    x_cam = np.array([s, -c, 0.0])
    y_cam = np.array([0.0, 0.0, -1.0])
    z_cam = np.array([c, s, 0.0])
    R = np.stack([x_cam, y_cam, z_cam], axis=0)
    t = -R @ center
    return R, t


def _render_feature_map(points, labels, R, t, fx, fy, cx, cy, res, D, camera_id):
    """Z-buffered label splat: each cell takes the nearest point's label."""
    fm = np.zeros((res, res, D), dtype=np.float32)
    p_cam = points @ R.T + t
    z = p_cam[:, 2]
    front = z > 1e-6
    u = fx * p_cam[front, 0] / z[front] + cx
    v = fy * p_cam[front, 1] / z[front] + cy
    ok = (u >= 0) & (u < res) & (v >= 0) & (v < res)
    rows = np.floor(v[ok]).astype(np.int64)
    cols = np.floor(u[ok]).astype(np.int64)
    lab = labels[front][ok]
    depth = z[front][ok]
    cell = rows * res + cols
    order = np.argsort(depth, kind="stable")
    _, first = np.unique(cell[order], return_index=True)
    winner = order[first]  # nearest point per occupied cell
    fm.reshape(res * res, D)[cell[winner], lab[winner]] = float(camera_id + 1)
    return fm


def generate_scene(seed: int, spec: SceneSpec) -> SyntheticScene:
    """Build one reproducible scene with per-point ground-truth labels."""
    rng = np.random.default_rng(seed)
    area = spec.area_m

    n_obj = spec.n_agents + spec.n_clutter
    centers = _place_centers(rng, n_obj, area, margin=6.0,
                             min_sep=spec.min_separation_m)
    agent_xy = centers[:spec.n_agents]
    clutter_xy = centers[spec.n_agents:]

    agent_specs = []
    for k in range(spec.n_agents):
        speed = rng.uniform(spec.min_speed, spec.max_speed)
        direction = rng.uniform(-math.pi, math.pi)
        vel = np.array([math.cos(direction), math.sin(direction), 0.0]) * speed
        size = np.array([rng.uniform(3.6, 4.8), rng.uniform(1.7, 2.1),
                         rng.uniform(1.4, 1.8)])
        cz = spec.agent_clearance_m + size[2] / 2.0
        agent_specs.append({
            "track_id": k,
            "start": np.array([agent_xy[k, 0], agent_xy[k, 1], cz]),
            "velocity": vel,
            "size": size,
            "heading": float(normalize_heading(direction)),
        })

    clutter_centers = np.column_stack([
        clutter_xy, np.full(spec.n_clutter, spec.clutter_z_m)])

    frames, agents = [], []
    labels, agent_track, cluster_id = [], [], []
    point_sets_per_frame = []

    for f in range(spec.T):
        parts, lab_parts, track_parts, cid_parts = [], [], [], []

        gxy = rng.uniform(0.0, area, size=(spec.ground_points_per_frame, 2))
        gz = spec.slope * gxy[:, 0]
        parts.append(np.column_stack([gxy, gz]))
        lab_parts.append(np.full(len(gxy), LABEL_GROUND, dtype=np.int64))
        track_parts.append(np.full(len(gxy), -1, dtype=np.int64))
        cid_parts.append(np.full(len(gxy), -1, dtype=np.int64))

        for a in agent_specs:
            center = a["start"] + a["velocity"] * (f * spec.dt_s)
            # inset so rotation roundoff cannot push surface points outside
            shell = _sample_box_shell(rng, a["size"], spec.agent_points) * 0.999
            c, s = math.cos(a["heading"]), math.sin(a["heading"])
            rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
            parts.append(shell @ rot.T + center)
            lab_parts.append(np.full(spec.agent_points, LABEL_AGENT, dtype=np.int64))
            track_parts.append(np.full(spec.agent_points, a["track_id"], dtype=np.int64))
            cid_parts.append(np.full(spec.agent_points, -1, dtype=np.int64))
            agents.append(AgentBox(track_id=a["track_id"], frame_index=f,
                                   center=center, size=a["size"],
                                   heading=a["heading"], label="vehicle"))

        for j in range(spec.n_clutter):
            blob = clutter_centers[j] + _sample_ball(rng, spec.clutter_radius_m,
                                                     spec.clutter_points)
            parts.append(blob)
            lab_parts.append(np.full(spec.clutter_points, LABEL_OPENSET, dtype=np.int64))
            track_parts.append(np.full(spec.clutter_points, -1, dtype=np.int64))
            cid_parts.append(np.full(spec.clutter_points, j, dtype=np.int64))

        points = np.concatenate(parts, axis=0)
        frames.append(PointCloudFrame(frame_index=f, points=points))
        labels.append(np.concatenate(lab_parts))
        agent_track.append(np.concatenate(track_parts))
        cluster_id.append(np.concatenate(cid_parts))
        point_sets_per_frame.append(points)

    cameras = []
    cam_center = np.array([area / 2.0, area / 2.0, 1.8])
    res = spec.feature_res
    fx = fy = res / 2.0
    cx = cy = res / 2.0
    for k in range(spec.cameras):
        yaw = 2.0 * math.pi * k / max(spec.cameras, 1)
        R, t = _camera_pose(yaw, cam_center)
        for f in range(spec.T):
            fm = _render_feature_map(point_sets_per_frame[f], labels[f],
                                     R, t, fx, fy, cx, cy, res, spec.D, k)
            cameras.append(CameraFrame(camera_id=k, frame_index=f,
                                       feature_map=fm, fx=fx, fy=fy,
                                       cx=cx, cy=cy, rotation=R,
                                       translation=t))

    bundle = SceneBundle(frames=frames, cameras=cameras, agents=agents)
    truth = PointPartition(labels=labels, agent_track=agent_track,
                           cluster_id=cluster_id)
    return SyntheticScene(bundle=bundle, truth=truth, spec=spec,
                          agent_specs=agent_specs,
                          clutter_centers=clutter_centers)


def drop_agents(bundle: SceneBundle, ratio: float, seed: int) -> tuple[SceneBundle, list[int]]:
    """Simulate perception failure: remove a fixed ratio of agent tracks.

    Exactly floor(ratio * n_tracks) tracks are removed (all their frames),
    chosen by a seeded uniform draw.  Points are never touched, so the
    dropped agents' returns flow into open-set clustering downstream.
    Returns the ablated bundle and the sorted dropped track ids.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    track_ids = sorted({b.track_id for b in bundle.agents})
    n_drop = int(math.floor(ratio * len(track_ids)))
    if n_drop == 0:
        return SceneBundle(frames=bundle.frames, cameras=bundle.cameras,
                           agents=list(bundle.agents)), []
    rng = np.random.default_rng(seed)
    dropped = sorted(rng.choice(track_ids, size=n_drop, replace=False).tolist())
    dropped_set = set(dropped)
    kept = [b for b in bundle.agents if b.track_id not in dropped_set]
    return SceneBundle(frames=bundle.frames, cameras=bundle.cameras,
                       agents=kept), dropped
