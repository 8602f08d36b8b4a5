"""SfM map data model, text interchange format, and synthetic scene generator.

The on-disk format is line-oriented UTF-8 ("FTMAP 1"); see ``save_map`` for
the exact grammar.  The synthetic generator places distinctive points on a
wall patch with depth relief and cameras on an orbital arc looking at it, so
that a controllable fraction of each frame is "structure" and the rest is
background -- the geometry the focus sampler is designed to exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import observation
from .errors import (
    DanglingReference,
    InfeasibleScene,
    InvalidPose,
    ParseError,
    UnknownImage,
)
from .geometry import CameraIntrinsics, Pixel, Pose, Z_MIN, project_batch

FORMAT_MAGIC = "FTMAP 1"
MIN_VISIBLE_POINTS = 8


@dataclass(frozen=True)
class MapPoint:
    id: int
    position: np.ndarray  # (3,)
    track: tuple  # ((image_id, u, v), ...)


@dataclass(frozen=True)
class MapImage:
    id: int
    intrinsics: CameraIntrinsics
    pose: Pose  # ground truth, camera-to-world
    name: str


class SceneMap:
    """Immutable container of map points, posed images and visibility tracks."""

    def __init__(self, points, images):
        self.points = sorted(points, key=lambda p: p.id)
        self.images = sorted(images, key=lambda im: im.id)
        self._images_by_id = {}
        for im in self.images:
            if im.id in self._images_by_id:
                raise ValueError(f"duplicate image id {im.id}")
            self._images_by_id[im.id] = im
        seen_points = set()
        for p in self.points:
            if p.id in seen_points:
                raise ValueError(f"duplicate point id {p.id}")
            seen_points.add(p.id)
            if len(p.track) == 0:
                raise ValueError(f"point {p.id} has an empty track")
            track_images = [t[0] for t in p.track]
            if len(set(track_images)) != len(track_images):
                raise ValueError(f"point {p.id} observes an image twice")
            for iid in track_images:
                if iid not in self._images_by_id:
                    raise DanglingReference(f"point {p.id} references missing image {iid}")
        if self.points:
            self.scene_center = np.mean([p.position for p in self.points], axis=0)
        else:
            self.scene_center = np.zeros(3)
        # per-image observation arrays, ascending point id: (uv (m,2), point rows (m,))
        self._point_row = {p.id: i for i, p in enumerate(self.points)}
        self._obs = {im.id: [] for im in self.images}
        for p in self.points:
            for iid, u, v in p.track:
                self._obs[iid].append((u, v, self._point_row[p.id]))
        self._obs_arrays = {}
        for iid, rows in self._obs.items():
            if rows:
                arr = np.array(rows, dtype=np.float64)
                self._obs_arrays[iid] = (arr[:, :2].copy(), arr[:, 2].astype(np.int64))
            else:
                self._obs_arrays[iid] = (np.zeros((0, 2)), np.zeros(0, dtype=np.int64))

    def image(self, image_id: int) -> MapImage:
        try:
            return self._images_by_id[image_id]
        except KeyError:
            raise UnknownImage(f"no image with id {image_id}") from None

    def image_ids(self):
        return [im.id for im in self.images]

    def observation_arrays(self, image_id: int):
        """(observed pixels (m,2), map-point row indices (m,)) for one image,
        in ascending point-id order."""
        self.image(image_id)
        return self._obs_arrays[image_id]

    def point_positions(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.stack([p.position for p in self.points])

    def visible_points(self, image_id: int):
        """Points tracked in the image, as (MapPoint, observed Pixel) pairs."""
        self.image(image_id)
        out = []
        for p in self.points:
            for iid, u, v in p.track:
                if iid == image_id:
                    out.append((p, Pixel(u, v)))
                    break
        return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_map(scene: SceneMap, path) -> None:
    """Write the FTMAP 1 text format; two saves of one map are byte-identical."""
    lines = [FORMAT_MAGIC]
    cam_ids = {}
    cam_lines = []
    image_lines = []
    for im in scene.images:
        k = im.intrinsics
        key = (k.fx, k.fy, k.cx, k.cy, k.width, k.height)
        if key not in cam_ids:
            cam_ids[key] = len(cam_ids)
            cam_lines.append(
                f"CAMERA {cam_ids[key]} {_fmt(k.fx)} {_fmt(k.fy)} {_fmt(k.cx)} {_fmt(k.cy)} {k.width} {k.height}"
            )
        q, t = im.pose.q, im.pose.t
        name = im.name.replace(" ", "_") or "unnamed"
        image_lines.append(
            f"IMAGE {im.id} {cam_ids[key]} "
            f"{_fmt(q[0])} {_fmt(q[1])} {_fmt(q[2])} {_fmt(q[3])} "
            f"{_fmt(t[0])} {_fmt(t[1])} {_fmt(t[2])} {name}"
        )
    lines.extend(cam_lines)
    lines.extend(image_lines)
    for p in scene.points:
        parts = [f"POINT {p.id}", _fmt(p.position[0]), _fmt(p.position[1]), _fmt(p.position[2])]
        for iid, u, v in p.track:
            parts.extend([str(iid), _fmt(u), _fmt(v)])
        lines.append(" ".join(parts))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_map(path) -> SceneMap:
    """Parse and fully validate an FTMAP 1 file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != FORMAT_MAGIC:
        raise ParseError(1, f"expected magic '{FORMAT_MAGIC}'")
    cameras = {}
    images = []
    points = []
    image_ids = set()
    point_ids = set()
    for line_no, line in enumerate(raw[1:], start=2):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        tok = text.split()
        tag = tok[0]
        try:
            if tag == "CAMERA":
                if len(tok) != 8:
                    raise ParseError(line_no, "CAMERA needs 7 fields")
                cid = int(tok[1])
                if cid in cameras:
                    raise ParseError(line_no, f"duplicate camera id {cid}")
                cameras[cid] = CameraIntrinsics(
                    float(tok[2]), float(tok[3]), float(tok[4]), float(tok[5]), int(tok[6]), int(tok[7])
                )
            elif tag == "IMAGE":
                if len(tok) != 11:
                    raise ParseError(line_no, "IMAGE needs 10 fields")
                iid, cid = int(tok[1]), int(tok[2])
                if iid in image_ids:
                    raise ParseError(line_no, f"duplicate image id {iid}")
                if cid not in cameras:
                    raise ParseError(line_no, f"IMAGE references undeclared camera {cid}")
                q = np.array([float(x) for x in tok[3:7]])
                t = np.array([float(x) for x in tok[7:10]])
                if abs(np.linalg.norm(q) - 1.0) > 1e-3:
                    raise InvalidPose(f"line {line_no}: quaternion norm {np.linalg.norm(q):.6f}")
                images.append(MapImage(iid, cameras[cid], Pose(q, t), tok[10]))
                image_ids.add(iid)
            elif tag == "POINT":
                if len(tok) < 5 or (len(tok) - 5) % 3 != 0:
                    raise ParseError(line_no, "POINT needs 4 fields plus (image,u,v) triples")
                pid = int(tok[1])
                if pid in point_ids:
                    raise ParseError(line_no, f"duplicate point id {pid}")
                pos = np.array([float(x) for x in tok[2:5]])
                track = []
                seen = set()
                for j in range(5, len(tok), 3):
                    iid = int(tok[j])
                    if iid in seen:
                        raise ParseError(line_no, f"point {pid} observes image {iid} twice")
                    seen.add(iid)
                    track.append((iid, float(tok[j + 1]), float(tok[j + 2])))
                if not track:
                    raise ParseError(line_no, f"point {pid} has an empty track")
                points.append(MapPoint(pid, pos, tuple(track)))
                point_ids.add(pid)
            else:
                raise ParseError(line_no, f"unknown record '{tag}'")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, (ParseError, InvalidPose)):
                raise
            raise ParseError(line_no, f"malformed record: {exc}") from exc
    return SceneMap(points, images)


@dataclass
class SynthConfig:
    """Parameters of the procedural desk-scale scene.

    Distinctive points live on a wall patch with depth relief sized so its
    projection covers roughly ``structured_fraction`` of each frame; cameras
    sit on an arc of radius ``orbit_radius`` looking at ``look_at``.
    """

    n_points: int = 300
    n_images: int = 60
    descriptor_dim: int = 32
    noise_sigma: float = 0.1
    ambiguous_pool: int = 48
    structured_fraction: float = 0.4
    orbit_radius: float = 5.0
    look_at: tuple = (0.0, 0.0, 0.0)
    arc_span_deg: float = 70.0
    width: int = 160
    height: int = 120
    focal: float = 120.0
    r_feat: float = 3.0
    stride: int = 1
    min_track_length: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_images < 2:
            raise ValueError("need at least 2 images")
        if self.descriptor_dim < 8:
            raise ValueError("descriptor_dim must be >= 8")
        if not 0.0 <= self.structured_fraction <= 1.0:
            raise ValueError("structured_fraction must be in [0, 1]")
        if self.ambiguous_pool < 1:
            raise ValueError("ambiguous_pool must be >= 1")


def _look_at_pose(position, target, up=(0.0, 1.0, 0.0)) -> Pose:
    z = np.asarray(target, dtype=np.float64) - position
    z /= np.linalg.norm(z)
    x = np.cross(np.asarray(up, dtype=np.float64), z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.column_stack([x, y, z])
    return Pose.from_rotation_matrix(rot, position)


def generate_synthetic(cfg: SynthConfig):
    """Build a deterministic synthetic (SceneMap, ObservationWorld) pair.

    Raises InfeasibleScene when any image would see fewer than
    MIN_VISIBLE_POINTS points, which would make localization untestable.
    """
    if cfg.n_points < MIN_VISIBLE_POINTS:
        raise InfeasibleScene(
            f"{cfg.n_points} points cannot satisfy the {MIN_VISIBLE_POINTS}-point visibility floor"
        )
    rng = np.random.default_rng(np.random.SeedSequence((cfg.rng_seed, 0x5CE17E)))
    center = np.asarray(cfg.look_at, dtype=np.float64)

    half_w = (cfg.width / 2.0) / cfg.focal * cfg.orbit_radius * math.sqrt(cfg.structured_fraction)
    half_h = (cfg.height / 2.0) / cfg.focal * cfg.orbit_radius * math.sqrt(cfg.structured_fraction)
    relief = 0.08 * cfg.orbit_radius
    pts = np.empty((cfg.n_points, 3))
    pts[:, 0] = rng.uniform(-half_w, half_w, cfg.n_points)
    pts[:, 1] = rng.uniform(-half_h, half_h, cfg.n_points)
    pts[:, 2] = rng.uniform(-relief, relief, cfg.n_points)
    pts += center

    intr = CameraIntrinsics(cfg.focal, cfg.focal, cfg.width / 2.0, cfg.height / 2.0, cfg.width, cfg.height)
    images = []
    for k in range(cfg.n_images):
        frac = k / (cfg.n_images - 1) if cfg.n_images > 1 else 0.5
        phi = math.radians(cfg.arc_span_deg) * (frac - 0.5)
        pos = center + cfg.orbit_radius * np.array(
            [math.sin(phi), 0.12 * math.sin(2.0 * phi + 0.9), math.cos(phi)]
        )
        images.append(MapImage(k, intr, _look_at_pose(pos, center), f"synth_{k:04d}"))

    tracks = [[] for _ in range(cfg.n_points)]
    for im in images:
        uv, z = project_batch(pts, intr, im.pose)
        visible = (
            (z > Z_MIN)
            & (uv[:, 0] >= 0.0)
            & (uv[:, 0] < cfg.width)
            & (uv[:, 1] >= 0.0)
            & (uv[:, 1] < cfg.height)
        )
        for pi in np.flatnonzero(visible):
            tracks[pi].append((im.id, float(uv[pi, 0]), float(uv[pi, 1])))

    kept = [i for i in range(cfg.n_points) if len(tracks[i]) >= max(1, cfg.min_track_length)]
    per_image = {im.id: 0 for im in images}
    for i in kept:
        for iid, _, _ in tracks[i]:
            per_image[iid] += 1
    for iid, count in per_image.items():
        if count < MIN_VISIBLE_POINTS:
            raise InfeasibleScene(f"image {iid} sees only {count} points (< {MIN_VISIBLE_POINTS})")

    points = [MapPoint(new_id, pts[i].copy(), tuple(tracks[i])) for new_id, i in enumerate(kept)]
    scene = SceneMap(points, images)
    world = observation.ObservationWorld.for_map(
        scene,
        seed=cfg.rng_seed,
        descriptor_dim=cfg.descriptor_dim,
        noise_sigma=cfg.noise_sigma,
        pool_size=cfg.ambiguous_pool,
        r_feat=cfg.r_feat,
        stride=cfg.stride,
    )
    return scene, world
