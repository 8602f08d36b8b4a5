"""Pinhole projection and SE(3) pose algebra.

Conventions used throughout the toolkit:

- World and camera frames are right-handed; the camera looks along +z with
  x right and y down, so a pixel is (u, v) = (fx*X/Z + cx, fy*Y/Z + cy).
- ``Pose`` is camera-to-world: X_world = R @ X_cam + t.  Projection of a
  world point therefore applies the inverse transform first.
- Quaternions are (w, x, y, z), kept unit-norm.
- Points behind the camera (camera depth <= Z_MIN) project to ``None``;
  that is a normal outcome, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

Z_MIN = 1e-6


class Pixel(NamedTuple):
    u: float
    v: float


def _quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(q @ q))
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("quaternion has zero or non-finite norm")
    return q / n


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform, stored as unit quaternion + translation."""

    q: np.ndarray  # (4,) w,x,y,z
    t: np.ndarray  # (3,)

    def __post_init__(self):
        q = _quat_normalize(np.asarray(self.q, dtype=np.float64).reshape(4).copy())
        t = np.asarray(self.t, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError("non-finite translation")
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_rotation_matrix(rot: np.ndarray, t: np.ndarray) -> "Pose":
        return Pose(quat_from_matrix(rot), t)

    @staticmethod
    def rotation_about_z(angle_deg: float) -> "Pose":
        """Pure rotation about the camera's optical axis."""
        half = math.radians(angle_deg) / 2.0
        return Pose(np.array([math.cos(half), 0.0, 0.0, math.sin(half)]), np.zeros(3))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def world_to_camera(self) -> tuple[np.ndarray, np.ndarray]:
        """(R, t) such that X_cam = R @ X_world + t."""
        r_wc = self.rotation_matrix().T
        return r_wc, -r_wc @ self.t

    def camera_center(self) -> np.ndarray:
        return self.t


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Rotation matrix to (w,x,y,z) quaternion, numerically stable branch choice."""
    rot = np.asarray(rot, dtype=np.float64)
    tr = rot[0, 0] + rot[1, 1] + rot[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (rot[2, 1] - rot[1, 2]) / s, (rot[0, 2] - rot[2, 0]) / s, (rot[1, 0] - rot[0, 1]) / s]
        )
    elif rot[0, 0] > rot[1, 1] and rot[0, 0] > rot[2, 2]:
        s = math.sqrt(1.0 + rot[0, 0] - rot[1, 1] - rot[2, 2]) * 2.0
        q = np.array(
            [(rot[2, 1] - rot[1, 2]) / s, 0.25 * s, (rot[0, 1] + rot[1, 0]) / s, (rot[0, 2] + rot[2, 0]) / s]
        )
    elif rot[1, 1] > rot[2, 2]:
        s = math.sqrt(1.0 + rot[1, 1] - rot[0, 0] - rot[2, 2]) * 2.0
        q = np.array(
            [(rot[0, 2] - rot[2, 0]) / s, (rot[0, 1] + rot[1, 0]) / s, 0.25 * s, (rot[1, 2] + rot[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + rot[2, 2] - rot[0, 0] - rot[1, 1]) * 2.0
        q = np.array(
            [(rot[1, 0] - rot[0, 1]) / s, (rot[0, 2] + rot[2, 0]) / s, (rot[1, 2] + rot[2, 1]) / s, 0.25 * s]
        )
    return _quat_normalize(q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def compose(a: Pose, b: Pose) -> Pose:
    """Transform b followed by a: (a*b)(x) = a(b(x))."""
    return Pose(quat_multiply(a.q, b.q), a.rotation_matrix() @ b.t + a.t)


def invert(p: Pose) -> Pose:
    q_inv = np.array([p.q[0], -p.q[1], -p.q[2], -p.q[3]])
    return Pose(q_inv, -(quat_to_matrix(q_inv) @ p.t))


def rotation_angle_deg(a: Pose, b: Pose) -> float:
    """Relative rotation angle between two poses, in degrees."""
    r_rel = a.rotation_matrix().T @ b.rotation_matrix()
    c = (np.trace(r_rel) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew pinhole calibration plus frame size in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 8 or self.height < 8:
            raise ValueError("frame must be at least 8x8 pixels")

    def scaled(self, s: float) -> "CameraIntrinsics":
        """Resized camera: focal lengths, principal point and frame all scale."""
        return CameraIntrinsics(
            self.fx * s,
            self.fy * s,
            self.cx * s,
            self.cy * s,
            max(8, int(round(self.width * s))),
            max(8, int(round(self.height * s))),
        )

    def contains(self, u: float, v: float) -> bool:
        return 0.0 <= u < self.width and 0.0 <= v < self.height

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def project(p, k: CameraIntrinsics, h: Pose, z_min: float = Z_MIN):
    """World point -> Pixel, or None when the point is behind the camera."""
    r, t = h.world_to_camera()
    xc = r @ np.asarray(p, dtype=np.float64) + t
    if xc[2] <= z_min:
        return None
    return Pixel(k.fx * xc[0] / xc[2] + k.cx, k.fy * xc[1] / xc[2] + k.cy)


def project_batch(points: np.ndarray, k: CameraIntrinsics, h: Pose):
    """Vectorized projection.  Returns (uv (n,2), z (n,)); uv rows with
    z <= Z_MIN are not meaningful and must be filtered by the caller."""
    r, t = h.world_to_camera()
    xc = points @ r.T + t
    z = xc[:, 2]
    zs = np.where(z > Z_MIN, z, 1.0)
    uv = np.empty((points.shape[0], 2))
    uv[:, 0] = k.fx * xc[:, 0] / zs + k.cx
    uv[:, 1] = k.fy * xc[:, 1] / zs + k.cy
    return uv, z


def reprojection_residual(x, y, k: CameraIntrinsics, h: Pose, z_min: float = Z_MIN):
    """L1 pixel distance between y and the projection of x; None if behind."""
    proj = project(x, k, h, z_min)
    if proj is None:
        return None
    return abs(proj.u - y[0]) + abs(proj.v - y[1])


def backproject_ray(y, k: CameraIntrinsics, h: Pose, depth: float) -> np.ndarray:
    """World point at the given camera depth along the viewing ray of y."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    d = np.array([(y[0] - k.cx) / k.fx * depth, (y[1] - k.cy) / k.fy * depth, depth])
    return h.rotation_matrix() @ d + h.t
