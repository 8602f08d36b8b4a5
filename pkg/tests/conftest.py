"""Shared helpers for the test suite."""

import numpy as np

from scrfocus.geometry import CameraIntrinsics, Pose


def random_pose(rng, max_angle_deg=180.0, max_offset=5.0) -> Pose:
    """Uniformly oriented pose with a bounded random translation."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.uniform(-max_angle_deg, max_angle_deg))
    q = np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])
    return Pose(q, rng.uniform(-max_offset, max_offset, size=3))


def random_intrinsics(rng) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=rng.uniform(50, 400),
        fy=rng.uniform(50, 400),
        cx=rng.uniform(30, 200),
        cy=rng.uniform(30, 200),
        width=int(rng.integers(64, 512)),
        height=int(rng.integers(64, 512)),
    )


def homogeneous_projection_oracle(point, k, pose):
    """Independent 3x4 matrix projection: P = K [R|t] with [R|t] from the
    inverted 4x4 camera-to-world matrix.  Returns (u, v, camera_depth)."""
    m = np.eye(4)
    m[:3, :3] = pose.rotation_matrix()
    m[:3, 3] = pose.t
    world_to_cam = np.linalg.inv(m)
    kmat = np.array([[k.fx, 0, k.cx], [0, k.fy, k.cy], [0, 0, 1.0]])
    p_full = kmat @ world_to_cam[:3, :]
    vec = p_full @ np.array([point[0], point[1], point[2], 1.0])
    return vec[0] / vec[2], vec[1] / vec[2], vec[2]
