"""Pure-numpy kernel implementations.

These are the fallback for the compiled core in ``_core.pyx``; both expose
the same functions with identical semantics.  Hash-derived quantities
(``cell_keys``, ``stream_keys``) are bit-identical across backends; float
transcendentals may differ in the last ulp.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_TWO_NEG53 = 2.0**-53


_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA_I = 0x9E3779B97F4A7C15
_MIX1_I = 0xBF58476D1CE4E5B9
_MIX2_I = 0x94D049BB133111EB


def _mix(z):
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _mix_int(z):
    """splitmix64 finalizer on Python ints, masked to 64 bits."""
    z = ((z ^ (z >> 30)) * _MIX1_I) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2_I) & _MASK
    return z ^ (z >> 31)


def _as_u64(x):
    return np.asarray(x).astype(np.int64).view(np.uint64) & _U64


def cell_keys(seed, tag, image_id, cells):
    """One uint64 key per grid cell, keyed by (seed, tag, image_id, cell).

    ``cells`` is an (n, 2) integer array of (cx, cy) grid indices.
    """
    cells = np.asarray(cells, dtype=np.int64)
    k = _mix_int((int(seed) + _GAMMA_I + int(tag)) & _MASK)
    k = _mix_int((k + _GAMMA_I + int(image_id)) & _MASK)
    kx = _mix(np.uint64((k + _GAMMA_I) & _MASK) + _as_u64(cells[:, 0]))
    return _mix(kx + _GAMMA + _as_u64(cells[:, 1]))


def stream_keys(seed, tag, ids):
    """One uint64 key per integer id, keyed by (seed, tag, id)."""
    k = _mix_int((int(seed) + _GAMMA_I + int(tag)) & _MASK)
    base = np.uint64((k + _GAMMA_I) & _MASK)
    return _mix(base + _as_u64(np.asarray(ids, dtype=np.int64)))


def keyed_normals(keys, dim):
    """Deterministic standard-normal draws, one length-``dim`` row per key.

    Uses a splitmix64 counter stream per key and the Box-Muller transform,
    so a given (key, dim) always yields the same row regardless of batch
    composition or query order.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    n = keys.shape[0]
    pairs = (dim + 1) // 2
    counters = (np.arange(1, 2 * pairs + 1, dtype=np.uint64) * _GAMMA)[None, :]
    raw = _mix(keys[:, None] + counters)
    hi = (raw >> np.uint64(11)).astype(np.float64)
    u1 = (hi[:, 0::2] + 1.0) * _TWO_NEG53
    u2 = hi[:, 1::2] * _TWO_NEG53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * np.pi) * u2
    out = np.empty((n, 2 * pairs), dtype=np.float64)
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out[:, :dim]


def disk_mask(seeds, rho, grid_w, grid_h, stride):
    """Union-of-disks occupancy grid.

    Cell (ix, iy) is set iff its center ((ix+0.5)*stride, (iy+0.5)*stride)
    lies within Euclidean distance ``rho`` of at least one seed.
    """
    seeds = np.asarray(seeds, dtype=np.float64)
    mask = np.zeros((grid_h, grid_w), dtype=np.uint8)
    r2 = rho * rho
    for su, sv in seeds:
        ix0 = max(0, int(np.ceil((su - rho) / stride - 0.5)))
        ix1 = min(grid_w - 1, int(np.floor((su + rho) / stride - 0.5)))
        iy0 = max(0, int(np.ceil((sv - rho) / stride - 0.5)))
        iy1 = min(grid_h - 1, int(np.floor((sv + rho) / stride - 0.5)))
        if ix0 > ix1 or iy0 > iy1:
            continue
        dx = (np.arange(ix0, ix1 + 1, dtype=np.float64) + 0.5) * stride - su
        dy = (np.arange(iy0, iy1 + 1, dtype=np.float64) + 0.5) * stride - sv
        d2 = dx[None, :] * dx[None, :] + dy[:, None] * dy[:, None]
        mask[iy0 : iy1 + 1, ix0 : ix1 + 1] |= d2 <= r2
    return mask


def nearest_points(queries, points):
    """Index of and squared distance to the nearest point for each query.

    Ties resolve to the lowest index.  With no points, returns index -1 and
    distance +inf.
    """
    queries = np.asarray(queries, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    n = queries.shape[0]
    idx = np.full(n, -1, dtype=np.int64)
    d2 = np.full(n, np.inf, dtype=np.float64)
    if points.shape[0] == 0 or n == 0:
        return idx, d2
    chunk = max(1, min(n, 8192))
    for lo in range(0, n, chunk):
        hi = lo + chunk
        dx = queries[lo:hi, 0:1] - points[None, :, 0]
        dy = queries[lo:hi, 1:2] - points[None, :, 1]
        dist = dx * dx + dy * dy
        idx[lo:hi] = np.argmin(dist, axis=1)
        d2[lo:hi] = dist[np.arange(dist.shape[0]), idx[lo:hi]]
    return idx, d2


def reproj_loss_grad(pred, rot, trans, intr, target, fallback, z_min, tau, soft):
    """Per-instance clamped reprojection loss and its gradient w.r.t. pred.

    ``rot``/``trans`` map world to camera.  Instances whose prediction lands
    at camera depth <= z_min take the L1 distance to ``fallback`` instead, so
    the loss stays finite and gradient-carrying everywhere.
    """
    pred = np.asarray(pred, dtype=np.float64)
    xc = np.einsum("bij,bj->bi", rot, pred) + trans
    z = xc[:, 2]
    valid = z > z_min
    zs = np.where(valid, z, 1.0)
    fx, fy, cx, cy = intr[:, 0], intr[:, 1], intr[:, 2], intr[:, 3]
    du = fx * xc[:, 0] / zs + cx - target[:, 0]
    dv = fy * xc[:, 1] / zs + cy - target[:, 1]
    r = np.abs(du) + np.abs(dv)
    if soft:
        th = np.tanh(r / tau)
        loss_r = tau * th
        dldr = 1.0 - th * th
    else:
        loss_r = np.minimum(r, tau)
        dldr = (r < tau).astype(np.float64)
    a = dldr * np.sign(du)
    b = dldr * np.sign(dv)
    gc = np.empty_like(xc)
    gc[:, 0] = a * fx / zs
    gc[:, 1] = b * fy / zs
    gc[:, 2] = -(a * fx * xc[:, 0] + b * fy * xc[:, 1]) / (zs * zs)
    grad_r = np.einsum("bij,bi->bj", rot, gc)
    diff = pred - fallback
    loss_f = np.abs(diff).sum(axis=1)
    grad_f = np.sign(diff)
    loss = np.where(valid, loss_r, loss_f)
    grad = np.where(valid[:, None], grad_r, grad_f)
    return loss, grad


def reproj_residual_l1(pred, rot, trans, intr, target, z_min):
    """Unclamped L1 reprojection residual per instance.

    Returns (residuals, valid) where valid is 0 for behind-camera
    predictions (their residual entry is meaningless).
    """
    pred = np.asarray(pred, dtype=np.float64)
    xc = np.einsum("bij,bj->bi", rot, pred) + trans
    z = xc[:, 2]
    valid = z > z_min
    zs = np.where(valid, z, 1.0)
    fx, fy, cx, cy = intr[:, 0], intr[:, 1], intr[:, 2], intr[:, 3]
    du = fx * xc[:, 0] / zs + cx - target[:, 0]
    dv = fy * xc[:, 1] / zs + cy - target[:, 1]
    res = np.where(valid, np.abs(du) + np.abs(dv), 0.0)
    return res, valid.astype(np.uint8)
