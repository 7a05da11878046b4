"""Screen-space guiding state: the per-pixel stats texture, temporal
reprojection with depth/normal history rejection, the per-frame training
pass over the VPL buffer, and checkpoint IO.

Training reads the previous-generation stats and writes a fresh buffer
(double buffering); per-pixel updates are independent, so the pass is a
parallel map in principle and a vectorized sweep here.
"""

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import mixture, rng, scene as sc, sgmap

CHECKPOINT_MAGIC = b"PGG1"
NEIGHBOR_RADIUS = 10.0
_MAX_CANDIDATES = 20  # neighbor_count(k=0) upper bound

# instrumentation: counts accesses to guiding state so experiments can
# assert the plain path-tracing arm never touches it
_access_count = 0


def note_access():
    global _access_count
    _access_count += 1


def access_count():
    return _access_count


def reset_access_count():
    global _access_count
    _access_count = 0


class CheckpointError(ValueError):
    """Raised for malformed or mismatched checkpoint files."""


@dataclass
class GuidingBuffer:
    width: int
    height: int
    stats: np.ndarray  # (H, W, 8) float32
    generation: int = 0

    @classmethod
    def create(cls, width, height):
        return cls(width, height, mixture.init_stats((height, width)).astype(np.float32))

    def stats_for_render(self):
        """Float64 view of the stats for the render pass (counted access)."""
        note_access()
        return self.stats.astype(np.float64)


@dataclass
class ReprojectionPolicy:
    depth_rel_tol: float = 0.1
    normal_dot_min: float = 0.9
    rotate_mean: bool = True


class RadianceSampleRec(NamedTuple):
    """One training record: square point, direction, luminance weight."""

    sq: np.ndarray
    direction: np.ndarray
    weight: float
    strategy: int


def reproject(gamma_prev, gbuf_prev, gbuf_cur, policy):
    """Carry per-pixel stats along motion vectors into the current frame.

    Nearest-neighbor history fetch; history is accepted only when the
    previous pixel was valid, its depth matches the reprojected depth
    within depth_rel_tol, and the normals agree. The stored mean is
    re-expressed in the current tangent frame (rejecting history if the
    rotated mean leaves the hemisphere); covariance, pi and k carry over
    unchanged. Rejected or missing history restarts from init_stats.
    """
    note_access()
    h, w = gamma_prev.height, gamma_prev.width
    prev = gamma_prev.stats.reshape(-1, 8).astype(np.float64)
    out = mixture.init_stats((h, w)).reshape(-1, 8)

    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    tx = np.rint(jj + gbuf_cur.motion[..., 0]).astype(np.int64)
    ty = np.rint(ii + gbuf_cur.motion[..., 1]).astype(np.int64)
    ok = gbuf_cur.valid & gbuf_cur.has_history
    ok &= (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    src = np.clip(ty, 0, h - 1) * w + np.clip(tx, 0, w - 1)

    prev_valid = gbuf_prev.valid.reshape(-1)[src]
    ok &= prev_valid

    depth_expected = np.linalg.norm(gbuf_cur.pos - gbuf_prev.cam_origin, axis=-1)
    depth_prev = gbuf_prev.depth.reshape(-1)[src]
    ok &= np.abs(depth_prev - depth_expected) < policy.depth_rel_tol * np.maximum(
        depth_expected, 1e-12
    )

    n_prev = gbuf_prev.normal.reshape(-1, 3)[src.reshape(-1)].reshape(h, w, 3)
    ndot = np.sum(n_prev * gbuf_cur.normal, axis=-1)
    ok &= ndot > policy.normal_dot_min

    flat_ok = ok.reshape(-1)
    idx = np.nonzero(flat_ok)[0]
    if idx.size:
        carried = prev[src.reshape(-1)[idx]]
        if policy.rotate_mean:
            mu = carried[:, (mixture.MEAN_X, mixture.MEAN_Y)]
            d_local_prev = sgmap.square_to_hemisphere(mu)
            np_prev = n_prev.reshape(-1, 3)[idx]
            n_cur = gbuf_cur.normal.reshape(-1, 3)[idx]
            t_p, b_p = sgmap.build_tangent_frame(np_prev)
            d_world = sgmap.to_world(t_p, b_p, np_prev, d_local_prev)
            t_c, b_c = sgmap.build_tangent_frame(n_cur)
            d_local_cur = sgmap.to_local(t_c, b_c, n_cur, d_world)
            below = d_local_cur[:, 2] < 0.0
            d_local_cur[:, 2] = np.maximum(d_local_cur[:, 2], 0.0)
            mu_new = sgmap.hemisphere_to_square(d_local_cur)
            carried[:, mixture.MEAN_X] = mu_new[:, 0]
            carried[:, mixture.MEAN_Y] = mu_new[:, 1]
            keep = ~below
            idx = idx[keep]
            carried = carried[keep]
        out[idx] = carried
    return GuidingBuffer(
        w, h, out.reshape(h, w, 8).astype(np.float32), gamma_prev.generation + 1
    )


def _candidate_pixels(height, width, k_epoch, radius, streams):
    """Candidate pixel indices per pixel: self first, then uniform-disk
    draws; slots beyond the per-pixel neighbor budget are masked off."""
    p = height * width
    u1 = np.stack([rng.next_f64(streams) for _ in range(_MAX_CANDIDATES - 1)], axis=1)
    u2 = np.stack([rng.next_f64(streams) for _ in range(_MAX_CANDIDATES - 1)], axis=1)
    r = radius * np.sqrt(u1)
    ang = 2.0 * np.pi * u2
    dx = np.rint(r * np.cos(ang)).astype(np.int64)
    dy = np.rint(r * np.sin(ang)).astype(np.int64)
    jj = (np.arange(p) % width)[:, None]
    ii = (np.arange(p) // width)[:, None]
    cx = jj + dx
    cy = ii + dy
    in_frame = (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
    cand = np.clip(cy, 0, height - 1) * width + np.clip(cx, 0, width - 1)
    self_idx = np.arange(p, dtype=np.int64)[:, None]
    cand = np.concatenate([self_idx, cand], axis=1)
    used = np.concatenate(
        [np.ones((p, 1), dtype=bool), in_frame], axis=1
    )
    return cand, used


def _neighbor_slot_mask(k_epoch, k_max):
    """Boolean (P, MAX_CANDIDATES) mask of slots within the per-pixel budget."""
    n = mixture.neighbor_count(k_epoch, k_max)
    return np.arange(_MAX_CANDIDATES)[None, :] < n[:, None]


def _training_records(gamma_stats, lobes, vpl, gbuf, cand, used):
    """Vectorized record construction for every (pixel, candidate) slot.

    Returns (sq, weight, resp, valid) arrays of shape (P, C[, ...]).
    """
    h, w = gbuf.height, gbuf.width
    p = h * w
    c = cand.shape[1]

    x_self = gbuf.pos.reshape(-1, 3)
    n_self = gbuf.normal.reshape(-1, 3)
    wo_self = gbuf.view.reshape(-1, 3)
    kind = gbuf.kind.reshape(-1)[:, None]
    alb = gbuf.albedo.reshape(-1, 3)[:, None, :]
    rough = gbuf.roughness.reshape(-1)[:, None]

    vpl_ok = vpl.valid.reshape(-1)[cand] & (
        vpl.strategy.reshape(-1)[cand] == mixture.STRATEGY_BRDF
    )
    valid = used & vpl_ok & gbuf.valid.reshape(-1)[:, None]

    y = vpl.y.reshape(-1, 3)[cand]                      # (P, C, 3)
    d = y - x_self[:, None, :]
    dist = np.linalg.norm(d, axis=-1)
    valid &= dist > 1e-9
    direction = d / np.maximum(dist, 1e-12)[..., None]
    cos_r = np.sum(direction * n_self[:, None, :], axis=-1)
    valid &= cos_r > 1e-9

    f = sc.brdf_eval(
        np.broadcast_to(kind, (p, c)),
        np.broadcast_to(alb, (p, c, 3)),
        np.broadcast_to(rough, (p, c)),
        direction,
        wo_self[:, None, :],
        n_self[:, None, :],
    )
    rad = vpl.radiance.reshape(-1, 3)[cand]
    weight = sc.luminance(rad * f * np.maximum(cos_r, 0.0)[..., None])
    weight = np.where(valid, weight, 0.0)

    t, b = sgmap.build_tangent_frame(n_self)
    d_local = sgmap.to_local(t[:, None, :], b[:, None, :], n_self[:, None, :], direction)
    d_local[..., 2] = np.maximum(d_local[..., 2], 0.0)
    placeholder = np.broadcast_to(np.array([0.0, 0.0, 1.0]), d_local.shape)
    d_local = np.where(valid[..., None], d_local, placeholder)
    sq = sgmap.hemisphere_to_square(d_local)

    lobe_b = mixture.GaussianLobe(
        lobes.mu[:, None, :], lobes.cov[:, None, :, :],
        lobes.chol[:, None, :, :], lobes.trunc_z[:, None],
    )
    g_sr = mixture.gaussian_pdf_square(lobe_b, sq) / sgmap.TWO_PI
    b_sr = sc.brdf_pdf(
        np.broadcast_to(kind, (p, c)),
        np.broadcast_to(rough, (p, c)),
        direction,
        wo_self[:, None, :],
        n_self[:, None, :],
    )
    resp = mixture.e_step_responsibility(gamma_stats[:, mixture.MIX_PI][:, None], g_sr, b_sr)
    return sq, weight, resp, valid


def gather_training_batch(pixel_xy, vpl, gbuf, gamma, k_max, streams):
    """Training records for one pixel (self VPL first, then neighbors).

    pixel_xy is (x, y); streams must hold one stream per buffer pixel so
    the neighbor draws match the full training pass. Returns a list of
    RadianceSampleRec.
    """
    note_access()
    x, y = pixel_xy
    h, w = gbuf.height, gbuf.width
    pix = y * w + x
    stats = gamma.stats.reshape(-1, 8).astype(np.float64)
    lobes = mixture.lobe_from_stats(stats)
    cand, used = _candidate_pixels(h, w, stats[:, mixture.EPOCH], NEIGHBOR_RADIUS, streams)
    used &= _neighbor_slot_mask(stats[:, mixture.EPOCH], k_max)
    sq, weight, resp, valid = _training_records(stats, lobes, vpl, gbuf, cand, used)
    n_pix = gbuf.normal.reshape(-1, 3)[pix]
    t, b = sgmap.build_tangent_frame(n_pix)
    recs = []
    for slot in range(cand.shape[1]):
        if valid[pix, slot]:
            d_world = sgmap.to_world(t, b, n_pix, sgmap.square_to_hemisphere(sq[pix, slot]))
            recs.append(
                RadianceSampleRec(sq[pix, slot], d_world, float(weight[pix, slot]), mixture.STRATEGY_BRDF)
            )
    return recs


def training_pass(gamma, vpl, gbuf, k_max=mixture.KMAX_DEFAULT, seed=0,
                  frame_index=0, neighbor_radius=NEIGHBOR_RADIUS):
    """One EM epoch per valid pixel, reusing VPLs from nearby pixels.

    Only BRDF-strategy VPLs contribute. Invalid G-buffer pixels are left
    untouched; empty or zero-weight batches leave a pixel's stats (and its
    epoch count) unchanged.
    """
    note_access()
    h, w = gamma.height, gamma.width
    stats = gamma.stats.reshape(-1, 8).astype(np.float64)
    lobes = mixture.lobe_from_stats(stats)
    streams = rng.make_streams(seed, frame_index, np.arange(h * w), stream_id=1)
    cand, used = _candidate_pixels(h, w, stats[:, mixture.EPOCH], neighbor_radius, streams)
    used &= _neighbor_slot_mask(stats[:, mixture.EPOCH], k_max)
    sq, weight, resp, valid = _training_records(stats, lobes, vpl, gbuf, cand, used)
    new_stats = mixture.m_step_update(stats, sq, weight, resp, valid=valid, k_max=k_max)
    untouched = ~gbuf.valid.reshape(-1)
    new_stats[untouched] = stats[untouched]
    return GuidingBuffer(
        w, h, new_stats.reshape(h, w, 8).astype(np.float32), gamma.generation + 1
    )


# ---------------------------------------------------------------------------
# checkpoints: magic, u32 width/height, row-major float32 LE stats

def checkpoint_save(gamma, path):
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", gamma.width, gamma.height))
        f.write(gamma.stats.astype("<f4").tobytes())


def checkpoint_load(path, expect_size=None):
    """Load a stats checkpoint; optionally enforce (width, height)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r} (version mismatch?)")
        header = f.read(8)
        if len(header) != 8:
            raise CheckpointError("truncated checkpoint header")
        w, h = struct.unpack("<II", header)
        if expect_size is not None and (w, h) != tuple(expect_size):
            raise CheckpointError(
                f"checkpoint is {w}x{h}, session expects {expect_size[0]}x{expect_size[1]}"
            )
        payload = f.read(w * h * 8 * 4)
        if len(payload) != w * h * 8 * 4:
            raise CheckpointError("truncated checkpoint payload")
        stats = np.frombuffer(payload, dtype="<f4").reshape(h, w, 8).copy()
    return GuidingBuffer(w, h, stats)
