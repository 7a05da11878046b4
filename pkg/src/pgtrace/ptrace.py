"""Path-tracing pass: ray-cast G-buffer, guided first-bounce sampling,
next-event estimation at every vertex, and per-pixel VPL write-out.

Estimator policy (identical in plain and guided modes): emission is
counted at the primary hit and through background misses only; direct
light at every path vertex comes from next-event estimation, so emitter
hits along scatter rays are never double counted. The first bounce
divides by the full mixture pdf whenever the pixel is guided, which keeps
the one-sample mixture estimator unbiased.

Pixels own independent RNG streams hashed from (seed, frame, pixel), so
images are bitwise reproducible under any worker partitioning.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import mixture, rng, scene as sc, sgmap

_EZ = np.array([0.0, 0.0, 1.0])


@dataclass
class PathConfig:
    max_depth: int = 4
    nee: bool = True
    guiding: bool = False
    roughness_min_guide: float = 0.05
    spp: int = 1

    def __post_init__(self):
        if self.guiding and self.max_depth < 2:
            raise ValueError("guiding needs max_depth >= 2 (the first bounce must exist)")
        if self.spp < 1 or self.max_depth < 1:
            raise ValueError("spp and max_depth must be >= 1")


@dataclass
class GBuffer:
    """Primary-hit record per pixel plus reprojection bookkeeping.

    Material kind/albedo are cached alongside the id so the training pass
    can evaluate receiver BRDFs without holding the scene.
    """

    width: int
    height: int
    valid: np.ndarray      # (H,W) bool
    pos: np.ndarray        # (H,W,3)
    normal: np.ndarray     # (H,W,3) faces the camera side
    depth: np.ndarray      # (H,W) distance from the camera origin
    mat: np.ndarray        # (H,W) int32, -1 on miss
    kind: np.ndarray       # (H,W) int32 material kind
    albedo: np.ndarray     # (H,W,3)
    roughness: np.ndarray  # (H,W)
    front: np.ndarray      # (H,W) bool, geometric front side was hit
    view: np.ndarray       # (H,W,3) unit vector toward the camera
    motion: np.ndarray     # (H,W,2) (du, dv) to previous-frame coords
    has_history: np.ndarray  # (H,W) bool
    cam_origin: np.ndarray   # (3,)


class VplBuffer(NamedTuple):
    """Per-pixel virtual point light written by the render pass."""

    valid: np.ndarray     # (H,W) bool
    y: np.ndarray         # (H,W,3) next-interaction position
    radiance: np.ndarray  # (H,W,3) estimated incoming radiance from y
    strategy: np.ndarray  # (H,W) uint8 sampling-strategy tag


@dataclass
class RenderResult:
    image: np.ndarray           # (H,W,3) float32 linear radiance
    vpl: VplBuffer
    gbuffer: GBuffer
    mean_path_length: float
    nonfinite_count: int
    lum_mean: Optional[np.ndarray] = None  # (H,W) per-sample luminance mean
    lum_var: Optional[np.ndarray] = None   # (H,W) per-sample luminance variance


def worker_count():
    env = os.environ.get("PG_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def gbuffer_pass(scene, frame_index, resolution):
    """One primary ray through each pixel center (never jittered)."""
    width, height = resolution
    cam = sc.camera_at(scene, frame_index)
    py, px = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    dirs = sc.primary_ray_dirs(cam, width, height, px.astype(np.float64), py.astype(np.float64))
    dirs = dirs.reshape(-1, 3)
    origins = np.broadcast_to(cam.origin, dirs.shape)
    res = sc.intersect(scene, origins, dirs)
    hit = res["hit"]
    mat = res["mat"]
    safe_mat = np.maximum(mat, 0)

    def grid(a, ch=None):
        return a.reshape((height, width) + (() if ch is None else (ch,)))

    return GBuffer(
        width=width,
        height=height,
        valid=grid(hit),
        pos=grid(res["pos"], 3),
        normal=grid(res["normal"], 3),
        depth=grid(np.where(hit, res["t"], 0.0)),
        mat=grid(mat),
        kind=grid(np.where(hit, scene.mat_kind[safe_mat], 0).astype(np.int32)),
        albedo=grid(np.where(hit[:, None], scene.mat_albedo[safe_mat], 0.0), 3),
        roughness=grid(np.where(hit, scene.mat_rough[safe_mat], 0.0)),
        front=grid(res["front"]),
        view=grid(-dirs, 3),
        motion=np.zeros((height, width, 2)),
        has_history=np.zeros((height, width), dtype=bool),
        cam_origin=cam.origin.copy(),
    )


def motion_vectors(prev_cam, cur_cam, gbuf):
    """Screen-space offsets to the previous frame for every valid pixel.

    Geometry is static, only the camera animates: reprojection is the
    previous camera's projection of the current hit point. Pixels that
    leave the frame or fall behind the previous camera carry no history.
    """
    h, w = gbuf.height, gbuf.width
    pts = gbuf.pos.reshape(-1, 3)
    px, py, in_front = sc.project_to_pixels(prev_cam, w, h, pts)
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    du = px.reshape(h, w) - jj
    dv = py.reshape(h, w) - ii
    tx = np.rint(px.reshape(h, w))
    ty = np.rint(py.reshape(h, w))
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    has = gbuf.valid & in_front.reshape(h, w) & inside
    motion = np.stack([np.where(has, du, 0.0), np.where(has, dv, 0.0)], axis=-1)
    return motion, has


def _lambert_local(u1, u2):
    r = np.sqrt(u1)
    ang = 2.0 * np.pi * u2
    return np.stack(
        [r * np.cos(ang), r * np.sin(ang), np.sqrt(np.maximum(1.0 - u1, 0.0))], axis=-1
    )


def _sample_first_bounce(scene, idx, pos, nrm, mat, wo, stats, lobe, guided, streams):
    """First scattering direction per lane: guided mixture or plain BRDF.

    Returns world-space (wi, pdf, strategy, valid). Guided lanes divide by
    the full mixture density; plain lanes by the BRDF density.
    """
    n_lanes = len(idx)
    wi = np.zeros((n_lanes, 3))
    pdf = np.zeros(n_lanes)
    strat = np.zeros(n_lanes, dtype=np.uint8)
    valid = np.zeros(n_lanes, dtype=bool)

    plain = np.nonzero(~guided)[0]
    if plain.size:
        lanes = idx[plain]
        sub = streams[lanes]
        w, p, ok = sc.brdf_sample(
            scene.mat_kind[mat[plain]],
            scene.mat_albedo[mat[plain]],
            scene.mat_rough[mat[plain]],
            wo[plain],
            nrm[plain],
            sub,
        )
        streams[lanes] = sub
        wi[plain] = w
        pdf[plain] = p
        valid[plain] = ok

    gsel = np.nonzero(guided)[0]
    if gsel.size:
        lanes = idx[gsel]
        t, b = sgmap.build_tangent_frame(nrm[gsel])
        n_g = nrm[gsel]
        wo_l = sgmap.to_local(t, b, n_g, wo[gsel])
        kind_g = scene.mat_kind[mat[gsel]]
        alb_g = scene.mat_albedo[mat[gsel]]
        rough_g = scene.mat_rough[mat[gsel]]
        ez = np.broadcast_to(_EZ, (gsel.size, 3))

        def cb_sample(rel, sub_streams):
            w_l, _, ok = sc.brdf_sample(
                kind_g[rel], alb_g[rel], rough_g[rel], wo_l[rel], ez[rel], sub_streams
            )
            return w_l, ok

        def cb_pdf(rel, dirs_l):
            return sc.brdf_pdf(kind_g[rel], rough_g[rel], dirs_l, wo_l[rel], ez[rel])

        sub = streams[lanes]
        lobe_g = mixture.GaussianLobe(
            lobe.mu[gsel], lobe.cov[gsel], lobe.chol[gsel], lobe.trunc_z[gsel]
        )
        d_l, p, s, ok = mixture.sample_mixture(stats[gsel], lobe_g, cb_sample, cb_pdf, sub)
        streams[lanes] = sub
        wi[gsel] = sgmap.to_world(t, b, n_g, d_l)
        pdf[gsel] = p
        strat[gsel] = s
        valid[gsel] = ok & (p > 0.0)
    return wi, pdf, strat, valid


def _trace_lanes(scene, cfg, streams, valid0, pos0, nrm0, mat0, front0, view0,
                 stats_flat=None, lobe_flat=None, guide_mask=None):
    """Trace one sample for every lane; all arrays are lane-sized.

    Returns (L, Li, vpl_valid, vpl_y, vpl_strategy, segments) where Li is
    the incoming-radiance estimate from the first-bounce hit (including
    its emission) and segments counts traced scatter rays.
    """
    n = len(valid0)
    L = np.zeros((n, 3))
    Li = np.zeros((n, 3))
    vpl_valid = np.zeros(n, dtype=bool)
    vpl_y = np.zeros((n, 3))
    vpl_strat = np.zeros(n, dtype=np.uint8)

    # miss lanes show the background; valid front-facing emitters add
    # their emission exactly once (the depth-0 term)
    L[~valid0] = scene.background
    em_lanes = valid0 & front0
    L[em_lanes] += scene.mat_emission[mat0[em_lanes]]

    pos = pos0.copy()
    nrm = nrm0.copy()
    mat = mat0.copy()
    wo = view0.copy()
    T = np.zeros((n, 3))
    T[valid0] = 1.0
    Trel = np.zeros((n, 3))
    active = valid0.copy()
    segments = 0

    for depth in range(cfg.max_depth):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break

        if cfg.nee and scene.num_emitters:
            sub = streams[idx]
            ldir, ldist, lrad, lpdf = sc.sample_emitter(scene, pos[idx], sub)
            streams[idx] = sub
            f = sc.brdf_eval(
                scene.mat_kind[mat[idx]],
                scene.mat_albedo[mat[idx]],
                scene.mat_rough[mat[idx]],
                ldir,
                wo[idx],
                nrm[idx],
            )
            cos_x = np.sum(ldir * nrm[idx], axis=-1)
            cand = (lpdf > 0.0) & (cos_x > 0.0) & np.any(f > 0.0, axis=-1)
            contrib = np.zeros((idx.size, 3))
            ci = np.nonzero(cand)[0]
            if ci.size:
                blocked = sc.occluded(
                    scene, pos[idx[ci]], ldir[ci], ldist[ci] - sc.RAY_EPS
                )
                open_ = ci[~blocked]
                contrib[open_] = (
                    lrad[open_] * f[open_] * (cos_x[open_] / lpdf[open_])[:, None]
                )
            L[idx] += T[idx] * contrib
            if depth >= 1:
                Li[idx] += Trel[idx] * contrib

        if depth == 0 and guide_mask is not None and np.any(guide_mask[idx]):
            wi, pdf, strat, ok = _sample_first_bounce(
                scene, idx, pos[idx], nrm[idx], mat[idx], wo[idx],
                stats_flat, lobe_flat, guide_mask[idx], streams,
            )
        else:
            sub = streams[idx]
            wi, pdf, ok = sc.brdf_sample(
                scene.mat_kind[mat[idx]],
                scene.mat_albedo[mat[idx]],
                scene.mat_rough[mat[idx]],
                wo[idx],
                nrm[idx],
                sub,
            )
            streams[idx] = sub
            strat = np.full(idx.size, mixture.STRATEGY_BRDF, dtype=np.uint8)

        f = sc.brdf_eval(
            scene.mat_kind[mat[idx]],
            scene.mat_albedo[mat[idx]],
            scene.mat_rough[mat[idx]],
            wi,
            wo[idx],
            nrm[idx],
        )
        cos_i = np.sum(wi * nrm[idx], axis=-1)
        ok = ok & (pdf > 0.0) & (cos_i > 0.0)
        weight = np.where(ok[:, None], f * (cos_i / np.where(ok, pdf, 1.0))[:, None], 0.0)
        T[idx] *= weight
        if depth >= 1:
            Trel[idx] *= weight
        dead = idx[~ok]
        active[dead] = False
        idx = idx[ok]
        if idx.size == 0:
            continue
        wi = wi[ok]
        strat = strat[ok]

        res = sc.intersect(scene, pos[idx], wi)
        segments += idx.size
        hit = res["hit"]

        miss = idx[~hit]
        if miss.size:
            L[miss] += T[miss] * scene.background
            if depth >= 1:
                Li[miss] += Trel[miss] * scene.background
            active[miss] = False

        hidx = idx[hit]
        if hidx.size:
            pos[hidx] = res["pos"][hit]
            nrm[hidx] = res["normal"][hit]
            mat[hidx] = res["mat"][hit]
            wo[hidx] = -wi[hit]

        if depth == 0:
            if hidx.size:
                vpl_valid[hidx] = True
                vpl_y[hidx] = res["pos"][hit]
                Trel[hidx] = 1.0
                fr = res["front"][hit]
                em_idx = hidx[fr]
                Li[em_idx] += scene.mat_emission[res["mat"][hit][fr]]
            vpl_strat[idx] = strat

    return L, Li, vpl_valid, vpl_y, vpl_strat, segments


class PixelHit(NamedTuple):
    """Single-pixel view of a G-buffer entry, for the per-pixel API."""

    valid: bool
    pos: np.ndarray
    normal: np.ndarray
    mat: int
    roughness: float
    front: bool
    view: np.ndarray


def trace_pixel(scene, gpx, guiding_entry, cfg, streams):
    """One path sample for a single pixel; returns (color, vpl dict).

    guiding_entry is None for plain BRDF sampling or (stats, lobe) for the
    learned mixture. The same lane kernel used by whole-frame rendering
    runs here on a one-lane batch.
    """
    valid = np.array([bool(gpx.valid)])
    pos = np.asarray(gpx.pos, dtype=np.float64).reshape(1, 3)
    nrm = np.asarray(gpx.normal, dtype=np.float64).reshape(1, 3)
    mat = np.array([gpx.mat if gpx.valid else 0], dtype=np.int32)
    front = np.array([bool(gpx.front)])
    view = np.asarray(gpx.view, dtype=np.float64).reshape(1, 3)

    if guiding_entry is not None:
        stats, lobe = guiding_entry
        stats = np.asarray(stats, dtype=np.float64).reshape(1, 8)
        lobe = mixture.GaussianLobe(
            np.asarray(lobe.mu).reshape(1, 2),
            np.asarray(lobe.cov).reshape(1, 2, 2),
            np.asarray(lobe.chol).reshape(1, 2, 2),
            np.atleast_1d(lobe.trunc_z),
        )
        rough_ok = (
            scene.mat_kind[gpx.mat] == sc.DIFFUSE
            or gpx.roughness >= cfg.roughness_min_guide
        )
        guided = valid & rough_ok & np.array([stats[0, mixture.EPOCH] >= 1.0])
    else:
        stats = lobe = None
        guided = None

    L, Li, vv, vy, vs, _ = _trace_lanes(
        scene, cfg, streams, valid, pos, nrm, mat, front, view, stats, lobe, guided
    )
    bad = ~np.isfinite(L[0])
    if np.any(bad):
        L[0] = np.where(bad, 0.0, L[0])
    return L[0], {
        "valid": bool(vv[0]),
        "y": vy[0],
        "radiance": Li[0],
        "strategy": int(vs[0]),
    }


_MAX_LANES = 1 << 18  # cap on lanes per batch (memory / cache trade-off)


def _render_chunk(scene, cfg, frame_index, seed, gbuf, rows, stats_flat, lobe_flat,
                  want_moments):
    """Render a horizontal band of rows; returns per-pixel accumulators.

    Samples are traced as parallel lanes: a batch holds every pixel of the
    band replicated spp_sub times, each (pixel, sample) pair owning its
    own RNG stream keyed on pixel_index * spp + sample_index.
    """
    h0, h1 = rows
    w = gbuf.width
    count = (h1 - h0) * w
    pix_global = np.arange(h0 * w, h1 * w, dtype=np.int64)

    valid = gbuf.valid[h0:h1].reshape(-1)
    pos = gbuf.pos[h0:h1].reshape(-1, 3)
    nrm = gbuf.normal[h0:h1].reshape(-1, 3)
    mat = np.maximum(gbuf.mat[h0:h1].reshape(-1), 0)
    front = gbuf.front[h0:h1].reshape(-1)
    view = gbuf.view[h0:h1].reshape(-1, 3)

    if stats_flat is not None:
        s_chunk = stats_flat[h0 * w : h1 * w]
        l_chunk = mixture.GaussianLobe(
            lobe_flat.mu[h0 * w : h1 * w],
            lobe_flat.cov[h0 * w : h1 * w],
            lobe_flat.chol[h0 * w : h1 * w],
            lobe_flat.trunc_z[h0 * w : h1 * w],
        )
        # the near-mirror disable rule only concerns glossy surfaces;
        # trained history (k >= 1) gates guiding everywhere else
        rough = gbuf.roughness[h0:h1].reshape(-1)
        kind = gbuf.kind[h0:h1].reshape(-1)
        guided = (
            valid
            & ((kind == sc.DIFFUSE) | (rough >= cfg.roughness_min_guide))
            & (s_chunk[:, mixture.EPOCH] >= 1.0)
        )
    else:
        s_chunk = l_chunk = None
        guided = None

    spp_sub = max(1, min(cfg.spp, _MAX_LANES // max(count, 1)))
    acc = np.zeros((count, 3))
    lum_sum = np.zeros(count) if want_moments else None
    lum_sq = np.zeros(count) if want_moments else None
    nonfinite = 0
    segments = 0
    vpl = None

    def tile(a, k):
        return np.repeat(a, k, axis=0)

    done = 0
    while done < cfg.spp:
        k = min(spp_sub, cfg.spp - done)
        lane_keys = (pix_global[:, None] * cfg.spp + (done + np.arange(k))[None, :]).reshape(-1)
        streams = rng.make_streams(seed, frame_index, lane_keys)
        sk = tile(s_chunk, k) if s_chunk is not None else None
        lk = (
            mixture.GaussianLobe(
                tile(l_chunk.mu, k), tile(l_chunk.cov, k),
                tile(l_chunk.chol, k), tile(l_chunk.trunc_z, k),
            )
            if l_chunk is not None
            else None
        )
        gk = tile(guided, k) if guided is not None else None
        L, Li, vv, vy, vs, seg = _trace_lanes(
            scene, cfg, streams, tile(valid, k), tile(pos, k), tile(nrm, k),
            tile(mat, k), tile(front, k), tile(view, k), sk, lk, gk,
        )
        segments += seg
        bad = ~np.all(np.isfinite(L), axis=-1)
        if np.any(bad):
            nonfinite += int(bad.sum())
            L[bad] = 0.0
        bad_li = ~np.all(np.isfinite(Li), axis=-1)
        if np.any(bad_li):
            Li[bad_li] = 0.0
            vv[bad_li] = False
        acc += L.reshape(count, k, 3).sum(axis=1)
        if want_moments:
            lum = sc.luminance(L).reshape(count, k)
            lum_sum += lum.sum(axis=1)
            lum_sq += (lum * lum).sum(axis=1)
        # keep the VPL of the last sample per pixel
        vpl = (
            vv.reshape(count, k)[:, -1].copy(),
            vy.reshape(count, k, 3)[:, -1].copy(),
            Li.reshape(count, k, 3)[:, -1].copy(),
            vs.reshape(count, k)[:, -1].copy(),
        )
        done += k
    return acc, vpl, nonfinite, segments, lum_sum, lum_sq


def render_frame(scene, frame_index, guiding_stats, cfg, seed, resolution=None,
                 gbuf=None, want_moments=False):
    """Render one frame; deterministic for fixed inputs.

    guiding_stats is an (H, W, 8) array (or None to disable guiding). The
    G-buffer may be passed in when the caller already ran gbuffer_pass
    (e.g. to attach motion vectors); otherwise it is generated here from
    `resolution` = (width, height).
    """
    if gbuf is None:
        if resolution is None:
            raise ValueError("render_frame needs either a G-buffer or a resolution")
        gbuf = gbuffer_pass(scene, frame_index, resolution)
    h, w = gbuf.height, gbuf.width
    if cfg.guiding and guiding_stats is not None:
        gs = np.asarray(guiding_stats)
        if gs.size != h * w * 8:
            raise ValueError("guiding buffer dimensions do not match the resolution")

    stats_flat = None
    lobe_flat = None
    if cfg.guiding and guiding_stats is not None:
        stats_flat = np.asarray(guiding_stats, dtype=np.float64).reshape(h * w, 8)
        lobe_flat = mixture.lobe_from_stats(stats_flat)

    workers = min(worker_count(), h)
    # keep bands at least a few rows tall; tiny bands only add overhead
    bands = max(1, min(workers, h))
    edges = np.linspace(0, h, bands + 1, dtype=int)
    jobs = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    results = [None] * len(jobs)
    if len(jobs) == 1 or workers == 1:
        for i, rows in enumerate(jobs):
            results[i] = _render_chunk(
                scene, cfg, frame_index, seed, gbuf, rows, stats_flat, lobe_flat, want_moments
            )
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(
                    _render_chunk, scene, cfg, frame_index, seed, gbuf, rows,
                    stats_flat, lobe_flat, want_moments,
                )
                for rows in jobs
            ]
            results = [f.result() for f in futs]

    image = np.concatenate([r[0] for r in results]).reshape(h, w, 3) / cfg.spp
    vpl = VplBuffer(
        valid=np.concatenate([r[1][0] for r in results]).reshape(h, w),
        y=np.concatenate([r[1][1] for r in results]).reshape(h, w, 3),
        radiance=np.concatenate([r[1][2] for r in results]).reshape(h, w, 3),
        strategy=np.concatenate([r[1][3] for r in results]).reshape(h, w),
    )
    nonfinite = sum(r[2] for r in results)
    segments = sum(r[3] for r in results)
    total_paths = h * w * cfg.spp
    out = RenderResult(
        image=image.astype(np.float32),
        vpl=vpl,
        gbuffer=gbuf,
        mean_path_length=1.0 + segments / max(total_paths, 1),
        nonfinite_count=nonfinite,
    )
    if want_moments:
        n = float(cfg.spp)
        lsum = np.concatenate([r[4] for r in results]).reshape(h, w)
        lsq = np.concatenate([r[5] for r in results]).reshape(h, w)
        out.lum_mean = lsum / n
        out.lum_var = np.maximum(lsq / n - out.lum_mean**2, 0.0) * (n / max(n - 1.0, 1.0))
    return out
