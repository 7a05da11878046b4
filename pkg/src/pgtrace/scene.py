"""Analytic scenes: spheres and quads, diffuse/GGX materials, one-sided
area emitters, keyframed pinhole camera, plus the matching evaluate /
sample / pdf routines for both BRDF kinds.

Geometry is stored struct-of-arrays so the intersection routines can run
over whole ray batches; the primitive count stays small (desk scale), so
a linear scan per primitive type is both the implementation and the
obvious correctness oracle.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng, sgmap

DIFFUSE = 0
GLOSSY = 1

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])

RAY_EPS = 1e-4  # self-intersection epsilon, scene units


def luminance(rgb):
    return np.asarray(rgb, dtype=np.float64) @ LUMA_WEIGHTS


def normalize(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(n, 1e-30)


class SceneError(ValueError):
    """Raised for malformed or invariant-violating scene documents."""


@dataclass(frozen=True)
class CameraKeyframe:
    frame: int
    origin: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_deg: float


@dataclass(frozen=True)
class Camera:
    origin: np.ndarray
    forward: np.ndarray
    right: np.ndarray
    up: np.ndarray
    tan_half_fov: float


@dataclass
class Scene:
    # materials (SoA)
    mat_names: list
    mat_kind: np.ndarray      # (M,) int
    mat_albedo: np.ndarray    # (M,3)
    mat_rough: np.ndarray     # (M,)
    mat_emission: np.ndarray  # (M,3)
    # spheres
    sph_center: np.ndarray    # (S,3)
    sph_radius: np.ndarray    # (S,)
    sph_mat: np.ndarray       # (S,) int
    # quads
    quad_corner: np.ndarray   # (Q,3)
    quad_eu: np.ndarray       # (Q,3)
    quad_ev: np.ndarray       # (Q,3)
    quad_normal: np.ndarray   # (Q,3) unit, emission side
    quad_area: np.ndarray     # (Q,)
    quad_mat: np.ndarray      # (Q,) int
    emitter_quads: np.ndarray  # (E,) indices into the quad arrays
    keyframes: list
    background: np.ndarray    # (3,)

    @property
    def num_emitters(self):
        return len(self.emitter_quads)


# ---------------------------------------------------------------------------
# camera

def camera_at(scene, frame_index):
    """Camera for a frame, linearly interpolating between keyframes."""
    kf = scene.keyframes
    f = float(frame_index)
    if f <= kf[0].frame or len(kf) == 1:
        a = b = kf[0]
        t = 0.0
    elif f >= kf[-1].frame:
        a = b = kf[-1]
        t = 0.0
    else:
        hi = next(i for i in range(1, len(kf)) if kf[i].frame >= f)
        a, b = kf[hi - 1], kf[hi]
        t = (f - a.frame) / float(b.frame - a.frame)
    origin = (1 - t) * a.origin + t * b.origin
    look = (1 - t) * a.look_at + t * b.look_at
    up_hint = normalize((1 - t) * a.up + t * b.up)
    fov = (1 - t) * a.fov_deg + t * b.fov_deg
    forward = normalize(look - origin)
    right = normalize(np.cross(forward, up_hint))
    up = np.cross(right, forward)
    return Camera(origin, forward, right, up, math.tan(math.radians(fov) * 0.5))


def camera_is_static(scene):
    kf = scene.keyframes
    return all(
        np.array_equal(k.origin, kf[0].origin)
        and np.array_equal(k.look_at, kf[0].look_at)
        and np.array_equal(k.up, kf[0].up)
        and k.fov_deg == kf[0].fov_deg
        for k in kf
    )


def primary_ray_dirs(cam, width, height, px, py):
    """World-space ray directions through pixel centers (px+0.5, py+0.5)."""
    aspect = width / float(height)
    ndc_x = (2.0 * (px + 0.5) / width - 1.0) * cam.tan_half_fov * aspect
    ndc_y = (1.0 - 2.0 * (py + 0.5) / height) * cam.tan_half_fov
    d = (
        cam.forward
        + ndc_x[..., None] * cam.right
        + ndc_y[..., None] * cam.up
    )
    return normalize(d)


def project_to_pixels(cam, width, height, points):
    """World points -> continuous pixel coordinates under a camera.

    Returns (px, py, in_front) where in_front is False behind the camera.
    """
    aspect = width / float(height)
    d = np.asarray(points, dtype=np.float64) - cam.origin
    zc = d @ cam.forward
    in_front = zc > 1e-9
    safe_z = np.where(in_front, zc, 1.0)
    xc = (d @ cam.right) / safe_z
    yc = (d @ cam.up) / safe_z
    px = (xc / (cam.tan_half_fov * aspect) + 1.0) * 0.5 * width - 0.5
    py = (1.0 - yc / cam.tan_half_fov) * 0.5 * height - 0.5
    return px, py, in_front


# ---------------------------------------------------------------------------
# intersection

def intersect(scene, origins, dirs, t_min=RAY_EPS, t_max=np.inf):
    """Nearest hit per ray.

    Returns dict of arrays: hit (bool), t, pos, normal (flipped to oppose
    the ray), mat (int, -1 for misses), front (True when the geometric
    normal faces the ray origin side) and is_emitter.
    """
    origins = np.asarray(origins, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    n = origins.shape[0]
    best_t = np.full(n, np.inf)
    best_kind = np.full(n, -1, dtype=np.int8)
    best_idx = np.full(n, -1, dtype=np.int32)
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,))
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,))

    for i in range(len(scene.sph_radius)):
        oc = origins - scene.sph_center[i]
        b = np.sum(oc * dirs, axis=-1)
        c = np.sum(oc * oc, axis=-1) - scene.sph_radius[i] ** 2
        disc = b * b - c
        ok = disc > 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where((t0 > t_min) & (t0 < t_max), t0, t1)
        ok &= (t > t_min) & (t < t_max) & (t < best_t)
        best_t = np.where(ok, t, best_t)
        best_kind = np.where(ok, 0, best_kind)
        best_idx = np.where(ok, i, best_idx)

    for i in range(len(scene.quad_mat)):
        nrm = scene.quad_normal[i]
        denom = dirs @ nrm
        ok = np.abs(denom) > 1e-12
        t = np.where(ok, ((scene.quad_corner[i] - origins) @ nrm) / np.where(ok, denom, 1.0), np.inf)
        p = origins + t[:, None] * dirs
        rel = p - scene.quad_corner[i]
        eu = scene.quad_eu[i]
        ev = scene.quad_ev[i]
        a = (rel @ eu) / (eu @ eu)
        bb = (rel @ ev) / (ev @ ev)
        ok &= (a >= 0.0) & (a <= 1.0) & (bb >= 0.0) & (bb <= 1.0)
        ok &= (t > t_min) & (t < t_max) & (t < best_t)
        best_t = np.where(ok, t, best_t)
        best_kind = np.where(ok, 1, best_kind)
        best_idx = np.where(ok, i, best_idx)

    hit = best_kind >= 0
    pos = origins + best_t[:, None] * dirs
    normal = np.zeros((n, 3))
    mat = np.full(n, -1, dtype=np.int32)

    sm = hit & (best_kind == 0)
    if np.any(sm):
        idx = best_idx[sm]
        normal[sm] = (pos[sm] - scene.sph_center[idx]) / scene.sph_radius[idx][:, None]
        mat[sm] = scene.sph_mat[idx]
    qm = hit & (best_kind == 1)
    if np.any(qm):
        idx = best_idx[qm]
        normal[qm] = scene.quad_normal[idx]
        mat[qm] = scene.quad_mat[idx]

    facing = np.sum(normal * dirs, axis=-1)
    front = hit & (facing < 0.0)
    normal = np.where((facing > 0.0)[:, None], -normal, normal)
    is_em = np.zeros(n, dtype=bool)
    is_em[hit] = np.any(scene.mat_emission[mat[hit]] > 0.0, axis=-1)
    return {
        "hit": hit,
        "t": np.where(hit, best_t, np.inf),
        "pos": pos,
        "normal": normal,
        "mat": mat,
        "front": front,
        "is_emitter": is_em,
    }


def occluded(scene, origins, dirs, t_max):
    """True where any geometry blocks the segment (t_min, t_max)."""
    res = intersect(scene, origins, dirs, RAY_EPS, t_max)
    return res["hit"]


# ---------------------------------------------------------------------------
# BRDFs (GGX alpha = roughness^2, Smith separable masking, Schlick Fresnel)

def _ggx_ndf(alpha, cos_h):
    a2 = alpha * alpha
    d = cos_h * cos_h * (a2 - 1.0) + 1.0
    return a2 / np.maximum(np.pi * d * d, 1e-30)


def _smith_g1(alpha, cos_v):
    a2 = alpha * alpha
    return 2.0 * cos_v / np.maximum(cos_v + np.sqrt(a2 + (1.0 - a2) * cos_v * cos_v), 1e-30)


def brdf_eval(kind, albedo, rough, wi, wo, n):
    """BRDF value (RGB). Zero when either direction is below the surface."""
    kind = np.asarray(kind)
    albedo = np.asarray(albedo, dtype=np.float64)
    wi = np.asarray(wi, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    cos_i = np.sum(wi * n, axis=-1)
    cos_o = np.sum(wo * n, axis=-1)
    above = (cos_i > 0.0) & (cos_o > 0.0)

    out = np.where(above[..., None], albedo / np.pi, 0.0)

    gm = np.asarray(kind == GLOSSY)
    if np.any(gm):
        alpha = np.maximum(np.asarray(rough, dtype=np.float64) ** 2, 1e-6)
        h = normalize(wi + wo)
        cos_h = np.abs(np.sum(h * n, axis=-1))
        hdotwi = np.sum(h * wi, axis=-1)
        d = _ggx_ndf(alpha, cos_h)
        g = _smith_g1(alpha, np.abs(cos_i)) * _smith_g1(alpha, np.abs(cos_o))
        fres = albedo + (1.0 - albedo) * np.power(
            np.clip(1.0 - np.abs(hdotwi), 0.0, 1.0), 5.0
        )[..., None]
        spec = fres * (d * g / np.maximum(4.0 * cos_i * cos_o, 1e-30))[..., None]
        out = np.where((gm & above)[..., None], spec, out)
    return out


def brdf_pdf(kind, rough, wi, wo, n):
    """Solid-angle density of brdf_sample; zero below the hemisphere."""
    kind = np.asarray(kind)
    wi = np.asarray(wi, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    cos_i = np.sum(wi * n, axis=-1)
    cos_o = np.sum(wo * n, axis=-1)
    above = (cos_i > 0.0) & (cos_o > 0.0)
    pdf = np.where(above, cos_i / np.pi, 0.0)

    gm = np.asarray(kind == GLOSSY)
    if np.any(gm):
        alpha = np.maximum(np.asarray(rough, dtype=np.float64) ** 2, 1e-6)
        h = normalize(wi + wo)
        cos_h = np.abs(np.sum(h * n, axis=-1))
        # visible-normal sampling density: G1(wo) D(h) / (4 cos_o)
        g_pdf = _smith_g1(alpha, np.abs(cos_o)) * _ggx_ndf(alpha, cos_h) / np.maximum(
            4.0 * cos_o, 1e-30
        )
        pdf = np.where(gm & above, g_pdf, pdf)
    return pdf


def _sample_cosine_local(u1, u2):
    r = np.sqrt(u1)
    ang = 2.0 * np.pi * u2
    return np.stack(
        [r * np.cos(ang), r * np.sin(ang), np.sqrt(np.maximum(1.0 - u1, 0.0))], axis=-1
    )


def _sample_ggx_vndf_local(alpha, wo_l, u1, u2):
    """Heitz visible-normal sampling of the GGX distribution (local frame)."""
    a = alpha[..., None]
    vh = normalize(wo_l * np.concatenate([a, a, np.ones_like(a)], axis=-1))
    # orthonormal basis around vh
    lensq = vh[..., 0] ** 2 + vh[..., 1] ** 2
    safe = lensq > 1e-18
    inv = 1.0 / np.sqrt(np.where(safe, lensq, 1.0))
    t1 = np.where(
        safe[..., None],
        np.stack([-vh[..., 1] * inv, vh[..., 0] * inv, np.zeros_like(inv)], axis=-1),
        np.broadcast_to(np.array([1.0, 0.0, 0.0]), vh.shape),
    )
    t2 = np.cross(vh, t1)
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    p1 = r * np.cos(phi)
    p2 = r * np.sin(phi)
    s = 0.5 * (1.0 + vh[..., 2])
    p2 = (1.0 - s) * np.sqrt(np.maximum(1.0 - p1 * p1, 0.0)) + s * p2
    nh = (
        p1[..., None] * t1
        + p2[..., None] * t2
        + np.sqrt(np.maximum(1.0 - p1 * p1 - p2 * p2, 0.0))[..., None] * vh
    )
    h = normalize(
        np.stack(
            [alpha * nh[..., 0], alpha * nh[..., 1], np.maximum(nh[..., 2], 1e-9)],
            axis=-1,
        )
    )
    wi_l = 2.0 * np.sum(wo_l * h, axis=-1, keepdims=True) * h - wo_l
    return wi_l


def brdf_sample(kind, albedo, rough, wo, n, streams):
    """Sample a scatter direction; pdf matches brdf_pdf exactly.

    Returns (wi, pdf, valid); invalid marks samples that fell below the
    surface (the caller drops the path segment, which keeps the estimator
    unbiased because the BRDF is zero there).
    """
    kind = np.asarray(kind)
    wo = np.asarray(wo, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    u1 = rng.next_f64(streams)
    u2 = rng.next_f64(streams)
    t, b = sgmap.build_tangent_frame(n)

    wi_l = _sample_cosine_local(u1, u2)
    gm = np.asarray(kind == GLOSSY)
    if np.any(gm):
        alpha = np.maximum(np.asarray(rough, dtype=np.float64) ** 2, 1e-6)
        wo_l = sgmap.to_local(t, b, n, wo)
        wi_g = _sample_ggx_vndf_local(alpha, wo_l, u1, u2)
        wi_l = np.where(gm[..., None], wi_g, wi_l)

    wi = sgmap.to_world(t, b, n, wi_l)
    valid = (np.sum(wi * n, axis=-1) > 1e-9) & (np.sum(wo * n, axis=-1) > 0.0)
    pdf = brdf_pdf(kind, rough, wi, wo, n)
    valid &= pdf > 0.0
    return wi, pdf, valid


# ---------------------------------------------------------------------------
# emitters

def sample_emitter(scene, points, streams):
    """Next-event sample toward one uniformly chosen one-sided quad emitter.

    Returns (dir, dist, emitted_rgb, pdf_sr). Back-facing samples return
    black with zero pdf; occlusion is the caller's job.
    """
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    ne = scene.num_emitters
    u_pick = rng.next_f64(streams)
    u1 = rng.next_f64(streams)
    u2 = rng.next_f64(streams)
    pick = np.minimum((u_pick * ne).astype(np.int64), ne - 1)
    qi = scene.emitter_quads[pick]
    q = scene.quad_corner[qi] + u1[:, None] * scene.quad_eu[qi] + u2[:, None] * scene.quad_ev[qi]
    d = q - points
    dist = np.linalg.norm(d, axis=-1)
    dist = np.maximum(dist, 1e-12)
    direction = d / dist[:, None]
    cos_l = -np.sum(direction * scene.quad_normal[qi], axis=-1)
    frontal = cos_l > 1e-9
    area = scene.quad_area[qi]
    pdf_sr = np.where(
        frontal, dist * dist / (area * np.maximum(cos_l, 1e-12) * ne), 0.0
    )
    emitted = np.where(
        frontal[:, None], scene.mat_emission[scene.quad_mat[qi]], 0.0
    )
    return direction, dist, emitted, pdf_sr


# ---------------------------------------------------------------------------
# loading and validation

_MATERIAL_KEYS = {"name", "kind", "albedo", "roughness", "emission"}
_SPHERE_KEYS = {"type", "center", "radius", "material"}
_QUAD_KEYS = {"type", "corner", "edge_u", "edge_v", "material"}
_CAMERA_KEYS = {"frame", "origin", "look_at", "up", "fov_deg"}
_TOP_KEYS = {"materials", "primitives", "camera", "background"}


def _vec3(value, what):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 3
        or not all(isinstance(x, (int, float)) for x in value)
    ):
        raise SceneError(f"{what}: expected a 3-vector, got {value!r}")
    return np.array(value, dtype=np.float64)


def _check_keys(obj, allowed, what):
    unknown = set(obj) - allowed
    if unknown:
        raise SceneError(f"{what}: unknown fields {sorted(unknown)}")


def load_scene(text):
    """Parse and validate a scene document.

    `text` is either one of the built-in scene names or a JSON document
    following the schema in the README. Unknown fields are rejected;
    validation errors name the offending entity.
    """
    if text in BUILTIN_SCENES:
        doc = BUILTIN_SCENES[text]()
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SceneError(f"scene parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return scene_from_dict(doc)


def scene_from_dict(doc):
    if not isinstance(doc, dict):
        raise SceneError("scene document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "scene")
    for key in ("materials", "primitives", "camera"):
        if key not in doc or not isinstance(doc[key], list) or not doc[key]:
            raise SceneError(f"scene: missing or empty '{key}' array")

    names = []
    kinds = []
    albedos = []
    roughs = []
    emissions = []
    for i, m in enumerate(doc["materials"]):
        what = f"material #{i} ({m.get('name', '?')})"
        _check_keys(m, _MATERIAL_KEYS, what)
        name = m.get("name")
        if not isinstance(name, str) or not name:
            raise SceneError(f"{what}: missing name")
        if name in names:
            raise SceneError(f"{what}: duplicate material name")
        kind = m.get("kind", "diffuse")
        if kind not in ("diffuse", "glossy"):
            raise SceneError(f"{what}: kind must be 'diffuse' or 'glossy'")
        albedo = _vec3(m.get("albedo", [0.0, 0.0, 0.0]), what + " albedo")
        if np.any(albedo < 0.0) or np.any(albedo > 1.0):
            raise SceneError(f"{what}: albedo outside [0,1]")
        rough = float(m.get("roughness", 0.0))
        if not 0.0 <= rough <= 1.0:
            raise SceneError(f"{what}: roughness outside [0,1]")
        emission = _vec3(m.get("emission", [0.0, 0.0, 0.0]), what + " emission")
        if np.any(emission < 0.0) or not np.all(np.isfinite(emission)):
            raise SceneError(f"{what}: emission must be finite and >= 0")
        names.append(name)
        kinds.append(DIFFUSE if kind == "diffuse" else GLOSSY)
        albedos.append(albedo)
        roughs.append(rough)
        emissions.append(emission)

    mat_index = {n: i for i, n in enumerate(names)}

    sph_center, sph_radius, sph_mat = [], [], []
    quad_corner, quad_eu, quad_ev, quad_mat = [], [], [], []
    for i, p in enumerate(doc["primitives"]):
        ptype = p.get("type")
        what = f"primitive #{i} ({ptype})"
        if ptype == "sphere":
            _check_keys(p, _SPHERE_KEYS, what)
            c = _vec3(p.get("center"), what + " center")
            r = p.get("radius")
            if not isinstance(r, (int, float)) or r <= 0:
                raise SceneError(f"{what}: radius must be > 0")
            mname = p.get("material")
            if mname not in mat_index:
                raise SceneError(f"{what}: unknown material {mname!r}")
            if np.any(emissions[mat_index[mname]] > 0):
                raise SceneError(
                    f"{what}: emissive spheres are not supported; emitters must be quads"
                )
            sph_center.append(c)
            sph_radius.append(float(r))
            sph_mat.append(mat_index[mname])
        elif ptype == "quad":
            _check_keys(p, _QUAD_KEYS, what)
            corner = _vec3(p.get("corner"), what + " corner")
            eu = _vec3(p.get("edge_u"), what + " edge_u")
            ev = _vec3(p.get("edge_v"), what + " edge_v")
            nrm = np.cross(eu, ev)
            area = np.linalg.norm(nrm)
            if area < 1e-12:
                raise SceneError(f"{what}: degenerate quad (parallel or zero edges)")
            mname = p.get("material")
            if mname not in mat_index:
                raise SceneError(f"{what}: unknown material {mname!r}")
            quad_corner.append(corner)
            quad_eu.append(eu)
            quad_ev.append(ev)
            quad_mat.append(mat_index[mname])
        else:
            raise SceneError(f"{what}: type must be 'sphere' or 'quad'")

    keyframes = []
    for i, k in enumerate(doc["camera"]):
        what = f"camera keyframe #{i}"
        _check_keys(k, _CAMERA_KEYS, what)
        fov = k.get("fov_deg")
        if not isinstance(fov, (int, float)) or not 1.0 < fov < 179.0:
            raise SceneError(f"{what}: fov_deg must lie in (1, 179)")
        origin = _vec3(k.get("origin"), what + " origin")
        look = _vec3(k.get("look_at"), what + " look_at")
        up = _vec3(k.get("up"), what + " up")
        view = look - origin
        if np.linalg.norm(view) < 1e-12:
            raise SceneError(f"{what}: look_at coincides with origin")
        if np.linalg.norm(np.cross(view, up)) < 1e-9:
            raise SceneError(f"{what}: up is parallel to the view direction")
        keyframes.append(
            CameraKeyframe(int(k.get("frame", 0)), origin, look, normalize(up), float(fov))
        )
    keyframes.sort(key=lambda k: k.frame)

    background = _vec3(doc.get("background", [0.0, 0.0, 0.0]), "background")
    if np.any(background < 0.0):
        raise SceneError("background must be >= 0")

    mat_emission = np.array(emissions) if emissions else np.zeros((0, 3))
    quad_mat_arr = np.array(quad_mat, dtype=np.int32)
    emitter_quads = np.array(
        [i for i, m in enumerate(quad_mat) if np.any(mat_emission[m] > 0)],
        dtype=np.int32,
    )
    if len(emitter_quads) == 0 and not np.any(background > 0.0):
        raise SceneError("scene has no emitters and a black background")

    quad_eu_arr = np.array(quad_eu).reshape(-1, 3)
    quad_ev_arr = np.array(quad_ev).reshape(-1, 3)
    cross = np.cross(quad_eu_arr, quad_ev_arr) if len(quad_mat) else np.zeros((0, 3))
    area = np.linalg.norm(cross, axis=-1) if len(quad_mat) else np.zeros(0)

    return Scene(
        mat_names=names,
        mat_kind=np.array(kinds, dtype=np.int32),
        mat_albedo=np.array(albedos).reshape(-1, 3),
        mat_rough=np.array(roughs, dtype=np.float64),
        mat_emission=mat_emission,
        sph_center=np.array(sph_center).reshape(-1, 3),
        sph_radius=np.array(sph_radius, dtype=np.float64),
        sph_mat=np.array(sph_mat, dtype=np.int32),
        quad_corner=np.array(quad_corner).reshape(-1, 3),
        quad_eu=quad_eu_arr,
        quad_ev=quad_ev_arr,
        quad_normal=cross / np.maximum(area[:, None], 1e-30) if len(quad_mat) else np.zeros((0, 3)),
        quad_area=area,
        quad_mat=quad_mat_arr,
        emitter_quads=emitter_quads,
        keyframes=keyframes,
        background=background,
    )


# ---------------------------------------------------------------------------
# built-in scenes

def _cornell_occluder():
    """Closed 2x2x2 box, a tall panel hiding a small up-facing lamp.

    Only a ceiling strip just behind the panel receives direct light;
    everything the camera sees is lit by one bounce off that strip.
    """
    return {
        "materials": [
            {"name": "white", "kind": "diffuse", "albedo": [0.75, 0.75, 0.75]},
            {"name": "red", "kind": "diffuse", "albedo": [0.75, 0.25, 0.25]},
            {"name": "green", "kind": "diffuse", "albedo": [0.25, 0.75, 0.25]},
            {"name": "panel", "kind": "diffuse", "albedo": [0.70, 0.70, 0.70]},
            {"name": "blue", "kind": "diffuse", "albedo": [0.35, 0.35, 0.65]},
            {
                "name": "lamp",
                "kind": "diffuse",
                "albedo": [0.0, 0.0, 0.0],
                "emission": [42.0, 38.0, 30.0],
            },
        ],
        "primitives": [
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [0, 0, 2], "edge_v": [2, 0, 0], "material": "white"},
            {"type": "quad", "corner": [0, 2, 0], "edge_u": [2, 0, 0], "edge_v": [0, 0, 2], "material": "white"},
            {"type": "quad", "corner": [0, 0, 2], "edge_u": [0, 2, 0], "edge_v": [2, 0, 0], "material": "white"},
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [2, 0, 0], "edge_v": [0, 2, 0], "material": "white"},
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [0, 2, 0], "edge_v": [0, 0, 2], "material": "red"},
            {"type": "quad", "corner": [2, 0, 0], "edge_u": [0, 0, 2], "edge_v": [0, 2, 0], "material": "green"},
            {"type": "quad", "corner": [0.35, 0, 0.9], "edge_u": [1.3, 0, 0], "edge_v": [0, 1.45, 0], "material": "panel"},
            {"type": "quad", "corner": [0.7, 0.55, 1.0], "edge_u": [0, 0, 0.35], "edge_v": [0.6, 0, 0], "material": "lamp"},
            {"type": "sphere", "center": [0.55, 0.3, 0.45], "radius": 0.3, "material": "blue"},
        ],
        "camera": [
            {"frame": 0, "origin": [1.0, 1.0, 0.12], "look_at": [1.0, 1.0, 2.0], "up": [0, 1, 0], "fov_deg": 68}
        ],
        "background": [0.0, 0.0, 0.0],
    }


def _indirect_corridor():
    """Straight corridor with a baffled light section at the far end.

    The lamp faces away from the camera behind a baffle; the camera region
    receives light exclusively through the slit above the baffle, bounced
    off the rear ceiling and walls.
    """
    return {
        "materials": [
            {"name": "wall", "kind": "diffuse", "albedo": [0.80, 0.78, 0.74]},
            {"name": "floor", "kind": "diffuse", "albedo": [0.70, 0.70, 0.72]},
            {
                "name": "lamp",
                "kind": "diffuse",
                "albedo": [0.0, 0.0, 0.0],
                "emission": [90.0, 85.0, 75.0],
            },
        ],
        "primitives": [
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [0, 0, 3.2], "edge_v": [1, 0, 0], "material": "floor"},
            {"type": "quad", "corner": [0, 1, 0], "edge_u": [1, 0, 0], "edge_v": [0, 0, 3.2], "material": "wall"},
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [0, 1, 0], "edge_v": [0, 0, 3.2], "material": "wall"},
            {"type": "quad", "corner": [1, 0, 0], "edge_u": [0, 0, 3.2], "edge_v": [0, 1, 0], "material": "wall"},
            {"type": "quad", "corner": [0, 0, 3.2], "edge_u": [0, 1, 0], "edge_v": [1, 0, 0], "material": "wall"},
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [1, 0, 0], "edge_v": [0, 1, 0], "material": "wall"},
            {"type": "quad", "corner": [0, 0, 2.5], "edge_u": [1, 0, 0], "edge_v": [0, 0.62, 0], "material": "wall"},
            {"type": "quad", "corner": [0.2, 0.12, 2.6], "edge_u": [0.6, 0, 0], "edge_v": [0, 0.42, 0], "material": "lamp"},
        ],
        "camera": [
            {"frame": 0, "origin": [0.5, 0.5, 0.25], "look_at": [0.5, 0.45, 3.2], "up": [0, 1, 0], "fov_deg": 60}
        ],
        "background": [0.0, 0.0, 0.0],
    }


def _glossy_box():
    """Cornell-style box with a GGX floor (roughness 0.2)."""
    return {
        "materials": [
            {"name": "white", "kind": "diffuse", "albedo": [0.73, 0.73, 0.73]},
            {"name": "red", "kind": "diffuse", "albedo": [0.65, 0.22, 0.22]},
            {"name": "green", "kind": "diffuse", "albedo": [0.22, 0.65, 0.22]},
            {"name": "metal", "kind": "glossy", "albedo": [0.85, 0.82, 0.75], "roughness": 0.2},
            {
                "name": "lamp",
                "kind": "diffuse",
                "albedo": [0.0, 0.0, 0.0],
                "emission": [16.0, 15.0, 13.0],
            },
        ],
        "primitives": [
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [0, 0, 2], "edge_v": [2, 0, 0], "material": "metal"},
            {"type": "quad", "corner": [0, 2, 0], "edge_u": [2, 0, 0], "edge_v": [0, 0, 2], "material": "white"},
            {"type": "quad", "corner": [0, 0, 2], "edge_u": [0, 2, 0], "edge_v": [2, 0, 0], "material": "white"},
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [2, 0, 0], "edge_v": [0, 2, 0], "material": "white"},
            {"type": "quad", "corner": [0, 0, 0], "edge_u": [0, 2, 0], "edge_v": [0, 0, 2], "material": "red"},
            {"type": "quad", "corner": [2, 0, 0], "edge_u": [0, 0, 2], "edge_v": [0, 2, 0], "material": "green"},
            {"type": "quad", "corner": [0.75, 1.999, 0.75], "edge_u": [0.5, 0, 0], "edge_v": [0, 0, 0.5], "material": "lamp"},
            {"type": "sphere", "center": [1.35, 0.35, 1.3], "radius": 0.35, "material": "white"},
        ],
        "camera": [
            {"frame": 0, "origin": [1.0, 1.0, 0.12], "look_at": [1.0, 0.9, 2.0], "up": [0, 1, 0], "fov_deg": 68}
        ],
        "background": [0.0, 0.0, 0.0],
    }


BUILTIN_SCENES = {
    "cornell-occluder": _cornell_occluder,
    "indirect-corridor": _indirect_corridor,
    "glossy-box": _glossy_box,
}
