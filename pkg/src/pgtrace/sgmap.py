"""Area-preserving bijection between the unit square and the unit hemisphere.

Composition of the Shirley-Chiu concentric square->disk mapping with the
Lambert azimuthal equal-area disk->hemisphere lift. The composition has a
constant Jacobian of 2*pi (square area 1 -> hemisphere area 2*pi), so a
density over the square converts to a solid-angle density by dividing by
2*pi and nothing else.

All functions broadcast over leading axes: points are (..., 2) arrays,
directions (..., 3) arrays. Directions live in a local tangent frame with
+z along the surface normal.
"""

import numpy as np

TWO_PI = 2.0 * np.pi
_QUARTER_PI = 0.25 * np.pi
_HALF_PI = 0.5 * np.pi


def square_to_disk(p):
    """Concentric mapping of [0,1]^2 onto the unit disk."""
    p = np.asarray(p, dtype=np.float64)
    a = 2.0 * p[..., 0] - 1.0
    b = 2.0 * p[..., 1] - 1.0
    use_a = np.abs(a) > np.abs(b)
    # guard the 0/0 at the center; the masked branch never reads it
    safe_a = np.where(a == 0.0, 1.0, a)
    safe_b = np.where(b == 0.0, 1.0, b)
    r = np.where(use_a, a, b)
    phi = np.where(use_a, _QUARTER_PI * (b / safe_a), _HALF_PI - _QUARTER_PI * (a / safe_b))
    phi = np.where((a == 0.0) & (b == 0.0), 0.0, phi)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def disk_to_square(d):
    """Inverse concentric mapping, unit disk -> [0,1]^2."""
    d = np.asarray(d, dtype=np.float64)
    x, y = d[..., 0], d[..., 1]
    rho = np.hypot(x, y)
    use_x = np.abs(x) >= np.abs(y)
    safe_x = np.where(x == 0.0, 1.0, x)
    safe_y = np.where(y == 0.0, 1.0, y)
    # branch 1: x = a cos(pi b / 4a), y = a sin(...)  with |phi| <= pi/4
    a1 = np.sign(safe_x) * rho
    b1 = np.arctan(y / safe_x) * (4.0 / np.pi) * a1
    # branch 2: x = b sin(pi a / 4b), y = b cos(...)
    b2 = np.sign(safe_y) * rho
    a2 = np.arctan(x / safe_y) * (4.0 / np.pi) * b2
    a = np.where(use_x, a1, a2)
    b = np.where(use_x, b1, b2)
    center = rho == 0.0
    a = np.where(center, 0.0, a)
    b = np.where(center, 0.0, b)
    out = np.stack([(a + 1.0) * 0.5, (b + 1.0) * 0.5], axis=-1)
    return np.clip(out, 0.0, 1.0)


def square_to_hemisphere(p):
    """Map a unit-square point to a unit direction with z >= 0."""
    d = square_to_disk(p)
    x, y = d[..., 0], d[..., 1]
    r2 = x * x + y * y
    s = np.sqrt(np.maximum(2.0 - r2, 0.0))
    return np.stack([x * s, y * s, 1.0 - r2], axis=-1)


def hemisphere_to_square(v):
    """Exact inverse of square_to_hemisphere; raises below the hemisphere."""
    v = np.asarray(v, dtype=np.float64)
    z = v[..., 2]
    if np.any(z < -1e-9):
        raise ValueError("direction below the hemisphere (z < 0)")
    # z = 1 - r^2 and the lift scaled by sqrt(2 - r^2) = sqrt(1 + z)
    s = np.sqrt(np.maximum(1.0 + z, 1e-30))
    disk = np.stack([v[..., 0] / s, v[..., 1] / s], axis=-1)
    return disk_to_square(disk)


def square_density_to_solid_angle(pdf_sq):
    """Convert a density on the square to a solid-angle density."""
    return np.asarray(pdf_sq, dtype=np.float64) / TWO_PI


def build_tangent_frame(normal):
    """Deterministic orthonormal frame (t, b, n) for unit normals.

    Branchless construction keyed on sign(n.z); identical inputs give
    bitwise-identical frames. Returns (t, b) with t x b = n.
    """
    n = np.asarray(normal, dtype=np.float64)
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    s = np.copysign(1.0, nz)
    a = -1.0 / (s + nz)
    b = nx * ny * a
    t = np.stack([1.0 + s * nx * nx * a, s * b, -s * nx], axis=-1)
    bt = np.stack([b, s + ny * ny * a, -ny], axis=-1)
    return t, bt


def to_world(t, b, n, v_local):
    """Local tangent-frame vector -> world."""
    v = np.asarray(v_local, dtype=np.float64)
    return (
        t * v[..., 0:1] + b * v[..., 1:2] + np.asarray(n) * v[..., 2:3]
    )


def to_local(t, b, n, v_world):
    """World vector -> local tangent-frame coordinates."""
    v = np.asarray(v_world, dtype=np.float64)
    return np.stack(
        [np.sum(v * t, axis=-1), np.sum(v * b, axis=-1), np.sum(v * np.asarray(n), axis=-1)],
        axis=-1,
    )
