"""Per-pixel guiding distribution: a two-component mixture of one 2D
Gaussian over the unit square (mapped to the hemisphere) and the surface
BRDF sampling pdf, trained online by weighted expectation-maximization.

A pixel's full state is 8 scalars: the five weighted moments E(X), E(Y),
E(X^2), E(Y^2), E(XY), the accumulated luminance weight, the mixing
coefficient, and the training-epoch count. Everything here is vectorized
over leading batch axes; a "stats" argument is any (..., 8) float array.
"""

from typing import NamedTuple

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng, sgmap

# channel layout of the 8 per-pixel scalars
MEAN_X, MEAN_Y, M2_XX, M2_YY, M2_XY, W_SUM, MIX_PI, EPOCH = range(8)

PI_MIN = 0.05
PI_MAX = 0.95
COV_EPS = 1e-4       # ridge added to the moment-derived covariance
EIG_FLOOR = 1e-6     # below this the covariance is reset
RESET_VAR = 0.05     # isotropic variance used by the reset path
TRUNC_MIN = 1e-4
KMAX_DEFAULT = 64
MAX_GAUSS_TRIES = 16

STRATEGY_BRDF = 0
STRATEGY_GAUSSIAN = 1


class GaussianLobe(NamedTuple):
    """Derived per-pixel Gaussian: mean, covariance, Cholesky factor and
    the truncation mass of the Gaussian over [0,1]^2."""

    mu: np.ndarray       # (..., 2)
    cov: np.ndarray      # (..., 2, 2)
    chol: np.ndarray     # (..., 2, 2) lower-triangular
    trunc_z: np.ndarray  # (...,)


def init_stats(shape=()):
    """Fresh per-pixel state: centered prior, pi at the lower clamp, k=0.

    Prior second moments encode cov = 0.25*I around the square center so
    the first lobe covers the whole square.
    """
    out = np.empty(tuple(np.atleast_1d(shape)) + (8,), dtype=np.float64) if shape else np.empty((8,), dtype=np.float64)
    out[..., MEAN_X] = 0.5
    out[..., MEAN_Y] = 0.5
    out[..., M2_XX] = 0.5   # 0.5^2 + 0.25
    out[..., M2_YY] = 0.5
    out[..., M2_XY] = 0.25  # 0.5*0.5 + 0
    out[..., W_SUM] = 0.0
    out[..., MIX_PI] = PI_MIN
    out[..., EPOCH] = 0.0
    return out


def _chol2x2(cov):
    """Cholesky factor of batched SPD 2x2 matrices, closed form."""
    a = cov[..., 0, 0]
    c = cov[..., 0, 1]
    b = cov[..., 1, 1]
    l11 = np.sqrt(a)
    l21 = c / l11
    l22 = np.sqrt(np.maximum(b - l21 * l21, 1e-30))
    z = np.zeros_like(a)
    return np.stack(
        [np.stack([l11, z], axis=-1), np.stack([l21, l22], axis=-1)], axis=-2
    )


# Gauss-Legendre rule reused by the truncation integral (per segment).
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)   # on [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS
_Z_CLIP = 8.5      # +- range of the whitened outer variable worth integrating
_RAMP_CLIP = 6.5   # beyond this many sigmas the inner CDF term is flat


def truncation_mass(mu, cov):
    """Mass of N(mu, cov) inside [0,1]^2, clamped to [1e-4, 1].

    Whitening through the Cholesky factor reduces the rectangle integral
    to a 1D integral of phi(z) * (Phi(hi(z)) - Phi(lo(z))). Gauss-Legendre
    is applied piecewise between the points where the inner CDF ramp
    saturates, which keeps the rule accurate for arbitrarily tight or
    strongly correlated lobes.
    """
    mu = np.asarray(mu, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    chol = _chol2x2(cov)
    l11 = chol[..., 0, 0]
    l21 = chol[..., 1, 0]
    l22 = chol[..., 1, 1]
    mx = mu[..., 0]
    my = mu[..., 1]

    lo1 = np.maximum((0.0 - mx) / l11, -_Z_CLIP)
    hi1 = np.minimum((1.0 - mx) / l11, _Z_CLIP)
    hi1 = np.maximum(hi1, lo1)  # empty interval -> zero-length segments

    # z values where (c - my - l21 z)/l22 = +-RAMP_CLIP for c in {0, 1}
    safe_l21 = np.where(np.abs(l21) < 1e-30, 1e-30, l21)
    pts = [
        ((c - my) - s * l22) / safe_l21
        for c in (0.0, 1.0)
        for s in (-_RAMP_CLIP, _RAMP_CLIP)
    ]
    pts = np.stack([np.clip(p, lo1, hi1) for p in pts] + [lo1, hi1], axis=-1)
    edges = np.sort(pts, axis=-1)  # (..., 6) segment boundaries

    seg_a = edges[..., :-1]
    seg_b = edges[..., 1:]
    length = seg_b - seg_a  # (..., 5)
    # evaluate per segment x node: shape (..., 5, 24)
    z = seg_a[..., None] + length[..., None] * _GL_NODES
    inner_hi = (1.0 - my[..., None, None] - l21[..., None, None] * z) / l22[..., None, None]
    inner_lo = (0.0 - my[..., None, None] - l21[..., None, None] * z) / l22[..., None, None]
    g = ndtr(inner_hi) - ndtr(inner_lo)
    phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    integral = np.sum(length[..., None] * _GL_WEIGHTS * phi * g, axis=(-1, -2))
    return np.clip(integral, TRUNC_MIN, 1.0)


def lobe_from_stats(stats):
    """Gaussian lobe from stored moments: cov = M2 - mu mu^T + eps*I.

    Degenerate covariances (eigenvalue below 1e-6 after the ridge) are
    reset to RESET_VAR * I rather than rejected.
    """
    stats = np.asarray(stats, dtype=np.float64)
    mx = stats[..., MEAN_X]
    my = stats[..., MEAN_Y]
    sxx = stats[..., M2_XX] - mx * mx + COV_EPS
    syy = stats[..., M2_YY] - my * my + COV_EPS
    sxy = stats[..., M2_XY] - mx * my

    # smallest eigenvalue of [[sxx, sxy], [sxy, syy]]
    half_tr = 0.5 * (sxx + syy)
    delta = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy * sxy, 0.0))
    bad = (half_tr - delta) < EIG_FLOOR
    sxx = np.where(bad, RESET_VAR, sxx)
    syy = np.where(bad, RESET_VAR, syy)
    sxy = np.where(bad, 0.0, sxy)

    cov = np.stack(
        [np.stack([sxx, sxy], axis=-1), np.stack([sxy, syy], axis=-1)], axis=-2
    )
    mu = np.stack([mx, my], axis=-1)
    chol = _chol2x2(cov)
    return GaussianLobe(mu, cov, chol, truncation_mass(mu, cov))


def gaussian_pdf_square(lobe, p):
    """Truncated-normalized Gaussian density at square points p."""
    p = np.asarray(p, dtype=np.float64)
    d0 = p[..., 0] - lobe.mu[..., 0]
    d1 = p[..., 1] - lobe.mu[..., 1]
    l11 = lobe.chol[..., 0, 0]
    l21 = lobe.chol[..., 1, 0]
    l22 = lobe.chol[..., 1, 1]
    z1 = d0 / l11
    z2 = (d1 - l21 * z1) / l22
    norm = 1.0 / (2.0 * np.pi * l11 * l22)
    return np.exp(-0.5 * (z1 * z1 + z2 * z2)) * norm / lobe.trunc_z


def mixture_pdf(stats, lobe, direction, brdf_pdf):
    """Solid-angle density of the guiding mixture for local directions.

    pi * N(M^-1(dir)) / (2*pi) + (1 - pi) * brdf_pdf; the 1/(2*pi) is the
    constant Jacobian of the equal-area mapping.
    """
    stats = np.asarray(stats, dtype=np.float64)
    pi = stats[..., MIX_PI]
    sq = sgmap.hemisphere_to_square(direction)
    g = gaussian_pdf_square(lobe, sq) / sgmap.TWO_PI
    return pi * g + (1.0 - pi) * np.asarray(brdf_pdf, dtype=np.float64)


def box_muller(u1, u2):
    """Two standard normals from two uniforms; u1=0 is clamped to 1e-12."""
    u1 = np.maximum(np.asarray(u1, dtype=np.float64), 1e-12)
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * np.asarray(u2, dtype=np.float64)
    return r * np.cos(ang), r * np.sin(ang)


def sample_mixture(stats, lobe, brdf_sampler, brdf_pdf_fn, streams):
    """Draw one direction per lane from the guiding mixture.

    With probability pi the Gaussian component is sampled through the
    Box-Muller transform and the Cholesky factor, rejecting draws outside
    the unit square for up to 16 attempts before falling back to the BRDF
    strategy. The returned pdf is always the full mixture density, so the
    caller's one-sample estimator stays unbiased.

    brdf_sampler(idx, streams) -> (dirs (n,3) local, valid (n,)) and
    brdf_pdf_fn(idx, dirs) -> (n,) must consume/evaluate only the lanes
    listed in idx. Returns (dir, pdf, strategy, valid).
    """
    stats = np.asarray(stats, dtype=np.float64)
    n = stats.shape[0]
    pi = stats[..., MIX_PI]
    zeta = rng.next_f64(streams)
    gauss_branch = zeta < pi

    direction = np.zeros((n, 3))
    accepted = np.zeros(n, dtype=bool)
    sq_pt = np.zeros((n, 2))

    sel = np.nonzero(gauss_branch)[0]
    for _ in range(MAX_GAUSS_TRIES):
        if sel.size == 0:
            break
        # fancy indexing copies the state: draw on the copy, write it back
        sub = streams[sel]
        u1 = rng.next_f64(sub)
        u2 = rng.next_f64(sub)
        streams[sel] = sub
        z0, z1 = box_muller(u1, u2)
        mu = lobe.mu[sel]
        ch = lobe.chol[sel]
        px = mu[:, 0] + ch[:, 0, 0] * z0
        py = mu[:, 1] + ch[:, 1, 0] * z0 + ch[:, 1, 1] * z1
        ok = (px >= 0.0) & (px <= 1.0) & (py >= 0.0) & (py <= 1.0)
        hit = sel[ok]
        sq_pt[hit, 0] = px[ok]
        sq_pt[hit, 1] = py[ok]
        accepted[hit] = True
        sel = sel[~ok]

    direction[accepted] = sgmap.square_to_hemisphere(sq_pt[accepted])

    brdf_lanes = np.nonzero(~accepted)[0]
    valid = np.ones(n, dtype=bool)
    if brdf_lanes.size:
        sub = streams[brdf_lanes]
        dirs_b, ok_b = brdf_sampler(brdf_lanes, sub)
        streams[brdf_lanes] = sub
        direction[brdf_lanes] = dirs_b
        valid[brdf_lanes] = ok_b

    strategy = np.where(accepted, STRATEGY_GAUSSIAN, STRATEGY_BRDF).astype(np.uint8)
    pdf = np.zeros(n)
    ok_idx = np.nonzero(valid)[0]
    if ok_idx.size:
        b = brdf_pdf_fn(ok_idx, direction[ok_idx])
        sq = sgmap.hemisphere_to_square(direction[ok_idx])
        g = gaussian_pdf_square(
            GaussianLobe(lobe.mu[ok_idx], lobe.cov[ok_idx], lobe.chol[ok_idx], lobe.trunc_z[ok_idx]),
            sq,
        ) / sgmap.TWO_PI
        pdf[ok_idx] = pi[ok_idx] * g + (1.0 - pi[ok_idx]) * b
    return direction, pdf, strategy, valid


def e_step_responsibility(pi, gauss_pdf, brdf_pdf):
    """Posterior probability that a sample came from the Gaussian component.

    Both densities must share a measure (either per-steradian or
    per-square-area); the ratio cancels the common Jacobian. Returns 0
    where both densities vanish.
    """
    pi = np.asarray(pi, dtype=np.float64)
    g = pi * np.asarray(gauss_pdf, dtype=np.float64)
    b = (1.0 - pi) * np.asarray(brdf_pdf, dtype=np.float64)
    denom = g + b
    return np.where(denom > 0.0, g / np.where(denom > 0.0, denom, 1.0), 0.0)


def m_step_update(stats, sq, weight, resp, valid=None, k_max=KMAX_DEFAULT):
    """One online M-step over a batch of BRDF-strategy samples.

    stats: (..., 8); sq: (..., n, 2); weight/resp: (..., n); valid masks
    records (non-finite weights are dropped and count as invalid). Each
    stored moment moves toward the batch estimate with learning rate
    eta = max(1/(k+1), 1/k_max); pi moves toward the luminance-weighted
    responsibility mass and is clamped to [0.05, 0.95]. Batches with no
    valid records or zero total weight leave the stats (including k)
    unchanged.
    """
    stats = np.asarray(stats, dtype=np.float64)
    sq = np.asarray(sq, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    resp = np.asarray(resp, dtype=np.float64)
    ok = np.isfinite(weight) & (weight >= 0.0)
    if valid is not None:
        ok = ok & np.asarray(valid, dtype=bool)
    w = np.where(ok, weight, 0.0)
    r = np.where(ok, resp, 0.0)

    wr = w * r
    batch_wr = np.sum(wr, axis=-1)
    batch_w = np.sum(w, axis=-1)
    has_info = batch_w > 0.0

    x = sq[..., 0]
    y = sq[..., 1]
    denom = np.maximum(batch_wr, 1e-8)
    mom = [
        np.sum(wr * g, axis=-1) / denom
        for g in (x, y, x * x, y * y, x * y)
    ]

    k = stats[..., EPOCH]
    eta = np.maximum(1.0 / (k + 1.0), 1.0 / float(k_max))
    out = stats.copy()
    for ch, m in zip((MEAN_X, MEAN_Y, M2_XX, M2_YY, M2_XY), mom):
        out[..., ch] = (1.0 - eta) * stats[..., ch] + eta * m
    pi_target = batch_wr / np.maximum(batch_w, 1e-8)
    out[..., MIX_PI] = np.clip(
        (1.0 - eta) * stats[..., MIX_PI] + eta * pi_target, PI_MIN, PI_MAX
    )
    out[..., W_SUM] = (1.0 - eta) * stats[..., W_SUM] + eta * batch_wr
    out[..., EPOCH] = k + 1.0
    return np.where(has_info[..., None], out, stats)


def neighbor_count(k, k_max):
    """Training neighbor budget N = (1 - k/kMax)*15 + 5, rounded half-up."""
    k = np.minimum(np.asarray(k, dtype=np.float64), float(k_max))
    raw = (1.0 - k / float(k_max)) * 15.0 + 5.0
    return np.floor(raw + 0.5).astype(np.int64)
