"""Deterministic per-pixel random streams.

Each pixel owns an independent PCG32 stream keyed on (seed, frame, pixel,
stream id). A pixel's draws depend only on its own state, so any partition
of the pixel set across workers reproduces the same numbers.
"""

import numpy as np

_MULT = np.uint64(6364136223846793005)
_INC = np.uint64(1442695040888963407)  # any odd increment works
_U32_SCALE = float(2.0 ** -32)


def _mix64(x):
    # SplitMix64 finalizer; uint64 wraparound is intentional.
    with np.errstate(over="ignore"):
        x = np.asarray(x, dtype=np.uint64)
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def make_streams(seed, frame_index, lane_index, stream_id=0):
    """PCG32 state array, one independent stream per lane.

    lane_index may be a scalar or any integer array; the result has the
    same shape. Hash chain keeps streams decorrelated across frames and
    across the render/training passes (stream_id).
    """
    lane = np.asarray(lane_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        h = _mix64(h ^ _mix64(np.uint64(frame_index)))
        h = _mix64(h ^ _mix64(np.uint64(stream_id) + np.uint64(0xA02BDBF7BB3C0A7)))
        state = _mix64(h ^ _mix64(lane))
        # one warm-up step so the first output already mixes the increment
        return state * _MULT + _INC


def next_u32(state):
    """Advance every stream once, in place; returns uint32 outputs."""
    old = state.copy()
    with np.errstate(over="ignore"):
        state *= _MULT
        state += _INC
    xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)).astype(np.uint32)
    rot = (old >> np.uint64(59)).astype(np.uint32)
    return (xorshifted >> rot) | (xorshifted << ((np.uint32(32) - rot) & np.uint32(31)))


def next_f64(state):
    """Uniform float64 in [0, 1), one draw per stream."""
    return next_u32(state).astype(np.float64) * _U32_SCALE
