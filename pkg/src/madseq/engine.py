"""Fused numba core for predictive trajectories.

One trajectory step = draw (optional) + adjusted-kernel mix, executed as two
passes over the flat probability table. The table is kept unnormalized with a
tracked total T (drift from 1 is measured and must stay within 1e-9); the
acceptance ratio is scale-free so T only enters the sampling threshold and
the final normalization.

The RNG here re-implements the stream contract of `madseq.rng` (SplitMix64
derivation of (seed, draw index) feeding xoshiro256**, one uniform per step)
and must match it bit-for-bit; test_rng.py compares both against frozen
vectors.
"""
from __future__ import annotations

import numpy as np
import numba
from numba import njit, prange

# workqueue is always available and enough for the low core counts this
# targets; the default layer probe warns on older TBB installs.
numba.config.THREADING_LAYER = "workqueue"

from .errors import NumericalError
from .grids import Pmf
from .kernels import KernelOperator, get_operator

U64 = np.uint64
_PHI = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_INV53 = 2.0 ** -53
DRIFT_TOL = 1e-9


@njit(inline="always")
def _sm64(state):
    state = state + _PHI
    z = state
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return state, z ^ (z >> U64(31))


@njit(inline="always")
def _stream_init(seed, index):
    key = seed ^ ((index + U64(1)) * _PHI)
    key, s0 = _sm64(key)
    key, s1 = _sm64(key)
    key, s2 = _sm64(key)
    key, s3 = _sm64(key)
    if s0 == U64(0) and s1 == U64(0) and s2 == U64(0) and s3 == U64(0):
        s0 = _PHI
    return s0, s1, s2, s3


@njit(inline="always")
def _rotl(x, k):
    return (x << U64(k)) | (x >> (U64(64) - U64(k)))


@njit(inline="always")
def _xo_next(s0, s1, s2, s3):
    result = _rotl(s1 * U64(5), 7) * U64(9)
    t = s1 << U64(17)
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl(s3, 45)
    return s0, s1, s2, s3, result


@njit(cache=False)
def _stream_uniforms(seed, index, count):
    s0, s1, s2, s3 = _stream_init(U64(seed), U64(index))
    out = np.empty(count)
    for i in range(count):
        s0, s1, s2, s3, r = _xo_next(s0, s1, s2, s3)
        out[i] = (r >> U64(11)) * _INV53
    return out


@njit(inline="always")
def _sample(p, threshold):
    acc = 0.0
    last = p.shape[0] - 1
    for i in range(last):
        acc += p[i]
        if acc > threshold:
            return i
    return last


@njit(inline="always")
def _expand(vecs, sizes, d, out):
    # C-order outer product of the d row vectors in `vecs` into `out`
    length = sizes[d - 1]
    for t in range(length):
        out[t] = vecs[d - 1, t]
    for j in range(d - 2, -1, -1):
        s = sizes[j]
        for v in range(s - 1, -1, -1):
            f = vecs[j, v]
            base = v * length
            if v == 0:
                for t in range(length):
                    out[t] = f * out[t]
            else:
                for t in range(length):
                    out[base + t] = f * out[t]
        length = length * s
    return length


@njit(inline="always")
def _mh_step(p, T, w, yflat, kmats, sizes, strides, vr, vc, pr, pc, wl, pointmass):
    size = p.shape[0]
    om = (1.0 - w) / T
    if pointmass:
        total = 0.0
        for i in range(size):
            v = om * p[i]
            p[i] = v
            total += v
        p[yflat] += w
        return total + w
    d = sizes.shape[0]
    rem = yflat
    for j in range(d):
        c = rem // strides[j]
        rem -= c * strides[j]
        for t in range(sizes[j]):
            vr[j, t] = kmats[j, c, t]
            vc[j, t] = kmats[j, t, c]
    # single fused pass: proposal row/col values are (prefix product over
    # leading coordinates) x (last-coordinate vector), so only the short
    # prefix tables are materialized
    last = sizes[d - 1]
    if d == 1:
        pr[0] = 1.0
        pc[0] = 1.0
    else:
        _expand(vr, sizes, d - 1, pr)
        _expand(vc, sizes, d - 1, pc)
    inv = 1.0 / p[yflat]
    vlr = vr[d - 1]
    for t in range(last):
        wl[t] = vc[d - 1, t] * inv
    blocks = size // last
    accepted = 0.0
    total = 0.0
    i = 0
    for b in range(blocks):
        fr = pr[b]
        fc = pc[b]
        for t in range(last):
            pi = p[i]
            kv = min(pi * fc * wl[t], fr * vlr[t])
            accepted += kv
            v = om * pi + w * kv
            p[i] = v
            total += v
            i += 1
    leftover = 1.0 - accepted
    if leftover < 0.0:
        leftover = 0.0
    add = w * leftover
    p[yflat] += add
    return total + add


@njit(cache=False)
def _fit_kernel(p0, kmats, sizes, strides, weights, obs, pointmass, masses):
    size = p0.shape[0]
    d = sizes.shape[0]
    mx = kmats.shape[1]
    p = p0.copy()
    vr = np.empty((d, mx))
    vc = np.empty((d, mx))
    prefix = size // sizes[d - 1]
    pr = np.empty(prefix)
    pc = np.empty(prefix)
    wl = np.empty(mx)
    T = 1.0
    drift = 0.0
    for i in range(obs.shape[0]):
        y = obs[i]
        masses[i] = p[y] / T
        T = _mh_step(p, T, weights[i], y, kmats, sizes, strides, vr, vc, pr, pc, wl, pointmass)
        dev = abs(T - 1.0)
        if dev > drift:
            drift = dev
    for i in range(size):
        p[i] = p[i] / T
    return p, drift


@njit(cache=False, parallel=True)
def _resample_kernel(
    p0, kmats, sizes, strides, weights, seed, offset, draws, pointmass, out, drifts
):
    size = p0.shape[0]
    d = sizes.shape[0]
    mx = kmats.shape[1]
    steps = weights.shape[0]
    prefix = size // sizes[d - 1]
    for b in prange(draws):
        s0, s1, s2, s3 = _stream_init(U64(seed), U64(offset + b))
        p = p0.copy()
        vr = np.empty((d, mx))
        vc = np.empty((d, mx))
        pr = np.empty(prefix)
        pc = np.empty(prefix)
        wl = np.empty(mx)
        T = 1.0
        drift = 0.0
        for step in range(steps):
            s0, s1, s2, s3, r = _xo_next(s0, s1, s2, s3)
            u = (r >> U64(11)) * _INV53
            yflat = _sample(p, u * T)
            T = _mh_step(
                p, T, weights[step], yflat, kmats, sizes, strides, vr, vc, pr, pc, wl, pointmass
            )
            dev = abs(T - 1.0)
            if dev > drift:
                drift = dev
        for i in range(size):
            out[b, i] = p[i] / T
        drifts[b] = drift


# ---------------------------------------------------------------------------
# python-side wrappers


def stream_uniforms(seed: int, index: int, count: int) -> np.ndarray:
    """Conformance hook: the engine's uniform stream for (seed, index)."""
    return _stream_uniforms(np.uint64(seed), np.uint64(index), count)


def _pack_operator(op: KernelOperator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sizes = np.array([c.size for c in op.grid.coordinates], dtype=np.int64)
    strides = np.ones_like(sizes)
    for j in range(len(sizes) - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]
    mx = int(sizes.max())
    kmats = np.zeros((len(sizes), mx, mx))
    for j, mat in enumerate(op.matrices):
        kmats[j, : mat.shape[0], : mat.shape[1]] = mat
    return kmats, sizes, strides


_DUMMY_KMATS = np.zeros((1, 1, 1))


def _grid_layout(grid) -> tuple[np.ndarray, np.ndarray]:
    sizes = np.array([c.size for c in grid.coordinates], dtype=np.int64)
    strides = np.ones_like(sizes)
    for j in range(len(sizes) - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]
    return sizes, strides


def fit_path(base: Pmf, method, flats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fold the MAD/DP update over given flat observations; returns
    (final normalized probs, prequential masses)."""
    from .predictive import DpMethod, MadMethod, weights_for_range

    n = int(flats.shape[0])
    masses = np.empty(n)
    if isinstance(method, MadMethod):
        op = get_operator(method.kernel, base.grid)
        kmats, sizes, strides = _pack_operator(op)
        weights = weights_for_range(method.schedule, 1, n)
        pointmass = False
    elif isinstance(method, DpMethod):
        sizes, strides = _grid_layout(base.grid)
        kmats = _DUMMY_KMATS
        weights = 1.0 / (method.alpha + np.arange(1, n + 1, dtype=np.float64))
        pointmass = True
    else:
        raise TypeError(f"engine cannot fit {type(method).__name__}")
    probs, drift = _fit_kernel(
        base.probs, kmats, sizes, strides, weights, flats.astype(np.int64), pointmass, masses
    )
    if drift > DRIFT_TOL:
        raise NumericalError(f"pmf total drifted by {drift} during fit")
    return probs, masses


def resample_terminal(
    probs: np.ndarray,
    grid,
    kernel_op: KernelOperator | None,
    weights: np.ndarray,
    seed: int,
    draw_offset: int,
    draws: int,
) -> np.ndarray:
    """Terminal pmfs for draw indices draw_offset..draw_offset+draws-1.

    kernel_op None means the point-mass (DP) update. Each draw's stream
    depends only on (seed, draw index), so chunked calls concatenate to the
    same matrix as one big call.
    """
    if kernel_op is None:
        sizes, strides = _grid_layout(grid)
        kmats = _DUMMY_KMATS
        pointmass = True
    else:
        kmats, sizes, strides = _pack_operator(kernel_op)
        pointmass = False
    out = np.empty((draws, probs.shape[0]))
    drifts = np.empty(draws)
    _resample_kernel(
        probs,
        kmats,
        sizes,
        strides,
        np.asarray(weights, dtype=np.float64),
        np.uint64(seed),
        np.int64(draw_offset),
        draws,
        pointmass,
        out,
        drifts,
    )
    worst = float(drifts.max()) if draws else 0.0
    if worst > DRIFT_TOL:
        raise NumericalError(f"pmf total drifted by {worst} during resampling")
    return out


def set_threads(count: int) -> int:
    """Clamp and apply the numba thread count; returns the applied value."""
    limit = numba.config.NUMBA_DEFAULT_NUM_THREADS
    applied = max(1, min(int(count), limit))
    numba.set_num_threads(applied)
    return applied
