"""Hot inner loops with two interchangeable implementations.

Every kernel here exists twice: a scalar loop compiled with numba's @njit
(the default when numba imports) and a vectorized numpy/scipy fallback.
Set ``GRAIN_MODEL_NO_NUMBA=1`` to force the fallback path; the same path is
picked automatically when numba is not installed. ``benchmarks/bench_kernels.py``
times both.

The seeded Gaussian generator is specified here normatively so that output
is reproducible across platforms and across the two paths:

* Stream seeds come from the SplitMix64 finalizer: starting from a 64-bit
  seed, sample counter c maps to state ``seed + (c+1) * 0x9E3779B97F4A7C15``
  (mod 2**64), which is avalanched by ``z ^= z>>30; z *= 0xBF58476D1CE4E5B9;
  z ^= z>>27; z *= 0x94D049BB133111EB; z ^= z>>31``.
* A 64-bit word x becomes the uniform ``((x >> 11) + 1) * 2**-53`` in (0, 1].
* Consecutive uniform pairs feed the Box-Muller transform,
  ``z0 = sqrt(-2 ln u1) cos(2 pi u2)``, ``z1 = sqrt(-2 ln u1) sin(2 pi u2)``.
* ln, cos and sin are evaluated by the fixed polynomial schemes below
  rather than libm, so both paths round identically everywhere.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.signal import lfilter


def _env_disables_numba() -> bool:
    return os.environ.get("GRAIN_MODEL_NO_NUMBA", "").lower() in ("1", "true", "yes", "on")


USING_NUMBA = False
if not _env_disables_numba():
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        USING_NUMBA = False

if not USING_NUMBA:

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


# --- SplitMix64 constants (normative) ---------------------------------------
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U1 = np.uint64(1)
_MASK64 = (1 << 64) - 1

_TWO_NEG_53 = 2.0**-53
_LN2 = 0.6931471805599453
_SQRT_HALF = 0.7071067811865476
_TWO_PI = 6.283185307179586

# atanh(r) = r * P(r*r): P coefficients 1/(2k+1), highest order first.
# With m reduced into [sqrt(1/2), sqrt(2)), |r| <= 0.1716 and the dropped
# tail is below 1e-18 relative.
_LOG_COEFFS = tuple(1.0 / (2 * k + 1) for k in range(11, -1, -1))

# cos(t) = C(t*t), sin(t) = t * S(t*t) for |t| <= pi/4, terms to (t*t)**9.
_COS_COEFFS = tuple((-1.0) ** k / float(math.factorial(2 * k)) for k in range(9, -1, -1))
_SIN_COEFFS = tuple((-1.0) ** k / float(math.factorial(2 * k + 1)) for k in range(9, -1, -1))

# exp(f) for |f| <= ln(2)/2, terms to f**14.
_EXP_COEFFS = tuple(1.0 / float(math.factorial(k)) for k in range(14, -1, -1))


def splitmix64(seed: int, counter: int) -> int:
    """Mixed 64-bit word for one counter position of a seeded stream."""
    z = (seed + (counter + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_stream_seed(master_seed: int, frame_index: int, channel_index: int) -> int:
    """Per-(frame, channel) stream seed, independent of evaluation order."""
    z = splitmix64(master_seed, frame_index)
    return splitmix64(z, channel_index)


# --- deterministic transcendentals, scalar versions --------------------------


@_njit(cache=True, nogil=True)
def _log_scalar(u):
    m, e = math.frexp(u)  # u = m * 2**e, m in [0.5, 1)
    if m < _SQRT_HALF:
        m = m * 2.0
        e = e - 1
    r = (m - 1.0) / (m + 1.0)
    s = r * r
    acc = _LOG_COEFFS[0]
    for i in range(1, len(_LOG_COEFFS)):
        acc = acc * s + _LOG_COEFFS[i]
    return e * _LN2 + 2.0 * r * acc


@_njit(cache=True, nogil=True)
def _cos_sin_2pi_scalar(u):
    n = int(4.0 * u + 0.5)
    f = u - n * 0.25  # exact: dyadic subtraction, |f| <= 1/8
    t = _TWO_PI * f
    s2 = t * t
    c = _COS_COEFFS[0]
    for i in range(1, len(_COS_COEFFS)):
        c = c * s2 + _COS_COEFFS[i]
    s = _SIN_COEFFS[0]
    for i in range(1, len(_SIN_COEFFS)):
        s = s * s2 + _SIN_COEFFS[i]
    s = t * s
    q = n & 3
    if q == 0:
        return c, s
    if q == 1:
        return -s, c
    if q == 2:
        return -c, -s
    return s, -c


@_njit(cache=True, nogil=True)
def _gaussian_numba(n, seed):
    out = np.empty(n, dtype=np.float64)
    n_pairs = (n + 1) // 2
    for j in range(n_pairs):
        z1 = seed + np.uint64(2 * j + 1) * GOLDEN
        z1 = (z1 ^ (z1 >> _S30)) * MIX_1
        z1 = (z1 ^ (z1 >> _S27)) * MIX_2
        z1 = z1 ^ (z1 >> _S31)
        z2 = seed + np.uint64(2 * j + 2) * GOLDEN
        z2 = (z2 ^ (z2 >> _S30)) * MIX_1
        z2 = (z2 ^ (z2 >> _S27)) * MIX_2
        z2 = z2 ^ (z2 >> _S31)
        u1 = float((z1 >> _S11) + _U1) * _TWO_NEG_53
        u2 = float((z2 >> _S11) + _U1) * _TWO_NEG_53
        rad = np.sqrt(-2.0 * _log_scalar(u1))
        c, s = _cos_sin_2pi_scalar(u2)
        out[2 * j] = rad * c
        if 2 * j + 1 < n:
            out[2 * j + 1] = rad * s
    return out


# --- deterministic transcendentals, vectorized versions ----------------------


def _log_vec(u):
    m, e = np.frexp(u)
    low = m < _SQRT_HALF
    m = np.where(low, m * 2.0, m)
    e = np.where(low, e - 1, e).astype(np.float64)
    r = (m - 1.0) / (m + 1.0)
    s = r * r
    acc = np.full_like(u, _LOG_COEFFS[0])
    for coef in _LOG_COEFFS[1:]:
        acc = acc * s + coef
    return e * _LN2 + 2.0 * r * acc


def _cos_sin_2pi_vec(u):
    n = np.floor(4.0 * u + 0.5)
    f = u - n * 0.25
    t = _TWO_PI * f
    s2 = t * t
    c = np.full_like(u, _COS_COEFFS[0])
    for coef in _COS_COEFFS[1:]:
        c = c * s2 + coef
    s = np.full_like(u, _SIN_COEFFS[0])
    for coef in _SIN_COEFFS[1:]:
        s = s * s2 + coef
    s = t * s
    q = n.astype(np.int64) & 3
    cos_out = np.choose(q, (c, -s, -c, s))
    sin_out = np.choose(q, (s, c, -s, -c))
    return cos_out, sin_out


def _exp_vec(x):
    n = np.floor(x / _LN2 + 0.5)
    f = x - n * _LN2
    acc = np.full_like(x, _EXP_COEFFS[0])
    for coef in _EXP_COEFFS[1:]:
        acc = acc * f + coef
    return np.ldexp(acc, n.astype(np.int64))


def det_log(u):
    """Natural log of positive finite doubles; identical bits on every platform."""
    return _log_vec(np.asarray(u, dtype=np.float64))


def det_exp(x):
    """exp of doubles; identical bits on every platform."""
    return _exp_vec(np.asarray(x, dtype=np.float64))


def _gaussian_numpy(n, seed):
    n_pairs = (n + 1) // 2
    counters = np.arange(1, 2 * n_pairs + 1, dtype=np.uint64)
    z = np.uint64(seed) + counters * GOLDEN
    z = (z ^ (z >> _S30)) * MIX_1
    z = (z ^ (z >> _S27)) * MIX_2
    z = z ^ (z >> _S31)
    u = ((z >> _S11) + _U1).astype(np.float64) * _TWO_NEG_53
    rad = np.sqrt(-2.0 * _log_vec(u[0::2]))
    c, s = _cos_sin_2pi_vec(u[1::2])
    out = np.empty(2 * n_pairs, dtype=np.float64)
    out[0::2] = rad * c
    out[1::2] = rad * s
    return out[:n]


# --- block-matching SAD search ------------------------------------------------


@_njit(cache=True, nogil=True)
def _sad_search_numba(target, padded, cands, block, radius):
    h, w = target.shape
    nby = (h + block - 1) // block
    nbx = (w + block - 1) // block
    vectors = np.zeros((nby, nbx, 2), dtype=np.int32)
    sads = np.zeros((nby, nbx), dtype=np.int64)
    for by in range(nby):
        y0 = by * block
        y1 = min(y0 + block, h)
        for bx in range(nbx):
            x0 = bx * block
            x1 = min(x0 + block, w)
            best = np.int64(1) << 62
            best_dx = np.int32(0)
            best_dy = np.int32(0)
            for ci in range(cands.shape[0]):
                dx = cands[ci, 0]
                dy = cands[ci, 1]
                acc = np.int64(0)
                for y in range(y0, y1):
                    py = y + dy + radius
                    for x in range(x0, x1):
                        d = target[y, x] - padded[py, x + dx + radius]
                        acc += d if d >= 0 else -d
                    if acc >= best:
                        break
                if acc < best:
                    best = acc
                    best_dx = dx
                    best_dy = dy
            vectors[by, bx, 0] = best_dx
            vectors[by, bx, 1] = best_dy
            sads[by, bx] = best
    return vectors, sads


def _sad_search_numpy(target, padded, cands, block, radius):
    h, w = target.shape
    nby = (h + block - 1) // block
    nbx = (w + block - 1) // block
    row_starts = np.arange(0, h, block)
    col_starts = np.arange(0, w, block)
    all_sads = np.empty((cands.shape[0], nby, nbx), dtype=np.int64)
    tgt = target.astype(np.int64)
    for ci in range(cands.shape[0]):
        dx, dy = int(cands[ci, 0]), int(cands[ci, 1])
        shifted = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
        ad = np.abs(tgt - shifted)
        per_rows = np.add.reduceat(ad, row_starts, axis=0)
        all_sads[ci] = np.add.reduceat(per_rows, col_starts, axis=1)
    best = all_sads.argmin(axis=0)  # first minimum: candidate order is the tie-break
    vectors = cands[best].astype(np.int32)
    sads = np.take_along_axis(all_sads, best[None], axis=0)[0]
    return vectors, sads


# --- all-pole IIR filtering ----------------------------------------------------


@_njit(cache=True, nogil=True)
def _iir_all_pole_numba(x, a):
    n = x.shape[0]
    p = a.shape[0]
    y = np.empty(n, dtype=np.float64)
    for k in range(n):
        acc = x[k]
        jmax = p if k >= p else k
        for j in range(jmax):
            acc += a[j] * y[k - 1 - j]
        y[k] = acc
    return y


def _iir_all_pole_numpy(x, a):
    den = np.empty(a.shape[0] + 1, dtype=np.float64)
    den[0] = 1.0
    den[1:] = -a
    return lfilter([1.0], den, x)


# --- dispatchers ---------------------------------------------------------------

if USING_NUMBA:
    gaussian_samples = _gaussian_numba
    sad_search = _sad_search_numba
    iir_all_pole = _iir_all_pole_numba
else:
    gaussian_samples = _gaussian_numpy
    sad_search = _sad_search_numpy
    iir_all_pole = _iir_all_pole_numpy
