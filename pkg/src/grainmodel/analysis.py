"""Encoder-side noise modeling.

Splits a frame into base and noise layers, measures per-block noise energy
(RMS over beta x beta blocks), normalizes the layer to unit block energy and
fits one order-p all-pole spectral envelope per direction by linear
prediction over the concatenated rows / columns. Reflection coefficients are
carried as log-area ratios for quantization robustness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import det_exp, det_log
from .errors import DegenerateSignalError, FilterInstabilityError, GeometryError
from .types import ChromaLayout, Frame, ModelConfig, chroma_beta, sde_grid_dims

__all__ = [
    "NoiseLayer",
    "EnergyMap",
    "SpectralEnvelope",
    "ChannelNoiseModel",
    "FrameNoiseModel",
    "extract_noise_layer",
    "compute_sde",
    "normalize_noise",
    "concat_rows",
    "concat_cols",
    "autocorrelation",
    "levinson_durbin",
    "to_lar",
    "from_lar",
    "analyze_frame",
]

# Reflection magnitudes are capped here before LAR conversion so the coded
# filter stays strictly stable after quantization.
REFLECTION_CLAMP = 0.999

# Relative white-noise floor added to lag 0 before the recursion; keeps
# exactly-predictable inputs (e.g. a constant plane) numerically inside the
# unit circle without measurably biasing real noise fits.
_LAG0_FLOOR = 1e-9


@dataclass(frozen=True)
class NoiseLayer:
    """Signed per-channel residual planes (input minus base), same geometry."""

    planes: tuple[np.ndarray, ...]
    chroma_layout: ChromaLayout

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(self.planes))

    @property
    def width(self) -> int:
        return self.planes[0].shape[1]

    @property
    def height(self) -> int:
        return self.planes[0].shape[0]

    def plane_dims(self) -> list[tuple[int, int]]:
        return [(p.shape[1], p.shape[0]) for p in self.planes]


@dataclass(frozen=True)
class EnergyMap:
    """Per-block noise RMS values on the block grid of one plane.

    values[n, m] is the RMS of block column m, block row n; beta is the
    block size the grid was built with.
    """

    values: np.ndarray
    beta: int

    @property
    def w_beta(self) -> int:
        return self.values.shape[1]

    @property
    def h_beta(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectralEnvelope:
    """Order-p all-pole model of one direction's noise spectrum.

    Holds the prediction weights a_1..a_p, the reflection coefficients
    r_1..r_p (all strictly inside the unit interval) and their log-area
    ratios R_k = ln((1 - r_k) / (1 + r_k)). The three views are mutually
    consistent under the step-up recursion.
    """

    order: int
    a: np.ndarray
    r: np.ndarray
    lar: np.ndarray

    @classmethod
    def identity(cls, order: int) -> "SpectralEnvelope":
        z = np.zeros(order)
        return cls(order=order, a=z, r=z.copy(), lar=z.copy())

    @classmethod
    def from_reflections(cls, r: np.ndarray) -> "SpectralEnvelope":
        r = np.asarray(r, dtype=np.float64)
        if np.any(np.abs(r) >= 1.0):
            raise FilterInstabilityError("reflection coefficients must satisfy |r| < 1")
        a = _step_up(r)
        return cls(order=len(r), a=a, r=r, lar=to_lar(r))


@dataclass(frozen=True)
class ChannelNoiseModel:
    energy: EnergyMap
    horizontal: SpectralEnvelope
    vertical: SpectralEnvelope


@dataclass(frozen=True)
class FrameNoiseModel:
    """One noise-model record per channel of a frame (Y, then Cb, Cr)."""

    channels: tuple[ChannelNoiseModel, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))


def extract_noise_layer(source: Frame, base: Frame) -> NoiseLayer:
    """Per-channel signed difference between the source frame and the base."""
    if source.chroma_layout != base.chroma_layout or source.plane_dims() != base.plane_dims():
        raise GeometryError("source and base frames must share geometry and layout")
    planes = tuple(
        s.data.astype(np.float64) - b.data.astype(np.float64)
        for s, b in zip(source.planes, base.planes)
    )
    return NoiseLayer(planes=planes, chroma_layout=source.chroma_layout)


def compute_sde(plane: np.ndarray, beta: int) -> EnergyMap:
    """Block RMS map over the full beta x beta blocks of a noise plane."""
    h, w = plane.shape
    w_beta, h_beta = sde_grid_dims(w, h, beta)
    cropped = plane[: h_beta * beta, : w_beta * beta]
    blocks = cropped.reshape(h_beta, beta, w_beta, beta)
    values = np.sqrt(np.mean(blocks.astype(np.float64) ** 2, axis=(1, 3)))
    return EnergyMap(values=values, beta=beta)


def _cell_index(h: int, w: int, emap: EnergyMap) -> tuple[np.ndarray, np.ndarray]:
    # Pixels past the last full block clamp to the nearest cell.
    ys = np.minimum(np.arange(h) // emap.beta, emap.h_beta - 1)
    xs = np.minimum(np.arange(w) // emap.beta, emap.w_beta - 1)
    return ys, xs


def normalize_noise(plane: np.ndarray, emap: EnergyMap, sde_epsilon: float = 1e-6) -> np.ndarray:
    """Divide every pixel by its block's RMS (floored at sde_epsilon)."""
    h, w = plane.shape
    ys, xs = _cell_index(h, w, emap)
    divisor = np.maximum(emap.values, sde_epsilon)[np.ix_(ys, xs)]
    return plane / divisor


def concat_rows(plane: np.ndarray) -> np.ndarray:
    """Rows joined into one signal: row y=0, then y=1, ..."""
    return np.ascontiguousarray(plane).reshape(-1)


def concat_cols(plane: np.ndarray) -> np.ndarray:
    """Columns joined into one signal: column x=0, then x=1, ..."""
    return plane.T.reshape(-1)


def autocorrelation(signal: np.ndarray, p: int) -> np.ndarray:
    """Biased autocorrelation estimate at lags 0..p (divides by the full length).

    The biased estimator keeps the lag sequence positive semidefinite, which
    the recursion in levinson_durbin relies on.
    """
    signal = np.asarray(signal, dtype=np.float64)
    length = signal.shape[0]
    if length <= p:
        raise DegenerateSignalError(f"signal of length {length} too short for order {p}")
    lags = np.empty(p + 1)
    for k in range(p + 1):
        lags[k] = signal[: length - k] @ signal[k:]
    return lags / length


def levinson_durbin(lags: np.ndarray, order: int | None = None) -> SpectralEnvelope:
    """Solve the Toeplitz normal equations for the prediction weights.

    Returns the spectral envelope holding both the weights a_1..a_p and the
    reflection coefficients picked up along the recursion. The prediction
    error energy is non-increasing across steps.
    """
    lags = np.asarray(lags, dtype=np.float64)
    p = lags.shape[0] - 1 if order is None else order
    if lags.shape[0] < p + 1:
        raise ValueError(f"need lags 0..{p}, got {lags.shape[0]} values")
    if lags[0] <= 0:
        raise DegenerateSignalError("lag-0 autocorrelation must be positive")
    a = np.zeros(p)
    r = np.zeros(p)
    err = lags[0]
    for i in range(1, p + 1):
        acc = lags[i]
        for j in range(1, i):
            acc -= a[j - 1] * lags[i - j]
        k = acc / err
        if not abs(k) < 1.0:
            raise FilterInstabilityError(
                f"reflection coefficient {i} is {k:.6g}; lag sequence is not positive definite"
            )
        prev = a[: i - 1].copy()
        a[i - 1] = k
        for j in range(1, i):
            a[j - 1] = prev[j - 1] - k * prev[i - 1 - j]
        r[i - 1] = k
        err *= 1.0 - k * k
    return SpectralEnvelope(order=p, a=a, r=r, lar=to_lar(r))


def _step_up(r: np.ndarray) -> np.ndarray:
    """Prediction weights from reflection coefficients (step-up recursion)."""
    p = len(r)
    a = np.zeros(p)
    for i in range(1, p + 1):
        k = r[i - 1]
        prev = a[: i - 1].copy()
        a[i - 1] = k
        for j in range(1, i):
            a[j - 1] = prev[j - 1] - k * prev[i - 1 - j]
    return a


def to_lar(r):
    """Log-area ratio R = ln((1 - r) / (1 + r)); requires |r| < 1."""
    r_arr = np.asarray(r, dtype=np.float64)
    if np.any(np.abs(r_arr) >= 1.0):
        raise FilterInstabilityError("log-area ratio requires |r| < 1")
    out = det_log((1.0 - r_arr) / (1.0 + r_arr))
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def from_lar(lar):
    """Inverse of to_lar: r = (1 - e^R) / (1 + e^R), always strictly inside (-1, 1)."""
    lar_arr = np.asarray(lar, dtype=np.float64)
    # Evaluate via exp(-|R|) so large magnitudes neither overflow nor hit +-1.
    t = det_exp(-np.minimum(np.abs(lar_arr), 700.0))
    out = -np.sign(lar_arr) * (1.0 - t) / (1.0 + t)
    return float(out) if np.isscalar(lar) or lar_arr.ndim == 0 else out


def _fit_envelope(signal: np.ndarray, p: int) -> SpectralEnvelope:
    lags = autocorrelation(signal, p)
    if lags[0] <= 0.0:
        return SpectralEnvelope.identity(p)
    lags[0] *= 1.0 + _LAG0_FLOOR
    env = levinson_durbin(lags)
    if np.any(np.abs(env.r) > REFLECTION_CLAMP):
        return SpectralEnvelope.from_reflections(
            np.clip(env.r, -REFLECTION_CLAMP, REFLECTION_CLAMP)
        )
    return env


def analyze_frame(noise: NoiseLayer, cfg: ModelConfig) -> FrameNoiseModel:
    """Full per-channel model fit: energy map, then directional envelopes.

    The envelopes are estimated on the energy-normalized layer; a channel
    with no energy at all gets identity envelopes (flat spectrum).
    """
    luma_w = noise.width
    channels = []
    for plane in noise.planes:
        beta_c = chroma_beta(cfg.beta, luma_w, plane.shape[1])
        emap = compute_sde(plane, beta_c)
        normalized = normalize_noise(plane, emap, cfg.sde_epsilon)
        env_h = _fit_envelope(concat_rows(normalized), cfg.p)
        env_v = _fit_envelope(concat_cols(normalized), cfg.p)
        channels.append(ChannelNoiseModel(energy=emap, horizontal=env_h, vertical=env_v))
    return FrameNoiseModel(channels=tuple(channels))
