"""Decoder-side noise synthesis and recombination.

Each frame's noise is built per channel from a seeded white Gaussian plane,
spectrally shaped by the decoded all-pole filters (rows first, then columns,
with filter state carried across the whole concatenated signal), rescaled so
every full block's RMS equals its decoded energy value, and finally added to
the base layer.

Output is a pure function of (model bytes, master seed): stream seeds are
derived per (frame, channel), so worker scheduling cannot change a pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .analysis import EnergyMap, FrameNoiseModel, NoiseLayer, SpectralEnvelope, concat_cols, concat_rows
from .errors import GeometryError
from .types import ChromaLayout, Frame, Plane

__all__ = [
    "NoiseSeedPolicy",
    "gaussian_plane",
    "iir_filter_1d",
    "shape_noise",
    "apply_sde",
    "synthesize_frame",
    "recombine",
]


@dataclass(frozen=True)
class NoiseSeedPolicy:
    """Derives one independent generator stream per (frame, channel).

    The derivation chains the SplitMix64 finalizer documented in _kernels:
    mix(mix(master_seed, frame_index), channel_index). Identical inputs give
    identical noise planes regardless of evaluation order.
    """

    master_seed: int = 0

    def stream_seed(self, frame_index: int, channel_index: int) -> int:
        return _kernels.derive_stream_seed(self.master_seed, frame_index, channel_index)


def gaussian_plane(width: int, height: int, stream_seed: int) -> np.ndarray:
    """Seeded i.i.d. standard-normal plane, identical on every platform."""
    if width < 1 or height < 1:
        raise GeometryError(f"plane must be at least 1x1, got {width}x{height}")
    samples = _kernels.gaussian_samples(width * height, np.uint64(stream_seed))
    return samples.reshape(height, width)


def iir_filter_1d(signal: np.ndarray, a: np.ndarray) -> np.ndarray:
    """All-pole filter y(k) = x(k) + sum_j a_j y(k-j), zero initial state."""
    x = np.ascontiguousarray(signal, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    return _kernels.iir_all_pole(x, a)


def shape_noise(
    plane: np.ndarray, envelope_h: SpectralEnvelope, envelope_v: SpectralEnvelope
) -> np.ndarray:
    """Run the horizontal then the vertical all-pole filter over the plane."""
    h, w = plane.shape
    shaped = iir_filter_1d(concat_rows(plane), envelope_h.a).reshape(h, w)
    shaped = iir_filter_1d(concat_cols(shaped), envelope_v.a).reshape(w, h).T
    return np.ascontiguousarray(shaped)


def apply_sde(plane: np.ndarray, emap: EnergyMap, sde_epsilon: float = 1e-6) -> np.ndarray:
    """Scale each block so its RMS equals the block's energy value exactly.

    Blocks whose own RMS is below sde_epsilon stay zero; pixels past the last
    full block reuse the nearest block's gain.
    """
    h, w = plane.shape
    beta = emap.beta
    gh, gw = emap.values.shape
    if gw != w // beta or gh != h // beta:
        raise GeometryError(
            f"energy map {gw}x{gh} does not match plane {w}x{h} at block {beta}"
        )
    cropped = plane[: gh * beta, : gw * beta]
    rms = np.sqrt(np.mean(cropped.reshape(gh, beta, gw, beta) ** 2, axis=(1, 3)))
    gains = np.where(rms < sde_epsilon, 0.0, emap.values / np.where(rms == 0.0, 1.0, rms))
    ys = np.minimum(np.arange(h) // beta, gh - 1)
    xs = np.minimum(np.arange(w) // beta, gw - 1)
    return plane * gains[np.ix_(ys, xs)]


def synthesize_frame(
    model: FrameNoiseModel,
    plane_dims: list[tuple[int, int]],
    seeds: list[int],
    sde_epsilon: float = 1e-6,
) -> NoiseLayer:
    """Per-channel gaussian plane -> spectral shaping -> energy scaling."""
    if len(model.channels) != len(plane_dims) or len(seeds) != len(plane_dims):
        raise GeometryError("model channels, geometry and seeds must align")
    planes = []
    for chan, (w, h), seed in zip(model.channels, plane_dims, seeds):
        white = gaussian_plane(w, h, seed)
        shaped = shape_noise(white, chan.horizontal, chan.vertical)
        planes.append(apply_sde(shaped, chan.energy, sde_epsilon))
    layout = {1: ChromaLayout.MONO}.get(len(planes))
    if layout is None:
        lw, lh = plane_dims[0]
        cw, ch = plane_dims[1]
        layout = ChromaLayout.C444 if (cw, ch) == (lw, lh) else ChromaLayout.C420
    return NoiseLayer(planes=tuple(planes), chroma_layout=layout)


def recombine(base: Frame, noise: NoiseLayer) -> Frame:
    """Add synthesized noise onto the base frame; round half up, clamp to 0..255."""
    if base.plane_dims() != noise.plane_dims():
        raise GeometryError("base frame and noise layer geometry differ")
    planes = []
    for bp, npl in zip(base.planes, noise.planes):
        merged = np.floor(bp.data.astype(np.float64) + npl + 0.5)
        planes.append(Plane(np.clip(merged, 0, 255).astype(np.uint8)))
    return Frame(planes=tuple(planes), chroma_layout=base.chroma_layout)
