"""Objective verification instruments: spectra, PSNR and block-energy errors.

The spectrum tools compare a measured noise spectrum (averaged windowed
periodogram of the concatenated directional signal) against the all-pole
envelope it was modeled with. Envelopes carry no gain of their own (energy
travels in the block-RMS map), so comparisons are gain-aligned in dB first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import EnergyMap, SpectralEnvelope, concat_cols, concat_rows
from .errors import GeometryError
from .types import Plane

__all__ = [
    "SpectrumReport",
    "periodogram",
    "envelope_spectrum",
    "log_spectral_distance",
    "psnr",
    "block_rms_error",
    "build_spectrum_report",
]

_DIRECTIONS = ("horizontal", "vertical")


@dataclass(frozen=True)
class SpectrumReport:
    """Periodogram vs. gain-aligned envelope samples over 0..0.5 cycles/sample."""

    freqs: np.ndarray
    periodogram_db: np.ndarray
    envelope_db: np.ndarray
    log_spectral_distance: float


def periodogram(plane: np.ndarray, direction: str, window_len: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed, 50%-overlapped average power spectrum of one direction.

    Normalized so unit-variance white input sits flat at 1.0 (0 dB) up to
    estimation noise. Returns (frequencies in cycles/sample, linear power).
    """
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
    if window_len < 2 or window_len & (window_len - 1):
        raise ValueError(f"window_len must be a power of two >= 2, got {window_len}")
    signal = concat_rows(plane) if direction == "horizontal" else concat_cols(plane)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape[0] < window_len:
        raise GeometryError(
            f"plane too small: {signal.shape[0]} samples for window {window_len}"
        )
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window_len) / window_len)
    norm = window @ window
    hop = window_len // 2
    n_segments = 1 + (signal.shape[0] - window_len) // hop
    power = np.zeros(window_len // 2 + 1)
    for s in range(n_segments):
        seg = signal[s * hop : s * hop + window_len] * window
        power += np.abs(np.fft.rfft(seg)) ** 2
    power /= n_segments * norm
    freqs = np.arange(window_len // 2 + 1) / window_len
    return freqs, power


def envelope_spectrum(envelope: SpectralEnvelope, n_points: int) -> np.ndarray:
    """|H|^2 = 1 / |1 - sum a_k e^{-jwk}|^2 on a uniform grid over 0..0.5 cycles/sample."""
    if n_points < 2:
        raise ValueError("need at least two spectrum points")
    omega = np.pi * np.arange(n_points) / (n_points - 1)
    k = np.arange(1, envelope.order + 1)
    denom = 1.0 - np.exp(-1j * np.outer(omega, k)) @ envelope.a
    return 1.0 / np.abs(denom) ** 2


def log_spectral_distance(s1: np.ndarray, s2: np.ndarray) -> float:
    """RMS dB distance between two spectra after removing their mean gain offset."""
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape:
        raise GeometryError(f"spectra shapes differ: {s1.shape} vs {s2.shape}")
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise ValueError("spectra must be strictly positive")
    diff = 10.0 * np.log10(s1 / s2)
    diff = diff - diff.mean()
    return float(np.sqrt(np.mean(diff**2)))


def _as_array(plane) -> np.ndarray:
    return plane.data if isinstance(plane, Plane) else np.asarray(plane)


def psnr(a, b) -> float:
    """Peak SNR in dB against the 8-bit peak; identical planes report infinity."""
    da, db = _as_array(a), _as_array(b)
    if da.shape != db.shape:
        raise GeometryError(f"plane shapes differ: {da.shape} vs {db.shape}")
    mse = np.mean((da.astype(np.float64) - db.astype(np.float64)) ** 2)
    if mse == 0.0:
        return math.inf
    return float(10.0 * np.log10(255.0**2 / mse))


def block_rms_error(map1, map2) -> tuple[float, float]:
    """Max and mean relative error of map2 against reference map1."""
    v1 = map1.values if isinstance(map1, EnergyMap) else np.asarray(map1, dtype=np.float64)
    v2 = map2.values if isinstance(map2, EnergyMap) else np.asarray(map2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise GeometryError(f"energy map shapes differ: {v1.shape} vs {v2.shape}")
    rel = np.abs(v2 - v1) / np.maximum(v1, 1e-12)
    return float(rel.max()), float(rel.mean())


def build_spectrum_report(
    plane: np.ndarray,
    envelope: SpectralEnvelope,
    direction: str,
    window_len: int = 256,
) -> SpectrumReport:
    """Measure one direction of a (normalized) noise plane against its envelope."""
    freqs, power = periodogram(plane, direction, window_len)
    env = envelope_spectrum(envelope, len(freqs))
    power = np.maximum(power, 1e-300)
    power_db = 10.0 * np.log10(power)
    env_db = 10.0 * np.log10(env)
    env_db = env_db + float(np.mean(power_db - env_db))
    return SpectrumReport(
        freqs=freqs,
        periodogram_db=power_db,
        envelope_db=env_db,
        log_spectral_distance=log_spectral_distance(power, env),
    )
