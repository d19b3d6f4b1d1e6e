"""Bit-exact serialization of noise-model streams (.pnm1) plus bitrate accounting.

Stream layout, all integers little-endian and byte-aligned:

    magic        4 bytes  "PNM1"
    version      u8       1
    width        u32      luma pixels
    height       u32
    fps_num      u32
    fps_den      u32
    layout       u8       0 mono, 1 = 4:2:0, 2 = 4:4:4
    beta         u16      luma energy-block size
    p            u8       prediction order
    flags        u8       bit 0: explicit seed follows; other bits reserved (0)
    seed         u64      present iff flags bit 0
    frame_count  u32

    per frame, channels in Y, Cb, Cr order:
        p bytes   horizontal LAR codes
        p bytes   vertical LAR codes
        scale     f32      largest RMS in the energy map
        codes     w_beta*h_beta bytes, row-major; value ~= code * scale / 255

The LAR quantizer half-range is a format constant (8.0) unless callers
override it identically on both ends; it is wide enough that every code
dequantizes to |r| < 1, so decoded filters are always stable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analysis import ChannelNoiseModel, EnergyMap, FrameNoiseModel, SpectralEnvelope, from_lar
from .errors import BadMagicError, FormatError, TruncatedStreamError, UnsupportedVersionError
from .types import ChromaLayout, chroma_beta, chroma_plane_dims, sde_grid_dims

MAGIC = b"PNM1"
VERSION = 1
DEFAULT_LAR_RANGE = 8.0

_LAYOUT_TO_CODE = {ChromaLayout.MONO: 0, ChromaLayout.C420: 1, ChromaLayout.C444: 2}
_CODE_TO_LAYOUT = {v: k for k, v in _LAYOUT_TO_CODE.items()}


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    fps_num: int
    fps_den: int
    layout: ChromaLayout
    beta: int
    p: int
    seed: int | None
    frame_count: int

    @property
    def channel_count(self) -> int:
        return self.layout.channel_count

    def channel_plane_dims(self) -> list[tuple[int, int]]:
        dims = [(self.width, self.height)]
        if self.layout is not ChromaLayout.MONO:
            cw, ch = chroma_plane_dims(self.width, self.height, self.layout)
            dims += [(cw, ch), (cw, ch)]
        return dims

    def channel_betas(self) -> list[int]:
        return [chroma_beta(self.beta, self.width, w) for w, _ in self.channel_plane_dims()]

    def channel_grids(self) -> list[tuple[int, int]]:
        return [
            sde_grid_dims(w, h, b)
            for (w, h), b in zip(self.channel_plane_dims(), self.channel_betas())
        ]

    def frame_payload_size(self) -> int:
        return sum(2 * self.p + 4 + gw * gh for gw, gh in self.channel_grids())


@dataclass(frozen=True)
class QuantizedEnvelope:
    codes: np.ndarray  # p uint8 LAR codes

    def dequantize(self, lar_range: float = DEFAULT_LAR_RANGE) -> SpectralEnvelope:
        return SpectralEnvelope.from_reflections(from_lar(dequantize_lar(self.codes, lar_range)))


@dataclass(frozen=True)
class QuantizedEnergyMap:
    scale: float  # f32-representable maximum RMS
    codes: np.ndarray  # (h_beta, w_beta) uint8

    def dequantize(self, beta: int) -> EnergyMap:
        return EnergyMap(values=self.codes.astype(np.float64) * (float(self.scale) / 255.0), beta=beta)


@dataclass(frozen=True)
class QuantizedChannelModel:
    horizontal: QuantizedEnvelope
    vertical: QuantizedEnvelope
    energy: QuantizedEnergyMap


@dataclass(frozen=True)
class QuantizedFrameModel:
    channels: tuple[QuantizedChannelModel, ...]


@dataclass(frozen=True)
class NoiseModelStream:
    header: StreamHeader
    frames: tuple[QuantizedFrameModel, ...]

    def dequantize_frame(self, index: int, lar_range: float = DEFAULT_LAR_RANGE) -> FrameNoiseModel:
        betas = self.header.channel_betas()
        qframe = self.frames[index]
        return FrameNoiseModel(
            channels=tuple(
                ChannelNoiseModel(
                    energy=qchan.energy.dequantize(beta_c),
                    horizontal=qchan.horizontal.dequantize(lar_range),
                    vertical=qchan.vertical.dequantize(lar_range),
                )
                for qchan, beta_c in zip(qframe.channels, betas)
            )
        )


def quantize_lar(lar, lar_range: float = DEFAULT_LAR_RANGE):
    """Uniform mid-rise 8-bit code for a log-area ratio; out-of-range clamps."""
    if lar_range <= 0:
        raise ValueError("lar_range must be positive")
    step = 2.0 * lar_range / 256.0
    codes = np.floor((np.asarray(lar, dtype=np.float64) + lar_range) / step)
    codes = np.clip(codes, 0, 255).astype(np.uint8)
    return int(codes) if np.isscalar(lar) else codes


def dequantize_lar(code, lar_range: float = DEFAULT_LAR_RANGE):
    """Bin-center reconstruction of quantize_lar."""
    step = 2.0 * lar_range / 256.0
    out = (np.asarray(code, dtype=np.float64) + 0.5) * step - lar_range
    return float(out) if np.isscalar(code) else out


def quantize_sde(emap: EnergyMap) -> QuantizedEnergyMap:
    """8-bit max-scaled coding of an energy map; the maximum is kept exactly."""
    peak = float(emap.values.max(initial=0.0))
    scale = float(np.float32(peak))
    if scale <= 0.0:
        codes = np.zeros(emap.values.shape, dtype=np.uint8)
        return QuantizedEnergyMap(scale=0.0, codes=codes)
    codes = np.floor(255.0 * emap.values / scale + 0.5)
    codes = np.clip(codes, 0, 255).astype(np.uint8)
    return QuantizedEnergyMap(scale=scale, codes=codes)


def dequantize_sde(q: QuantizedEnergyMap, beta: int) -> EnergyMap:
    return q.dequantize(beta)


def quantize_envelope(env: SpectralEnvelope, lar_range: float = DEFAULT_LAR_RANGE) -> QuantizedEnvelope:
    return QuantizedEnvelope(codes=quantize_lar(env.lar, lar_range))


def quantize_frame_model(
    model: FrameNoiseModel, header: StreamHeader, lar_range: float = DEFAULT_LAR_RANGE
) -> QuantizedFrameModel:
    if len(model.channels) != header.channel_count:
        raise ValueError(
            f"model has {len(model.channels)} channels, header implies {header.channel_count}"
        )
    channels = []
    for chan, (gw, gh) in zip(model.channels, header.channel_grids()):
        if chan.horizontal.order != header.p or chan.vertical.order != header.p:
            raise ValueError("envelope order differs from header p")
        if chan.energy.values.shape != (gh, gw):
            raise ValueError(
                f"energy map is {chan.energy.values.shape}, header implies {(gh, gw)}"
            )
        channels.append(
            QuantizedChannelModel(
                horizontal=quantize_envelope(chan.horizontal, lar_range),
                vertical=quantize_envelope(chan.vertical, lar_range),
                energy=quantize_sde(chan.energy),
            )
        )
    return QuantizedFrameModel(channels=tuple(channels))


def _pack_header(header: StreamHeader) -> bytes:
    flags = 1 if header.seed is not None else 0
    out = struct.pack(
        "<4sBIIIIBHBB",
        MAGIC,
        VERSION,
        header.width,
        header.height,
        header.fps_num,
        header.fps_den,
        _LAYOUT_TO_CODE[header.layout],
        header.beta,
        header.p,
        flags,
    )
    if header.seed is not None:
        out += struct.pack("<Q", header.seed)
    return out + struct.pack("<I", header.frame_count)


def serialize_quantized(header: StreamHeader, frames: tuple[QuantizedFrameModel, ...]) -> bytes:
    if len(frames) != header.frame_count:
        raise ValueError(f"{len(frames)} frames but header says {header.frame_count}")
    chunks = [_pack_header(header)]
    for qframe in frames:
        for qchan in qframe.channels:
            chunks.append(qchan.horizontal.codes.tobytes())
            chunks.append(qchan.vertical.codes.tobytes())
            chunks.append(struct.pack("<f", qchan.energy.scale))
            chunks.append(qchan.energy.codes.tobytes())
    return b"".join(chunks)


def serialize(
    header: StreamHeader,
    models,
    lar_range: float = DEFAULT_LAR_RANGE,
) -> bytes:
    """Quantize and serialize per-frame noise models under the given header."""
    if len(models) != header.frame_count:
        raise ValueError(f"{len(models)} models but header says {header.frame_count}")
    qframes = tuple(quantize_frame_model(m, header, lar_range) for m in models)
    return serialize_quantized(header, qframes)


def _need(data: bytes, at: int, count: int, what: str) -> None:
    if len(data) - at < count:
        raise TruncatedStreamError(f"stream ends inside {what}", offset=at)


def deserialize(data: bytes) -> NoiseModelStream:
    """Parse a .pnm1 stream; every malformation raises a structured error."""
    _need(data, 0, 4, "magic")
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}", offset=0)
    _need(data, 4, 1, "version")
    version = data[4]
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}", offset=4)
    _need(data, 5, 21, "fixed header")
    width, height, fps_num, fps_den, layout_code, beta, p, flags = struct.unpack_from(
        "<IIIIBHBB", data, 5
    )
    at = 26
    if layout_code not in _CODE_TO_LAYOUT:
        raise FormatError(f"unknown layout code {layout_code}", offset=21)
    if width < 1 or height < 1:
        raise FormatError(f"bad geometry {width}x{height}", offset=5)
    if fps_num < 1 or fps_den < 1:
        raise FormatError(f"bad frame rate {fps_num}:{fps_den}", offset=13)
    if beta < 2:
        raise FormatError(f"beta {beta} below minimum 2", offset=22)
    if not 1 <= p <= 32:
        raise FormatError(f"prediction order {p} outside 1..32", offset=24)
    if flags & ~1:
        raise FormatError(f"reserved flag bits set: {flags:#04x}", offset=25)
    seed = None
    if flags & 1:
        _need(data, at, 8, "seed")
        (seed,) = struct.unpack_from("<Q", data, at)
        at += 8
    _need(data, at, 4, "frame count")
    (frame_count,) = struct.unpack_from("<I", data, at)
    at += 4
    layout = _CODE_TO_LAYOUT[layout_code]
    header = StreamHeader(width, height, fps_num, fps_den, layout, beta, p, seed, frame_count)
    try:
        grids = header.channel_grids()
    except Exception as exc:
        raise FormatError(f"geometry {width}x{height} has no full {beta}-pixel block", offset=22) from exc
    frames = []
    for fi in range(frame_count):
        channels = []
        for ci, (gw, gh) in enumerate(grids):
            what = f"frame {fi} channel {ci}"
            _need(data, at, p, f"{what} horizontal codes")
            h_codes = np.frombuffer(data, dtype=np.uint8, count=p, offset=at)
            at += p
            _need(data, at, p, f"{what} vertical codes")
            v_codes = np.frombuffer(data, dtype=np.uint8, count=p, offset=at)
            at += p
            _need(data, at, 4, f"{what} energy scale")
            (scale,) = struct.unpack_from("<f", data, at)
            at += 4
            if not np.isfinite(scale) or scale < 0:
                raise FormatError(f"{what} energy scale {scale!r} invalid", offset=at - 4)
            n = gw * gh
            _need(data, at, n, f"{what} energy codes")
            codes = np.frombuffer(data, dtype=np.uint8, count=n, offset=at).reshape(gh, gw)
            at += n
            if scale == 0.0 and codes.any():
                raise FormatError(f"{what} has zero scale but nonzero codes", offset=at - n)
            channels.append(
                QuantizedChannelModel(
                    horizontal=QuantizedEnvelope(codes=h_codes),
                    vertical=QuantizedEnvelope(codes=v_codes),
                    energy=QuantizedEnergyMap(scale=float(scale), codes=codes),
                )
            )
        frames.append(QuantizedFrameModel(channels=tuple(channels)))
    if at != len(data):
        raise FormatError(f"{len(data) - at} trailing bytes after the last frame", offset=at)
    return NoiseModelStream(header=header, frames=tuple(frames))


# --- bitrate accounting -------------------------------------------------------


@dataclass(frozen=True)
class BitrateReport:
    channels: int
    se_bits_per_frame: int
    se_kbps: float
    sde_bytes_per_frame: int
    sde_kbps: float

    @property
    def total_kbps(self) -> float:
        return self.se_kbps + self.sde_kbps


def se_bitrate(p: int, channels: int = 1, fps_num: int = 30, fps_den: int = 1) -> float:
    """Spectral-envelope rate in kbit/s: two order-p code sets of 8 bits per frame."""
    if p < 1:
        raise ValueError("order must be >= 1")
    bits_per_frame = channels * 2 * p * 8
    return float(bits_per_frame * Fraction(fps_num, fps_den) / 1000)


def model_bitrate_report(stream: NoiseModelStream | StreamHeader) -> BitrateReport:
    """Per-component rates for a stream; an empty stream costs nothing."""
    header = stream.header if isinstance(stream, NoiseModelStream) else stream
    channels = header.channel_count
    sde_bytes = sum(4 + gw * gh for gw, gh in header.channel_grids())
    if header.frame_count == 0:
        return BitrateReport(channels, 0, 0.0, 0, 0.0)
    fps = header.fps_num / header.fps_den
    se_bits = channels * 2 * header.p * 8
    return BitrateReport(
        channels=channels,
        se_bits_per_frame=se_bits,
        se_kbps=se_bits * fps / 1000.0,
        sde_bytes_per_frame=sde_bytes,
        sde_kbps=sde_bytes * 8 * fps / 1000.0,
    )
