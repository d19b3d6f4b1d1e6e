"""Shared data model: planes, frames, sequences and tool configuration.

Pixel coordinates are (x, y) = (column, row); sample storage is row-major,
so ``plane.data[y, x]`` addresses column x of row y. Video planes hold 8-bit
unsigned samples; noise-layer planes hold signed float samples (a difference
of two 8-bit planes spans -255..255).

All types are immutable value data once constructed and safe to share
between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GeometryError


class ChromaLayout(str, Enum):
    MONO = "mono"
    C420 = "420"
    C444 = "444"

    @property
    def channel_count(self) -> int:
        return 1 if self is ChromaLayout.MONO else 3


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Plane:
    """One image plane: a 2-D sample grid of shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise GeometryError(f"plane data must be 2-D, got shape {self.data.shape}")
        h, w = self.data.shape
        if w < 1 or h < 1:
            raise GeometryError(f"plane must be at least 1x1, got {w}x{h}")
        object.__setattr__(self, "data", _freeze(self.data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def chroma_plane_dims(luma_w: int, luma_h: int, layout: ChromaLayout) -> tuple[int, int]:
    """Chroma plane size for a given luma size: halved (rounded up) for 4:2:0."""
    if layout is ChromaLayout.C420:
        return (luma_w + 1) // 2, (luma_h + 1) // 2
    return luma_w, luma_h


@dataclass(frozen=True)
class Frame:
    """One video frame: luma plane plus chroma planes as dictated by layout."""

    planes: tuple[Plane, ...]
    chroma_layout: ChromaLayout

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(self.planes))
        n_expected = self.chroma_layout.channel_count
        if len(self.planes) != n_expected:
            raise GeometryError(
                f"layout {self.chroma_layout.value} needs {n_expected} planes, "
                f"got {len(self.planes)}"
            )
        luma = self.planes[0]
        cw, ch = chroma_plane_dims(luma.width, luma.height, self.chroma_layout)
        for p in self.planes[1:]:
            if (p.width, p.height) != (cw, ch):
                raise GeometryError(
                    f"chroma plane is {p.width}x{p.height}, expected {cw}x{ch} "
                    f"for layout {self.chroma_layout.value}"
                )

    @property
    def width(self) -> int:
        return self.planes[0].width

    @property
    def height(self) -> int:
        return self.planes[0].height

    def plane_dims(self) -> list[tuple[int, int]]:
        return [(p.width, p.height) for p in self.planes]


@dataclass(frozen=True)
class VideoSequence:
    """An ordered run of frames with a rational frame rate (frames/second)."""

    frames: tuple[Frame, ...]
    fps_num: int = 25
    fps_den: int = 1

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.fps_num < 1 or self.fps_den < 1:
            raise GeometryError(f"frame rate must be positive, got {self.fps_num}:{self.fps_den}")
        if self.frames:
            first = self.frames[0]
            for i, f in enumerate(self.frames):
                if (f.width, f.height, f.chroma_layout) != (
                    first.width,
                    first.height,
                    first.chroma_layout,
                ):
                    raise GeometryError(f"frame {i} geometry differs from frame 0")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def fps(self) -> float:
        return self.fps_num / self.fps_den

    @property
    def chroma_layout(self) -> ChromaLayout:
        return self.frames[0].chroma_layout


@dataclass(frozen=True)
class ModelConfig:
    """Noise-model parameters.

    beta is the energy-map block size in luma pixels, p the prediction order.
    lar_range is the half-range of the 8-bit log-area-ratio quantizer and
    sde_epsilon the floor that guards division by zero-energy blocks.
    """

    beta: int = 30
    p: int = 10
    master_seed: int = 0
    lar_range: float = 8.0
    sde_epsilon: float = 1e-6

    def __post_init__(self):
        if self.beta < 2:
            raise ValueError(f"beta must be >= 2, got {self.beta}")
        if not 1 <= self.p <= 32:
            raise ValueError(f"prediction order must be in 1..32, got {self.p}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if self.lar_range <= 0:
            raise ValueError(f"lar_range must be positive, got {self.lar_range}")
        if self.sde_epsilon <= 0:
            raise ValueError(f"sde_epsilon must be positive, got {self.sde_epsilon}")


@dataclass(frozen=True)
class DenoiseConfig:
    """Temporal-denoiser parameters.

    k_frames is the temporal radius (neighbors on each side), block the
    match block size, search_radius the motion window half-width and
    lambda_ the similarity decay in per-pixel SAD units.
    """

    k_frames: int = 3
    block: int = 16
    search_radius: int = 8
    lambda_: float = 4.0

    def __post_init__(self):
        if self.k_frames < 1:
            raise ValueError(f"k_frames must be >= 1, got {self.k_frames}")
        if self.block < 4:
            raise ValueError(f"block must be >= 4, got {self.block}")
        if self.search_radius < 1:
            raise ValueError(f"search_radius must be >= 1, got {self.search_radius}")
        if self.lambda_ <= 0:
            raise ValueError(f"lambda must be positive, got {self.lambda_}")


def chroma_beta(beta: int, luma_dim: int, plane_dim: int) -> int:
    """Block size for a chroma plane, scaled so blocks align spatially with luma.

    Returns max(1, floor(beta * plane_dim / luma_dim)); equal dims return beta.
    """
    if beta < 1 or luma_dim < 1 or plane_dim < 1:
        raise ValueError("chroma_beta inputs must be >= 1")
    return max(1, beta * plane_dim // luma_dim)


def sde_grid_dims(plane_w: int, plane_h: int, beta: int) -> tuple[int, int]:
    """Energy-map grid size (floor(w/beta), floor(h/beta)); full blocks only."""
    if beta < 1:
        raise ValueError(f"beta must be >= 1, got {beta}")
    w_beta, h_beta = plane_w // beta, plane_h // beta
    if w_beta < 1 or h_beta < 1:
        raise GeometryError(
            f"plane {plane_w}x{plane_h} is smaller than one {beta}x{beta} block"
        )
    return w_beta, h_beta
