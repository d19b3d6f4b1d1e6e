"""Motion-compensated temporal denoising: the base-layer producer.

Every frame is predicted from up to k_frames neighbors on each side via
exhaustive block matching on luma (chroma reuses scaled luma vectors), and
the predictions are averaged with the frame itself using similarity weights
w = exp(-SAD / (lambda * pixels_per_block)). A prediction that matches
perfectly gets weight 1, a poor one decays toward 0, so static regions
converge to a plain mean while moving mismatches fade out.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import GeometryError
from .types import DenoiseConfig, Frame, Plane, VideoSequence

__all__ = ["MotionField", "motion_search", "compensate", "temporal_filter", "denoise_sequence"]


@dataclass(frozen=True)
class MotionField:
    """Per-block displacement vectors and their matching SAD scores."""

    block: int
    vectors: np.ndarray  # (rows, cols, 2) int32, (dx, dy) per block
    sads: np.ndarray  # (rows, cols) int64


@lru_cache(maxsize=None)
def _candidates(radius: int) -> np.ndarray:
    # Scan order is the tie-break: |dx|+|dy| ascending, then dy, then dx.
    offsets = sorted(
        ((dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)),
        key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]),
    )
    arr = np.array(offsets, dtype=np.int32)
    arr.flags.writeable = False
    return arr


def _grid_dims(w: int, h: int, block: int) -> tuple[int, int]:
    return (h + block - 1) // block, (w + block - 1) // block


def motion_search(target: Plane, reference: Plane, cfg: DenoiseConfig) -> MotionField:
    """Full-search block matching over the whole [-r, r]^2 window.

    Out-of-plane reference reads clamp to the edge pixels. The returned
    vector is the SAD minimum; ties go to the smallest |dx|+|dy|, then the
    smallest dy, then the smallest dx.
    """
    if (target.width, target.height) != (reference.width, reference.height):
        raise GeometryError("motion search needs planes of equal size")
    r = cfg.search_radius
    tgt = target.data.astype(np.int32)
    padded = np.pad(reference.data.astype(np.int32), r, mode="edge")
    vectors, sads = _kernels.sad_search(tgt, padded, _candidates(r), cfg.block, r)
    return MotionField(block=cfg.block, vectors=vectors, sads=sads)


def compensate(reference: Plane, field: MotionField) -> Plane:
    """Copy each block from the reference displaced by its vector, edge-clamped."""
    h, w = reference.height, reference.width
    rows, cols = field.vectors.shape[:2]
    if (rows, cols) != _grid_dims(w, h, field.block):
        raise GeometryError("motion field grid does not match the plane")
    pad = int(np.abs(field.vectors).max(initial=0))
    padded = np.pad(reference.data, pad, mode="edge") if pad else reference.data
    out = np.empty((h, w), dtype=reference.data.dtype)
    blk = field.block
    for by in range(rows):
        y0, y1 = by * blk, min((by + 1) * blk, h)
        for bx in range(cols):
            x0, x1 = bx * blk, min((bx + 1) * blk, w)
            dx, dy = int(field.vectors[by, bx, 0]), int(field.vectors[by, bx, 1])
            out[y0:y1, x0:x1] = padded[y0 + dy + pad : y1 + dy + pad, x0 + dx + pad : x1 + dx + pad]
    return Plane(out)


def _block_pixel_counts(w: int, h: int, block: int) -> np.ndarray:
    rows, cols = _grid_dims(w, h, block)
    row_px = np.minimum(block, h - np.arange(rows) * block)
    col_px = np.minimum(block, w - np.arange(cols) * block)
    return np.outer(row_px, col_px)


def _block_sads(a: np.ndarray, b: np.ndarray, block: int) -> np.ndarray:
    diff = np.abs(a.astype(np.int64) - b.astype(np.int64))
    rows = np.add.reduceat(diff, np.arange(0, a.shape[0], block), axis=0)
    return np.add.reduceat(rows, np.arange(0, a.shape[1], block), axis=1)


def _weight_map(field: MotionField, w: int, h: int, lambda_: float) -> np.ndarray:
    npx = _block_pixel_counts(w, h, field.block)
    w_block = np.exp(-field.sads / (lambda_ * npx))
    ys = np.arange(h) // field.block
    xs = np.arange(w) // field.block
    return w_block[np.ix_(ys, xs)]


def temporal_filter(
    current: Plane, predictions: list[tuple[Plane, MotionField]], cfg: DenoiseConfig
) -> Plane:
    """Similarity-weighted average of the frame with its motion predictions.

    The result is a per-pixel convex combination (the frame itself always has
    weight 1), rounded half up and clamped to 0..255.
    """
    h, w = current.height, current.width
    acc = current.data.astype(np.float64)
    wsum = np.ones((h, w))
    for pred, field in predictions:
        if (pred.width, pred.height) != (w, h):
            raise GeometryError("prediction plane size differs from the current plane")
        wmap = _weight_map(field, w, h, cfg.lambda_)
        acc = acc + wmap * pred.data
        wsum = wsum + wmap
    out = np.floor(acc / wsum + 0.5)
    return Plane(np.clip(out, 0, 255).astype(np.uint8))


def _scale_toward_zero(v: np.ndarray, num: int, den: int) -> np.ndarray:
    return (np.sign(v) * (np.abs(v) * num // den)).astype(np.int32)


def _chroma_prediction(
    current: Plane, reference: Plane, luma_field: MotionField, luma_dims: tuple[int, int]
) -> tuple[Plane, MotionField]:
    """Reuse luma vectors on a chroma plane, rescaled to its geometry."""
    lw, lh = luma_dims
    cw, ch = current.width, current.height
    if (cw, ch) == (lw, lh):
        pred = compensate(reference, luma_field)
        return pred, luma_field
    block_c = max(1, luma_field.block * cw // lw)
    rows, cols = _grid_dims(cw, ch, block_c)
    l_rows, l_cols = luma_field.vectors.shape[:2]
    by = np.minimum(np.arange(rows), l_rows - 1)
    bx = np.minimum(np.arange(cols), l_cols - 1)
    src = luma_field.vectors[np.ix_(by, bx)]
    vectors = np.empty((rows, cols, 2), dtype=np.int32)
    vectors[..., 0] = _scale_toward_zero(src[..., 0], cw, lw)
    vectors[..., 1] = _scale_toward_zero(src[..., 1], ch, lh)
    field = MotionField(block=block_c, vectors=vectors, sads=np.zeros((rows, cols), dtype=np.int64))
    pred = compensate(reference, field)
    sads = _block_sads(current.data, pred.data, block_c)
    return pred, MotionField(block=block_c, vectors=vectors, sads=sads)


def denoise_frame(frames: tuple[Frame, ...], index: int, cfg: DenoiseConfig) -> Frame:
    """Denoise one frame against its clipped neighbor window."""
    cur = frames[index]
    neighbors = [
        n
        for n in range(index - cfg.k_frames, index + cfg.k_frames + 1)
        if n != index and 0 <= n < len(frames)
    ]
    luma_dims = (cur.width, cur.height)
    predictions: list[list[tuple[Plane, MotionField]]] = [[] for _ in cur.planes]
    for n in neighbors:
        field = motion_search(cur.planes[0], frames[n].planes[0], cfg)
        predictions[0].append((compensate(frames[n].planes[0], field), field))
        for ci in range(1, len(cur.planes)):
            predictions[ci].append(
                _chroma_prediction(cur.planes[ci], frames[n].planes[ci], field, luma_dims)
            )
    planes = tuple(
        temporal_filter(cur.planes[ci], predictions[ci], cfg) for ci in range(len(cur.planes))
    )
    return Frame(planes=planes, chroma_layout=cur.chroma_layout)


def denoise_sequence(seq: VideoSequence, cfg: DenoiseConfig, threads: int = 1) -> VideoSequence:
    """Denoise every frame; output is identical for any thread count."""
    if not seq.frames:
        raise GeometryError("cannot denoise an empty sequence")
    indices = range(len(seq.frames))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(lambda i: denoise_frame(seq.frames, i, cfg), indices))
    else:
        frames = [denoise_frame(seq.frames, i, cfg) for i in indices]
    return VideoSequence(frames=tuple(frames), fps_num=seq.fps_num, fps_den=seq.fps_den)
