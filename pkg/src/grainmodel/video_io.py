"""Raw planar YUV and Y4M container parsing/writing.

Y4M streams start with a "YUV4MPEG2" signature line of space-separated
parameter tokens (W/H/F mandatory here; I, A and X tokens are parsed and
ignored), followed by frames introduced by "FRAME" lines. Raw planar
streams are headerless; geometry arrives from the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadSignatureError,
    FormatError,
    GrainModelError,
    TruncatedStreamError,
    UnknownColorspaceError,
)
from .types import ChromaLayout, Frame, Plane, VideoSequence, chroma_plane_dims

Y4M_SIGNATURE = b"YUV4MPEG2"

# Colorspace tags understood on input; all 4:2:0 chroma-siting variants map
# to the same planar layout.
_TAG_TO_LAYOUT = {
    "420": ChromaLayout.C420,
    "420jpeg": ChromaLayout.C420,
    "420mpeg2": ChromaLayout.C420,
    "420paldv": ChromaLayout.C420,
    "444": ChromaLayout.C444,
    "mono": ChromaLayout.MONO,
}

_LAYOUT_TO_TAG = {
    ChromaLayout.C420: "420jpeg",
    ChromaLayout.C444: "444",
    ChromaLayout.MONO: "mono",
}


@dataclass(frozen=True)
class Y4mHeader:
    width: int
    height: int
    fps_num: int
    fps_den: int
    colorspace_tag: str

    @property
    def layout(self) -> ChromaLayout:
        return _TAG_TO_LAYOUT[self.colorspace_tag]


def _plane_shapes(width: int, height: int, layout: ChromaLayout) -> list[tuple[int, int]]:
    shapes = [(height, width)]
    if layout is not ChromaLayout.MONO:
        cw, ch = chroma_plane_dims(width, height, layout)
        shapes += [(ch, cw), (ch, cw)]
    return shapes


def frame_byte_size(width: int, height: int, layout: ChromaLayout) -> int:
    return sum(h * w for h, w in _plane_shapes(width, height, layout))


def parse_y4m_header(data: bytes) -> tuple[Y4mHeader, int]:
    """Parse the signature line; returns the header and the payload offset."""
    if not data.startswith(Y4M_SIGNATURE):
        raise BadSignatureError("stream does not start with YUV4MPEG2", offset=0)
    nl = data.find(b"\n")
    if nl < 0:
        raise TruncatedStreamError("header line has no terminating newline", offset=len(data))
    width = height = None
    fps: tuple[int, int] | None = None
    tag = "420jpeg"  # Y4M default when no C token is present
    pos = len(Y4M_SIGNATURE)
    for token in data[len(Y4M_SIGNATURE) : nl].split(b" "):
        pos += 1  # the separating space
        if not token:
            continue
        key, value = token[:1], token[1:]
        try:
            if key == b"W":
                width = int(value)
            elif key == b"H":
                height = int(value)
            elif key == b"F":
                num, den = value.split(b":")
                fps = (int(num), int(den))
            elif key == b"C":
                tag = value.decode("ascii")
                if tag not in _TAG_TO_LAYOUT:
                    raise UnknownColorspaceError(f"unknown colorspace token {tag!r}", offset=pos)
            # I (interlacing), A (aspect) and X (comment) tokens are ignored.
        except (ValueError, UnicodeDecodeError) as exc:
            if isinstance(exc, GrainModelError):
                raise
            raise FormatError(f"malformed header token {token!r}", offset=pos) from exc
        pos += len(token)
    if width is None or height is None:
        raise FormatError("header is missing the mandatory W or H token", offset=0)
    if fps is None:
        raise FormatError("header is missing the mandatory F token", offset=0)
    if width < 1 or height < 1 or fps[0] < 1 or fps[1] < 1:
        raise FormatError(f"non-positive geometry or rate: W{width} H{height} F{fps[0]}:{fps[1]}", offset=0)
    return Y4mHeader(width, height, fps[0], fps[1], tag), nl + 1


def _split_frame(payload: bytes, shapes: list[tuple[int, int]]) -> list[Plane]:
    planes = []
    at = 0
    for h, w in shapes:
        n = h * w
        planes.append(Plane(np.frombuffer(payload, dtype=np.uint8, count=n, offset=at).reshape(h, w)))
        at += n
    return planes


def read_y4m(data: bytes) -> VideoSequence:
    """Parse a whole Y4M stream into frames."""
    header, pos = parse_y4m_header(data)
    layout = header.layout
    shapes = _plane_shapes(header.width, header.height, layout)
    payload_size = frame_byte_size(header.width, header.height, layout)
    frames = []
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise TruncatedStreamError(
                f"frame {len(frames)} marker line is unterminated", offset=pos
            )
        if data[pos:nl].split(b" ")[0] != b"FRAME":
            raise FormatError(f"expected FRAME marker before frame {len(frames)}", offset=pos)
        pos = nl + 1
        if len(data) - pos < payload_size:
            raise TruncatedStreamError(
                f"frame {len(frames)} payload needs {payload_size} bytes, "
                f"only {len(data) - pos} remain",
                offset=pos,
            )
        frames.append(Frame(planes=tuple(_split_frame(data[pos : pos + payload_size], shapes)),
                            chroma_layout=layout))
        pos += payload_size
    return VideoSequence(frames=tuple(frames), fps_num=header.fps_num, fps_den=header.fps_den)


def write_y4m(seq: VideoSequence) -> bytes:
    """Serialize a sequence; read_y4m(write_y4m(s)) reproduces s exactly."""
    if not seq.frames:
        raise ValueError("cannot write an empty sequence")
    layout = seq.chroma_layout
    head = (
        f"YUV4MPEG2 W{seq.frames[0].width} H{seq.frames[0].height} "
        f"F{seq.fps_num}:{seq.fps_den} C{_LAYOUT_TO_TAG[layout]}\n"
    ).encode("ascii")
    chunks = [head]
    for frame in seq.frames:
        chunks.append(b"FRAME\n")
        for plane in frame.planes:
            if plane.data.dtype != np.uint8:
                raise ValueError("only 8-bit planes can be written to Y4M")
            chunks.append(plane.data.tobytes())
    return b"".join(chunks)


def read_raw_planar(
    data: bytes,
    width: int,
    height: int,
    layout: ChromaLayout,
    fps_num: int = 25,
    fps_den: int = 1,
) -> VideoSequence:
    """Split a headerless planar stream into frames of the given geometry."""
    shapes = _plane_shapes(width, height, layout)
    payload_size = frame_byte_size(width, height, layout)
    if len(data) % payload_size != 0:
        raise FormatError(
            f"stream length {len(data)} is not a whole number of "
            f"{payload_size}-byte frames ({len(data) / payload_size:.2f})",
            offset=len(data) - len(data) % payload_size,
        )
    frames = []
    for at in range(0, len(data), payload_size):
        frames.append(
            Frame(planes=tuple(_split_frame(data[at : at + payload_size], shapes)),
                  chroma_layout=layout)
        )
    return VideoSequence(frames=tuple(frames), fps_num=fps_num, fps_den=fps_den)
