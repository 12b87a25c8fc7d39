"""Frame ingestion: YUV4MPEG2 files, image-sequence manifests and in-memory arrays.

Every source is exposed as a :class:`FrameStream`, a pull-based iterable of
:class:`Frame` values carrying a :class:`StreamInfo`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional

import numpy as np


class FrameError(Exception):
    """Raised for malformed or truncated input."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"frame {index}: {message}")
        self.index = index


class Y4MHeaderError(FrameError):
    pass


def as_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, 'num:den'/'num/den' string or decimal float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # decimal semantics: 0.1 means 1/10, not the nearest binary double
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.replace(":", "/"))
    return Fraction(value)


def frame_time(index: int, fps: Fraction) -> Fraction:
    """Exact timestamp ``index / fps``."""
    return Fraction(index * fps.denominator, fps.numerator)


@dataclass(frozen=True)
class StreamInfo:
    width: int
    height: int
    fps: Fraction
    frame_count: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "fps", as_fraction(self.fps))
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid geometry {self.width}x{self.height}")


@dataclass(frozen=True, eq=False)
class Frame:
    """One raster frame. ``pixels`` is an (H, W, C) uint8 array, C in {1, 3}.

    ``chroma`` optionally keeps the original 4:2:0 (U, V) planes of a Y4M
    source so the frame can be re-emitted bit-exactly.
    """

    index: int
    timestamp: Fraction
    pixels: np.ndarray
    chroma: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.dtype != np.uint8:
            raise ValueError(f"pixels must be an (H, W, C) uint8 array, got {px.shape} {px.dtype}")
        if px.shape[0] <= 0 or px.shape[1] <= 0:
            raise ValueError("frame width and height must be positive")
        if self.index < 0:
            raise ValueError("frame index must be nonnegative")
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True, eq=False)
class LumaFrame:
    index: int
    timestamp: Fraction
    y: np.ndarray  # (H, W) uint8

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def width(self) -> int:
        return self.y.shape[1]


class FrameStream:
    """Iterable of frames plus the stream's :class:`StreamInfo`.

    ``factory`` returns a fresh iterator on each call, so file and synthetic
    streams can be iterated more than once. Each iterator is single-consumer.
    """

    def __init__(self, info: StreamInfo, factory: Callable[[], Iterator[Frame]]):
        self.info = info
        self._factory = factory

    def __iter__(self) -> Iterator[Frame]:
        return self._factory()


def to_luma(frame: Frame) -> LumaFrame:
    """BT.601 luma, Y = round(0.299 R + 0.587 G + 0.114 B), computed in integers."""
    px = frame.pixels
    if px.shape[2] == 1:
        return LumaFrame(frame.index, frame.timestamp, px[:, :, 0])
    if px.shape[2] != 3:
        raise ValueError(f"unsupported channel count {px.shape[2]}")
    p = px.astype(np.int32)
    y = (299 * p[:, :, 0] + 587 * p[:, :, 1] + 114 * p[:, :, 2] + 500) // 1000
    return LumaFrame(frame.index, frame.timestamp, y.astype(np.uint8))


def from_arrays(arrays: Iterable[np.ndarray], fps=30, frame_count=None) -> FrameStream:
    """Wrap a sequence (or a re-callable generator function) of uint8 arrays as a stream."""
    fps = as_fraction(fps)
    if callable(arrays):
        make = arrays
    else:
        arrays = list(arrays)
        frame_count = len(arrays)
        make = lambda: iter(arrays)  # noqa: E731
    first = next(iter(make()), None)
    if first is None:
        h, w = 1, 1
    else:
        h, w = np.asarray(first).shape[:2]

    def gen():
        for i, a in enumerate(make()):
            yield Frame(i, frame_time(i, fps), a)

    return FrameStream(StreamInfo(w, h, fps, frame_count), gen)


# --- YUV4MPEG2 -------------------------------------------------------------

_Y4M_MAGIC = b"YUV4MPEG2"
_420_TAGS = {"420", "420jpeg", "420paldv", "420mpeg2"}


def _parse_y4m_header(line: bytes):
    tokens = line.decode("ascii", errors="replace").split()
    if not tokens or tokens[0] != _Y4M_MAGIC.decode():
        raise Y4MHeaderError(f"bad magic token {tokens[0] if tokens else ''!r}")
    fields = {}
    for tok in tokens[1:]:
        key, val = tok[0], tok[1:]
        if key in fields and key in "WHF":
            raise Y4MHeaderError(f"duplicate header token {tok!r}")
        if key in "WH":
            if not val.isdigit() or int(val) <= 0:
                raise Y4MHeaderError(f"invalid header token {tok!r}")
            fields[key] = int(val)
        elif key == "F":
            num, sep, den = val.partition(":")
            if not sep or not num.isdigit() or not den.isdigit() or int(num) == 0 or int(den) == 0:
                raise Y4MHeaderError(f"invalid header token {tok!r}")
            fields[key] = Fraction(int(num), int(den))
        elif key == "C":
            if val not in _420_TAGS and val != "mono":
                raise Y4MHeaderError(f"unsupported colorspace token {tok!r}")
            fields[key] = val
        # I, A, X tokens carry nothing we need
    for key in "WHF":
        if key not in fields:
            raise Y4MHeaderError(f"missing header token {key!r}")
    return fields


def _y4m_layout(width, height, colorspace):
    luma = width * height
    if colorspace == "mono":
        return luma, 0, (0, 0)
    cw, ch = (width + 1) // 2, (height + 1) // 2
    return luma, cw * ch, (ch, cw)


def read_y4m_header(path):
    with open(path, "rb") as fh:
        line = fh.readline()
    if not line.endswith(b"\n"):
        raise Y4MHeaderError("header line is not newline-terminated")
    return _parse_y4m_header(line[:-1])


def open_y4m(path, keep_chroma: bool = True) -> FrameStream:
    """Open a 4:2:0 or mono YUV4MPEG2 file. Frames carry the luma plane as one channel."""
    path = os.fspath(path)
    hdr = read_y4m_header(path)
    w, h, fps = hdr["W"], hdr["H"], hdr["F"]
    cs = hdr.get("C", "420jpeg")
    luma_size, chroma_size, chroma_shape = _y4m_layout(w, h, cs)
    payload = luma_size + 2 * chroma_size

    # frame count from the file size when every FRAME header is the bare 6 bytes
    with open(path, "rb") as fh:
        header_len = len(fh.readline())
    body = os.path.getsize(path) - header_len
    count = None
    if body % (payload + 6) == 0:
        count = body // (payload + 6)

    def gen():
        with open(path, "rb") as fh:
            fh.readline()
            i = 0
            while True:
                marker = fh.readline()
                if not marker:
                    return
                if not marker.startswith(b"FRAME"):
                    raise FrameError(f"expected FRAME marker, got {marker[:16]!r}", i)
                data = fh.read(payload)
                if len(data) != payload:
                    raise FrameError(f"truncated payload ({len(data)} of {payload} bytes)", i)
                buf = np.frombuffer(data, dtype=np.uint8)
                y = buf[:luma_size].reshape(h, w)
                chroma = None
                if keep_chroma and chroma_size:
                    u = buf[luma_size:luma_size + chroma_size].reshape(chroma_shape)
                    v = buf[luma_size + chroma_size:].reshape(chroma_shape)
                    chroma = (u, v)
                yield Frame(i, frame_time(i, fps), y, chroma)
                i += 1

    return FrameStream(StreamInfo(w, h, fps, count), gen)


class Y4MWriter:
    """Write 4:2:0 frames. Frames with retained chroma are re-emitted bit-exactly;
    others get their luma plane plus neutral (128) chroma."""

    def __init__(self, path, width, height, fps):
        self.width, self.height = width, height
        fps = as_fraction(fps)
        self._chroma_shape = _y4m_layout(width, height, "420jpeg")[2]
        self._fh = open(path, "wb")
        self._fh.write(
            f"YUV4MPEG2 W{width} H{height} F{fps.numerator}:{fps.denominator} Ip A1:1 C420jpeg\n".encode()
        )
        self.frames_written = 0

    def write(self, frame: Frame):
        if (frame.width, frame.height) != (self.width, self.height):
            raise FrameError(f"frame is {frame.width}x{frame.height}, writer is {self.width}x{self.height}", frame.index)
        y = to_luma(frame).y
        if frame.chroma is not None:
            u, v = frame.chroma
        else:
            u = v = np.full(self._chroma_shape, 128, dtype=np.uint8)
        self._fh.write(b"FRAME\n")
        for plane in (y, u, v):
            self._fh.write(np.ascontiguousarray(plane, dtype=np.uint8).tobytes())
        self.frames_written += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_y4m(path, frames: Iterable[Frame], fps) -> int:
    frames = iter(frames)
    first = next(frames, None)
    if first is None:
        raise ValueError("cannot write an empty Y4M file without geometry")
    with Y4MWriter(path, first.width, first.height, fps) as out:
        out.write(first)
        for f in frames:
            out.write(f)
        return out.frames_written


# --- image-sequence manifests ----------------------------------------------

def _load_image(path):
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "1", "I", "I;16"):
            arr = np.asarray(im.convert("L"))
        else:
            arr = np.asarray(im.convert("RGB"))
    return arr


def open_image_sequence(manifest_path) -> FrameStream:
    """Open a JSON manifest ``{"fps": 30, "frames": ["f000.png", ...]}``.

    Image paths are resolved relative to the manifest's directory. Any format
    Pillow reads (PNG, PPM/PGM, ...) is accepted; grayscale images become
    one-channel frames, everything else RGB.
    """
    manifest_path = os.fspath(manifest_path)
    with open(manifest_path) as fh:
        doc = json.load(fh)
    if "fps" not in doc:
        raise FrameError(f"{manifest_path}: manifest must declare fps")
    fps = as_fraction(doc["fps"])
    base = os.path.dirname(os.path.abspath(manifest_path))
    paths = [os.path.join(base, p) for p in doc.get("frames", [])]

    width = height = 1
    if paths:
        if not os.path.exists(paths[0]):
            raise FrameError(f"missing image file {paths[0]}", 0)
        height, width = _load_image(paths[0]).shape[:2]

    def gen():
        for i, p in enumerate(paths):
            if not os.path.exists(p):
                raise FrameError(f"missing image file {p}", i)
            arr = _load_image(p)
            if arr.shape[:2] != (height, width):
                raise FrameError(f"{p} is {arr.shape[1]}x{arr.shape[0]}, expected {width}x{height}", i)
            yield Frame(i, frame_time(i, fps), arr)

    return FrameStream(StreamInfo(width, height, fps, len(paths)), gen)


def write_image_sequence(directory, frames: Iterable[Frame], fps, name="manifest.json") -> str:
    """Save frames as PNG files plus a manifest; returns the manifest path."""
    from PIL import Image

    os.makedirs(directory, exist_ok=True)
    names = []
    for f in frames:
        fname = f"frame_{f.index:06d}.png"
        px = f.pixels[:, :, 0] if f.channels == 1 else f.pixels
        Image.fromarray(px).save(os.path.join(directory, fname))
        names.append(fname)
    fps = as_fraction(fps)
    manifest = os.path.join(directory, name)
    with open(manifest, "w") as fh:
        json.dump({"fps": f"{fps.numerator}/{fps.denominator}", "frames": names}, fh, indent=1)
    return manifest
