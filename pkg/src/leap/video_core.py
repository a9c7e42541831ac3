"""Raster types, P6 file I/O, nearest-neighbour resize and the VDMA frame ring.

A :class:`Frame` owns an ``(height, width, 3)`` ``uint8`` array.  Dimensions
are bounded by the 12-bit row/column fields of the enhancement stage's
control register, so 1080p fits but 4096 does not.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import DimensionError, FormatError, FramingError

MAX_DIM = 4095
DEFAULT_RING_CAPACITY = 4


class Pixel(NamedTuple):
    r: int
    g: int
    b: int


class StreamToken(NamedTuple):
    """One pixel on a pixel-at-a-time stream, with framing side-band flags."""

    pixel: Pixel
    sof: bool
    eol: bool


def check_dims(width: int, height: int) -> None:
    if not (1 <= width <= MAX_DIM and 1 <= height <= MAX_DIM):
        raise DimensionError(f"frame size {width}x{height} outside 1..{MAX_DIM}")


@dataclass(eq=False)
class Frame:
    """An RGB24 raster plus its stream position.

    ``pixels`` has shape ``(height, width, 3)`` and dtype ``uint8``; row-major
    order matches the order pixels travel on the stream.
    """

    pixels: np.ndarray
    index: int = 0
    capture_time: float = field(default_factory=time.monotonic)

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3 or px.shape[2] != 3:
            raise FormatError("pixels must be an array of shape (height, width, 3)")
        if px.dtype != np.uint8:
            raise FormatError(f"pixels must be uint8, got {px.dtype}")
        check_dims(px.shape[1], px.shape[0])

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    def pixel(self, x: int, y: int) -> Pixel:
        r, g, b = (int(v) for v in self.pixels[y, x])
        return Pixel(r, g, b)

    def copy(self) -> "Frame":
        return Frame(self.pixels.copy(), self.index, self.capture_time)

    def with_pixels(self, pixels: np.ndarray) -> "Frame":
        """A new frame carrying ``pixels`` but this frame's index and timestamp."""
        return Frame(pixels, self.index, self.capture_time)

    def same_pixels(self, other: "Frame") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


def new_frame(width: int, height: int, fill: Iterable[int] = (0, 0, 0)) -> Frame:
    check_dims(width, height)
    fill = tuple(int(c) for c in fill)
    if len(fill) != 3 or not all(0 <= c <= 255 for c in fill):
        raise FormatError(f"fill must be three 8-bit channels, got {fill}")
    px = np.empty((height, width, 3), dtype=np.uint8)
    px[...] = fill
    return Frame(px, index=0)


def luma(p: Iterable[int]) -> int:
    """Fixed-point luma, ``(77 r + 150 g + 29 b) >> 8``."""
    r, g, b = p
    return (77 * int(r) + 150 * int(g) + 29 * int(b)) >> 8


def luma_array(pixels: np.ndarray) -> np.ndarray:
    """Vectorised :func:`luma` over an ``(..., 3)`` array; returns ``int32``."""
    px = pixels.astype(np.int32)
    return (77 * px[..., 0] + 150 * px[..., 1] + 29 * px[..., 2]) >> 8


# --------------------------------------------------------------------- P6 I/O

_P6_HEADER = re.compile(
    rb"P6(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s"
)


def write_ppm(f: Frame) -> bytes:
    header = b"P6\n%d %d\n255\n" % (f.width, f.height)
    return header + f.pixels.tobytes()


def read_ppm(data: bytes) -> Frame:
    if not data.startswith(b"P6"):
        raise FormatError(f"not a binary P6 image (magic {data[:2]!r})")
    m = _P6_HEADER.match(data)
    if m is None:
        raise FormatError("malformed P6 header")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"unsupported max value {maxval}, only 255 is accepted")
    try:
        check_dims(width, height)
    except DimensionError as exc:
        raise FormatError(str(exc)) from exc
    payload = data[m.end():]
    expected = width * height * 3
    if len(payload) < expected:
        raise FormatError(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after payload")
    px = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return Frame(px, index=0)


def load_ppm(path: str | os.PathLike) -> Frame:
    return read_ppm(Path(path).read_bytes())


def save_ppm(f: Frame, path: str | os.PathLike) -> None:
    Path(path).write_bytes(write_ppm(f))


# ------------------------------------------------------------------- resizing

def resize_nearest(f: Frame, out_w: int, out_h: int) -> Frame:
    """Nearest-neighbour resize with pure integer index arithmetic.

    Output ``(x, y)`` samples input ``(x * in_w // out_w, y * in_h // out_h)``.
    """
    check_dims(out_w, out_h)
    if (out_w, out_h) == f.size:
        return f.copy()
    xs = (np.arange(out_w) * f.width) // out_w
    ys = (np.arange(out_h) * f.height) // out_h
    return f.with_pixels(f.pixels[ys[:, None], xs[None, :]])


# ------------------------------------------------------------------ streaming

def tokenize(f: Frame) -> Iterator[StreamToken]:
    """Serialise a frame into pixel tokens, row by row."""
    w = f.width
    flat = f.pixels.reshape(-1, 3).tolist()
    for i, (r, g, b) in enumerate(flat):
        yield StreamToken(Pixel(r, g, b), i == 0, i % w == w - 1)


def detokenize(tokens: Iterable[StreamToken], width: int, height: int) -> Frame:
    """Inverse of :func:`tokenize`; framing flags are checked, not trusted."""
    check_dims(width, height)
    out = []
    for i, t in enumerate(tokens):
        if t.sof != (i % (width * height) == 0) or t.eol != (i % width == width - 1):
            raise FramingError(f"token {i} has sof={t.sof} eol={t.eol}")
        out.append(t.pixel)
    if len(out) != width * height:
        raise FramingError(f"expected {width * height} tokens, got {len(out)}")
    px = np.array(out, dtype=np.uint8).reshape(height, width, 3)
    return Frame(px)


# ----------------------------------------------------------------- frame ring

class FrameRing:
    """Fixed-capacity frame store shared by one producer and one consumer.

    The producer never blocks: publishing into a full ring overwrites the
    oldest slot.  Consumers copy frames out under the lock, so a reader can
    never observe a half-written slot.
    """

    def __init__(self, capacity: int = DEFAULT_RING_CAPACITY):
        if capacity < 1:
            raise ValueError("ring capacity must be >= 1")
        self.capacity = capacity
        self.slots: list[Frame | None] = [None] * capacity
        self.write_cursor = 0
        self.last_complete: int | None = None
        self._last_slot: int | None = None
        self._lock = threading.Lock()
        self.published = 0

    def publish(self, f: Frame) -> None:
        with self._lock:
            slot = self.write_cursor
            self.slots[slot] = f
            self._last_slot = slot
            self.last_complete = f.index
            self.write_cursor = (slot + 1) % self.capacity
            self.published += 1

    def latest(self) -> Frame | None:
        with self._lock:
            if self._last_slot is None:
                return None
            return self.slots[self._last_slot].copy()

    def peek_latest(self) -> Frame | None:
        """The latest frame object itself, not a copy (zero-copy readers)."""
        with self._lock:
            return None if self._last_slot is None else self.slots[self._last_slot]

    def retained(self) -> list[int]:
        """Indices of retrievable frames, oldest first."""
        with self._lock:
            order = [(self.write_cursor + k) % self.capacity for k in range(self.capacity)]
            return [self.slots[s].index for s in order if self.slots[s] is not None]

    def get(self, index: int) -> Frame | None:
        with self._lock:
            for f in self.slots:
                if f is not None and f.index == index:
                    return f.copy()
        return None


def ring_publish(r: FrameRing, f: Frame) -> None:
    r.publish(f)


def ring_latest(r: FrameRing) -> Frame | None:
    return r.latest()


# ---------------------------------------------------- frame-sequence directory

META_NAME = "stream.meta"


def frame_filename(i: int) -> str:
    return f"frame_{i:06d}.ppm"


def write_sequence(directory: str | os.PathLike, frames: Iterable[Frame], fps: int) -> int:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    count = 0
    for i, f in enumerate(frames):
        save_ppm(f, d / frame_filename(i))
        count += 1
    (d / META_NAME).write_text(f"fps={int(fps)}\ncount={count}\n")
    return count


def read_meta(directory: str | os.PathLike) -> dict[str, int]:
    path = Path(directory) / META_NAME
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise FormatError(f"missing {path}") from exc
    meta = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"bad line in {path}: {line!r}")
        try:
            meta[key.strip()] = int(value)
        except ValueError as exc:
            raise FormatError(f"non-integer value in {path}: {line!r}") from exc
    for key in ("fps", "count"):
        if key not in meta:
            raise FormatError(f"{path} lacks '{key}'")
    return meta


def read_sequence(directory: str | os.PathLike) -> tuple[int, list[Frame]]:
    d = Path(directory)
    meta = read_meta(d)
    frames = []
    for i in range(meta["count"]):
        f = load_ppm(d / frame_filename(i))
        f.index = i
        frames.append(f)
    return meta["fps"], frames
