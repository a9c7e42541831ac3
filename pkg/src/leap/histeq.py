"""Histogram equalization: LUT math, pixel-streaming model and control register.

All arithmetic is integer so that the batch path, the per-token streaming
path and any hardware re-implementation agree bit for bit.

Control register layout (32-bit GPIO word)::

    bits [11:0]   rows
    bits [23:12]  cols
    bit  [24]     reset
    bits [31:25]  unused, zero
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigurationError,
    ConsistencyError,
    FramingError,
    ProtocolError,
    RangeError,
    ResetViolationError,
)
from .video_core import MAX_DIM, Frame, Pixel, StreamToken, luma, luma_array, tokenize

LUMA_GAIN = "luma_gain"
PER_CHANNEL = "per_channel"
COLOR_MODES = (LUMA_GAIN, PER_CHANNEL)

TWO_PASS = "two_pass"
FRAME_DELAYED = "frame_delayed"
TIMING_MODES = (TWO_PASS, FRAME_DELAYED)

IDENTITY_LUT = np.arange(256, dtype=np.uint8)
IDENTITY_LUT.flags.writeable = False


@dataclass(frozen=True)
class HistEqConfig:
    rows: int
    cols: int
    color_mode: str = LUMA_GAIN
    timing_mode: str = FRAME_DELAYED

    def __post_init__(self):
        if not (1 <= self.rows <= MAX_DIM and 1 <= self.cols <= MAX_DIM):
            raise ConfigurationError(f"rows/cols {self.rows}x{self.cols} outside 1..{MAX_DIM}")
        if self.color_mode not in COLOR_MODES:
            raise ConfigurationError(f"unknown color mode {self.color_mode!r}")
        if self.timing_mode not in TIMING_MODES:
            raise ConfigurationError(f"unknown timing mode {self.timing_mode!r}")

    @classmethod
    def for_frame(cls, f: Frame, **kw) -> "HistEqConfig":
        return cls(rows=f.height, cols=f.width, **kw)

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols


# ------------------------------------------------------------------ LUT math

def compute_histogram(f: Frame) -> np.ndarray:
    """256-bin histogram of pixel luma."""
    return np.bincount(luma_array(f.pixels).ravel(), minlength=256).astype(np.int64)


def _round_ratio(num: np.ndarray, den: int) -> np.ndarray:
    # round half away from zero for num >= 0, den > 0
    return (2 * num + den) // (2 * den)


def build_lut(hist: np.ndarray, n: int) -> np.ndarray:
    """Equalization LUT from a histogram over ``n`` pixels.

    ``LUT[v] = round(255 * (cdf[v] - cdf_min) / (n - cdf_min))`` where
    ``cdf_min`` is the first non-zero CDF value; levels below the first
    occupied bin map to 0.  A histogram with a single occupied bin yields the
    identity, so flat frames are left alone.
    """
    hist = np.asarray(hist, dtype=np.int64)
    if hist.shape != (256,):
        raise ConsistencyError(f"histogram must have 256 bins, got {hist.shape}")
    if n < 1:
        raise ConsistencyError("pixel count must be >= 1")
    if int(hist.sum()) != n:
        raise ConsistencyError(f"histogram sums to {int(hist.sum())}, expected {n}")
    cdf = np.cumsum(hist)
    cdf_min = int(cdf[np.argmax(cdf > 0)])
    if cdf_min == n:
        return IDENTITY_LUT.copy()
    lut = _round_ratio(255 * (cdf - cdf_min), n - cdf_min)
    lut[cdf == 0] = 0
    return lut.astype(np.uint8)


def is_monotone(lut: np.ndarray) -> bool:
    return bool(np.all(np.diff(lut.astype(np.int16)) >= 0))


def _gain_apply(pixels: np.ndarray, lut: np.ndarray) -> np.ndarray:
    y = luma_array(pixels)
    y_new = lut[y].astype(np.int64)
    px = pixels.astype(np.int64)
    ys = np.maximum(y, 1)[..., None]
    scaled = (2 * px * y_new[..., None] + ys) // (2 * ys)
    out = np.where((y == 0)[..., None], y_new[..., None], scaled)
    return np.clip(out, 0, 255).astype(np.uint8)


def _gain_pixel(p: Pixel, lut: np.ndarray) -> Pixel:
    # scalar twin of _gain_apply; must stay arithmetically identical
    y = luma(p)
    y_new = int(lut[y])
    if y == 0:
        return Pixel(y_new, y_new, y_new)
    r, g, b = (min(255, (2 * c * y_new + y) // (2 * y)) for c in p)
    return Pixel(r, g, b)


def channel_luts(pixels: np.ndarray) -> np.ndarray:
    """One LUT per colour channel, shape ``(3, 256)``."""
    n = pixels.shape[0] * pixels.shape[1]
    return np.stack([
        build_lut(np.bincount(pixels[..., c].ravel(), minlength=256), n) for c in range(3)
    ])


def _channel_apply(pixels: np.ndarray, luts: np.ndarray) -> np.ndarray:
    out = np.empty_like(pixels)
    for c in range(3):
        out[..., c] = luts[c][pixels[..., c]]
    return out


def apply_lut(f: Frame, lut: np.ndarray, mode: str = LUMA_GAIN) -> Frame:
    """Remap a frame's intensities.

    ``luma_gain`` maps each pixel's luma through ``lut`` and scales RGB by the
    resulting gain (zero-luma pixels become grey at ``lut[0]``).
    ``per_channel`` ignores ``lut`` and equalizes R, G and B independently.
    """
    if mode == LUMA_GAIN:
        return f.with_pixels(_gain_apply(f.pixels, np.asarray(lut)))
    if mode == PER_CHANNEL:
        return f.with_pixels(_channel_apply(f.pixels, channel_luts(f.pixels)))
    raise ConfigurationError(f"unknown color mode {mode!r}")


def equalize(f: Frame, cfg: HistEqConfig) -> Frame:
    """Same-frame (two-pass) histogram equalization."""
    if f.size != (cfg.cols, cfg.rows):
        raise ConfigurationError(
            f"frame is {f.width}x{f.height}, stage configured for {cfg.cols}x{cfg.rows}"
        )
    if cfg.color_mode == PER_CHANNEL:
        return apply_lut(f, IDENTITY_LUT, PER_CHANNEL)
    lut = build_lut(compute_histogram(f), f.width * f.height)
    return apply_lut(f, lut, LUMA_GAIN)


# ------------------------------------------------------------- GPIO register

ROWS_MASK = 0xFFF
COLS_SHIFT = 12
RESET_BIT = 24


@dataclass(frozen=True)
class GpioWord:
    raw: int

    @property
    def rows(self) -> int:
        return self.raw & ROWS_MASK

    @property
    def cols(self) -> int:
        return (self.raw >> COLS_SHIFT) & ROWS_MASK

    @property
    def reset(self) -> bool:
        return bool((self.raw >> RESET_BIT) & 1)

    def __int__(self) -> int:
        return self.raw

    def __repr__(self) -> str:
        return f"GpioWord(0x{self.raw:08X})"


def pack_gpio(rows: int, cols: int, reset: bool) -> GpioWord:
    for name, v in (("rows", rows), ("cols", cols)):
        if not 0 <= v <= MAX_DIM:
            raise RangeError(f"{name}={v} does not fit in 12 bits")
    return GpioWord(rows | (cols << COLS_SHIFT) | (int(bool(reset)) << RESET_BIT))


def unpack_gpio(w: GpioWord | int) -> tuple[int, int, bool]:
    if not isinstance(w, GpioWord):
        w = GpioWord(int(w) & 0xFFFFFFFF)
    return w.rows, w.cols, w.reset


# ----------------------------------------------------------- streaming state

class HistEqState:
    """Pixel-at-a-time model of the enhancement IP.

    In ``frame_delayed`` mode every token is emitted immediately, remapped by
    the LUT learned from the previous frame; the first frame after a reset
    passes through unchanged.  In ``two_pass`` mode the frame is buffered and
    the whole equalized frame is released on its last pixel.

    The state is created running (out of reset) with the dimensions in
    ``config``.  Reconfigure through :meth:`configure` with GPIO words.
    """

    def __init__(self, config: HistEqConfig, in_reset: bool = False):
        self.config = config
        self.in_reset = in_reset
        self._latched = (config.rows, config.cols)
        self._clear()

    def _clear(self) -> None:
        self.pixel_cursor = 0
        self.accumulating = np.zeros((3 if self._per_channel else 1, 256), dtype=np.int64)
        self.active_lut = np.tile(IDENTITY_LUT, (3 if self._per_channel else 1, 1))
        self._buffer: list[StreamToken] = []

    @property
    def _per_channel(self) -> bool:
        return self.config.color_mode == PER_CHANNEL

    @property
    def latched(self) -> tuple[int, int]:
        """(rows, cols) most recently latched from a GPIO word."""
        return self._latched

    @property
    def rows(self) -> int:
        return self.config.rows

    @property
    def cols(self) -> int:
        return self.config.cols

    # -- control

    def configure(self, word: GpioWord | int) -> None:
        rows, cols, reset = unpack_gpio(word)
        if reset:
            self.in_reset = True
            self._latched = (rows, cols)
            self._clear()
            return
        if (rows, cols) != self._latched:
            raise ProtocolError(
                f"dimension change to {cols}x{rows} without reset "
                f"(latched {self._latched[1]}x{self._latched[0]})"
            )
        if self.in_reset:
            if rows == 0 or cols == 0:
                raise ConfigurationError("cannot leave reset with a zero dimension")
            self.config = replace(self.config, rows=rows, cols=cols)
            self.in_reset = False
            self._clear()

    # -- data path

    def push_pixel(self, t: StreamToken) -> list[StreamToken]:
        """Accept one token; return the tokens emitted in response.

        ``frame_delayed`` always returns exactly one token.  ``two_pass``
        returns nothing until the last pixel of a frame, then the whole frame.
        """
        if self.in_reset:
            raise ResetViolationError("stage is held in reset")
        pos = self.pixel_cursor
        cols = self.config.cols
        if t.sof != (pos == 0) or t.eol != (pos % cols == cols - 1):
            self.pixel_cursor = 0
            self.accumulating[:] = 0
            self._buffer = []
            raise FramingError(
                f"pixel {pos}: sof={t.sof} eol={t.eol} inconsistent with {cols} columns"
            )
        last = pos == self.config.n_pixels - 1
        self.pixel_cursor = 0 if last else pos + 1
        self._accumulate(t.pixel)

        if self.config.timing_mode == TWO_PASS:
            # hold the frame until its own histogram is complete
            self._buffer.append(t)
            if not last:
                return []
            self._latch_lut()
            held, self._buffer = self._buffer, []
            return [StreamToken(self._map(b.pixel), b.sof, b.eol) for b in held]

        out = StreamToken(self._map(t.pixel), t.sof, t.eol)
        if last:
            self._latch_lut()
        return [out]

    def _accumulate(self, p: Pixel) -> None:
        if self._per_channel:
            for c in range(3):
                self.accumulating[c, p[c]] += 1
        else:
            self.accumulating[0, luma(p)] += 1

    def _map(self, p: Pixel) -> Pixel:
        if self._per_channel:
            return Pixel(*(int(self.active_lut[c, p[c]]) for c in range(3)))
        return _gain_pixel(p, self.active_lut[0])

    def _latch_lut(self) -> None:
        n = self.config.n_pixels
        self.active_lut = np.stack([build_lut(h, n) for h in self.accumulating])
        self.accumulating[:] = 0

    def push_frame(self, f: Frame) -> Frame:
        """Whole-frame equivalent of pushing every token of ``f``."""
        if self.in_reset:
            raise ResetViolationError("stage is held in reset")
        if self.pixel_cursor != 0:
            raise FramingError("frame pushed while a streamed frame is incomplete")
        if f.size != (self.cols, self.rows):
            raise ConfigurationError(
                f"frame is {f.width}x{f.height}, stage configured for {self.cols}x{self.rows}"
            )
        if self.config.timing_mode == TWO_PASS:
            return equalize(f, self.config)
        px = f.pixels
        if self._per_channel:
            out = _channel_apply(px, self.active_lut)
            for c in range(3):
                self.accumulating[c] += np.bincount(px[..., c].ravel(), minlength=256)
        else:
            out = _gain_apply(px, self.active_lut[0])
            self.accumulating[0] += compute_histogram(f)
        self._latch_lut()
        return f.with_pixels(out)


def stream_frame(state: HistEqState, f: Frame) -> list[StreamToken]:
    """Push every token of ``f`` through ``state`` and collect the output."""
    out: list[StreamToken] = []
    for t in tokenize(f):
        out.extend(state.push_pixel(t))
    return out
