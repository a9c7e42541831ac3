"""Frame sources and sinks standing in for HDMI input and output.

Sources hand out frames with increasing ``index``; ``read_ms`` and
``write_ms`` add simulated transfer latency so that scheduler experiments
can mirror measured per-step costs.
"""

from __future__ import annotations

import os
import threading
import time
from pathlib import Path

import numpy as np

from .video_core import META_NAME, Frame, check_dims, frame_filename, read_sequence, save_ppm


def _sleep_ms(ms: float) -> None:
    if ms > 0:
        time.sleep(ms / 1000.0)


class FrameSource:
    width: int
    height: int
    fps: float

    def __init__(self, read_ms: float = 0.0):
        self.read_ms = read_ms
        self._next = 0

    def _frame(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def read(self) -> Frame:
        _sleep_ms(self.read_ms)
        i = self._next
        self._next += 1
        return Frame(self._frame(i), index=i)

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height


class SyntheticSource(FrameSource):
    """A dim scene with a brighter square that hops between quadrants."""

    def __init__(
        self,
        width: int = 64,
        height: int = 64,
        fps: float = 60.0,
        read_ms: float = 0.0,
        seed: int = 0,
        dark: bool = True,
    ):
        super().__init__(read_ms)
        check_dims(width, height)
        self.width, self.height, self.fps = width, height, fps
        self.seed = seed
        self.dark = dark

    def _frame(self, i: int) -> np.ndarray:
        rng = np.random.default_rng((self.seed, i))
        bg = int(rng.integers(30, 61))
        fg = int(rng.integers(180, 231))
        if self.dark:
            bg, fg = bg // 8, fg // 8
        px = np.full((self.height, self.width, 3), bg, dtype=np.uint8)
        q = (i // 8) % 4
        hw, hh = self.width // 2, self.height // 2
        s = max(1, min(hw, hh) // 2)
        x0 = (q % 2) * hw + (hw - s) // 2
        y0 = (q // 2) * hh + (hh - s) // 2
        px[y0:y0 + s, x0:x0 + s] = fg
        return px


class SequenceSource(FrameSource):
    """Frames from a ``frame_%06d.ppm`` directory, looping at the end."""

    def __init__(self, directory: str | os.PathLike, read_ms: float = 0.0):
        super().__init__(read_ms)
        self.fps, self._frames = read_sequence(directory)
        if not self._frames:
            raise ValueError(f"{directory} holds no frames")
        self.width, self.height = self._frames[0].size

    def _frame(self, i: int) -> np.ndarray:
        return self._frames[i % len(self._frames)].pixels.copy()


class Sink:
    """Base sink: counts frames and records their indices in arrival order."""

    def __init__(self, write_ms: float = 0.0):
        self.write_ms = write_ms
        self.indices: list[int] = []
        self._lock = threading.Lock()

    def _store(self, f: Frame) -> None:
        pass

    def write(self, f: Frame) -> None:
        _sleep_ms(self.write_ms)
        self._store(f)
        with self._lock:
            self.indices.append(f.index)

    @property
    def count(self) -> int:
        return len(self.indices)


class NullSink(Sink):
    pass


class CollectSink(Sink):
    """Keeps every written frame in memory."""

    def __init__(self, write_ms: float = 0.0):
        super().__init__(write_ms)
        self.frames: list[Frame] = []

    def _store(self, f: Frame) -> None:
        self.frames.append(f)


class SequenceSink(Sink):
    """Writes frames as a sequence directory; call :meth:`close` to emit the meta file."""

    def __init__(self, directory: str | os.PathLike, fps: int = 30, write_ms: float = 0.0):
        super().__init__(write_ms)
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.fps = fps

    def _store(self, f: Frame) -> None:
        save_ppm(f, self.directory / frame_filename(self.count))

    def close(self) -> None:
        (self.directory / META_NAME).write_text(f"fps={int(self.fps)}\ncount={self.count}\n")

