"""Inference backends, prediction types and result overlay.

Two kinds of backend stand in for the accelerator:

* :class:`MockBackend` sleeps for configured stage durations and returns a
  fixed prediction; it reproduces timing behaviour only.
* :class:`QuadrantClassifier` and :class:`BrightSquareDetector` are tiny,
  deterministic vision models whose accuracy collapses on darkened frames and
  recovers after equalization.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Union, runtime_checkable

import numpy as np

from .video_core import Frame, luma_array, resize_nearest

N_QUADRANT_CLASSES = 5
NONE_CLASS = 4

# fixed 8-entry overlay palette, indexed by class id modulo 8
PALETTE = (
    (255, 0, 0),
    (0, 255, 0),
    (0, 0, 255),
    (255, 255, 0),
    (255, 0, 255),
    (0, 255, 255),
    (255, 128, 0),
    (255, 255, 255),
)
BADGE_SIZE = 16
BORDER = 2


@dataclass(frozen=True)
class ClassScores:
    scores: tuple[float, ...]

    @property
    def argmax(self) -> int:
        # ties resolved towards the lower class id
        return int(np.argmax(self.scores))

    def ranked(self) -> list[int]:
        return sorted(range(len(self.scores)), key=lambda c: (-self.scores[c], c))


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    w: int
    h: int
    class_id: int
    score: float = 1.0

    @property
    def box(self) -> tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h


@dataclass(frozen=True)
class Detections:
    items: tuple[Detection, ...] = ()


Prediction = Union[ClassScores, Detections]


@runtime_checkable
class Backend(Protocol):
    """preprocess -> infer -> postprocess, with ``infer`` deterministic."""

    input_size: tuple[int, int] | None

    def preprocess(self, f: Frame) -> np.ndarray: ...

    def infer(self, t: np.ndarray) -> Any: ...

    def postprocess(self, raw: Any) -> Prediction: ...


def run_backend(backend: Backend, f: Frame) -> Prediction:
    return backend.postprocess(backend.infer(backend.preprocess(f)))


def _luma_tensor(f: Frame, input_size: tuple[int, int] | None) -> np.ndarray:
    if input_size is not None and f.size != tuple(input_size):
        f = resize_nearest(f, *input_size)
    return luma_array(f.pixels).astype(np.float64)


def _quadrants(h: int, w: int) -> list[tuple[slice, slice]]:
    hy, hx = h // 2, w // 2
    return [
        (slice(0, hy), slice(0, hx)),
        (slice(0, hy), slice(hx, w)),
        (slice(hy, h), slice(0, hx)),
        (slice(hy, h), slice(hx, w)),
    ]


# ---------------------------------------------------------- quadrant classifier

def quadrant_scores(y: np.ndarray, contrast_threshold: float) -> np.ndarray:
    """Five class scores (TL, TR, BL, BR, none) from a luma plane.

    A quadrant's contrast is its mean luma minus the mean luma of the other
    three quadrants.  If no quadrant reaches ``contrast_threshold`` the frame
    is "none"; otherwise positive contrasts are normalised into scores.
    """
    h, w = y.shape
    if h < 2 or w < 2:
        raise ValueError("quadrant classification needs at least a 2x2 frame")
    sums = np.array([y[sl].sum() for sl in _quadrants(h, w)])
    counts = np.array([y[sl].size for sl in _quadrants(h, w)])
    means = sums / counts
    rest = (sums.sum() - sums) / (counts.sum() - counts)
    contrast = means - rest
    scores = np.zeros(N_QUADRANT_CLASSES)
    if contrast.max() < contrast_threshold:
        scores[NONE_CLASS] = 1.0
        return scores
    pos = np.clip(contrast, 0, None)
    scores[:4] = pos / pos.sum()
    return scores


class QuadrantClassifier:
    """Which quadrant holds the bright object?  Class 4 means none does."""

    n_classes = N_QUADRANT_CLASSES

    def __init__(self, contrast_threshold: float = 30.0, input_size: tuple[int, int] | None = None):
        self.contrast_threshold = contrast_threshold
        self.input_size = input_size

    def preprocess(self, f: Frame) -> np.ndarray:
        return _luma_tensor(f, self.input_size)

    def infer(self, t: np.ndarray) -> np.ndarray:
        return quadrant_scores(t, self.contrast_threshold)

    def postprocess(self, raw: np.ndarray) -> ClassScores:
        return ClassScores(tuple(float(s) for s in raw))


def classify_quadrant(f: Frame, contrast_threshold: float = 30.0) -> ClassScores:
    return run_backend(QuadrantClassifier(contrast_threshold), f)


# ------------------------------------------------------- bright-square detector

def bright_square(y: np.ndarray, k: float) -> Detection | None:
    """Bounding box of pixels brighter than ``mean + k``, or None."""
    h, w = y.shape
    mean = y.mean()
    mask = y > mean + k
    if not mask.any():
        return None
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    x0, x1, y0, y1 = int(cols[0]), int(cols[-1]), int(rows[0]), int(rows[-1])
    bw, bh = x1 - x0 + 1, y1 - y0 + 1
    # quadrant of the box centre, compared in doubled coordinates
    qx = int(2 * x0 + bw >= w)
    qy = int(2 * y0 + bh >= h)
    contrast = float(y[mask].mean() - mean)
    score = min(max(contrast / 255.0, 0.0), 1.0)
    return Detection(x0, y0, bw, bh, 2 * qy + qx, score)


class BrightSquareDetector:
    def __init__(self, k: float = 30.0, input_size: tuple[int, int] | None = None):
        self.k = k
        self.input_size = input_size

    def preprocess(self, f: Frame) -> np.ndarray:
        # boxes are reported in input-frame pixels, so no resizing here
        return luma_array(f.pixels).astype(np.float64)

    def infer(self, t: np.ndarray) -> Detection | None:
        return bright_square(t, self.k)

    def postprocess(self, raw: Detection | None) -> Detections:
        return Detections(() if raw is None else (raw,))


def detect_bright_square(f: Frame, k: float = 30.0) -> Detections:
    return run_backend(BrightSquareDetector(k), f)


# ----------------------------------------------------------------- mock backend

@dataclass(frozen=True)
class MockConfig:
    preprocess_ms: float = 0.0
    infer_ms: float = 0.0
    postprocess_ms: float = 0.0
    emit: Prediction = field(
        default_factory=lambda: ClassScores((1.0,) + (0.0,) * (N_QUADRANT_CLASSES - 1))
    )

    def __post_init__(self):
        for name in ("preprocess_ms", "infer_ms", "postprocess_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def from_mapping(cls, m: Mapping[str, Any]) -> "MockConfig":
        """Build from run-config keys (``preprocess_ms``, ``infer_ms``,
        ``postprocess_ms``, ``emit_class``)."""
        emit_class = int(m.get("emit_class", 0))
        scores = [0.0] * N_QUADRANT_CLASSES
        scores[emit_class] = 1.0
        return cls(
            preprocess_ms=float(m.get("preprocess_ms", 0)),
            infer_ms=float(m.get("infer_ms", 0)),
            postprocess_ms=float(m.get("postprocess_ms", 0)),
            emit=ClassScores(tuple(scores)),
        )


def _sleep_ms(ms: float) -> None:
    if ms > 0:
        time.sleep(ms / 1000.0)


class MockBackend:
    """Fixed-latency stand-in for the accelerator.

    ``infer`` holds a lock for its whole duration: there is one accelerator,
    so concurrent callers queue behind each other.
    """

    input_size = None

    def __init__(self, config: MockConfig = MockConfig()):
        self.config = config
        self._device = threading.Lock()

    def preprocess(self, f: Frame) -> np.ndarray:
        _sleep_ms(self.config.preprocess_ms)
        return np.zeros((1,), dtype=np.float32)

    def infer(self, t: np.ndarray) -> Prediction:
        with self._device:
            _sleep_ms(self.config.infer_ms)
        return self.config.emit

    def postprocess(self, raw: Prediction) -> Prediction:
        _sleep_ms(self.config.postprocess_ms)
        return raw


def mock_infer(cfg: MockConfig, t: np.ndarray) -> Prediction:
    return MockBackend(cfg).infer(t)


# ---------------------------------------------------------------------- overlay

def overlay(f: Frame, p: Prediction) -> Frame:
    """Draw a prediction onto a copy of ``f``.

    Class scores become a 16x16 badge in the top-left corner; detections get a
    2-pixel border.  Colours come from :data:`PALETTE`.
    """
    px = f.pixels.copy()
    h, w = f.height, f.width
    if isinstance(p, ClassScores):
        px[:BADGE_SIZE, :BADGE_SIZE] = PALETTE[p.argmax % len(PALETTE)]
    else:
        for d in p.items:
            color = PALETTE[d.class_id % len(PALETTE)]
            x0, y0 = max(d.x, 0), max(d.y, 0)
            x1, y1 = min(d.x + d.w, w), min(d.y + d.h, h)
            if x0 >= x1 or y0 >= y1:
                continue
            region = np.zeros((h, w), dtype=bool)
            region[y0:y1, x0:x1] = True
            ix0, iy0 = max(d.x + BORDER, 0), max(d.y + BORDER, 0)
            ix1, iy1 = d.x + d.w - BORDER, d.y + d.h - BORDER
            if ix0 < ix1 and iy0 < iy1:
                region[iy0:iy1, ix0:ix1] = False
            px[region] = color
    return f.with_pixels(px)
