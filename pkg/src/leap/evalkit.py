"""Darken -> enhance -> score experiment harness.

Builds a labelled synthetic dataset, scores a backend on three variants of
every image (original, darkened, darkened then equalized) and reports top-k
accuracy for classifiers or COCO-style mAP@[.50:.95] for detectors.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConsistencyError, RangeError
from .histeq import TWO_PASS, HistEqConfig, equalize
from .inference import ClassScores, Detection, Detections, run_backend
from .video_core import Frame, load_ppm, save_ppm

VARIANT_TAGS = ("original", "dark", "dark_histeq")
IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)

CLASSIFICATION_MANIFEST = "classification.jsonl"
DETECTION_MANIFEST = "detection.jsonl"


def darken(f: Frame, d: int = 8) -> Frame:
    """Integer-divide every channel by ``d``."""
    if d < 1:
        raise RangeError(f"darken divisor must be >= 1, got {d}")
    return f.with_pixels(f.pixels // np.uint8(d) if d <= 255 else np.zeros_like(f.pixels))


# ------------------------------------------------------------------- dataset

@dataclass(frozen=True)
class Box:
    x: int
    y: int
    w: int
    h: int
    class_id: int = 0

    @property
    def xywh(self) -> tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: int | None = None
    boxes: tuple[Box, ...] | None = None

    def __post_init__(self):
        if (self.label is None) == (self.boxes is None):
            raise ConsistencyError("a manifest entry needs exactly one of label / boxes")

    @property
    def kind(self) -> str:
        return "classification" if self.label is not None else "detection"

    def to_json(self, base: Path | None = None) -> str:
        path = os.path.relpath(self.path, base) if base else str(self.path)
        if self.label is not None:
            return json.dumps({"path": path, "label": self.label})
        boxes = [{"x": b.x, "y": b.y, "w": b.w, "h": b.h, "class_id": b.class_id} for b in self.boxes]
        return json.dumps({"path": path, "boxes": boxes})


def load_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    """Read a JSON-lines manifest; relative image paths resolve against its directory."""
    path = Path(path)
    entries = []
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConsistencyError(f"{path}:{ln}: {exc}") from exc
        img = Path(rec["path"])
        if not img.is_absolute():
            img = path.parent / img
        boxes = rec.get("boxes")
        entries.append(ManifestEntry(
            path=img,
            label=rec.get("label"),
            boxes=None if boxes is None else tuple(Box(**b) for b in boxes),
        ))
    return entries


def save_manifest(entries: Iterable[ManifestEntry], path: str | os.PathLike) -> None:
    path = Path(path)
    path.write_text("".join(e.to_json(path.parent) + "\n" for e in entries))


def square_box(q: int, size: int) -> Box:
    """The square drawn for quadrant ``q`` in a ``size`` x ``size`` image."""
    half, side = size // 2, size // 4
    off = (half - side) // 2
    return Box((q % 2) * half + off, (q // 2) * half + off, side, side, q)


def gen_synthetic_dataset(
    n: int, seed: int, size: int = 64, out_dir: str | os.PathLike | None = None
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Grey images with one bright square per image.

    Background luma is drawn from [30, 60], the square (side ``size // 4``)
    from [180, 230], placed at the centre of a uniformly drawn quadrant.
    Returns (classification, detection) manifests; when ``out_dir`` is given
    the images and both manifest files are written there.
    """
    if n < 1:
        raise RangeError("dataset size must be >= 1")
    if size < 16:
        raise RangeError("image size must be >= 16")
    rng = np.random.default_rng(seed)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    cls_entries, det_entries = [], []
    for i in range(n):
        q = int(rng.integers(0, 4))
        bg = int(rng.integers(30, 61))
        fg = int(rng.integers(180, 231))
        box = square_box(q, size)
        px = np.full((size, size, 3), bg, dtype=np.uint8)
        px[box.y:box.y + box.h, box.x:box.x + box.w] = fg
        path = Path(f"img_{i:05d}.ppm")
        if out is not None:
            path = out / path
            save_ppm(Frame(px, index=i), path)
        cls_entries.append(ManifestEntry(path, label=q))
        det_entries.append(ManifestEntry(path, boxes=(box,)))
    if out is not None:
        save_manifest(cls_entries, out / CLASSIFICATION_MANIFEST)
        save_manifest(det_entries, out / DETECTION_MANIFEST)
    return cls_entries, det_entries


# ------------------------------------------------------------------- metrics

def top_k_accuracy(preds: Sequence[ClassScores], labels: Sequence[int], k: int) -> float:
    if len(preds) != len(labels):
        raise ConsistencyError(f"{len(preds)} predictions for {len(labels)} labels")
    if k < 1:
        raise RangeError("k must be >= 1")
    if not preds:
        return 0.0
    hits = sum(label in p.ranked()[:k] for p, label in zip(preds, labels))
    return hits / len(preds)


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two ``(x, y, w, h)`` boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def _class_ap(preds, gts, t: float, cls: int) -> float:
    gt_boxes = [[g.xywh for g in img if g.class_id == cls] for img in gts]
    n_gt = sum(len(g) for g in gt_boxes)
    cands = [
        (d.score, i, j, d.box)
        for i, img in enumerate(preds)
        for j, d in enumerate(img)
        if d.class_id == cls
    ]
    # descending score; ties keep image order, then detection order
    cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    matched = [[False] * len(g) for g in gt_boxes]
    tp = np.zeros(len(cands))
    for k, (_, i, _, box) in enumerate(cands):
        best, best_iou = -1, t
        for gi, g in enumerate(gt_boxes[i]):
            if matched[i][gi]:
                continue
            v = iou(box, g)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = gi, v
        if best >= 0:
            matched[i][best] = True
            tp[k] = 1
    if not len(cands):
        return 0.0
    ctp = np.cumsum(tp)
    recall = ctp / n_gt
    precision = ctp / np.arange(1, len(cands) + 1)
    # precision envelope: best precision at any recall >= r
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    interp = np.where(idx < len(cands), envelope[np.minimum(idx, len(cands) - 1)], 0.0)
    return float(interp.mean())


def _as_items(p) -> tuple[Detection, ...]:
    return p.items if isinstance(p, Detections) else tuple(p)


def _as_boxes(g) -> tuple[Box, ...]:
    if isinstance(g, ManifestEntry):
        return g.boxes
    return tuple(g)


def average_precision(preds, gts, t: float, class_id: int | None = None) -> float:
    """101-point interpolated AP at IoU threshold ``t``.

    ``preds`` and ``gts`` are per-image sequences (of :class:`Detections` /
    :class:`Detection` tuples, and of :class:`Box` tuples).  With
    ``class_id=None`` the AP is averaged over the classes present in the
    ground truth.
    """
    if not 0 < t < 1:
        raise RangeError("IoU threshold must lie in (0, 1)")
    preds = [_as_items(p) for p in preds]
    gts = [_as_boxes(g) for g in gts]
    if len(preds) != len(gts):
        raise ConsistencyError(f"{len(preds)} prediction sets for {len(gts)} images")
    if class_id is not None:
        return _class_ap(preds, gts, t, class_id)
    classes = sorted({b.class_id for img in gts for b in img})
    if not classes:
        return 0.0
    return float(np.mean([_class_ap(preds, gts, t, c) for c in classes]))


@dataclass
class MapReport:
    per_variant: dict[str, dict[str, Any]] = field(default_factory=dict)
    n_samples: int = 0
    darken_divisor: int = 8
    histeq_mode: str = ""

    def map(self, tag: str) -> float:
        return self.per_variant[tag]["map_50_95"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "detection",
            "n_samples": self.n_samples,
            "darken_divisor": self.darken_divisor,
            "histeq_mode": self.histeq_mode,
            "iou_thresholds": list(IOU_THRESHOLDS),
            "variants": self.per_variant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def map_50_95(preds, gts) -> dict[str, Any]:
    """mAP averaged over IoU 0.50:0.05:0.95, with the per-threshold values."""
    aps = [average_precision(preds, gts, t) for t in IOU_THRESHOLDS]
    return {"map_50_95": float(np.mean(aps)), "ap_per_threshold": aps}


@dataclass
class AccuracyReport:
    per_variant: dict[str, dict[str, float]] = field(default_factory=dict)
    n_samples: int = 0
    darken_divisor: int = 8
    histeq_mode: str = ""

    def top1(self, tag: str) -> float:
        return self.per_variant[tag]["top1"]

    def top5(self, tag: str) -> float:
        return self.per_variant[tag]["top5"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "classification",
            "n_samples": self.n_samples,
            "darken_divisor": self.darken_divisor,
            "histeq_mode": self.histeq_mode,
            "variants": self.per_variant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class EvalVariant:
    tag: str
    darken_divisor: int = 8

    def __post_init__(self):
        if self.tag not in VARIANT_TAGS:
            raise ConsistencyError(f"unknown variant {self.tag!r}; expected one of {VARIANT_TAGS}")
        if self.darken_divisor < 1:
            raise RangeError("darken divisor must be >= 1")


def transform(f: Frame, v: EvalVariant, color_mode: str) -> Frame:
    if v.tag == "original":
        return f
    dark = darken(f, v.darken_divisor)
    if v.tag == "dark":
        return dark
    return equalize(dark, HistEqConfig.for_frame(dark, color_mode=color_mode, timing_mode=TWO_PASS))


def run_eval(
    manifest: Sequence[ManifestEntry],
    variants: Sequence[EvalVariant | str],
    backend,
    cfg: HistEqConfig | None = None,
) -> AccuracyReport | MapReport:
    """Score ``backend`` on every variant of every manifest image.

    Each variant is evaluated independently.  Equalization always runs the
    two-pass software path; only ``cfg.color_mode`` is taken from ``cfg``
    (rows/cols follow each image).
    """
    kinds = {e.kind for e in manifest}
    if len(kinds) > 1:
        raise ConsistencyError("manifest mixes classification and detection entries")
    variants = [v if isinstance(v, EvalVariant) else EvalVariant(v) for v in variants]
    color_mode = cfg.color_mode if cfg is not None else "luma_gain"
    histeq_mode = f"{TWO_PASS}/{color_mode}"
    divisor = variants[0].darken_divisor if variants else 8
    images = [load_ppm(e.path) for e in manifest]
    kind = kinds.pop() if kinds else "classification"

    if kind == "classification":
        report = AccuracyReport(n_samples=len(manifest), darken_divisor=divisor, histeq_mode=histeq_mode)
        labels = [e.label for e in manifest]
        for v in variants:
            preds = [run_backend(backend, transform(f, v, color_mode)) for f in images]
            report.per_variant[v.tag] = {
                "top1": top_k_accuracy(preds, labels, 1),
                "top5": top_k_accuracy(preds, labels, 5),
            }
        return report

    report = MapReport(n_samples=len(manifest), darken_divisor=divisor, histeq_mode=histeq_mode)
    gts = [e.boxes for e in manifest]
    for v in variants:
        preds = [run_backend(backend, transform(f, v, color_mode)) for f in images]
        report.per_variant[v.tag] = map_50_95(preds, gts)
    return report
