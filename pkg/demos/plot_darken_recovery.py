"""
Darken, enhance, classify
=========================

Generate the labelled toy set, darken every image by 8 and check how much
of the lost accuracy equalization wins back.
"""

import tempfile

from leap.evalkit import gen_synthetic_dataset, run_eval
from leap.inference import BrightSquareDetector, QuadrantClassifier

with tempfile.TemporaryDirectory() as d:
    cls, det = gen_synthetic_dataset(200, seed=42, size=64, out_dir=d)
    variants = ["original", "dark", "dark_histeq"]

    acc = run_eval(cls, variants, QuadrantClassifier(contrast_threshold=30))
    for v in variants:
        print(f"{v:12s} top-1 {acc.top1(v):.3f}")

    maps = run_eval(det, variants, BrightSquareDetector())
    for v in variants:
        print(f"{v:12s} mAP   {maps.map(v):.3f}")
