"""
Equalizing a dark frame
=======================

Build a dim synthetic frame, look at its luma histogram, build the LUT and
apply it in both colour modes.
"""

import numpy as np

from leap.histeq import HistEqConfig, build_lut, compute_histogram, equalize
from leap.video_core import Frame

rng = np.random.default_rng(0)

# a 48x64 frame whose values never exceed 40
dark = Frame(rng.integers(0, 41, size=(48, 64, 3), dtype=np.uint8))
print("input range:", dark.pixels.min(), "..", dark.pixels.max())

# histogram over luma, 256 bins
hist = compute_histogram(dark)
occupied = np.flatnonzero(hist)
print("occupied luma levels:", occupied.min(), "..", occupied.max())

# the LUT stretches the occupied range over 0..255
lut = build_lut(hist, dark.width * dark.height)
print("LUT at first/last occupied level:", lut[occupied.min()], lut[occupied.max()])

# luma_gain scales RGB by y'/y; per_channel equalizes R, G, B on their own
for mode in ("luma_gain", "per_channel"):
    out = equalize(dark, HistEqConfig.for_frame(dark, color_mode=mode))
    print(f"{mode:12s} output mean {out.pixels.mean():6.1f}")

# the worked example: luma levels 10, 10, 20, 30 on a 2x2 frame
tiny = Frame(np.repeat(np.array([10, 10, 20, 30], dtype=np.uint8).reshape(2, 2, 1), 3, axis=2))
print(equalize(tiny, HistEqConfig(2, 2)).pixels[..., 0])
