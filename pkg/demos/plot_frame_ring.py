"""
The four-slot frame ring
========================

A producer keeps writing, a reader takes whatever is newest.
"""

import numpy as np

from leap.video_core import Frame, FrameRing

ring = FrameRing(4)
for i in range(6):
    ring.publish(Frame(np.full((2, 2, 3), i, dtype=np.uint8), index=i))

# only the last four survive
print("retained:", ring.retained())

# latest() hands back a private copy
snap = ring.latest()
snap.pixels[:] = 0
print("newest index", snap.index, "still intact:", ring.latest().pixels.max() == 5)
