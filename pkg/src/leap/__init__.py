"""Histogram-equalization video enhancement with pluggable inference scheduling.

Modules:

* :mod:`leap.video_core` - frames, P6 I/O, resize, the shared frame ring
* :mod:`leap.histeq` - equalization LUTs, streaming model, control register
* :mod:`leap.vep` - chained enhancement stages
* :mod:`leap.inference` - backends, predictions, overlay
* :mod:`leap.scheduler` - async / sync / pipelined execution and timing
* :mod:`leap.evalkit` - darkening experiment, accuracy and mAP
"""

from .errors import (
    ConfigurationError,
    ConsistencyError,
    DimensionError,
    FormatError,
    FramingError,
    LeapError,
    ProtocolError,
    RangeError,
    ResetViolationError,
)
from .histeq import (
    GpioWord,
    HistEqConfig,
    HistEqState,
    apply_lut,
    build_lut,
    compute_histogram,
    equalize,
    pack_gpio,
    unpack_gpio,
)
from .video_core import (
    Frame,
    FrameRing,
    Pixel,
    StreamToken,
    luma,
    new_frame,
    read_ppm,
    resize_nearest,
    ring_latest,
    ring_publish,
    write_ppm,
)

__version__ = "0.1.0"
