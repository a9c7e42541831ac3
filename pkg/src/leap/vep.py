"""Video enhancement pipeline: daisy-chained, frame-granular enhancement stages."""

from __future__ import annotations

from typing import Iterable, Protocol, runtime_checkable

from .errors import ConfigurationError
from .histeq import HistEqConfig, HistEqState, pack_gpio
from .video_core import DEFAULT_RING_CAPACITY, Frame, FrameRing


@runtime_checkable
class EnhancementStage(Protocol):
    name: str

    def process(self, f: Frame) -> Frame: ...

    def reconfigure(self, rows: int, cols: int) -> None: ...


class IdentityStage:
    name = "identity"

    def __init__(self):
        self.rows: int | None = None
        self.cols: int | None = None

    def process(self, f: Frame) -> Frame:
        return f

    def reconfigure(self, rows: int, cols: int) -> None:
        self.rows, self.cols = rows, cols


class HistEqStage:
    """Enhancement stage wrapping a :class:`HistEqState`.

    Reconfiguration goes through the GPIO protocol: a reset word latching the
    new size, then a run word releasing reset.
    """

    name = "histeq"

    def __init__(self, config: HistEqConfig):
        self.state = HistEqState(config)

    @property
    def config(self) -> HistEqConfig:
        return self.state.config

    @property
    def rows(self) -> int:
        return self.state.rows

    @property
    def cols(self) -> int:
        return self.state.cols

    def process(self, f: Frame) -> Frame:
        return self.state.push_frame(f)

    def reconfigure(self, rows: int, cols: int) -> None:
        self.state.configure(pack_gpio(rows, cols, True))
        self.state.configure(pack_gpio(rows, cols, False))


class Pipeline:
    """Ordered enhancement stages between an input ring and an output ring."""

    def __init__(
        self,
        stages: Iterable[EnhancementStage] = (),
        capacity: int = DEFAULT_RING_CAPACITY,
    ):
        self.stages = list(stages)
        self.input_ring = FrameRing(capacity)
        self.output_ring = FrameRing(capacity)
        self.rows: int | None = None
        self.cols: int | None = None

    @property
    def size(self) -> tuple[int, int] | None:
        """Configured (width, height), or None while unconfigured."""
        return None if self.rows is None else (self.cols, self.rows)

    def reconfigure(self, rows: int, cols: int) -> None:
        # one control word fans out to every stage in the chain
        pack_gpio(rows, cols, True)
        for stage in self.stages:
            stage.reconfigure(rows, cols)
        self.rows, self.cols = rows, cols

    def process(self, f: Frame) -> Frame:
        if self.rows is not None and f.size != (self.cols, self.rows):
            raise ConfigurationError(
                f"frame is {f.width}x{f.height}, pipeline configured for {self.cols}x{self.rows}"
            )
        out = f
        for stage in self.stages:
            out = stage.process(out)
        if out.size != f.size:
            raise ConfigurationError(f"stage chain changed frame size {f.size} -> {out.size}")
        self.output_ring.publish(out)
        return out

    def step(self) -> Frame | None:
        """Process the latest frame of the input ring, if any."""
        f = self.input_ring.peek_latest()
        return None if f is None else self.process(f)


def chain(
    stages: Iterable[EnhancementStage] = (),
    rows: int | None = None,
    cols: int | None = None,
    capacity: int = DEFAULT_RING_CAPACITY,
) -> Pipeline:
    p = Pipeline(stages, capacity)
    if rows is not None and cols is not None:
        p.reconfigure(rows, cols)
    else:
        sized = [s for s in p.stages if getattr(s, "rows", None) is not None]
        if sized:
            p.rows, p.cols = sized[0].rows, sized[0].cols
    return p


def process(p: Pipeline, f: Frame) -> Frame:
    return p.process(f)


def zero_copy_bind(producer_ring: FrameRing, p: Pipeline) -> None:
    """Make ``producer_ring`` the pipeline's input ring (shared, not copied)."""
    if producer_ring.capacity != p.input_ring.capacity:
        raise ConfigurationError(
            f"ring capacities differ: producer {producer_ring.capacity}, "
            f"pipeline {p.input_ring.capacity}"
        )
    p.input_ring = producer_ring
