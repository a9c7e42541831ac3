"""Three ways of running enhancement plus inference over a video stream.

``async``
    The video path (source -> VEP -> sink) free-runs at the source frame rate
    while a second worker repeatedly samples the newest enhanced frame from
    the VEP output ring and runs inference on it.
``sync``
    One worker does read -> preprocess -> infer -> postprocess -> overlay ->
    write for each frame in turn.
``pipelined``
    Four workers, one per stage group, joined by three bounded FIFO queues.

Every run produces a :class:`RunReport` with per-frame, per-stage timings.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import statistics
import threading
import time
from dataclasses import dataclass, field, fields
from typing import Any, Sequence

from .errors import ConfigurationError
from .inference import Backend, MockBackend, MockConfig, overlay
from .sources import FrameSource, NullSink, Sink, SyntheticSource
from .vep import Pipeline

log = logging.getLogger(__name__)

STAGES = ("read", "preprocess", "infer", "postprocess", "overlay", "write")
DEFAULT_GROUPS: tuple[tuple[str, ...], ...] = (
    ("read", "preprocess"),
    ("infer",),
    ("postprocess", "overlay"),
    ("write",),
)
MODES = ("async", "sync", "pipelined")


@dataclass(frozen=True)
class StageTimes:
    read_ms: float = 0.0
    preprocess_ms: float = 0.0
    infer_ms: float = 0.0
    postprocess_ms: float = 0.0
    overlay_ms: float = 0.0
    write_ms: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")

    def of(self, stage: str) -> float:
        return getattr(self, f"{stage}_ms")

    def as_dict(self) -> dict[str, float]:
        return {s: self.of(s) for s in STAGES}


# Measured per-step latencies of the two reference models.
RESNET50_TIMES = StageTimes(1, 28, 13, 0, 0, 50)
YOLOV3_TIMES = StageTimes(1, 43, 87, 153, 0, 50)


def validate_groups(groups: Sequence[Sequence[str]]) -> tuple[tuple[str, ...], ...]:
    """Groups must split the six stages, in order, into four non-empty runs."""
    groups = tuple(tuple(g) for g in groups)
    if len(groups) != 4 or any(not g for g in groups):
        raise ConfigurationError("pipelined mode needs exactly four non-empty stage groups")
    if tuple(s for g in groups for s in g) != STAGES:
        raise ConfigurationError(f"stage groups {groups} are not an ordered split of {STAGES}")
    return groups


def predict_times(t: StageTimes, groups: Sequence[Sequence[str]] = DEFAULT_GROUPS) -> dict[str, float]:
    """Analytic frame times: sequential sum vs. the slowest pipeline group."""
    groups = validate_groups(groups)
    si = sum(t.of(s) for s in STAGES)
    psi = max(sum(t.of(s) for s in g) for g in groups)
    return {
        "si_ms": si,
        "psi_lower_bound_ms": psi,
        "si_fps": 1000.0 / si if si > 0 else math.inf,
        "psi_max_fps": 1000.0 / psi if psi > 0 else math.inf,
    }


@dataclass(frozen=True)
class QueueSpec:
    depth: int = 4
    count: int = 3

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigurationError("queue depth must be >= 1")
        if self.count != 3:
            raise ConfigurationError("pipelined mode uses exactly three queues")


@dataclass
class FrameRecord:
    frame_index: int
    mode: str
    read_ms: float = 0.0
    preprocess_ms: float = 0.0
    infer_ms: float = 0.0
    postprocess_ms: float = 0.0
    overlay_ms: float = 0.0
    write_ms: float = 0.0
    total_ms: float = 0.0
    done_s: float = 0.0  # completion time, seconds since run start

    def stage(self, s: str) -> float:
        return getattr(self, f"{s}_ms")


RECORD_COLUMNS = ("frame_index",) + tuple(f"{s}_ms" for s in STAGES) + ("total_ms", "done_s")
_VIDEO_STAGES = ("read", "overlay", "write")


@dataclass
class RunReport:
    mode: str
    records: list[FrameRecord] = field(default_factory=list)
    samples: list[FrameRecord] = field(default_factory=list)
    elapsed_s: float = 0.0
    dropped_frames: int = 0
    queue_depth: int | None = None
    max_in_flight: int | None = None
    predictions: list[tuple[int, Any]] = field(default_factory=list, repr=False)

    @property
    def n_frames(self) -> int:
        return len(self.records)

    @property
    def fps(self) -> float:
        return self.n_frames / self.elapsed_s if self.elapsed_s > 0 else 0.0

    @property
    def mean_period_ms(self) -> float:
        return 1000.0 * self.elapsed_s / self.n_frames if self.n_frames else 0.0

    @property
    def mean_total_ms(self) -> float:
        return statistics.fmean(r.total_ms for r in self.records) if self.records else 0.0

    def _values(self, stage: str) -> list[float]:
        # async inference stages live in the sample log, not the video records
        rows = self.samples if self.mode == "async" and stage not in _VIDEO_STAGES else self.records
        return [r.stage(stage) for r in rows]

    @property
    def stage_means_ms(self) -> dict[str, float]:
        return {s: (statistics.fmean(v) if (v := self._values(s)) else 0.0) for s in STAGES}

    @property
    def stage_medians_ms(self) -> dict[str, float]:
        return {s: (statistics.median(v) if (v := self._values(s)) else 0.0) for s in STAGES}

    def to_dict(self) -> dict[str, Any]:
        def columns(rows: list[FrameRecord]) -> dict[str, list]:
            return {c: [getattr(r, c) for r in rows] for c in RECORD_COLUMNS}

        d = {
            "mode": self.mode,
            "fps": self.fps,
            "dropped_frames": self.dropped_frames,
            "stage_means_ms": self.stage_means_ms,
            "stage_medians_ms": self.stage_medians_ms,
            "mean_period_ms": self.mean_period_ms,
            "mean_total_ms": self.mean_total_ms,
            "elapsed_s": self.elapsed_s,
            "n_frames": self.n_frames,
            "records": columns(self.records),
        }
        if self.mode == "async":
            d["samples"] = columns(self.samples)
        if self.queue_depth is not None:
            d["queue_depth"] = self.queue_depth
            d["max_in_flight"] = self.max_in_flight
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ----------------------------------------------------------------- execution

class _Item:
    __slots__ = ("index", "frame", "tensor", "raw", "pred", "out", "times", "t_start")

    def __init__(self):
        self.index = -1
        self.frame = self.tensor = self.raw = self.pred = self.out = None
        self.times: dict[str, float] = {}
        self.t_start = time.perf_counter()


class _Rig:
    """Binds the six stage bodies to one source/VEP/backend/sink set-up."""

    def __init__(self, source: FrameSource, vep: Pipeline, backend: Backend, sink: Sink):
        self.source, self.vep, self.backend, self.sink = source, vep, backend, sink

    def read(self, it: _Item) -> None:
        it.frame = self.vep.process(self.source.read())
        it.index = it.frame.index

    def preprocess(self, it: _Item) -> None:
        it.tensor = self.backend.preprocess(it.frame)

    def infer(self, it: _Item) -> None:
        it.raw = self.backend.infer(it.tensor)

    def postprocess(self, it: _Item) -> None:
        it.pred = self.backend.postprocess(it.raw)

    def overlay(self, it: _Item) -> None:
        it.out = overlay(it.frame, it.pred)

    def write(self, it: _Item) -> None:
        self.sink.write(it.out)

    def run(self, stage: str, it: _Item) -> None:
        t = time.perf_counter()
        getattr(self, stage)(it)
        it.times[stage] = 1000.0 * (time.perf_counter() - t)


def negotiate(source: FrameSource, vep: Pipeline) -> None:
    """Match the VEP to the source resolution, or fail if it is fixed elsewhere."""
    if vep.size is None:
        vep.reconfigure(source.height, source.width)
    elif vep.size != source.size:
        raise ConfigurationError(
            f"source is {source.width}x{source.height}, VEP configured for "
            f"{vep.cols}x{vep.rows}"
        )


def _record(it: _Item, mode: str, t0: float, total_ms: float | None = None) -> FrameRecord:
    now = time.perf_counter()
    return FrameRecord(
        frame_index=it.index,
        mode=mode,
        **{f"{s}_ms": it.times.get(s, 0.0) for s in STAGES},
        total_ms=1000.0 * (now - it.t_start) if total_ms is None else total_ms,
        done_s=now - t0,
    )


def run_sync(source: FrameSource, vep: Pipeline, backend: Backend, sink: Sink, n_frames: int) -> RunReport:
    negotiate(source, vep)
    rig = _Rig(source, vep, backend, sink)
    report = RunReport("sync")
    t0 = time.perf_counter()
    for _ in range(n_frames):
        it = _Item()
        for stage in STAGES:
            rig.run(stage, it)
        report.records.append(_record(it, "sync", t0))
        report.predictions.append((it.index, it.pred))
    report.elapsed_s = report.records[-1].done_s if report.records else 0.0
    return report


_DONE = object()


class _Abort(Exception):
    pass


def run_pipelined(
    source: FrameSource,
    vep: Pipeline,
    backend: Backend,
    sink: Sink,
    n_frames: int,
    q: QueueSpec = QueueSpec(),
    groups: Sequence[Sequence[str]] = DEFAULT_GROUPS,
) -> RunReport:
    negotiate(source, vep)
    groups = validate_groups(groups)
    rig = _Rig(source, vep, backend, sink)
    queues = [queue.Queue(maxsize=q.depth) for _ in range(q.count)]
    stop = threading.Event()
    errors: list[BaseException] = []
    report = RunReport("pipelined", queue_depth=q.depth, max_in_flight=0)
    lock = threading.Lock()
    in_flight = 0
    t0 = time.perf_counter()

    def put(qu: queue.Queue, item) -> None:
        while True:
            if stop.is_set():
                raise _Abort
            try:
                qu.put(item, timeout=0.05)
                return
            except queue.Full:
                pass

    def get(qu: queue.Queue):
        while True:
            if stop.is_set():
                raise _Abort
            try:
                return qu.get(timeout=0.05)
            except queue.Empty:
                pass

    def worker(g: int) -> None:
        nonlocal in_flight
        first, last = g == 0, g == len(groups) - 1
        try:
            remaining = n_frames
            while True:
                if first:
                    if remaining == 0:
                        put(queues[0], _DONE)
                        return
                    remaining -= 1
                    it = _Item()
                    with lock:
                        in_flight += 1
                        report.max_in_flight = max(report.max_in_flight, in_flight)
                else:
                    it = get(queues[g - 1])
                    if it is _DONE:
                        if not last:
                            put(queues[g], _DONE)
                        return
                for stage in groups[g]:
                    rig.run(stage, it)
                if last:
                    with lock:
                        in_flight -= 1
                        report.records.append(_record(it, "pipelined", t0))
                        report.predictions.append((it.index, it.pred))
                else:
                    put(queues[g], it)
        except _Abort:
            return
        except BaseException as exc:  # propagated to the caller below
            errors.append(exc)
            stop.set()

    threads = [
        threading.Thread(target=worker, args=(g,), name=f"psi-worker-{g + 1}", daemon=True)
        for g in range(len(groups))
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    report.elapsed_s = report.records[-1].done_s if report.records else 0.0
    return report


def run_async(
    source: FrameSource,
    vep: Pipeline,
    backend: Backend,
    sink: Sink,
    n_frames: int,
    fps: float | None = None,
) -> RunReport:
    """Free-running video path plus a sampling inference worker.

    The video path is paced at ``fps`` (default: the source's rate) and never
    waits for inference.  The inference worker always takes the newest frame
    in the VEP output ring; frames it never sees count as dropped.
    """
    negotiate(source, vep)
    rate = fps or source.fps
    if not rate or rate <= 0:
        raise ConfigurationError("async mode needs a positive frame rate")
    period = 1.0 / rate
    rig = _Rig(source, vep, backend, sink)
    ring = vep.output_ring
    report = RunReport("async")
    video_done = threading.Event()
    errors: list[BaseException] = []
    t0 = time.perf_counter()

    def infer_loop() -> None:
        last = None
        try:
            while True:
                f = ring.latest()
                if f is None or f.index == last:
                    if not video_done.is_set():
                        time.sleep(0.0002)
                        continue
                    f = ring.latest()
                    if f is None or f.index == last:
                        return
                last = f.index
                it = _Item()
                it.frame, it.index = f, f.index
                for stage in ("preprocess", "infer", "postprocess"):
                    rig.run(stage, it)
                rec = _record(it, "async", t0)
                report.samples.append(rec)
                report.predictions.append((it.index, it.pred))
                log.info("frame %d: %s", it.index, it.pred)
        except BaseException as exc:
            errors.append(exc)

    worker = threading.Thread(target=infer_loop, name="async-infer", daemon=True)
    worker.start()
    try:
        for i in range(n_frames):
            delay = t0 + i * period - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            it = _Item()
            rig.run("read", it)
            it.out = it.frame
            rig.run("write", it)
            report.records.append(_record(it, "async", t0))
    finally:
        video_done.set()
        worker.join()
    if errors:
        raise errors[0]
    report.elapsed_s = report.records[-1].done_s if report.records else 0.0
    sampled = {r.frame_index for r in report.samples}
    report.dropped_frames = n_frames - len(sampled)
    return report


def run(mode: str, source, vep, backend, sink, n_frames: int, **kw) -> RunReport:
    if mode == "sync":
        return run_sync(source, vep, backend, sink, n_frames)
    if mode == "pipelined":
        return run_pipelined(source, vep, backend, sink, n_frames, **kw)
    if mode == "async":
        return run_async(source, vep, backend, sink, n_frames, **kw)
    raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")


def mock_rig(
    times: StageTimes,
    width: int = 64,
    height: int = 64,
    fps: float = 60.0,
    seed: int = 0,
) -> tuple[SyntheticSource, MockBackend, NullSink]:
    """Source, backend and sink whose simulated costs follow ``times``.

    Overlay is real work and is not simulated.
    """
    source = SyntheticSource(width, height, fps=fps, read_ms=times.read_ms, seed=seed)
    backend = MockBackend(MockConfig(times.preprocess_ms, times.infer_ms, times.postprocess_ms))
    return source, backend, NullSink(write_ms=times.write_ms)
