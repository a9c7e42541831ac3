"""Command-line entry point: ``leap {enhance,run,eval,predict,gen-dataset}``.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for
runtime failures (I/O, malformed data).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from .errors import ConfigurationError, ConsistencyError, LeapError, RangeError
from .evalkit import VARIANT_TAGS, EvalVariant, gen_synthetic_dataset, load_manifest, run_eval
from .histeq import COLOR_MODES, TIMING_MODES, TWO_PASS, HistEqConfig, equalize
from .inference import BrightSquareDetector, MockBackend, MockConfig, QuadrantClassifier
from .scheduler import MODES, RESNET50_TIMES, YOLOV3_TIMES, QueueSpec, StageTimes, predict_times, run
from .sources import NullSink, SequenceSink, SequenceSource, SyntheticSource
from .vep import HistEqStage, chain
from .video_core import load_ppm, save_ppm

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ config

@dataclass
class RunConfig:
    mode: str = "sync"
    source: str = "synthetic"
    sink: str = "null"
    backend: str = "mock"
    width: int = 64
    height: int = 64
    fps: float = 60.0
    read_ms: float = 0.0
    preprocess_ms: float = 0.0
    infer_ms: float = 0.0
    postprocess_ms: float = 0.0
    write_ms: float = 0.0
    emit_class: int = 0
    contrast_threshold: float = 30.0
    enhance: bool = True
    rows: int = 0
    cols: int = 0
    color_mode: str = "luma_gain"
    timing_mode: str = "frame_delayed"
    queue_depth: int = 4
    frames: int = 50
    seed: int = 0
    report: str = ""
    groups: str = ""

    def set(self, key: str, value: str) -> None:
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        kind = types[key]
        try:
            if kind == "bool":
                v = value.strip().lower() in ("1", "true", "yes", "on")
            elif kind == "int":
                v = int(value)
            elif kind == "float":
                v = float(value)
            else:
                v = value.strip()
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {value!r}") from exc
        setattr(self, key, v)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.backend not in ("mock", "classifier", "detector"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        for k in ("read_ms", "preprocess_ms", "infer_ms", "postprocess_ms", "write_ms"):
            if getattr(self, k) < 0:
                raise ConfigurationError(f"{k} must be >= 0")
        if self.frames < 0:
            raise ConfigurationError("frames must be >= 0")
        if self.queue_depth < 1:
            raise ConfigurationError("queue_depth must be >= 1")
        if self.color_mode not in COLOR_MODES or self.timing_mode not in TIMING_MODES:
            raise ConfigurationError("unknown color_mode or timing_mode")
        if self.source != "synthetic" and not Path(self.source).is_dir():
            raise ConfigurationError(f"source directory {self.source} does not exist")


def load_config(path: str | Path, cfg: RunConfig | None = None) -> RunConfig:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    cfg = cfg or RunConfig()
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{ln}: expected key=value")
        cfg.set(key.strip(), value)
    return cfg


# ---------------------------------------------------------------- commands

def cmd_enhance(args) -> int:
    f = load_ppm(args.input)
    cfg = HistEqConfig.for_frame(f, color_mode=args.color_mode, timing_mode=TWO_PASS)
    save_ppm(equalize(f, cfg), args.output)
    return EXIT_OK


def _build_run(cfg: RunConfig):
    if cfg.source == "synthetic":
        source = SyntheticSource(cfg.width, cfg.height, fps=cfg.fps, read_ms=cfg.read_ms, seed=cfg.seed)
    else:
        source = SequenceSource(cfg.source, read_ms=cfg.read_ms)
    if cfg.backend == "mock":
        backend = MockBackend(MockConfig.from_mapping(vars(cfg)))
    elif cfg.backend == "classifier":
        backend = QuadrantClassifier(cfg.contrast_threshold)
    else:
        backend = BrightSquareDetector(cfg.contrast_threshold)
    if cfg.sink == "null":
        sink = NullSink(cfg.write_ms)
    else:
        sink = SequenceSink(cfg.sink, fps=int(source.fps), write_ms=cfg.write_ms)
    rows = cfg.rows or source.height
    cols = cfg.cols or source.width
    stages = []
    if cfg.enhance:
        stages.append(HistEqStage(HistEqConfig(rows, cols, cfg.color_mode, cfg.timing_mode)))
    vep = chain(stages, rows=rows, cols=cols)
    return source, vep, backend, sink


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    for name in ("mode", "seed", "report", "queue_depth", "frames", "source", "sink", "backend"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        cfg.set(key, value)
    cfg.validate()
    source, vep, backend, sink = _build_run(cfg)
    kw = {}
    if cfg.mode == "pipelined":
        kw["q"] = QueueSpec(cfg.queue_depth)
        if cfg.groups:
            kw["groups"] = [g.split("+") for g in cfg.groups.split(",")]
    report = run(cfg.mode, source, vep, backend, sink, cfg.frames, **kw)
    if isinstance(sink, SequenceSink):
        sink.close()
    text = report.to_json()
    if cfg.report:
        Path(cfg.report).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    tags = [t.strip() for t in args.variants.split(",") if t.strip()]
    bad = [t for t in tags if t not in VARIANT_TAGS]
    if bad or not tags:
        raise ConfigurationError(f"unknown variant(s) {bad}; expected from {VARIANT_TAGS}")
    if args.darken < 1:
        raise ConfigurationError("--darken must be >= 1")
    manifest = load_manifest(args.manifest)
    kind = args.backend
    if kind == "auto":
        kind = "detector" if manifest and manifest[0].boxes is not None else "classifier"
    backend = (
        QuadrantClassifier(args.threshold) if kind == "classifier" else BrightSquareDetector(args.threshold)
    )
    variants = [EvalVariant(t, args.darken) for t in tags]
    cfg = HistEqConfig(1, 1, color_mode=args.color_mode, timing_mode=TWO_PASS)
    report = run_eval(manifest, variants, backend, cfg)
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


_PRESETS = {"resnet50": RESNET50_TIMES, "yolov3": YOLOV3_TIMES}


def cmd_predict(args) -> int:
    if args.preset:
        times = _PRESETS[args.preset]
    else:
        values = [args.read, args.preprocess, args.infer, args.postprocess, args.overlay, args.write]
        if any(v < 0 for v in values):
            raise ConfigurationError("stage durations must be non-negative")
        times = StageTimes(*values)
    out = {k: ("unbounded" if math.isinf(v) else v) for k, v in predict_times(times).items()}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    if args.n < 1:
        raise ConfigurationError("--n must be >= 1")
    if args.size < 16:
        raise ConfigurationError("--size must be >= 16")
    gen_synthetic_dataset(args.n, args.seed, args.size, args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("enhance", help="histogram-equalize one P6 image")
    e.add_argument("input")
    e.add_argument("output")
    e.add_argument("--color-mode", choices=COLOR_MODES, default="luma_gain")
    e.set_defaults(func=cmd_enhance)

    r = sub.add_parser("run", help="run a scheduling mode over a frame stream")
    r.add_argument("--config")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--seed", type=int)
    r.add_argument("--report")
    r.add_argument("--queue-depth", type=int, dest="queue_depth")
    r.add_argument("--frames", type=int)
    r.add_argument("--source", help="'synthetic' or a frame-sequence directory")
    r.add_argument("--sink", help="'null' or an output directory")
    r.add_argument("--backend", choices=("mock", "classifier", "detector"))
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("eval", help="score a backend on original/dark/dark_histeq variants")
    v.add_argument("--manifest", required=True)
    v.add_argument("--variants", default=",".join(VARIANT_TAGS))
    v.add_argument("--backend", choices=("auto", "classifier", "detector"), default="auto")
    v.add_argument("--threshold", type=float, default=30.0)
    v.add_argument("--darken", type=int, default=8)
    v.add_argument("--color-mode", choices=COLOR_MODES, default="luma_gain")
    v.add_argument("--report")
    v.set_defaults(func=cmd_eval)

    d = sub.add_parser("predict", help="analytic sync vs pipelined frame times")
    d.add_argument("--preset", choices=sorted(_PRESETS))
    for name in ("read", "preprocess", "infer", "postprocess", "overlay", "write"):
        d.add_argument(f"--{name}", type=float, default=0.0, metavar="MS")
    d.set_defaults(func=cmd_predict)

    g = sub.add_parser("gen-dataset", help="write the synthetic labelled dataset")
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_dataset)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigurationError, ConsistencyError, RangeError) as exc:
        print(f"leap {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, LeapError, ValueError) as exc:
        print(f"leap {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
