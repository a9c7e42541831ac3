import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leap.evalkit import darken
from leap.inference import (
    PALETTE,
    Backend,
    BrightSquareDetector,
    ClassScores,
    Detection,
    Detections,
    MockBackend,
    MockConfig,
    QuadrantClassifier,
    classify_quadrant,
    detect_bright_square,
    mock_infer,
    overlay,
)
from leap.video_core import Frame, new_frame

from conftest import random_frame


def scene(bg, fg, box, size=64):
    px = np.full((size, size, 3), bg, dtype=np.uint8)
    x, y, w, h = box
    px[y:y + h, x:x + w] = fg
    return Frame(px)


def quadrant_means_oracle(f):
    """Plain-loop quadrant means (counting oracle)."""
    h, w = f.height, f.width
    sums, counts = [0] * 4, [0] * 4
    for y in range(h):
        for x in range(w):
            q = (2 if y >= h // 2 else 0) + (1 if x >= w // 2 else 0)
            sums[q] += int(f.pixels[y, x, 0])
            counts[q] += 1
    return sums, counts


class TestQuadrantClassifier:
    def test_backends_satisfy_protocol(self):
        for b in (QuadrantClassifier(), BrightSquareDetector(), MockBackend()):
            assert isinstance(b, Backend)

    def test_uniform_is_none(self):
        assert classify_quadrant(new_frame(32, 32, (90, 90, 90)), 30).argmax == 4

    def test_white_top_left(self):
        assert classify_quadrant(scene(0, 255, (0, 0, 32, 32)), 30).argmax == 0

    def test_dark_frame_loses_the_square(self):
        f = scene(40, 200, (40, 8, 16, 16))  # square centred in TR quadrant
        sums, counts = quadrant_means_oracle(f)
        contrast_tr = sums[1] / counts[1] - (sum(sums) - sums[1]) / (sum(counts) - counts[1])
        assert contrast_tr == pytest.approx(40.0)  # (200 - 40) / 4
        assert classify_quadrant(f, 30).argmax == 1
        dark = darken(f, 8)  # 5 and 25: contrast 20 / 4 = 5
        assert classify_quadrant(dark, 30).argmax == 4

    def test_scores_normalised(self, rng):
        s = classify_quadrant(random_frame(rng, 20, 20), 0.0).scores
        assert len(s) == 5
        assert sum(s) == pytest.approx(1.0)
        assert min(s) >= 0

    def test_needs_2x2(self):
        with pytest.raises(ValueError):
            classify_quadrant(new_frame(1, 5))

    @given(st.integers(0, 3), st.integers(45, 75), st.integers(-40, 40))
    @settings(max_examples=40, deadline=None)
    def test_argmax_invariant_under_offset(self, q, bg, offset):
        fg = bg + 130  # contrast 32.5, values stay within 5..245
        x, y = (q % 2) * 32 + 8, (q // 2) * 32 + 8
        a = classify_quadrant(scene(bg, fg, (x, y, 16, 16)), 30)
        b = classify_quadrant(scene(bg + offset, fg + offset, (x, y, 16, 16)), 30)
        assert a.argmax == b.argmax == q

    def test_input_size_resizes(self):
        c = QuadrantClassifier(30, input_size=(8, 8))
        assert c.preprocess(new_frame(64, 32)).shape == (8, 8)

    def test_pure(self, rng):
        f = random_frame(rng, 32, 32)
        c = QuadrantClassifier(5)
        assert classify_quadrant(f, 5) == classify_quadrant(f, 5)
        assert c.postprocess(c.infer(c.preprocess(f))) == classify_quadrant(f, 5)


class TestDetector:
    def test_uniform_empty(self):
        assert detect_bright_square(new_frame(16, 16, (70, 70, 70)), 30).items == ()

    def test_all_white_empty(self):
        assert detect_bright_square(new_frame(16, 16, (255, 255, 255)), 1).items == ()

    def test_square_box(self):
        f = scene(20, 220, (8, 8, 8, 8), size=32)
        # brute-force scan for the bounding box of thresholded pixels
        y = f.pixels[..., 0].astype(float)
        mask = y > y.mean() + 30
        pts = [(xx, yy) for yy in range(32) for xx in range(32) if mask[yy, xx]]
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        assert (min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1) == (8, 8, 8, 8)
        (d,) = detect_bright_square(f, 30).items
        assert d.box == (8, 8, 8, 8)
        assert d.class_id == 0
        assert 0 < d.score <= 1

    @pytest.mark.parametrize("q", range(4))
    def test_class_is_quadrant_of_centre(self, q):
        x, y = (q % 2) * 32 + 8, (q // 2) * 32 + 8
        (d,) = detect_bright_square(scene(40, 200, (x, y, 16, 16)), 30).items
        assert d.class_id == q

    @given(st.integers(0, 2**32 - 1), st.integers(0, 60))
    @settings(max_examples=30, deadline=None)
    def test_box_inside_frame(self, seed, k):
        f = random_frame(np.random.default_rng(seed), 13, 9)
        for d in detect_bright_square(f, k).items:
            assert d.w > 0 and d.h > 0
            assert 0 <= d.x and d.x + d.w <= 13 and 0 <= d.y and d.y + d.h <= 9
            assert 0 <= d.score <= 1


class TestMock:
    @pytest.mark.parametrize("ms", [13, 87])
    def test_infer_duration(self, ms):
        t = time.perf_counter()
        mock_infer(MockConfig(infer_ms=ms), np.zeros(1))
        assert (time.perf_counter() - t) * 1000 >= ms

    def test_zero_duration_returns_emit(self):
        emit = ClassScores((0, 0, 1.0, 0, 0))
        t = time.perf_counter()
        assert mock_infer(MockConfig(emit=emit), np.zeros(1)) == emit
        assert time.perf_counter() - t < 0.01

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            MockConfig(infer_ms=-1)

    def test_from_mapping(self):
        cfg = MockConfig.from_mapping({"preprocess_ms": "28", "infer_ms": 13, "emit_class": 2})
        assert (cfg.preprocess_ms, cfg.infer_ms, cfg.postprocess_ms) == (28, 13, 0)
        assert cfg.emit.argmax == 2

    def test_infer_serialised(self):
        import threading

        b = MockBackend(MockConfig(infer_ms=30))
        threads = [threading.Thread(target=b.infer, args=(None,)) for _ in range(3)]
        t = time.perf_counter()
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert time.perf_counter() - t >= 0.09


class TestOverlay:
    def test_empty_detections(self, rng):
        f = random_frame(rng, 20, 20)
        assert overlay(f, Detections()).same_pixels(f)

    def test_badge(self, rng):
        f = Frame(np.full((32, 40, 3), 7, dtype=np.uint8))
        out = overlay(f, ClassScores((1.0, 0, 0, 0, 0)))
        assert (out.pixels[:16, :16] == PALETTE[0]).all()
        changed = (out.pixels != f.pixels).any(axis=2)
        assert changed.sum() == 256
        assert not changed[16:, :].any() and not changed[:, 16:].any()

    def test_badge_clipped(self):
        out = overlay(new_frame(4, 4), ClassScores((0, 0, 0, 1.0, 0)))
        assert (out.pixels == PALETTE[3]).all()

    def test_box_border(self):
        f = new_frame(32, 32, (7, 7, 7))
        out = overlay(f, Detections((Detection(8, 8, 8, 8, 1, 0.9),)))
        changed = (out.pixels != f.pixels).any(axis=2)
        # oracle: pixels of the 8x8 box at distance < 2 from its edge
        expected = np.zeros((32, 32), dtype=bool)
        for yy in range(8, 16):
            for xx in range(8, 16):
                if min(xx - 8, 15 - xx, yy - 8, 15 - yy) < 2:
                    expected[yy, xx] = True
        assert expected.sum() == 48
        assert np.array_equal(changed, expected)
        assert (out.pixels[changed] == PALETTE[1]).all()

    def test_box_clipped_to_frame(self):
        f = new_frame(10, 10, (7, 7, 7))
        out = overlay(f, Detections((Detection(6, -3, 10, 6, 2),)))
        changed = (out.pixels != f.pixels).any(axis=2)
        # visible box: rows 0..2, cols 6..9; the border-free interior spans
        # rows -1..0 and cols 8..13, so row 0 keeps cols 8..9
        expected = np.zeros((10, 10), dtype=bool)
        expected[:3, 6:] = True
        expected[0, 8:10] = False
        assert np.array_equal(changed, expected)

    def test_does_not_mutate_input(self, rng):
        f = random_frame(rng, 20, 20)
        before = f.pixels.copy()
        overlay(f, ClassScores((0, 1.0, 0, 0, 0)))
        assert np.array_equal(f.pixels, before)
