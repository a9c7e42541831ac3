from fractions import Fraction
from math import floor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leap.errors import (
    ConfigurationError,
    ConsistencyError,
    FramingError,
    ProtocolError,
    RangeError,
    ResetViolationError,
)
from leap.histeq import (
    FRAME_DELAYED,
    IDENTITY_LUT,
    PER_CHANNEL,
    TWO_PASS,
    GpioWord,
    HistEqConfig,
    HistEqState,
    apply_lut,
    build_lut,
    compute_histogram,
    equalize,
    is_monotone,
    pack_gpio,
    stream_frame,
    unpack_gpio,
)
from leap.video_core import Frame, detokenize, luma, new_frame, tokenize

from conftest import gray_frame, random_frame


def lut_oracle(hist, n):
    """Textbook CDF equalization evaluated with exact rationals."""
    cdf, run = [], 0
    for c in hist:
        run += int(c)
        cdf.append(run)
    cdf_min = next(c for c in cdf if c > 0)
    if cdf_min == n:
        return list(range(256))
    out = []
    for c in cdf:
        if c == 0:
            out.append(0)
        else:
            out.append(floor(Fraction(255 * (c - cdf_min), n - cdf_min) + Fraction(1, 2)))
    return out


def hist_of(lumas):
    h = np.zeros(256, dtype=np.int64)
    for v in lumas:
        h[v] += 1
    return h


histograms = st.lists(st.integers(0, 255), min_size=1, max_size=200).map(hist_of)


class TestHistogram:
    def test_all_black(self):
        h = compute_histogram(new_frame(2, 2))
        assert h[0] == 4 and h[1:].sum() == 0

    def test_direct_count(self):
        h = compute_histogram(gray_frame([10, 10, 20, 30], 2, 2))
        assert (h[10], h[20], h[30]) == (2, 1, 1)
        assert h.sum() == 4

    def test_random_counts(self, rng):
        f = random_frame(rng, 16, 16)
        h = compute_histogram(f)
        assert h.sum() == 256
        expected = hist_of(luma(p) for p in f.pixels.reshape(-1, 3).tolist())
        assert np.array_equal(h, expected)


class TestBuildLut:
    def test_uniform_is_identity(self):
        assert np.array_equal(build_lut(hist_of([77] * 9), 9), IDENTITY_LUT)

    def test_two_level(self):
        lut = build_lut(hist_of([0] * 50 + [255] * 50), 100)
        assert lut[0] == 0 and lut[255] == 255

    def test_worked_example(self):
        lut = build_lut(hist_of([10, 10, 20, 30]), 4)
        assert (lut[10], lut[20], lut[30]) == (0, 128, 255)
        assert lut[:10].tolist() == [0] * 10

    def test_bin_sum_mismatch(self):
        with pytest.raises(ConsistencyError):
            build_lut(hist_of([1, 2, 3]), 4)

    @given(histograms)
    @settings(max_examples=200, deadline=None)
    def test_matches_rational_oracle(self, h):
        n = int(h.sum())
        assert build_lut(h, n).tolist() == lut_oracle(h, n)

    @given(histograms)
    @settings(max_examples=200, deadline=None)
    def test_monotone(self, h):
        assert is_monotone(build_lut(h, int(h.sum())))


class TestApplyLut:
    def test_identity_lut(self, rng):
        f = random_frame(rng)
        assert apply_lut(f, IDENTITY_LUT).same_pixels(f)

    def test_zero_luma_pixel(self):
        lut = IDENTITY_LUT.copy()
        lut[0] = 10
        out = apply_lut(new_frame(1, 1, (0, 0, 0)), lut)
        assert out.pixel(0, 0) == (10, 10, 10)

    def test_gray_gain(self):
        lut = IDENTITY_LUT.copy()
        lut[100] = 200
        out = apply_lut(new_frame(1, 1, (100, 100, 100)), lut)
        assert out.pixel(0, 0) == (200, 200, 200)

    def test_gain_rounds_half_up(self):
        lut = IDENTITY_LUT.copy()
        lut[2] = 3  # gain 1.5
        # luma((1,3,3)) = (77 + 450 + 87) >> 8 = 2
        out = apply_lut(new_frame(1, 1, (1, 3, 3)), lut)
        assert out.pixel(0, 0) == (2, 5, 5)  # 1.5 -> 2, 4.5 -> 5

    def test_gain_saturates(self):
        lut = IDENTITY_LUT.copy()
        lut[76] = 255
        out = apply_lut(new_frame(1, 1, (255, 0, 0)), lut)
        assert out.pixel(0, 0) == (255, 0, 0)

    def test_gray_pixels_land_exactly_on_lut(self, rng):
        lut = np.sort(rng.integers(0, 256, 256)).astype(np.uint8)
        f = gray_frame(rng.integers(0, 256, 64), 8, 8)
        out = apply_lut(f, lut)
        y_in = f.pixels[..., 0]
        assert np.array_equal(out.pixels[..., 0], lut[y_in])

    @given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)), st.integers(0, 255))
    @settings(max_examples=300, deadline=None)
    def test_luma_error_bound(self, p, target):
        # Exact bound for unsaturated pixels: the output luma lies in
        # [target - 2, target + gain + 1].  The floor in the luma formula is
        # amplified by the gain, so a flat +-2 holds only for gain <= 1.
        y = luma(p)
        if y == 0:
            return
        gain = target / y
        if max(p) * gain > 255:
            return
        lut = IDENTITY_LUT.copy()
        lut[y] = target
        got = luma(apply_lut(new_frame(1, 1, p), lut).pixel(0, 0))
        assert target - 2 <= got <= target + gain + 1
        if gain <= 1:
            assert abs(got - target) <= 2

    def test_per_channel_equalizes_each_channel(self, rng):
        f = random_frame(rng, 8, 8)
        out = apply_lut(f, IDENTITY_LUT, PER_CHANNEL)
        for c in range(3):
            ch = f.pixels[..., c]
            lut = lut_oracle(np.bincount(ch.ravel(), minlength=256), 64)
            assert out.pixels[..., c].tolist() == np.array(lut)[ch].tolist()


class TestEqualize:
    def test_uniform_frame_unchanged(self):
        f = new_frame(6, 4, (128, 128, 128))
        assert equalize(f, HistEqConfig(4, 6)).same_pixels(f)

    def test_worked_example(self):
        f = gray_frame([10, 10, 20, 30], 2, 2)
        out = equalize(f, HistEqConfig(2, 2))
        got = [luma(p) for p in out.pixels.reshape(-1, 3).tolist()]
        assert all(abs(a - b) <= 2 for a, b in zip(got, [0, 0, 128, 255]))

    def test_wrong_dimensions(self, rng):
        with pytest.raises(ConfigurationError):
            equalize(random_frame(rng, 16, 16), HistEqConfig(8, 16))

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    def test_single_luma_frames_pass_through(self, r, g, b):
        f = new_frame(5, 3, (r, g, b))
        assert equalize(f, HistEqConfig(3, 5)).same_pixels(f)

    def test_preserves_dims_and_metadata(self, rng):
        f = random_frame(rng, 9, 4, index=17)
        out = equalize(f, HistEqConfig(4, 9))
        assert out.size == (9, 4) and out.index == 17

    def test_brightens_dark_frame(self, rng):
        f = Frame(rng.integers(0, 32, size=(16, 16, 3), dtype=np.uint8))
        out = equalize(f, HistEqConfig(16, 16))
        assert out.pixels.mean() > 3 * f.pixels.mean()


def _stream(state, f):
    return detokenize(stream_frame(state, f), f.width, f.height)


class TestStreaming:
    @pytest.mark.parametrize("color_mode", ["luma_gain", "per_channel"])
    def test_two_pass_equals_batch(self, rng, color_mode):
        cfg = HistEqConfig(6, 5, color_mode, TWO_PASS)
        state = HistEqState(cfg)
        for _ in range(5):
            f = random_frame(rng, 5, 6)
            assert _stream(state, f).same_pixels(equalize(f, cfg))

    def test_two_pass_emits_on_last_pixel_only(self, rng):
        f = random_frame(rng, 3, 2)
        state = HistEqState(HistEqConfig(2, 3, timing_mode=TWO_PASS))
        toks = list(tokenize(f))
        assert all(state.push_pixel(t) == [] for t in toks[:-1])
        assert len(state.push_pixel(toks[-1])) == 6

    def test_frame_delayed_first_frame_passthrough(self, rng):
        f = random_frame(rng, 4, 4)
        state = HistEqState(HistEqConfig(4, 4, timing_mode=FRAME_DELAYED))
        assert _stream(state, f).same_pixels(f)

    @pytest.mark.parametrize("color_mode", ["luma_gain", "per_channel"])
    def test_frame_delayed_converges(self, rng, color_mode):
        f = random_frame(rng, 5, 4)
        cfg = HistEqConfig(4, 5, color_mode, FRAME_DELAYED)
        state = HistEqState(cfg)
        _stream(state, f)
        expected = equalize(f, cfg)
        for _ in range(2):
            assert _stream(state, f).same_pixels(expected)

    def test_frame_delayed_uses_previous_histogram(self, rng):
        a, b = random_frame(rng, 4, 4), random_frame(rng, 4, 4)
        state = HistEqState(HistEqConfig(4, 4))
        _stream(state, a)
        lut_a = build_lut(compute_histogram(a), 16)
        assert _stream(state, b).same_pixels(apply_lut(b, lut_a))

    @pytest.mark.parametrize("timing", [TWO_PASS, FRAME_DELAYED])
    @pytest.mark.parametrize("color_mode", ["luma_gain", "per_channel"])
    def test_push_frame_matches_tokens(self, rng, timing, color_mode):
        cfg = HistEqConfig(4, 6, color_mode, timing)
        tok_state, frame_state = HistEqState(cfg), HistEqState(cfg)
        for _ in range(4):
            f = random_frame(rng, 6, 4)
            assert frame_state.push_frame(f).same_pixels(_stream(tok_state, f))

    def test_token_in_reset(self, rng):
        state = HistEqState(HistEqConfig(2, 2), in_reset=True)
        with pytest.raises(ResetViolationError):
            state.push_pixel(next(tokenize(random_frame(rng, 2, 2))))

    def test_missing_sof(self, rng):
        toks = list(tokenize(random_frame(rng, 2, 2)))
        state = HistEqState(HistEqConfig(2, 2))
        with pytest.raises(FramingError):
            state.push_pixel(toks[1])
        # state recovers at the next proper frame
        assert len(state.push_pixel(toks[0])) == 1

    def test_eol_mismatch(self, rng):
        toks = list(tokenize(random_frame(rng, 3, 2)))
        state = HistEqState(HistEqConfig(2, 4))  # configured 4 columns, stream has 3
        state.push_pixel(toks[0])
        state.push_pixel(toks[1])
        with pytest.raises(FramingError):
            state.push_pixel(toks[2])


class TestGpio:
    def test_1080p_word(self):
        # 1080 + 1920 * 2**12 = 7865400 = 0x780438
        assert pack_gpio(1080, 1920, False).raw == 0x00780438

    def test_reset_only(self):
        assert pack_gpio(0, 0, True).raw == 0x01000000

    def test_all_fields(self):
        assert pack_gpio(4095, 4095, True).raw == 0x01FFFFFF

    @given(st.integers(0, 4095), st.integers(0, 4095), st.booleans())
    def test_roundtrip(self, rows, cols, reset):
        w = pack_gpio(rows, cols, reset)
        assert unpack_gpio(w) == (rows, cols, reset)
        assert w.raw >> 25 == 0

    def test_unpack_ignores_unused_bits(self):
        assert unpack_gpio(0xFE000000 | 0x00780438) == (1080, 1920, False)

    @pytest.mark.parametrize("rows,cols", [(4096, 1), (1, 4096), (-1, 0)])
    def test_overflow(self, rows, cols):
        with pytest.raises(RangeError):
            pack_gpio(rows, cols, False)

    def test_repr(self):
        assert repr(GpioWord(0x780438)) == "GpioWord(0x00780438)"


class TestConfigure:
    def test_reset_then_run(self, rng):
        state = HistEqState(HistEqConfig(4, 4))
        state.configure(pack_gpio(2, 3, True))
        assert state.in_reset
        state.configure(pack_gpio(2, 3, False))
        assert not state.in_reset
        assert (state.rows, state.cols) == (2, 3)
        f = random_frame(rng, 3, 2)
        assert len(stream_frame(state, f)) == 6

    def test_change_without_reset_rejected(self):
        state = HistEqState(HistEqConfig(4, 4))
        with pytest.raises(ProtocolError):
            state.configure(pack_gpio(8, 8, False))
        assert (state.rows, state.cols) == (4, 4)
        assert not state.in_reset

    def test_two_resets(self):
        state = HistEqState(HistEqConfig(4, 4))
        state.configure(pack_gpio(2, 2, True))
        state.configure(pack_gpio(5, 6, True))
        assert state.in_reset and state.latched == (5, 6)
        with pytest.raises(ProtocolError):
            state.configure(pack_gpio(2, 2, False))
        state.configure(pack_gpio(5, 6, False))
        assert (state.rows, state.cols) == (5, 6)

    def test_reset_restores_identity_lut(self, rng):
        f = random_frame(rng, 4, 4)
        state = HistEqState(HistEqConfig(4, 4))
        stream_frame(state, f)
        state.configure(pack_gpio(4, 4, True))
        state.configure(pack_gpio(4, 4, False))
        assert _stream(state, f).same_pixels(f)

    def test_matching_run_word_is_noop(self):
        state = HistEqState(HistEqConfig(4, 4))
        state.configure(pack_gpio(4, 4, False))
        assert not state.in_reset

    def test_zero_dims_cannot_run(self):
        state = HistEqState(HistEqConfig(4, 4))
        state.configure(pack_gpio(0, 0, True))
        with pytest.raises(ConfigurationError):
            state.configure(pack_gpio(0, 0, False))


@pytest.mark.parametrize("kw", [dict(rows=0, cols=1), dict(rows=1, cols=4096),
                                dict(rows=2, cols=2, color_mode="hsv"),
                                dict(rows=2, cols=2, timing_mode="zero_latency")])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        HistEqConfig(**kw)
