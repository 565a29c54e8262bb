from __future__ import annotations

import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from seekloop.model import ToolConfig
from seekloop.sampling import (
    Interval,
    IntervalError,
    fps_timestamps,
    normalize_focus,
    normalize_skim,
    uniform_timestamps,
    uniform_timestamps_in,
)

C4 = ToolConfig(4)


def test_uniform_examples():
    assert uniform_timestamps(60, 1) == [30.0]
    assert uniform_timestamps(10, 4) == [1.25, 3.75, 6.25, 8.75]
    ts = uniform_timestamps(3600, 64)
    # independent oracle: spacing 56.25, offset half a bin
    assert len(ts) == 64 and ts[0] == 3600 / 64 / 2 == 28.125 and ts[-1] == 3600 - 28.125 == 3571.875


def test_uniform_in_examples():
    assert uniform_timestamps_in(Interval(100, 116), 16) == [100.5 + i for i in range(16)]
    assert uniform_timestamps_in(Interval(0, 8), 8) == [0.5 + i for i in range(8)]
    assert uniform_timestamps_in(Interval(5, 6), 1) == [5.5]


def test_fps_examples():
    assert fps_timestamps(Interval(5, 9), 1) == [5, 6, 7, 8, 9]
    assert fps_timestamps(Interval(5, 9.5), 1) == [5, 6, 7, 8, 9]
    assert len(fps_timestamps(Interval(0, 16), 1)) == 17


@pytest.mark.parametrize(
    "req,expected",
    [((100, 105), (94.5, 110.5)), ((2, 6), (0, 16)), ((0, 3600), (0, 3600)), ((3595, 3600), (3584, 3600))],
)
def test_skim_normalization(req, expected):
    iv = normalize_skim(req, C4, 3600)
    assert (iv.start, iv.end) == expected


@pytest.mark.parametrize(
    "req,expected", [((100, 200), (100, 116)), ((100, 110), (100, 110)), ((3590, 3700), (3590, 3600))]
)
def test_focus_normalization(req, expected):
    iv = normalize_focus(req, C4, 3600)
    assert (iv.start, iv.end) == expected


def test_skim_on_short_video_takes_everything():
    iv = normalize_skim((1, 2), C4, 10)
    assert (iv.start, iv.end) == (0, 10)


@pytest.mark.parametrize("req", [(5, 5), (7, 3), (4000, 4100), (float("nan"), 3)])
def test_bad_requests_raise(req):
    with pytest.raises(IntervalError):
        normalize_skim(req, C4, 3600)


durations = st.floats(1, 20000, allow_nan=False)


@given(durations, st.integers(1, 512))
def test_uniform_properties(d, n):
    ts = uniform_timestamps(d, n)
    assert len(ts) == n
    assert all(0 <= t <= d for t in ts)
    assert all(a < b for a, b in zip(ts, ts[1:]))
    for i in range(n):
        assert math.isclose(ts[i] + ts[n - 1 - i], d, rel_tol=1e-12, abs_tol=1e-9)


@given(durations, st.floats(-100, 25000), st.floats(0.01, 25000), st.integers(1, 16))
def test_normalization_properties(d, start, width, alpha):
    cfg = ToolConfig(alpha)
    end = start + width
    assume(end > 0 and start < d and end > start)
    s = normalize_skim((start, end), cfg, d)
    assert 0 <= s.start < s.end <= d
    assert s.span >= min(cfg.skim_min_span, d) - 1e-9
    assert normalize_skim(s, cfg, d) == s
    f = normalize_focus((start, end), cfg, d)
    assert 0 <= f.start < f.end <= d
    assert f.span <= cfg.focus_max_span + 1e-9
    assert normalize_focus(f, cfg, d) == f
    for t in uniform_timestamps_in(s, cfg.skim_frames) + fps_timestamps(f, cfg.focus_fps):
        assert 0 <= t <= d
