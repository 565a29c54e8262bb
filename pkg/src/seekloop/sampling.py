"""Timestamp arithmetic for the view tools.

Uniform sampling uses bin midpoints, ``t_i = (i + 0.5) * span / n``, so that
neither the first nor the end-of-stream frame is ever requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ToolConfig

# tolerance for span comparisons; keeps normalization idempotent under float drift
_EPS = 1e-9


class IntervalError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise IntervalError(f"interval bounds must be finite: ({self.start}, {self.end})")
        if not 0 <= self.start < self.end:
            raise IntervalError(f"invalid interval ({self.start}, {self.end}); need 0 <= start < end")

    @property
    def span(self) -> float:
        return self.end - self.start


def uniform_timestamps(duration: float, n: int) -> list[float]:
    if not duration > 0:
        raise IntervalError(f"duration must be positive, got {duration}")
    return uniform_timestamps_in(Interval(0.0, float(duration)), n)


def uniform_timestamps_in(interval: Interval, n: int) -> list[float]:
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    step = interval.span / n
    return [interval.start + (i + 0.5) * step for i in range(n)]


def fps_timestamps(interval: Interval, fps: float) -> list[float]:
    """Fixed-rate grid from ``start``; includes ``end`` only when it lands on the grid."""
    if not fps > 0:
        raise ValueError(f"fps must be positive, got {fps}")
    count = math.floor(interval.span * fps + _EPS) + 1
    return [min(interval.start + i / fps, interval.end) for i in range(count)]


def _clamp(interval: Interval | tuple[float, float], duration: float) -> tuple[float, float]:
    # raw model requests may be negative or reversed, so tuples are accepted too
    lo, hi = (interval.start, interval.end) if isinstance(interval, Interval) else interval
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise IntervalError(f"invalid interval request ({lo}, {hi})")
    start = max(0.0, float(lo))
    end = min(float(duration), float(hi))
    if not start < end:
        raise IntervalError(f"requested interval ({lo}, {hi}) lies outside the video [0, {duration}]")
    return start, end


def normalize_skim(interval: Interval | tuple[float, float], config: ToolConfig, duration: float) -> Interval:
    """Clamp to the video and widen to at least ``config.skim_min_span`` seconds."""
    start, end = _clamp(interval, duration)
    need = config.skim_min_span
    if end - start >= need - _EPS:
        return Interval(start, end)
    if duration <= need:
        return Interval(0.0, float(duration))
    mid = (start + end) / 2
    start, end = mid - need / 2, mid + need / 2
    if start < 0:
        start, end = 0.0, need
    elif end > duration:
        start, end = duration - need, float(duration)
    return Interval(start, end)


def normalize_focus(interval: Interval | tuple[float, float], config: ToolConfig, duration: float) -> Interval:
    """Clamp to the video and truncate to ``config.focus_max_span``, keeping the start."""
    start, end = _clamp(interval, duration)
    if end - start > config.focus_max_span + _EPS:
        end = start + config.focus_max_span
    return Interval(start, end)
