"""Frame access by timestamp and SRT subtitle handling."""

from __future__ import annotations

import bisect
import enum
import os
import re
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

from .model import VideoMeta
from .sampling import Interval

FRAME_RE = re.compile(r"^frame_(\d{9})\.(jpg|jpeg|png|webp)$", re.IGNORECASE)
TRUNCATION_MARKER = "[... subtitles truncated]"
DEFAULT_TOOL_CHAR_BUDGET = 4_000
DEFAULT_QUERY_CHAR_BUDGET = 60_000

_MIME = {"jpg": "image/jpeg", "jpeg": "image/jpeg", "png": "image/png", "webp": "image/webp"}


class MediaError(Exception):
    pass


class FrameNotFound(MediaError):
    pass


class DecoderFailed(MediaError):
    def __init__(self, status: int, stderr: str = ""):
        super().__init__(f"decoder exited with status {status}: {stderr.strip()[:200]}")
        self.status = status
        self.stderr = stderr


class EmptyDecoderOutput(MediaError):
    pass


class SubtitleParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


@dataclass(frozen=True)
class Frame:
    timestamp: float
    data: bytes
    mime: str = "image/jpeg"


class FrameSource(enum.Enum):
    PRE_EXTRACTED_DIRECTORY = "directory"
    EXTERNAL_DECODER = "decoder"
    SYNTHETIC = "synthetic"


class FrameProvider(Protocol):
    mode: FrameSource

    def fetch(self, video: VideoMeta, t: float) -> Frame: ...


def frame_filename(t: float, ext: str = "jpg") -> str:
    return f"frame_{round(t * 1000):09d}.{ext}"


class DirectoryFrameProvider:
    """Serves pre-extracted frames laid out as ``<root>/<video_id>/frame_<ms>.jpg``."""

    mode = FrameSource.PRE_EXTRACTED_DIRECTORY

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self._index: dict[str, tuple[list[int], list[Path]]] = {}
        self._lock = threading.Lock()

    def _load(self, video_id: str) -> tuple[list[int], list[Path]]:
        with self._lock:
            if video_id not in self._index:
                folder = self.root / video_id
                if not folder.is_dir():
                    raise FrameNotFound(f"no frame directory {folder}")
                entries = []
                for p in folder.iterdir():
                    m = FRAME_RE.match(p.name)
                    if m:
                        entries.append((int(m.group(1)), p))
                entries.sort()
                self._index[video_id] = ([ms for ms, _ in entries], [p for _, p in entries])
            return self._index[video_id]

    def stamps(self, video: VideoMeta) -> list[float]:
        return [ms / 1000 for ms in self._load(video.id)[0]]

    def fetch(self, video: VideoMeta, t: float) -> Frame:
        stamps, paths = self._load(video.id)
        if not stamps:
            raise FrameNotFound(f"frame directory for {video.id} is empty")
        target = round(t * 1000)
        i = bisect.bisect_left(stamps, target)
        # ties go to the earlier frame
        if i == len(stamps) or (i > 0 and target - stamps[i - 1] <= stamps[i] - target):
            i -= 1
        path = paths[i]
        try:
            data = path.read_bytes()
        except FileNotFoundError as e:
            raise FrameNotFound(str(path)) from e
        ext = path.suffix.lstrip(".").lower()
        return Frame(stamps[i] / 1000, data, _MIME.get(ext, "image/jpeg"))


class DecoderFrameProvider:
    """Runs an external command that writes one image per requested timestamp.

    The template placeholders ``{video}``, ``{timestamp}`` and ``{out}`` are
    shell-quoted before substitution and the command runs without a shell.
    """

    mode = FrameSource.EXTERNAL_DECODER

    def __init__(self, command: str, max_processes: int = 4, timeout: float = 60.0):
        for slot in ("{video}", "{timestamp}", "{out}"):
            if slot not in command:
                raise ValueError(f"decoder command template lacks {slot}")
        self.command = command
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max_processes)

    def fetch(self, video: VideoMeta, t: float) -> Frame:
        with tempfile.TemporaryDirectory(prefix="seekloop-") as tmp:
            out = os.path.join(tmp, "frame.jpg")
            cmd = self.command.format(
                video=shlex.quote(video.frame_source),
                timestamp=shlex.quote(f"{t:.3f}"),
                out=shlex.quote(out),
            )
            with self._slots:
                proc = subprocess.run(
                    shlex.split(cmd), capture_output=True, text=True, timeout=self.timeout
                )
            if proc.returncode != 0:
                raise DecoderFailed(proc.returncode, proc.stderr)
            if not os.path.exists(out) or os.path.getsize(out) == 0:
                raise EmptyDecoderOutput(f"decoder produced no image for t={t:.3f}")
            with open(out, "rb") as fh:
                return Frame(t, fh.read())


class SyntheticFrameProvider:
    """Placeholder frames for synthetic timelines; the oracle vision only needs timestamps."""

    mode = FrameSource.SYNTHETIC

    def fetch(self, video: VideoMeta, t: float) -> Frame:
        return Frame(t, b"", "application/x-synthetic")


def fetch_frame(provider: FrameProvider, video: VideoMeta, t: float) -> Frame:
    if not 0 <= t <= video.duration:
        raise ValueError(f"timestamp {t} outside [0, {video.duration}]")
    return provider.fetch(video, t)


# --- subtitles ---------------------------------------------------------------

@dataclass(frozen=True)
class SubtitleCue:
    start: float
    end: float
    text: str

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"cue must have start < end, got ({self.start}, {self.end})")


_TS = r"(\d{1,2}):(\d{2}):(\d{2})[,.](\d{1,3})"
_TIMING_RE = re.compile(rf"^\s*{_TS}\s*-->\s*{_TS}\s*$")


def parse_srt_timestamp(text: str) -> float:
    m = re.fullmatch(_TS, text.strip())
    if not m:
        raise ValueError(f"bad SRT timestamp {text!r}")
    return _seconds(*m.groups())


def _seconds(h: str, m: str, s: str, ms: str) -> float:
    # integer milliseconds first so rendering and reparsing is exact
    return (int(h) * 3_600_000 + int(m) * 60_000 + int(s) * 1000 + int(ms.ljust(3, "0"))) / 1000


def parse_srt(text: str) -> list[SubtitleCue]:
    cues = []
    lines = text.replace("\r\n", "\n").replace("\r", "\n").lstrip("﻿").split("\n")
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        block_start = i
        if "-->" not in lines[i]:
            if not lines[i].strip().isdigit():
                raise SubtitleParseError(i + 1, f"expected index or timing line, got {lines[i]!r}")
            i += 1
        if i >= len(lines) or not _TIMING_RE.match(lines[i]):
            got = lines[i] if i < len(lines) else "<end of input>"
            raise SubtitleParseError(i + 1, f"malformed timing line {got!r}")
        g = _TIMING_RE.match(lines[i]).groups()
        start, end = _seconds(*g[:4]), _seconds(*g[4:])
        if not start < end:
            raise SubtitleParseError(i + 1, "cue end must come after its start")
        i += 1
        payload = []
        while i < len(lines) and lines[i].strip():
            payload.append(lines[i].strip())
            i += 1
        if not payload:
            raise SubtitleParseError(block_start + 1, "cue has no text")
        cues.append(SubtitleCue(start, end, " ".join(payload)))
    cues.sort(key=lambda c: (c.start, c.end))
    return cues


def load_srt(path: str | os.PathLike) -> list[SubtitleCue]:
    with open(path, encoding="utf-8-sig") as fh:
        return parse_srt(fh.read())


def _srt_stamp(t: float) -> str:
    ms = round(t * 1000)
    h, rem = divmod(ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def render_srt(cues: Sequence[SubtitleCue]) -> str:
    blocks = [
        f"{i}\n{_srt_stamp(c.start)} --> {_srt_stamp(c.end)}\n{c.text}\n"
        for i, c in enumerate(cues, start=1)
    ]
    return "\n".join(blocks)


def clock_label(t: float) -> str:
    """``[MM:SS]`` below one hour, ``[H:MM:SS]`` from one hour on."""
    total = int(t)
    h, rem = divmod(total, 3600)
    m, s = divmod(rem, 60)
    if h:
        return f"[{h}:{m:02d}:{s:02d}]"
    return f"[{m:02d}:{s:02d}]"


def slice_subtitles(
    cues: Sequence[SubtitleCue],
    interval: Interval,
    char_budget: Optional[int] = DEFAULT_TOOL_CHAR_BUDGET,
) -> str:
    """Cues overlapping ``interval`` as ``[MM:SS] text`` lines, cut on a cue boundary."""
    lines = []
    used = 0
    for cue in cues:
        if cue.start >= interval.end:
            break
        if cue.end <= interval.start:
            continue
        line = f"{clock_label(cue.start)} {cue.text}"
        cost = len(line) + (1 if lines else 0)
        if char_budget is not None and used + cost > char_budget:
            lines.append(TRUNCATION_MARKER)
            break
        lines.append(line)
        used += cost
    return "\n".join(lines)


def full_track_text(cues: Sequence[SubtitleCue]) -> str:
    return "\n".join(f"{clock_label(c.start)} {c.text}" for c in cues)
