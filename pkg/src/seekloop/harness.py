"""Dataset manifests, batch execution, trajectory logs and run reports."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Protocol, Sequence

import jsonschema

from . import synthworld
from .agent import AgentSession, EpisodeAborted, EmptyFrameSet, run_episode, run_replay_single_pass, run_single_pass
from .backend import (
    BackendError,
    ChatBackend,
    HttpChatBackend,
    HttpEndpoint,
    ScriptedThinker,
    StaticVision,
)
from .media import (
    DecoderFrameProvider,
    DirectoryFrameProvider,
    FrameProvider,
    MediaError,
    SubtitleCue,
    SubtitleParseError,
    SyntheticFrameProvider,
    load_srt,
)
from .model import (
    Episode,
    EpisodeMetrics,
    EpisodeMode,
    Query,
    Termination,
    TokenUsage,
    ToolConfig,
    ToolKind,
    Turn,
    VideoMeta,
    canonical_json,
    trajectory_metrics,
)
from .protocol import grade

log = logging.getLogger(__name__)

ABORTED = "Aborted"


class ManifestError(ValueError):
    def __init__(self, location: str, reason: str):
        super().__init__(f"{location}: {reason}")
        self.location = location
        self.reason = reason


_OPTION = {
    "type": "object",
    "required": ["label", "text"],
    "properties": {"label": {"type": "string", "pattern": "^[A-Z]$"}, "text": {"type": "string"}},
    "additionalProperties": False,
}
_QUESTION = {
    "type": "object",
    "required": ["question_id", "question"],
    "properties": {
        "question_id": {"type": "string", "minLength": 1},
        "question": {"type": "string", "minLength": 1},
        "options": {"type": "array", "items": _OPTION, "minItems": 2},
        "gold": {"type": "string"},
    },
    "additionalProperties": False,
}
MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["videos"],
    "properties": {
        "videos": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["video_id", "duration", "questions"],
                "properties": {
                    "video_id": {"type": "string", "minLength": 1, "pattern": "^[^/\\\\]+$"},
                    "duration": {"type": "number", "exclusiveMinimum": 0},
                    "frame_root": {"type": "string"},
                    "decoder": {
                        "type": "object",
                        "required": ["command", "video_path"],
                        "properties": {"command": {"type": "string"}, "video_path": {"type": "string"}},
                    },
                    "world": {"type": "string"},
                    "subtitles": {"type": "string"},
                    "questions": {"type": "array", "items": _QUESTION, "minItems": 1},
                },
                "oneOf": [
                    {"required": ["frame_root"]},
                    {"required": ["decoder"]},
                    {"required": ["world"]},
                ],
            },
        }
    },
}


@dataclass(frozen=True)
class QuestionEntry:
    question_id: str
    query: Query


@dataclass
class VideoEntry:
    video: VideoMeta
    questions: list[QuestionEntry]
    frame_root: Optional[Path] = None
    decoder_command: Optional[str] = None
    world: Optional[synthworld.SyntheticWorld] = None
    subtitles: Optional[list[SubtitleCue]] = None


@dataclass
class DatasetManifest:
    entries: list[VideoEntry]
    path: Optional[Path] = None

    def pairs(self) -> list[tuple[VideoEntry, QuestionEntry]]:
        return [(e, q) for e in self.entries for q in e.questions]


def _pointer(path: Sequence[Any]) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def parse_manifest(data: Any, base: Path) -> DatasetManifest:
    validator = jsonschema.Draft202012Validator(MANIFEST_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ManifestError(_pointer(e.absolute_path), e.message)

    entries, seen = [], set()
    for i, v in enumerate(data["videos"]):
        where = f"/videos/{i}"
        vid = v["video_id"]
        if vid in seen:
            raise ManifestError(f"{where}/video_id", f"duplicate video_id {vid!r}")
        seen.add(vid)

        def resolve(rel: str, key: str, kind: str = "any") -> Path:
            p = (base / rel).resolve()
            ok = p.is_dir() if kind == "dir" else p.is_file() if kind == "file" else p.exists()
            if not ok:
                raise ManifestError(f"{where}/{key}", f"cannot resolve path {rel!r}")
            return p

        frame_root = decoder = world = subs = None
        source = ""
        if "frame_root" in v:
            frame_root = resolve(v["frame_root"], "frame_root", "dir")
            if not (frame_root / vid).is_dir():
                raise ManifestError(f"{where}/frame_root", f"no frame directory for {vid!r}")
            source = str(frame_root)
        elif "decoder" in v:
            decoder = v["decoder"]["command"]
            source = str(resolve(v["decoder"]["video_path"], "decoder/video_path", "file"))
        else:
            wp = resolve(v["world"], "world", "file")
            try:
                world = synthworld.SyntheticWorld.load(wp)
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{where}/world", f"unreadable world file: {exc}") from exc
            source = str(wp)
        subtitle_path = None
        if "subtitles" in v:
            sp = resolve(v["subtitles"], "subtitles", "file")
            try:
                subs = load_srt(sp)
            except SubtitleParseError as exc:
                raise ManifestError(f"{where}/subtitles", f"{sp.name} {exc}") from exc
            subtitle_path = str(sp)

        questions, qids = [], set()
        for j, q in enumerate(v["questions"]):
            qwhere = f"{where}/questions/{j}"
            if q["question_id"] in qids:
                raise ManifestError(f"{qwhere}/question_id", f"duplicate question_id {q['question_id']!r}")
            qids.add(q["question_id"])
            options = tuple((o["label"], o["text"]) for o in q["options"]) if "options" in q else None
            try:
                query = Query(q["question"], options, q.get("gold"))
            except ValueError as exc:
                raise ManifestError(qwhere, str(exc)) from exc
            questions.append(QuestionEntry(q["question_id"], query))
        video = VideoMeta(vid, float(v["duration"]), source, subtitle_path)
        entries.append(VideoEntry(video, questions, frame_root, decoder, world, subs))
    return DatasetManifest(entries)


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ManifestError("/", f"manifest {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError("/", f"manifest is not JSON: {exc}") from exc
    manifest = parse_manifest(data, path.parent)
    manifest.path = path
    return manifest


# --- backends ---------------------------------------------------------------------

@dataclass
class EpisodeBackends:
    thinking: ChatBackend
    vision: ChatBackend
    single: ChatBackend

    def identities(self) -> dict[str, str]:
        return {"thinking": self.thinking.name, "vision": self.vision.name, "single": self.single.name}


class BackendFactory(Protocol):
    def __call__(self, entry: VideoEntry, question: QuestionEntry, config: ToolConfig) -> EpisodeBackends: ...


def _need_world(entry: VideoEntry) -> synthworld.SyntheticWorld:
    if entry.world is None:
        raise BackendError(f"video {entry.video.id} has no synthetic world for the oracle backend")
    return entry.world


def oracle_backends(entry: VideoEntry, question: QuestionEntry, config: ToolConfig) -> EpisodeBackends:
    world = _need_world(entry)
    return EpisodeBackends(
        synthworld.SeekPolicy(config, question.query, entry.video.duration),
        synthworld.OracleVision(world),
        synthworld.OracleSinglePass(world),
    )


def dense_scan_backends(entry: VideoEntry, question: QuestionEntry, config: ToolConfig) -> EpisodeBackends:
    """Fixed overview-then-full-skim script, used for budget sweeps."""
    world = _need_world(entry)
    script = synthworld.dense_scan_script(entry.video.duration, config)
    return EpisodeBackends(
        ScriptedThinker(script, "dense-scan"), synthworld.OracleVision(world), synthworld.OracleSinglePass(world)
    )


@dataclass
class ScriptedBackends:
    """Scripts keyed by ``video_id/question_id`` with a ``default`` fallback.

    File shape: ``{"episodes": {"v/q": [reply, ...]}, "default": [...], "single": "Answer: (A)"}``.
    """

    episodes: dict[str, list[str]] = field(default_factory=dict)
    default: list[str] = field(default_factory=lambda: ["Answer: UNKNOWN"])
    single: str = "Answer: UNKNOWN"

    @classmethod
    def load(cls, path: str | os.PathLike) -> ScriptedBackends:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(d.get("episodes", {}), d.get("default", ["Answer: UNKNOWN"]), d.get("single", "Answer: UNKNOWN"))

    def __call__(self, entry: VideoEntry, question: QuestionEntry, config: ToolConfig) -> EpisodeBackends:
        script = self.episodes.get(f"{entry.video.id}/{question.question_id}", self.default)
        vision = synthworld.OracleVision(entry.world) if entry.world else StaticVision()
        return EpisodeBackends(ScriptedThinker(script), vision, ScriptedThinker([self.single], "scripted-single"))


def http_backends(entry: VideoEntry, question: QuestionEntry, config: ToolConfig) -> EpisodeBackends:
    vision = HttpChatBackend(HttpEndpoint.from_env(vision=True))
    return EpisodeBackends(HttpChatBackend(HttpEndpoint.from_env()), vision, vision)


def backend_factory(name: str) -> BackendFactory:
    if name == "oracle":
        return oracle_backends
    if name == "dense":
        return dense_scan_backends
    if name == "http":
        return http_backends
    if name.startswith("scripted:"):
        return ScriptedBackends.load(name.split(":", 1)[1])
    raise ValueError(f"unknown backend {name!r}; expected oracle, dense, http or scripted:FILE")


_PROVIDERS: dict[tuple[str, str], FrameProvider] = {}


def frame_provider(entry: VideoEntry) -> FrameProvider:
    if entry.world is not None:
        return SyntheticFrameProvider()
    if entry.frame_root is not None:
        key = ("dir", str(entry.frame_root))
        if key not in _PROVIDERS:
            _PROVIDERS[key] = DirectoryFrameProvider(entry.frame_root)
        return _PROVIDERS[key]
    key = ("decoder", entry.decoder_command or "")
    if key not in _PROVIDERS:
        _PROVIDERS[key] = DecoderFrameProvider(entry.decoder_command or "")
    return _PROVIDERS[key]


# --- run modes and logs -----------------------------------------------------------

@dataclass(frozen=True)
class RunMode:
    kind: EpisodeMode = EpisodeMode.AGENT
    budget: Optional[int] = None
    source: Optional[Path] = None

    @classmethod
    def parse(cls, text: str) -> RunMode:
        if text == "agent":
            return cls()
        head, _, arg = text.partition(":")
        if head == "single" and arg.isdigit() and int(arg) >= 1:
            return cls(EpisodeMode.SINGLE_PASS, budget=int(arg))
        if head == "replay" and arg:
            return cls(EpisodeMode.REPLAY, source=Path(arg))
        raise ValueError(f"bad mode {text!r}; expected agent, single:BUDGET or replay:RUNDIR")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "budget": self.budget, "source": str(self.source) if self.source else None}


def log_name(video_id: str, question_id: str) -> str:
    return f"{video_id}__{question_id}.jsonl"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class EpisodeRecord:
    """What one trajectory log holds."""

    video: VideoMeta
    question_id: str
    query: Query
    mode: EpisodeMode
    config: dict[str, Any]
    backends: dict[str, str]
    turns: tuple[Turn, ...]
    final_answer: Optional[str]
    termination: str
    final_usage: Optional[TokenUsage] = None
    error: Optional[str] = None
    run_mode: dict[str, Any] = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return self.termination == ABORTED

    def episode(self) -> Episode:
        if self.aborted:
            raise ValueError(f"episode {self.video.id}/{self.question_id} was aborted")
        return Episode(
            self.video, self.query, self.turns, self.final_answer or "", Termination(self.termination),
            self.final_usage, self.mode,
        )

    def metrics(self) -> EpisodeMetrics:
        return trajectory_metrics(
            self.turns, self.final_usage, forced=self.termination == Termination.FORCED_ANSWER.value, mode=self.mode
        )

    def to_jsonl(self) -> str:
        header = {
            "record": "header",
            "video_id": self.video.id,
            "question_id": self.question_id,
            "video": self.video.to_dict(),
            "query": self.query.to_dict(),
            "mode": self.mode.value,
            "run_mode": self.run_mode,
            "config": self.config,
            "backends": self.backends,
        }
        lines = [canonical_json(header)]
        lines += [canonical_json({"record": "turn", **t.to_dict()}) for t in self.turns]
        footer = {
            "record": "footer",
            "final_answer": self.final_answer,
            "termination": self.termination,
            "final_usage": self.final_usage.to_dict() if self.final_usage else None,
            "error": self.error,
            "metrics": self.metrics().to_dict(),
        }
        lines.append(canonical_json(footer))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> EpisodeRecord:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not records or records[0].get("record") != "header" or records[-1].get("record") != "footer":
            raise ValueError("trajectory log must start with a header and end with a footer")
        h, f = records[0], records[-1]
        turns = tuple(Turn.from_dict({k: v for k, v in r.items() if k != "record"}) for r in records[1:-1])
        return cls(
            video=VideoMeta.from_dict(h["video"]),
            question_id=h["question_id"],
            query=Query.from_dict(h["query"]),
            mode=EpisodeMode(h["mode"]),
            config=h["config"],
            backends=h["backends"],
            turns=turns,
            final_answer=f["final_answer"],
            termination=f["termination"],
            final_usage=TokenUsage.from_dict(f["final_usage"]) if f.get("final_usage") else None,
            error=f.get("error"),
            run_mode=h.get("run_mode", {}),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> EpisodeRecord:
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


# --- reports ----------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    video_id: str
    question_id: str
    predicted: Optional[str]
    gold: Optional[str]
    correct: bool
    frames_unique: int
    frames_total: int
    turns: int
    tokens_in: int
    tokens_out: int
    termination: str
    error: Optional[str] = None

    @classmethod
    def from_record(cls, rec: EpisodeRecord) -> ReportRow:
        m = rec.metrics()
        predicted = None if rec.aborted else rec.final_answer
        return cls(
            rec.video.id, rec.question_id, predicted, rec.query.gold,
            (not rec.aborted) and grade(predicted, rec.query),
            m.frames_unique, m.frames_total, m.turns, m.tokens_in, m.tokens_out, rec.termination, rec.error,
        )


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def aggregate(rows: Sequence[ReportRow]) -> dict[str, float]:
    return {
        "episodes": len(rows),
        "accuracy": _mean([1.0 if r.correct else 0.0 for r in rows]),
        "mean_frames_unique": _mean([r.frames_unique for r in rows]),
        "mean_frames_total": _mean([r.frames_total for r in rows]),
        "mean_turns": _mean([r.turns for r in rows]),
        "mean_tokens_in": _mean([r.tokens_in for r in rows]),
        "mean_tokens_out": _mean([r.tokens_out for r in rows]),
        "mean_tokens": _mean([r.tokens_in + r.tokens_out for r in rows]),
        "aborted": sum(1 for r in rows if r.termination == ABORTED),
    }


@dataclass
class RunReport:
    rows: list[ReportRow]
    aggregates: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.video_id, r.question_id))
        self.aggregates = aggregate(self.rows)

    @property
    def accuracy(self) -> float:
        return self.aggregates["accuracy"]

    @property
    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if r.termination == ABORTED]

    def to_dict(self) -> dict[str, Any]:
        return {"aggregates": self.aggregates, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunReport:
        return cls([ReportRow(**r) for r in d["rows"]])

    def save(self, path: str | os.PathLike) -> None:
        _atomic_write(Path(path), json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> RunReport:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def failure_summary(self) -> str:
        if not self.failures:
            return "no aborted episodes"
        lines = [f"{len(self.failures)} aborted episode(s):"]
        lines += [f"  {r.video_id}/{r.question_id}: {r.error}" for r in self.failures]
        return "\n".join(lines)


def report_from_logs(run_dir: str | os.PathLike) -> RunReport:
    """Recompute a report from the trajectory logs alone."""
    folder = Path(run_dir) / "episodes"
    rows = [ReportRow.from_record(EpisodeRecord.load(p)) for p in sorted(folder.glob("*.jsonl"))]
    return RunReport(rows)


# --- execution --------------------------------------------------------------------

def _execute(
    entry: VideoEntry,
    question: QuestionEntry,
    config: ToolConfig,
    factory: BackendFactory,
    mode: RunMode,
) -> EpisodeRecord:
    video, query = entry.video, question.query
    base = dict(
        video=video, question_id=question.question_id, query=query, mode=mode.kind,
        config=config.to_dict(), run_mode=mode.to_dict(),
    )
    backends: dict[str, str] = {}
    try:
        bk = factory(entry, question, config)
        backends = bk.identities()
        provider = frame_provider(entry)
        if mode.kind is EpisodeMode.AGENT:
            session = AgentSession(config, bk.thinking, bk.vision, provider, subtitles=entry.subtitles)
            ep = run_episode(video, query, session)
        elif mode.kind is EpisodeMode.SINGLE_PASS:
            ep = run_single_pass(video, query, mode.budget or 1, bk.single, provider)
        else:
            src = EpisodeRecord.load(Path(mode.source) / "episodes" / log_name(video.id, question.question_id))
            ep = run_replay_single_pass(src.episode(), bk.single, provider, query)
    except EpisodeAborted as e:
        return EpisodeRecord(**base, backends=backends, turns=e.partial, final_answer=None,
                             termination=ABORTED, error=e.reason)
    except (BackendError, MediaError, EmptyFrameSet, OSError, ValueError) as e:
        return EpisodeRecord(**base, backends=backends, turns=(), final_answer=None,
                             termination=ABORTED, error=f"{type(e).__name__}: {e}")
    return EpisodeRecord(**base, backends=backends, turns=ep.turns, final_answer=ep.final_answer,
                         termination=ep.termination.value, final_usage=ep.final_usage)


def _completed(path: Path) -> Optional[EpisodeRecord]:
    if not path.exists():
        return None
    try:
        return EpisodeRecord.load(path)
    except (ValueError, KeyError, TypeError):
        log.warning("ignoring unreadable log %s; the episode will be rerun", path)
        return None


def run_benchmark(
    manifest: DatasetManifest,
    config: ToolConfig,
    backends: BackendFactory,
    mode: RunMode = RunMode(),
    out_dir: Optional[str | os.PathLike] = None,
    parallelism: int = 4,
    limit: Optional[int] = None,
    progress: Optional[Callable[[EpisodeRecord], None]] = None,
) -> RunReport:
    """Run every (video, question) pair; episodes with a complete log under ``out_dir`` are reused."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    pairs = manifest.pairs()
    if limit is not None:
        pairs = pairs[:limit]
    folder = Path(out_dir) / "episodes" if out_dir is not None else None

    def one(pair: tuple[VideoEntry, QuestionEntry]) -> EpisodeRecord:
        entry, q = pair
        path = folder / log_name(entry.video.id, q.question_id) if folder else None
        if path is not None and (done := _completed(path)) is not None:
            return done
        rec = _execute(entry, q, config, backends, mode)
        if path is not None:
            _atomic_write(path, rec.to_jsonl())
        if progress:
            progress(rec)
        return rec

    if parallelism == 1:
        records = [one(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(one, pairs))
    report = RunReport([ReportRow.from_record(r) for r in records])
    if out_dir is not None:
        report.save(Path(out_dir) / "report.json")
    for r in report.failures:
        log.warning("aborted %s/%s: %s", r.video_id, r.question_id, r.error)
    return report


def sweep_alpha(
    manifest: DatasetManifest,
    alphas: Sequence[int],
    backends: BackendFactory,
    mode: RunMode = RunMode(),
    out_dir: Optional[str | os.PathLike] = None,
    parallelism: int = 4,
    **config_kw,
) -> list[tuple[int, RunReport]]:
    if not alphas:
        raise ValueError("alphas must be non-empty")
    results = []
    for i, alpha in enumerate(alphas):
        config = ToolConfig(alpha, **config_kw)
        sub = Path(out_dir) / f"alpha_{i:02d}_{alpha}" if out_dir is not None else None
        results.append((alpha, run_benchmark(manifest, config, backends, mode, sub, parallelism)))
    if out_dir is not None:
        _atomic_write(Path(out_dir) / "sweep.tsv", sweep_table(results))
    return results


def sweep_table(results: Sequence[tuple[int, RunReport]]) -> str:
    lines = ["alpha\tframes\taccuracy"]
    for alpha, rep in results:
        lines.append(f"{alpha}\t{rep.aggregates['mean_frames_unique']:.2f}\t{rep.accuracy:.4f}")
    return "\n".join(lines) + "\n"


def write_synthetic_suite(
    out_dir: str | os.PathLike, tasks: int = 200, seed: int = 0, duration: float = 3600.0, n_scenes: int = 12
) -> Path:
    """Generate ``tasks`` worlds with consecutive seeds and a manifest pointing at them."""
    out = Path(out_dir)
    (out / "worlds").mkdir(parents=True, exist_ok=True)
    videos = []
    for s in range(seed, seed + tasks):
        world = synthworld.generate_world(s, duration, n_scenes)
        rel = f"worlds/world_{s:05d}.json"
        world.save(out / rel)
        questions = [
            {
                "question_id": synthworld.world_question_id(k),
                "question": n.question,
                "options": [{"label": lab, "text": txt} for lab, txt in n.options],
                "gold": n.gold,
            }
            for k, n in enumerate(world.needles)
        ]
        videos.append({"video_id": f"world_{s:05d}", "duration": world.duration, "world": rel, "questions": questions})
    path = out / "manifest.json"
    _atomic_write(path, json.dumps({"videos": videos}, indent=1) + "\n")
    return path


def tool_mask(text: str) -> frozenset[ToolKind]:
    kinds = {ToolKind(t.strip()) for t in text.split(",") if t.strip()}
    if ToolKind.ANSWER in kinds:
        kinds.discard(ToolKind.ANSWER)
    return frozenset(kinds)
