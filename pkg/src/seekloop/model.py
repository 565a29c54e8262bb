"""Shared domain types: tool calls, observations, turns, episodes and budgets."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence


class ToolKind(str, enum.Enum):
    OVERVIEW = "overview"
    SKIM = "skim"
    FOCUS = "focus"
    ANSWER = "answer"


VIEW_TOOLS = (ToolKind.OVERVIEW, ToolKind.SKIM, ToolKind.FOCUS)


class Termination(str, enum.Enum):
    ANSWERED_IN_LOOP = "AnsweredInLoop"
    FORCED_ANSWER = "ForcedAnswer"


class EpisodeMode(str, enum.Enum):
    AGENT = "agent"
    SINGLE_PASS = "single_pass"
    REPLAY = "replay"


class InvalidValue(ValueError):
    """A domain value violates its construction invariants."""


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0
    estimated: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise InvalidValue("token counts must be non-negative")

    def __add__(self, other: TokenUsage) -> TokenUsage:
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
            self.estimated or other.estimated,
        )

    @classmethod
    def total(cls, usages: Iterable[TokenUsage]) -> TokenUsage:
        out = cls()
        for u in usages:
            out = out + u
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "estimated": self.estimated,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> TokenUsage:
        return cls(int(d["input_tokens"]), int(d["output_tokens"]), bool(d["estimated"]))


@dataclass(frozen=True)
class VideoMeta:
    id: str
    duration: float
    frame_source: str = ""
    subtitles: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise InvalidValue("video id must be non-empty")
        if not self.duration > 0:
            raise InvalidValue(f"video duration must be positive, got {self.duration}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "duration": self.duration,
            "frame_source": self.frame_source,
            "subtitles": self.subtitles,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> VideoMeta:
        return cls(d["id"], float(d["duration"]), d.get("frame_source", ""), d.get("subtitles"))


@dataclass(frozen=True)
class Query:
    question: str
    options: Optional[tuple[tuple[str, str], ...]] = None
    gold: Optional[str] = None

    def __post_init__(self):
        if self.options is not None:
            opts = tuple((str(label), str(text)) for label, text in self.options)
            object.__setattr__(self, "options", opts)
            expected = [chr(ord("A") + i) for i in range(len(opts))]
            if [label for label, _ in opts] != expected:
                raise InvalidValue(
                    f"option labels must be consecutive capitals from A, got {[l for l, _ in opts]}"
                )

    @property
    def is_mcq(self) -> bool:
        return bool(self.options)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.options or ())

    def to_dict(self) -> dict[str, Any]:
        return {
            "question": self.question,
            "options": [list(o) for o in self.options] if self.options is not None else None,
            "gold": self.gold,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Query:
        opts = d.get("options")
        return cls(
            d["question"],
            tuple((o[0], o[1]) for o in opts) if opts is not None else None,
            d.get("gold"),
        )


@dataclass(frozen=True)
class ToolCall:
    kind: ToolKind
    start: Optional[float] = None
    end: Optional[float] = None
    sub_query: Optional[str] = None
    answer_text: Optional[str] = None

    def __post_init__(self):
        kind = ToolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        has_interval = self.start is not None or self.end is not None
        if kind is ToolKind.OVERVIEW:
            if has_interval or self.sub_query is not None or self.answer_text is not None:
                raise InvalidValue("overview takes no arguments")
        elif kind is ToolKind.ANSWER:
            if self.answer_text is None:
                raise InvalidValue("answer requires answer_text")
            if has_interval or self.sub_query is not None:
                raise InvalidValue("answer carries only answer_text")
        else:
            if self.start is None or self.end is None:
                raise InvalidValue(f"{kind.value} requires start and end")
            if self.answer_text is not None:
                raise InvalidValue(f"{kind.value} takes no answer_text")
            if kind is ToolKind.FOCUS and self.sub_query is None:
                raise InvalidValue("focus requires a sub_query")

    @classmethod
    def overview(cls) -> ToolCall:
        return cls(ToolKind.OVERVIEW)

    @classmethod
    def skim(cls, start: float, end: float, sub_query: Optional[str] = None) -> ToolCall:
        return cls(ToolKind.SKIM, float(start), float(end), sub_query)

    @classmethod
    def focus(cls, start: float, end: float, sub_query: str) -> ToolCall:
        return cls(ToolKind.FOCUS, float(start), float(end), sub_query)

    @classmethod
    def answer(cls, text: str) -> ToolCall:
        return cls(ToolKind.ANSWER, answer_text=text)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value}
        if self.start is not None:
            d["start"] = self.start
            d["end"] = self.end
        if self.sub_query is not None:
            d["sub_query"] = self.sub_query
        if self.answer_text is not None:
            d["answer_text"] = self.answer_text
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ToolCall:
        return cls(
            ToolKind(d["kind"]),
            d.get("start"),
            d.get("end"),
            d.get("sub_query"),
            d.get("answer_text"),
        )


@dataclass(frozen=True)
class Observation:
    """Result of one executed tool call.

    ``tool`` echoes the call as the thinking backend requested it; ``interval``
    is the span actually sampled after normalization, and ``note`` states any
    adjustment so that it can be reported back to the model.
    """

    tool: ToolCall
    sampled_timestamps: tuple[float, ...] = ()
    description: str = ""
    subtitle_excerpt: Optional[str] = None
    usage: TokenUsage = field(default_factory=TokenUsage)
    error: Optional[str] = None
    interval: Optional[tuple[float, float]] = None
    note: Optional[str] = None

    def __post_init__(self):
        stamps = tuple(float(t) for t in self.sampled_timestamps)
        object.__setattr__(self, "sampled_timestamps", stamps)
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise InvalidValue("sampled timestamps must be strictly increasing")
        if (self.error is not None) == bool(self.description):
            raise InvalidValue("exactly one of error and description must be set")
        if self.interval is not None:
            object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))

    @classmethod
    def failed(cls, tool: ToolCall, error: str, **kw) -> Observation:
        return cls(tool, description="", error=error, **kw)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": self.tool.to_dict(),
            "interval": list(self.interval) if self.interval is not None else None,
            "note": self.note,
            "timestamps": list(self.sampled_timestamps),
            "description": self.description,
            "subtitle_excerpt": self.subtitle_excerpt,
            "usage": self.usage.to_dict(),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Observation:
        return cls(
            tool=ToolCall.from_dict(d["tool"]),
            sampled_timestamps=tuple(d["timestamps"]),
            description=d["description"],
            subtitle_excerpt=d.get("subtitle_excerpt"),
            usage=TokenUsage.from_dict(d["usage"]),
            error=d.get("error"),
            interval=tuple(d["interval"]) if d.get("interval") is not None else None,
            note=d.get("note"),
        )


def _is_sole_answer(plan: tuple[ToolCall, ...]) -> bool:
    return len(plan) == 1 and plan[0].kind is ToolKind.ANSWER


@dataclass(frozen=True)
class Turn:
    """One think-act-observe triplet.

    ``usage`` and ``model_calls`` cover the thinking backend only (a turn with a
    malformed-plan re-prompt makes two calls). A turn whose plan could not be
    repaired has an empty plan, no observations and ``error`` set.
    """

    index: int
    thought: str
    plan: tuple[ToolCall, ...]
    observations: tuple[Observation, ...] = ()
    usage: TokenUsage = field(default_factory=TokenUsage)
    model_calls: int = 1
    diagnostics: tuple[str, ...] = ()
    error: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "plan", tuple(self.plan))
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        if self.index < 1:
            raise InvalidValue("turn index is 1-based")

    @property
    def is_sole_answer(self) -> bool:
        return _is_sole_answer(self.plan)

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "thought": self.thought,
            "plan": [c.to_dict() for c in self.plan],
            "observations": [o.to_dict() for o in self.observations],
            "usage": self.usage.to_dict(),
            "model_calls": self.model_calls,
            "diagnostics": list(self.diagnostics),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Turn:
        return cls(
            index=int(d["index"]),
            thought=d["thought"],
            plan=tuple(ToolCall.from_dict(c) for c in d["plan"]),
            observations=tuple(Observation.from_dict(o) for o in d["observations"]),
            usage=TokenUsage.from_dict(d["usage"]),
            model_calls=int(d["model_calls"]),
            diagnostics=tuple(d.get("diagnostics", ())),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class EpisodeMetrics:
    frames_unique: int = 0
    frames_total: int = 0
    turns: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    model_calls: int = 0
    vision_calls: int = 0
    tokens_estimated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "frames_unique": self.frames_unique,
            "frames_total": self.frames_total,
            "turns": self.turns,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "model_calls": self.model_calls,
            "vision_calls": self.vision_calls,
            "tokens_estimated": self.tokens_estimated,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EpisodeMetrics:
        return cls(**d)


@dataclass(frozen=True)
class Episode:
    video: VideoMeta
    query: Query
    turns: tuple[Turn, ...]
    final_answer: str
    termination: Termination
    final_usage: Optional[TokenUsage] = None
    mode: EpisodeMode = EpisodeMode.AGENT

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        object.__setattr__(self, "termination", Termination(self.termination))
        object.__setattr__(self, "mode", EpisodeMode(self.mode))
        for i, turn in enumerate(self.turns, start=1):
            if turn.index != i:
                raise InvalidValue("turn indices must be consecutive from 1")
        answered = bool(self.turns) and self.turns[-1].is_sole_answer
        if answered != (self.termination is Termination.ANSWERED_IN_LOOP):
            raise InvalidValue("AnsweredInLoop iff the last plan is a sole answer")
        if self.termination is Termination.FORCED_ANSWER and self.final_usage is None:
            raise InvalidValue("a forced answer records the usage of its final call")
        if self.mode is EpisodeMode.AGENT:
            for turn in self.turns:
                expected = 0 if (turn.is_sole_answer or turn.error) else len(turn.plan)
                if len(turn.observations) != expected:
                    raise InvalidValue(f"turn {turn.index}: observations do not align with plan")

    @property
    def metrics(self) -> EpisodeMetrics:
        return episode_metrics(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "video": self.video.to_dict(),
            "query": self.query.to_dict(),
            "turns": [t.to_dict() for t in self.turns],
            "final_answer": self.final_answer,
            "termination": self.termination.value,
            "final_usage": self.final_usage.to_dict() if self.final_usage else None,
            "metrics": self.metrics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Episode:
        fu = d.get("final_usage")
        return cls(
            video=VideoMeta.from_dict(d["video"]),
            query=Query.from_dict(d["query"]),
            turns=tuple(Turn.from_dict(t) for t in d["turns"]),
            final_answer=d["final_answer"],
            termination=Termination(d["termination"]),
            final_usage=TokenUsage.from_dict(fu) if fu else None,
            mode=EpisodeMode(d.get("mode", "agent")),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Episode:
        return cls.from_dict(json.loads(text))


def canonical_json(obj: Any) -> str:
    """Compact JSON keeping insertion order; dict builders above fix the field order."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


_MASK_ORDER = {k: i for i, k in enumerate(VIEW_TOOLS)}


@dataclass(frozen=True)
class ToolConfig:
    """Tool budgets, all derived from the single scale factor ``alpha``."""

    alpha: int
    max_turns: int = 20
    tool_mask: frozenset[ToolKind] = frozenset(VIEW_TOOLS)
    max_calls_per_turn: int = 4
    overview_frames: int = field(init=False)
    skim_min_span: float = field(init=False)
    skim_frames: int = field(init=False)
    focus_fps: float = field(init=False)
    focus_max_span: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.alpha, bool) or not isinstance(self.alpha, int) or self.alpha < 1:
            raise InvalidValue(f"alpha must be a positive integer, got {self.alpha!r}")
        if self.max_turns < 1:
            raise InvalidValue("max_turns must be at least 1")
        if self.max_calls_per_turn < 1:
            raise InvalidValue("max_calls_per_turn must be at least 1")
        mask = frozenset(ToolKind(k) for k in self.tool_mask) - {ToolKind.ANSWER}
        object.__setattr__(self, "tool_mask", mask)
        a = self.alpha
        object.__setattr__(self, "overview_frames", 16 * a)
        object.__setattr__(self, "skim_min_span", float(4 * a))
        object.__setattr__(self, "skim_frames", 4 * a)
        object.__setattr__(self, "focus_fps", 1.0)
        object.__setattr__(self, "focus_max_span", float(4 * a))

    def enabled(self, kind: ToolKind) -> bool:
        return kind is ToolKind.ANSWER or kind in self.tool_mask

    @property
    def enabled_tools(self) -> tuple[ToolKind, ...]:
        return tuple(sorted(self.tool_mask, key=_MASK_ORDER.__getitem__)) + (ToolKind.ANSWER,)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "max_turns": self.max_turns,
            "tool_mask": [k.value for k in sorted(self.tool_mask, key=_MASK_ORDER.__getitem__)],
            "max_calls_per_turn": self.max_calls_per_turn,
            "overview_frames": self.overview_frames,
            "skim_min_span": self.skim_min_span,
            "skim_frames": self.skim_frames,
            "focus_fps": self.focus_fps,
            "focus_max_span": self.focus_max_span,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ToolConfig:
        # derived fields are recomputed, never trusted from the file
        return cls(
            alpha=int(d["alpha"]),
            max_turns=int(d.get("max_turns", 20)),
            tool_mask=frozenset(ToolKind(k) for k in d.get("tool_mask", [t.value for t in VIEW_TOOLS])),
            max_calls_per_turn=int(d.get("max_calls_per_turn", 4)),
        )


def derive_tool_budgets(alpha: int, **overrides) -> ToolConfig:
    """Build the tool configuration for scale factor ``alpha`` (N=20, full mask by default)."""
    return ToolConfig(alpha=alpha, **overrides)


def _ms(t: float) -> int:
    return round(t * 1000)


def episode_metrics(episode: Episode) -> EpisodeMetrics:
    return trajectory_metrics(
        episode.turns,
        episode.final_usage,
        forced=episode.termination is Termination.FORCED_ANSWER,
        mode=episode.mode,
    )


def trajectory_metrics(
    turns: Sequence[Turn],
    final_usage: Optional[TokenUsage] = None,
    forced: bool = False,
    mode: EpisodeMode = EpisodeMode.AGENT,
) -> EpisodeMetrics:
    """Metrics over any run of turns, including the partial trajectory of an aborted episode."""
    stamps = [t for turn in turns for obs in turn.observations for t in obs.sampled_timestamps]
    usages = [turn.usage for turn in turns]
    usages += [obs.usage for turn in turns for obs in turn.observations]
    if final_usage is not None:
        usages.append(final_usage)
    total = TokenUsage.total(usages)
    model_calls = sum(turn.model_calls for turn in turns) + (1 if forced else 0)
    vision_calls = 0
    if mode is EpisodeMode.AGENT:
        vision_calls = sum(1 for turn in turns for obs in turn.observations if obs.error is None)
    return EpisodeMetrics(
        frames_unique=len({_ms(t) for t in stamps}),
        frames_total=len(stamps),
        turns=len(turns),
        tokens_in=total.input_tokens,
        tokens_out=total.output_tokens,
        model_calls=model_calls,
        vision_calls=vision_calls,
        tokens_estimated=total.estimated,
    )
