"""The think-act-observe loop, the single-pass baseline and frame replay."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import sampling
from .backend import BackendError, BackendReply, ChatBackend, Image, Message, Text
from .media import FrameProvider, MediaError, SubtitleCue, fetch_frame, full_track_text, slice_subtitles
from .media import DEFAULT_QUERY_CHAR_BUDGET, DEFAULT_TOOL_CHAR_BUDGET
from .model import (
    Episode,
    EpisodeMode,
    Observation,
    Query,
    Termination,
    TokenUsage,
    ToolCall,
    ToolConfig,
    ToolKind,
    Turn,
    VideoMeta,
)
from .protocol import (
    NoLabelFound,
    PromptTemplates,
    ProtocolError,
    fmt_seconds,
    parse_answer,
    parse_tool_plan,
    render_initial_query,
    render_question,
    render_round_instruction,
    render_system_instruction,
    serialize_tool_call,
)

log = logging.getLogger(__name__)


class EpisodeAborted(Exception):
    """The thinking backend failed hard; ``partial`` holds the turns completed so far."""

    def __init__(self, reason: str, video: VideoMeta, query: Query, partial: Sequence[Turn]):
        super().__init__(reason)
        self.reason = reason
        self.video = video
        self.query = query
        self.partial = tuple(partial)


class EmptyFrameSet(ValueError):
    pass


@dataclass
class AgentSession:
    config: ToolConfig
    thinking: ChatBackend
    vision: ChatBackend
    provider: FrameProvider
    templates: PromptTemplates = field(default_factory=PromptTemplates.default)
    subtitles: Optional[Sequence[SubtitleCue]] = None
    tool_char_budget: int = DEFAULT_TOOL_CHAR_BUDGET
    query_char_budget: int = DEFAULT_QUERY_CHAR_BUDGET
    transcript: list[Message] = field(default_factory=list)

    @property
    def subtitles_in_query(self) -> bool:
        return bool(self.subtitles) and len(full_track_text(self.subtitles)) <= self.query_char_budget

    def start(self, video: VideoMeta, query: Query) -> None:
        subs = full_track_text(self.subtitles) if self.subtitles else None
        self.transcript = [
            Message.text("system", render_system_instruction(self.config, self.templates)),
            Message.text(
                "user",
                render_initial_query(video, query, subs, self.templates, self.query_char_budget),
            ),
        ]


def _plan_interval(call: ToolCall, config: ToolConfig, duration: float) -> tuple[sampling.Interval, list[float]]:
    if call.kind is ToolKind.OVERVIEW:
        interval = sampling.Interval(0.0, float(duration))
        return interval, sampling.uniform_timestamps(duration, config.overview_frames)
    if call.kind is ToolKind.SKIM:
        interval = sampling.normalize_skim((call.start, call.end), config, duration)
        return interval, sampling.uniform_timestamps_in(interval, config.skim_frames)
    interval = sampling.normalize_focus((call.start, call.end), config, duration)
    return interval, sampling.fps_timestamps(interval, config.focus_fps)


def _adjust_note(call: ToolCall, interval: sampling.Interval, config: ToolConfig) -> Optional[str]:
    if call.kind is ToolKind.OVERVIEW:
        return None
    requested = (call.start, call.end)
    if abs(requested[0] - interval.start) < 1e-9 and abs(requested[1] - interval.end) < 1e-9:
        return None
    if call.kind is ToolKind.SKIM and (requested[1] - requested[0]) < config.skim_min_span:
        why = f"widened to the {config.skim_min_span:g} s minimum skim span"
    elif call.kind is ToolKind.FOCUS and (requested[1] - requested[0]) > config.focus_max_span:
        why = f"cut to the {config.focus_max_span:g} s focus limit"
    else:
        why = "clamped to the video bounds"
    return (
        f"Interval ({fmt_seconds(requested[0])}, {fmt_seconds(requested[1])}) was {why}: "
        f"now ({fmt_seconds(interval.start)}, {fmt_seconds(interval.end)})."
    )


def execute_tool(call: ToolCall, session: AgentSession, video: VideoMeta, query: Optional[Query] = None) -> Observation:
    config = session.config
    if call.kind is ToolKind.ANSWER or not config.enabled(call.kind):
        return Observation.failed(call, f"tool {call.kind.value} cannot be executed")
    try:
        interval, stamps = _plan_interval(call, config, video.duration)
    except (sampling.IntervalError, ValueError) as e:
        return Observation.failed(call, f"invalid interval: {e}")
    note = _adjust_note(call, interval, config)

    excerpt = None
    if session.subtitles and not session.subtitles_in_query:
        excerpt = slice_subtitles(session.subtitles, interval, session.tool_char_budget)
    try:
        frames = [fetch_frame(session.provider, video, t) for t in stamps]
    except (MediaError, ValueError, OSError) as e:
        return Observation.failed(call, f"frame fetch failed: {e}", interval=(interval.start, interval.end), note=note)

    sub_query = call.sub_query
    if call.kind is ToolKind.SKIM and not sub_query:
        sub_query = query.question if query else "the question"
    slots = {
        "start": fmt_seconds(interval.start),
        "end": fmt_seconds(interval.end),
        "timestamps": ", ".join(fmt_seconds(t) for t in stamps),
        "subtitle_excerpt": excerpt or "(none)",
    }
    if call.kind is not ToolKind.OVERVIEW:
        slots["sub_query"] = sub_query
    prompt = session.templates.tool_prompt(call.kind).format(**slots).strip()
    parts: list = [Text(prompt)]
    parts += [Image(f, t) for f, t in zip(frames, stamps)]
    try:
        reply = session.vision.complete([Message("user", parts)])
    except BackendError as e:
        return Observation.failed(call, f"vision backend failed: {e}", interval=(interval.start, interval.end), note=note)
    if not reply.text.strip():
        return Observation.failed(
            call, "vision backend returned an empty description",
            interval=(interval.start, interval.end), note=note, usage=reply.usage,
        )
    return Observation(
        tool=call,
        sampled_timestamps=tuple(stamps),
        description=reply.text.strip(),
        subtitle_excerpt=excerpt,
        usage=reply.usage,
        interval=(interval.start, interval.end),
        note=note,
    )


def format_observations(turn: int, observations: Sequence[Observation]) -> str:
    blocks = [f"Observations for turn {turn}:"]
    for i, obs in enumerate(observations, start=1):
        blocks.append(f"[{i}] {serialize_tool_call(obs.tool)}")
        if obs.note:
            blocks.append(f"Note: {obs.note}")
        if obs.error:
            blocks.append(f"Error: {obs.error}")
            continue
        blocks.append(obs.description)
        if obs.subtitle_excerpt:
            blocks.append(f"Subtitles:\n{obs.subtitle_excerpt}")
    return "\n".join(blocks)


def _ask(session: AgentSession, video: VideoMeta, query: Query, turns: list[Turn]) -> BackendReply:
    try:
        reply = session.thinking.complete(list(session.transcript))
    except BackendError as e:
        raise EpisodeAborted(f"thinking backend failed: {e}", video, query, turns) from e
    session.transcript.append(Message.text("assistant", reply.text))
    return reply


def _final_answer(text: str, query: Query) -> str:
    try:
        return parse_answer(text, query)
    except NoLabelFound:
        return text.strip()


def run_episode(video: VideoMeta, query: Query, session: AgentSession) -> Episode:
    config = session.config
    session.start(video, query)
    turns: list[Turn] = []
    for t in range(1, config.max_turns + 1):
        session.transcript.append(Message.text("user", render_round_instruction(t, config, session.templates)))
        reply = _ask(session, video, query, turns)
        usage, calls, diagnostics = reply.usage, 1, []
        try:
            plan = parse_tool_plan(reply.text, config)
        except ProtocolError as first:
            diagnostics.append(f"re-prompted: {first}")
            session.transcript.append(
                Message.text("user", session.templates.repair.format(reason=str(first)).strip())
            )
            reply = _ask(session, video, query, turns)
            usage, calls = usage + reply.usage, 2
            try:
                plan = parse_tool_plan(reply.text, config)
            except ProtocolError as second:
                error = f"tool call rejected twice: {second}"
                session.transcript.append(Message.text("user", f"Observations for turn {t}:\nError: {error}"))
                turns.append(Turn(t, reply.text.strip(), (), (), usage, calls, tuple(diagnostics), error))
                continue
        diagnostics += plan.diagnostics
        if plan.is_sole_answer:
            turns.append(Turn(t, plan.thought, plan.calls, (), usage, calls, tuple(diagnostics)))
            answer = _final_answer(plan.calls[0].answer_text, query)
            return Episode(video, query, tuple(turns), answer, Termination.ANSWERED_IN_LOOP)
        # sequential by design: observation order must equal plan order
        observations = tuple(execute_tool(c, session, video, query) for c in plan.calls)
        session.transcript.append(Message.text("user", format_observations(t, observations)))
        turns.append(Turn(t, plan.thought, plan.calls, observations, usage, calls, tuple(diagnostics)))

    session.transcript.append(Message.text("user", session.templates.direct_answer.format().strip()))
    reply = _ask(session, video, query, turns)
    text = reply.text
    try:
        plan = parse_tool_plan(text, config)
        if plan.is_sole_answer:
            text = plan.calls[0].answer_text
    except ProtocolError:
        pass
    return Episode(video, query, tuple(turns), _final_answer(text, query), Termination.FORCED_ANSWER, reply.usage)


SINGLE_PASS_INSTRUCTION = (
    "The frames above were sampled from a {duration}-second video at the labeled timestamps. "
    "Answer the question below from these frames alone. End with \"Answer: <answer>\" "
    "(for multiple-choice, the option letter).\n\nQuestion:\n{question}"
)


def _single_call(
    video: VideoMeta,
    query: Query,
    stamps: Sequence[float],
    backend: ChatBackend,
    provider: FrameProvider,
    mode: EpisodeMode,
) -> Episode:
    frames = [fetch_frame(provider, video, t) for t in stamps]
    text = SINGLE_PASS_INSTRUCTION.format(duration=fmt_seconds(video.duration), question=render_question(query))
    parts: list = [Image(f, t) for f, t in zip(frames, stamps)] + [Text(text)]
    try:
        reply = backend.complete([Message("user", parts)])
    except BackendError as e:
        raise EpisodeAborted(f"single-pass backend failed: {e}", video, query, ()) from e
    answer = _final_answer(reply.text, query)
    call = ToolCall.answer(answer)
    obs = Observation(call, tuple(stamps), reply.text.strip() or "(empty reply)", usage=TokenUsage())
    turn = Turn(1, "", (call,), (obs,), reply.usage, 1)
    return Episode(video, query, (turn,), answer, Termination.ANSWERED_IN_LOOP, mode=mode)


def run_single_pass(
    video: VideoMeta, query: Query, frame_budget: int, backend: ChatBackend, provider: FrameProvider
) -> Episode:
    """One call over ``frame_budget`` uniformly sampled frames plus the question."""
    if frame_budget < 1:
        raise ValueError("frame_budget must be at least 1")
    stamps = sampling.uniform_timestamps(video.duration, frame_budget)
    return _single_call(video, query, stamps, backend, provider, EpisodeMode.SINGLE_PASS)


def viewed_timestamps(episode: Episode) -> list[float]:
    """Sorted distinct timestamps (millisecond granularity) that an episode looked at."""
    seen: dict[int, float] = {}
    for turn in episode.turns:
        for obs in turn.observations:
            for t in obs.sampled_timestamps:
                seen.setdefault(round(t * 1000), t)
    return [seen[k] for k in sorted(seen)]


def run_replay_single_pass(
    source: Episode, backend: ChatBackend, provider: FrameProvider, query: Optional[Query] = None
) -> Episode:
    """Re-answer in one call over exactly the frames ``source`` viewed."""
    stamps = viewed_timestamps(source)
    if not stamps:
        raise EmptyFrameSet(f"episode for {source.video.id} viewed no frames")
    return _single_call(source.video, query or source.query, stamps, backend, provider, EpisodeMode.REPLAY)
