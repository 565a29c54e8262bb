"""Text contract with the thinking backend: prompt templates, tool-call tags, answer parsing.

Tool calls are self-closing tags with double-quoted attributes::

    tag  = '<tool' ws attr+ ws? '/>'
    attr = key '="' escaped '"'        key in {name, start, end, query, text}

Attribute values escape ``& " < >`` as XML entities; times are seconds.
"""

from __future__ import annotations

import html
import math
import os
import re
import string
from dataclasses import dataclass, fields
from importlib import resources
from typing import Optional, Sequence

from .model import Query, ToolCall, ToolConfig, ToolKind, VideoMeta
from .media import DEFAULT_QUERY_CHAR_BUDGET

# --- templates -----------------------------------------------------------------

TEMPLATE_SLOTS: dict[str, frozenset[str]] = {
    "system_instruction": frozenset({"toolkit", "max_turns", "max_calls"}),
    "toolkit_overview": frozenset({"frames"}),
    "toolkit_skim": frozenset({"frames", "min_span"}),
    "toolkit_focus": frozenset({"fps", "max_span"}),
    "toolkit_answer": frozenset(),
    "initial_user_query": frozenset({"duration", "subtitles", "question"}),
    "round_instruction": frozenset({"turn", "max_turns"}),
    "tool_overview": frozenset({"start", "end", "timestamps", "subtitle_excerpt"}),
    "tool_skim": frozenset({"start", "end", "timestamps", "subtitle_excerpt", "sub_query"}),
    "tool_focus": frozenset({"start", "end", "timestamps", "subtitle_excerpt", "sub_query"}),
    "direct_answer": frozenset(),
    "repair": frozenset({"reason"}),
}


class TemplateError(Exception):
    pass


def _check_slots(name: str, text: str) -> None:
    try:
        found = [f for _, f, _, _ in string.Formatter().parse(text) if f is not None]
    except ValueError as e:
        raise TemplateError(f"template {name}: {e}") from e
    expected = TEMPLATE_SLOTS[name]
    unknown = set(found) - expected
    if unknown:
        raise TemplateError(f"template {name} has unknown slots {sorted(unknown)}")
    for slot in expected:
        n = found.count(slot)
        if n != 1:
            raise TemplateError(f"template {name} must use {{{slot}}} exactly once, found {n}")


@dataclass(frozen=True)
class PromptTemplates:
    system_instruction: str
    toolkit_overview: str
    toolkit_skim: str
    toolkit_focus: str
    toolkit_answer: str
    initial_user_query: str
    round_instruction: str
    tool_overview: str
    tool_skim: str
    tool_focus: str
    direct_answer: str
    repair: str

    def __post_init__(self):
        for f in fields(self):
            _check_slots(f.name, getattr(self, f.name))

    @classmethod
    def default(cls) -> PromptTemplates:
        pkg = resources.files("seekloop") / "templates"
        return cls(**{f.name: (pkg / f"{f.name}.txt").read_text(encoding="utf-8") for f in fields(cls)})

    @classmethod
    def from_directory(cls, path: str | os.PathLike, fallback: bool = True) -> PromptTemplates:
        """Load ``<name>.txt`` files; missing ones come from the defaults when ``fallback``."""
        base = cls.default() if fallback else None
        values = {}
        for f in fields(cls):
            p = os.path.join(path, f"{f.name}.txt")
            if os.path.exists(p):
                with open(p, encoding="utf-8") as fh:
                    values[f.name] = fh.read()
            elif base is not None:
                values[f.name] = getattr(base, f.name)
            else:
                raise TemplateError(f"missing template file {p}")
        return cls(**values)

    def tool_prompt(self, kind: ToolKind) -> str:
        return {
            ToolKind.OVERVIEW: self.tool_overview,
            ToolKind.SKIM: self.tool_skim,
            ToolKind.FOCUS: self.tool_focus,
        }[kind]


def fmt_seconds(t: float) -> str:
    return f"{t:.1f}"


def render_system_instruction(config: ToolConfig, templates: Optional[PromptTemplates] = None) -> str:
    tpl = templates or PromptTemplates.default()
    lines = []
    if config.enabled(ToolKind.OVERVIEW):
        lines.append(tpl.toolkit_overview.format(frames=config.overview_frames).strip())
    if config.enabled(ToolKind.SKIM):
        lines.append(
            tpl.toolkit_skim.format(frames=config.skim_frames, min_span=f"{config.skim_min_span:g}").strip()
        )
    if config.enabled(ToolKind.FOCUS):
        lines.append(
            tpl.toolkit_focus.format(fps=f"{config.focus_fps:g}", max_span=f"{config.focus_max_span:g}").strip()
        )
    lines.append(tpl.toolkit_answer.format().strip())
    return tpl.system_instruction.format(
        toolkit="\n".join(lines), max_turns=config.max_turns, max_calls=config.max_calls_per_turn
    ).strip()


SUBTITLES_VIA_TOOLS = "Subtitles are available through the tools for the spans you inspect."
NO_SUBTITLES = "(none)"


def render_question(query: Query) -> str:
    if not query.options:
        return query.question
    opts = "\n".join(f"({label}) {text}" for label, text in query.options)
    return f"{query.question}\n{opts}"


def render_initial_query(
    video: VideoMeta,
    query: Query,
    subtitles: Optional[str] = None,
    templates: Optional[PromptTemplates] = None,
    char_budget: int = DEFAULT_QUERY_CHAR_BUDGET,
) -> str:
    tpl = templates or PromptTemplates.default()
    if subtitles is None or not subtitles.strip():
        subs = NO_SUBTITLES
    elif len(subtitles) <= char_budget:
        subs = subtitles
    else:
        subs = SUBTITLES_VIA_TOOLS
    return tpl.initial_user_query.format(
        duration=fmt_seconds(video.duration), subtitles=subs, question=render_question(query)
    ).strip()


def render_round_instruction(turn: int, config: ToolConfig, templates: Optional[PromptTemplates] = None) -> str:
    tpl = templates or PromptTemplates.default()
    return tpl.round_instruction.format(turn=turn, max_turns=config.max_turns).strip()


# --- tool-call grammar -------------------------------------------------------------

class ProtocolError(Exception):
    """Base class for every rejected plan."""


class NoToolCallFound(ProtocolError):
    def __init__(self):
        super().__init__("no tool call found")


class MixedAnswerAndTools(ProtocolError):
    def __init__(self):
        super().__init__("the answer tag must be the only tag in its turn")


class MalformedTag(ProtocolError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"malformed tag at offset {position}: {reason}")
        self.position = position
        self.reason = reason


class DisabledTool(ProtocolError):
    def __init__(self, kind: ToolKind):
        super().__init__(f"tool {kind.value} is not available")
        self.kind = kind


ATTR_KEYS = ("name", "start", "end", "query", "text")
_TAG_START = re.compile(r"<tool(?=[\s/>])")
_ATTR = re.compile(r'\s+([A-Za-z_][A-Za-z0-9_]*)="([^"]*)"')
_TAG_END = re.compile(r"\s*/>")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)")
_ANSWER_LINE = re.compile(r"^[ \t]*answer[ \t]*:[ \t]*(.+?)[ \t]*$", re.IGNORECASE | re.MULTILINE)

_ALLOWED = {
    ToolKind.OVERVIEW: (set(), {"name"}),
    ToolKind.SKIM: ({"start", "end"}, {"name", "start", "end", "query"}),
    ToolKind.FOCUS: ({"start", "end", "query"}, {"name", "start", "end", "query"}),
    ToolKind.ANSWER: ({"text"}, {"name", "text"}),
}


@dataclass(frozen=True)
class ParsedPlan:
    calls: tuple[ToolCall, ...]
    diagnostics: tuple[str, ...] = ()
    thought: str = ""

    @property
    def is_sole_answer(self) -> bool:
        return len(self.calls) == 1 and self.calls[0].kind is ToolKind.ANSWER


def _number(value: str, key: str, pos: int) -> float:
    if not _NUMBER.fullmatch(value.strip()):
        raise MalformedTag(pos, f"attribute {key} is not a number: {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise MalformedTag(pos, f"attribute {key} is not finite")
    return x


def _read_tag(text: str, pos: int) -> tuple[dict[str, str], int]:
    i = pos + len("<tool")
    attrs: dict[str, str] = {}
    while True:
        end = _TAG_END.match(text, i)
        if end:
            if not attrs:
                raise MalformedTag(pos, "tag has no attributes")
            return attrs, end.end()
        m = _ATTR.match(text, i)
        if not m:
            raise MalformedTag(pos, "expected key=\"value\" or '/>'")
        key, value = m.group(1), m.group(2)
        if key not in ATTR_KEYS:
            raise MalformedTag(pos, f"unknown attribute {key!r}")
        if key in attrs:
            raise MalformedTag(pos, f"duplicate attribute {key!r}")
        attrs[key] = html.unescape(value)
        i = m.end()


def _to_call(attrs: dict[str, str], pos: int) -> ToolCall:
    if "name" not in attrs:
        raise MalformedTag(pos, "missing name attribute")
    try:
        kind = ToolKind(attrs["name"])
    except ValueError:
        raise MalformedTag(pos, f"unknown tool {attrs['name']!r}") from None
    required, allowed = _ALLOWED[kind]
    missing = required - attrs.keys()
    if missing:
        raise MalformedTag(pos, f"{kind.value} requires {', '.join(sorted(missing))}")
    extra = attrs.keys() - allowed
    if extra:
        raise MalformedTag(pos, f"{kind.value} does not take {', '.join(sorted(extra))}")
    if kind is ToolKind.OVERVIEW:
        return ToolCall.overview()
    if kind is ToolKind.ANSWER:
        return ToolCall.answer(attrs["text"])
    start = _number(attrs["start"], "start", pos)
    end = _number(attrs["end"], "end", pos)
    if not start < end:
        raise MalformedTag(pos, f"start ({start:g}) must be less than end ({end:g})")
    if kind is ToolKind.SKIM:
        return ToolCall.skim(start, end, attrs.get("query"))
    return ToolCall.focus(start, end, attrs["query"])


def find_tags(model_text: str) -> list[tuple[int, int, ToolCall]]:
    """Every tag in document order as ``(start, end, call)``; raises on the first malformed one."""
    out = []
    i = 0
    while True:
        m = _TAG_START.search(model_text, i)
        if not m:
            return out
        attrs, end = _read_tag(model_text, m.start())
        out.append((m.start(), end, _to_call(attrs, m.start())))
        i = end


def extract_thought(model_text: str, spans: Sequence[tuple[int, int]] = ()) -> str:
    pieces, i = [], 0
    for a, b in spans:
        pieces.append(model_text[i:a])
        i = b
    pieces.append(model_text[i:])
    return re.sub(r"[ \t]+\n", "\n", "".join(pieces)).strip()


def parse_tool_plan(model_text: str, config: ToolConfig) -> ParsedPlan:
    tags = find_tags(model_text)
    diagnostics: list[str] = []
    if not tags:
        # a bare "Answer: ..." line counts as a sole answer
        lines = list(_ANSWER_LINE.finditer(model_text))
        if not lines:
            raise NoToolCallFound()
        last = lines[-1]
        diagnostics.append("answer taken from an 'Answer:' line; no tags present")
        thought = extract_thought(model_text, [(last.start(), last.end())])
        return ParsedPlan((ToolCall.answer(last.group(1)),), tuple(diagnostics), thought)
    calls = [c for _, _, c in tags]
    answers = sum(1 for c in calls if c.kind is ToolKind.ANSWER)
    if answers and len(calls) > 1:
        raise MixedAnswerAndTools()
    for c in calls:
        if not config.enabled(c.kind):
            raise DisabledTool(c.kind)
    if len(calls) > config.max_calls_per_turn:
        diagnostics.append(
            f"dropped {len(calls) - config.max_calls_per_turn} tool call(s) beyond the limit of "
            f"{config.max_calls_per_turn} per turn"
        )
        calls = calls[: config.max_calls_per_turn]
    thought = extract_thought(model_text, [(a, b) for a, b, _ in tags])
    return ParsedPlan(tuple(calls), tuple(diagnostics), thought)


def _attr(value: str) -> str:
    return html.escape(value, quote=True).replace("&#x27;", "'")


def serialize_tool_call(call: ToolCall) -> str:
    parts = [f'name="{call.kind.value}"']
    if call.start is not None:
        parts.append(f'start="{fmt_seconds(call.start)}"')
        parts.append(f'end="{fmt_seconds(call.end)}"')
    if call.sub_query is not None:
        parts.append(f'query="{_attr(call.sub_query)}"')
    if call.answer_text is not None:
        parts.append(f'text="{_attr(call.answer_text)}"')
    return f"<tool {' '.join(parts)}/>"


# --- answers -------------------------------------------------------------------------

class NoLabelFound(ValueError):
    pass


_MARKER = re.compile(r"answer\s*:", re.IGNORECASE)
_LABEL = re.compile(r"(?<![A-Za-z0-9])\(?([A-Z])\)?(?![A-Za-z0-9])")


def parse_answer(model_text: str, query: Query) -> str:
    """Extract the final answer: an option label for multiple-choice, free text otherwise.

    Multiple-choice: a label right after the last ``Answer:`` marker wins;
    otherwise the last standalone option label in the text; otherwise an exact
    match against one option's text.
    """
    markers = list(_MARKER.finditer(model_text))
    if not query.is_mcq:
        if markers:
            return model_text[markers[-1].end():].strip()
        return model_text.strip()
    labels = set(query.labels)
    if markers:
        m = re.match(r"\s*\(?([A-Z])\)?(?![A-Za-z0-9])", model_text[markers[-1].end():])
        if m and m.group(1) in labels:
            return m.group(1)
    found = [m.group(1) for m in _LABEL.finditer(model_text) if m.group(1) in labels]
    if found:
        return found[-1]
    tail = model_text[markers[-1].end():] if markers else model_text
    tail = tail.strip().strip(".").strip().lower()
    for label, text in query.options or ():
        if tail == text.strip().lower():
            return label
    raise NoLabelFound(f"no option label in reply {model_text[:80]!r}")


def grade(predicted: Optional[str], query: Query) -> bool:
    if predicted is None or query.gold is None:
        return False
    if query.is_mcq:
        return predicted == query.gold
    return predicted.strip().lower() == query.gold.strip().lower()
