from __future__ import annotations

import random
import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from seekloop.model import Query, ToolCall, ToolConfig, ToolKind, VideoMeta
from seekloop.protocol import (
    SUBTITLES_VIA_TOOLS,
    DisabledTool,
    MalformedTag,
    MixedAnswerAndTools,
    NoLabelFound,
    NoToolCallFound,
    PromptTemplates,
    ProtocolError,
    TemplateError,
    grade,
    parse_answer,
    parse_tool_plan,
    render_initial_query,
    render_system_instruction,
    serialize_tool_call,
)

C4 = ToolConfig(4)
MCQ = Query("Which?", tuple((lab, f"opt {lab}") for lab in "ABCD"), "C")


def toolkit(text):
    return text.split("# Toolkit", 1)[1].split("# Operational Rules", 1)[0]


def test_system_instruction_full_mask():
    text = render_system_instruction(C4)
    kit = toolkit(text)
    for name in ("overview", "skim", "focus", "answer"):
        assert f'name="{name}"' in kit
    assert "64 frames" in kit and "16 seconds" in kit
    assert "20 turns" in text and "At most 4 tags" in text


def test_system_instruction_masks():
    kit = toolkit(render_system_instruction(ToolConfig(4, tool_mask=frozenset({ToolKind.OVERVIEW, ToolKind.FOCUS}))))
    assert "skim" not in kit and 'name="focus"' in kit
    kit = toolkit(render_system_instruction(ToolConfig(4, tool_mask=frozenset())))
    assert 'name="answer"' in kit and "overview" not in kit


def test_initial_query():
    text = render_initial_query(VideoMeta("v", 3600), MCQ)
    assert "3600" in text and all(f"({lab}) opt {lab}" in text for lab in "ABCD")
    open_ended = render_initial_query(VideoMeta("v", 60), Query("Why?"))
    assert "Why?" in open_ended and "(A)" not in open_ended
    over = render_initial_query(VideoMeta("v", 60), MCQ, "x" * 100, char_budget=50)
    assert SUBTITLES_VIA_TOOLS in over and "xxxx" not in over
    under = render_initial_query(VideoMeta("v", 60), MCQ, "[00:01] hi", char_budget=50)
    assert "[00:01] hi" in under


def test_template_directory_override(tmp_path):
    (tmp_path / "repair.txt").write_text("fix it: {reason}")
    t = PromptTemplates.from_directory(tmp_path)
    assert t.repair == "fix it: {reason}"
    assert t.direct_answer == PromptTemplates.default().direct_answer
    (tmp_path / "repair.txt").write_text("no slot here")
    with pytest.raises(TemplateError):
        PromptTemplates.from_directory(tmp_path)
    (tmp_path / "repair.txt").write_text("{reason} {reason}")
    with pytest.raises(TemplateError):
        PromptTemplates.from_directory(tmp_path)


def test_grammar_examples():
    p = parse_tool_plan('<tool name="skim" start="120" end="300"/>', C4)
    assert p.calls == (ToolCall.skim(120.0, 300.0),)
    p = parse_tool_plan(
        '<tool name="focus" start="80" end="90" query="what does the sign say"/>\n'
        '<tool name="focus" start="200" end="210" query="who is there"/>', C4,
    )
    assert [c.start for c in p.calls] == [80.0, 200.0] and all(c.kind is ToolKind.FOCUS for c in p.calls)
    p = parse_tool_plan('<tool name="answer" text="(C)"/>', C4)
    assert p.is_sole_answer and p.calls[0].answer_text == "(C)"
    with pytest.raises(MixedAnswerAndTools):
        parse_tool_plan('I will look around. <tool name="answer" text="B"/> <tool name="skim" start="0" end="100"/>', C4)


def test_thought_is_text_outside_tags():
    p = parse_tool_plan('Look near the end.\n<tool name="overview"/>\nThen decide.', C4)
    assert "Look near the end." in p.thought and "Then decide." in p.thought and "<tool" not in p.thought


def test_grammar_errors():
    with pytest.raises(NoToolCallFound):
        parse_tool_plan("I am thinking.", C4)
    with pytest.raises(MalformedTag):
        parse_tool_plan('<tool name="skim" start="abc" end="5"/>', C4)
    with pytest.raises(MalformedTag):
        parse_tool_plan('<tool name="zoom"/>', C4)
    with pytest.raises(MalformedTag):
        parse_tool_plan('<tool name="skim" start="1"', C4)
    with pytest.raises(DisabledTool):
        parse_tool_plan('<tool name="skim" start="1" end="9"/>', ToolConfig(4, tool_mask=frozenset({ToolKind.FOCUS})))


def test_extra_calls_dropped_with_diagnostic():
    text = "\n".join(f'<tool name="skim" start="{i}" end="{i + 20}"/>' for i in range(6))
    p = parse_tool_plan(text, C4)
    assert len(p.calls) == 4 and p.diagnostics


def test_bare_answer_line_is_sole_answer():
    p = parse_tool_plan("I have seen enough.\nAnswer: (B)", C4)
    assert p.is_sole_answer and p.calls[0].answer_text == "(B)"


def test_serialize_examples():
    assert serialize_tool_call(ToolCall.overview()) == '<tool name="overview"/>'
    assert serialize_tool_call(ToolCall.skim(94.5, 110.5)) == '<tool name="skim" start="94.5" end="110.5"/>'
    assert serialize_tool_call(ToolCall.answer('say "hi"')) == '<tool name="answer" text="say &quot;hi&quot;"/>'


def test_parse_answer_examples():
    assert parse_answer("...so the answer is (B).", MCQ) == "B"
    assert parse_answer("Answer: D", MCQ) == "D"
    assert parse_answer("It could be A or C; final: C", MCQ) == "C"
    assert grade(parse_answer("It could be A or C; final: C", MCQ), MCQ)
    assert parse_answer("clearly opt B", MCQ) == "B"
    with pytest.raises(NoLabelFound):
        parse_answer("no idea", MCQ)
    assert parse_answer("Answer: a red kite", Query("What flies?")) == "a red kite"


texts = st.text(alphabet=string.printable + "é∂", max_size=40)
times = st.floats(0, 100000, allow_nan=False).map(lambda x: round(x, 1))


@st.composite
def tool_calls(draw):
    kind = draw(st.sampled_from(list(ToolKind)))
    if kind is ToolKind.OVERVIEW:
        return ToolCall.overview()
    if kind is ToolKind.ANSWER:
        return ToolCall.answer(draw(texts))
    a = draw(times)
    b = round(a + draw(st.floats(0.1, 5000, allow_nan=False)), 1)
    if kind is ToolKind.SKIM:
        return ToolCall.skim(a, b, draw(st.one_of(st.none(), texts)))
    return ToolCall.focus(a, b, draw(texts))


@given(tool_calls())
def test_serialize_parse_identity(call):
    cfg = ToolConfig(4)
    assert parse_tool_plan(serialize_tool_call(call), cfg).calls == (call,)


FRAGMENTS = ['<tool', ' name="', 'overview', 'skim', 'focus', 'answer', '"', ' start="', ' end="', '12.5',
             '-3', 'x', ' query="', ' text="', '/>', '>', '<', '&quot;', '\n', 'Answer:', ' (B)', '=', ' ']


@given(st.lists(st.sampled_from(FRAGMENTS), max_size=30).map("".join) | st.binary(max_size=60).map(
    lambda b: b.decode("utf-8", "replace")))
def test_parse_tool_plan_fails_only_in_enumerated_ways(text):
    try:
        parse_tool_plan(text, C4)
    except ProtocolError:
        pass


@given(st.text(max_size=60))
def test_parse_answer_in_option_set(text):
    try:
        assert parse_answer(text, MCQ) in MCQ.labels
    except NoLabelFound:
        pass


def fuzz_parse(n: int, seed: int = 0) -> dict[str, int]:
    """Run ``n`` random inputs through parse_tool_plan and count outcome kinds."""
    rng = random.Random(seed)
    kinds: dict[str, int] = {}
    for _ in range(n):
        if rng.random() < 0.5:
            text = "".join(rng.choice(FRAGMENTS) for _ in range(rng.randint(0, 30)))
        else:
            text = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 80))).decode("utf-8", "replace")
        try:
            parse_tool_plan(text, C4)
            kind = "ok"
        except ProtocolError as e:
            kind = type(e).__name__
        kinds[kind] = kinds.get(kind, 0) + 1
    return kinds


def test_fuzz_counts_cover_errors():
    kinds = fuzz_parse(2000)
    assert set(kinds) <= {"ok", "NoToolCallFound", "MixedAnswerAndTools", "MalformedTag", "DisabledTool"}
    assert kinds.get("MalformedTag") and kinds.get("NoToolCallFound")
