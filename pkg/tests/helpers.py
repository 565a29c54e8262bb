"""Fixtures shared by several test modules."""

from __future__ import annotations

import json
from pathlib import Path

from seekloop.backend import BackendReply, ScriptedThinker
from seekloop.harness import EpisodeBackends
from seekloop.model import TokenUsage

THINK_USAGE = TokenUsage(100, 10)
VISION_USAGE = TokenUsage(50, 5)


def build_tiny_world():
    from seekloop.synthworld import Needle, Scene, SyntheticWorld

    q = "While the chemist mixes a fizzing compound, what color is the parcel that the courier hands over?"
    needle = Needle(
        start=300.0, end=306.0, attribute="red", scene="garage", actor="courier", object="parcel",
        question=q, options=(("A", "blue"), ("B", "red"), ("C", "green"), ("D", "white")), gold="B",
        distractors=("blue", "green", "white"),
    )
    return SyntheticWorld(
        seed=0,
        duration=600.0,
        scenes=(Scene("kitchen", 0.0, 200.0), Scene("garage", 200.0, 400.0), Scene("garden", 400.0, 600.0)),
        needles=(needle,),
        hints=("the baker kneads dough", "the chemist mixes a fizzing compound", "the poet recites verses"),
    )


class FixedUsageThinker(ScriptedThinker):
    def complete(self, messages):
        r = super().complete(messages)
        return BackendReply(r.text, THINK_USAGE)


class FixedUsageVision:
    name = "fixed-vision"

    def complete(self, messages):
        stamps = [img.label for m in messages for img in m.images]
        return BackendReply(" ".join(f"t={t:.1f}: frame." for t in stamps), VISION_USAGE)


OV = '<tool name="overview"/>'

# four episodes with hand-checkable metrics at alpha=1 on a 600 s video
FOUR_SCRIPTS = {
    "q1": [OV, OV, OV, "Answer: (B)"],
    "q2": [OV, '<tool name="skim" start="0" end="100"/>',
           '<tool name="skim" start="0" end="100"/>', '<tool name="skim" start="100" end="200"/>', "Answer: (B)"],
    "q3": [OV, OV, OV, "Answer: (C)"],
    "q4": [OV, OV + OV, OV, OV, "Answer: (B)"],
}
FOUR_EXPECTED = {
    "accuracy": 0.75,
    "mean_turns": 4.5,
    # q1: 48/16, q2: 28/24 (no skim stamp coincides with an overview stamp), q3: 48/16, q4: 80/16
    "mean_frames_total": (48 + 28 + 48 + 80) / 4,
    "mean_frames_unique": (16 + 24 + 16 + 16) / 4,
    # thinking calls x (100, 10) plus successful vision calls x (50, 5)
    "mean_tokens_in": (550 + 700 + 550 + 750) / 4,
    "mean_tokens_out": (55 + 70 + 55 + 75) / 4,
}


def four_factory(entry, question, config):
    script = FOUR_SCRIPTS[question.question_id]
    return EpisodeBackends(FixedUsageThinker(script), FixedUsageVision(), FixedUsageVision())


def write_world_manifest(folder: Path, world=None, question_ids=("q1", "q2", "q3", "q4")) -> Path:
    world = world or build_tiny_world()
    folder.mkdir(parents=True, exist_ok=True)
    world.save(folder / "tiny.json")
    n = world.needles[0]
    questions = [
        {"question_id": qid, "question": n.question,
         "options": [{"label": a, "text": b} for a, b in n.options], "gold": n.gold}
        for qid in question_ids
    ]
    manifest = {"videos": [{"video_id": "tiny", "duration": world.duration, "world": "tiny.json",
                            "questions": questions}]}
    path = folder / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


GOLDEN_SCRIPT = [
    "Get the storyline first.\n" + OV,
    'Check the handover closely.\n<tool name="focus" start="296" end="312" query="color of the parcel"/>',
    'Widen around it.\n<tool name="skim" start="250" end="350" query="courier"/>',
    'The parcel is red.\n<tool name="answer" text="(B)"/>',
]
GOLDEN_LOG = Path(__file__).parent / "data" / "golden_trajectory.jsonl"


def golden_log_text() -> str:
    """Trajectory log of the scripted overview, focus, skim, answer scenario on the tiny world."""
    from seekloop.agent import AgentSession, run_episode
    from seekloop.harness import EpisodeRecord
    from seekloop.media import SyntheticFrameProvider
    from seekloop.model import ToolConfig, VideoMeta
    from seekloop.synthworld import OracleVision

    world = build_tiny_world()
    video, query = VideoMeta("tiny", world.duration), world.needles[0].query
    thinker = ScriptedThinker(GOLDEN_SCRIPT, "golden-script")
    vision = OracleVision(world)
    cfg = ToolConfig(4)
    ep = run_episode(video, query, AgentSession(cfg, thinker, vision, SyntheticFrameProvider()))
    rec = EpisodeRecord(
        video=video, question_id="q0", query=query, mode=ep.mode, config=cfg.to_dict(),
        backends={"thinking": thinker.name, "vision": vision.name, "single": vision.name},
        turns=ep.turns, final_answer=ep.final_answer, termination=ep.termination.value,
        final_usage=ep.final_usage, run_mode={"kind": "agent", "budget": None, "source": None},
    )
    return rec.to_jsonl()
