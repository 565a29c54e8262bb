"""Active video question answering: a reasoning model seeks frames through three sampling tools."""

from __future__ import annotations

from .model import Episode, EpisodeMetrics, Query, ToolCall, ToolConfig, ToolKind, VideoMeta

__all__ = ["Episode", "EpisodeMetrics", "Query", "ToolCall", "ToolConfig", "ToolKind", "VideoMeta"]
