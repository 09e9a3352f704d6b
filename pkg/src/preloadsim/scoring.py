"""Chunk scores and plan utility.

A chunk scores ``w_q*q - w_v*v - w_s*stall_s - w_b*megabits``: stall is
converted to seconds and bandwidth cost to megabits so that weights of
order one are balanced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import ChunkId, ChunkVariant, Feed, Weights, chunk_at
from .timeline import PlaybackState, ScheduleResult

MS_PER_SECOND = 1000.0
BITS_PER_MEGABIT = 1e6


@dataclass(frozen=True)
class ChunkMetrics:
    quality: float
    variation: float
    stall: int
    bandwidth: int


def stall_seconds(stall_ms) -> float:
    return stall_ms / MS_PER_SECOND


def megabits(size_bytes) -> float:
    return size_bytes * 8 / BITS_PER_MEGABIT


def chunk_score(m: ChunkMetrics, w: Weights) -> float:
    return (
        w.quality * m.quality
        - w.variation * m.variation
        - w.stall * stall_seconds(m.stall)
        - w.bandwidth * megabits(m.bandwidth)
    )


def variation(cid: ChunkId, quality: float, known: Mapping[ChunkId, float]) -> float:
    """Quality change from the preceding chunk of the same video.

    Zero for a video's first chunk, and when the predecessor's quality is
    not known.
    """
    if cid.chunk_index == 0:
        return 0.0
    prev = known.get(ChunkId(cid.video_index, cid.chunk_index - 1))
    if prev is None:
        return 0.0
    return abs(quality - prev)


def chunk_metrics(
    schedule: ScheduleResult,
    chosen: Mapping[ChunkId, ChunkVariant],
    context: Mapping[ChunkId, float] | None = None,
) -> list[ChunkMetrics]:
    known = dict(context or {})
    known.update((cid, v.quality) for cid, v in chosen.items())
    out = []
    for t in schedule.timings:
        variant = chosen[t.chunk]
        out.append(
            ChunkMetrics(
                quality=variant.quality,
                variation=variation(t.chunk, variant.quality, known),
                stall=t.stall,
                bandwidth=variant.size,
            )
        )
    return out


def plan_utility(
    schedule: ScheduleResult,
    chosen: Mapping[ChunkId, ChunkVariant],
    w: Weights,
    context: Mapping[ChunkId, float] | None = None,
) -> float:
    """Sum of chunk scores over the scheduled chunks, in playback order.

    ``context`` supplies qualities of chunks outside the schedule (already
    buffered or playing) so that variation across the boundary is counted.
    """
    return sum(chunk_score(m, w) for m in chunk_metrics(schedule, chosen, context))


def total_score(metrics: Iterable[ChunkMetrics], w: Weights) -> float:
    return sum(chunk_score(m, w) for m in metrics)


def quality_context(state: PlaybackState, feed: Feed) -> dict[ChunkId, float]:
    """Known qualities around the playhead: buffered chunks and the playing one."""
    ctx = {
        cid: chunk_at(feed, cid).variants[b.variant_index].quality
        for cid, b in state.buffered.items()
    }
    head = state.playhead
    if state.last_quality is not None and head.chunk_index > 0:
        ctx[ChunkId(head.video_index, head.chunk_index - 1)] = state.last_quality
    return ctx


def schedule_utility(
    schedule: ScheduleResult, feed: Feed, w: Weights, state: PlaybackState | None = None
) -> float:
    chosen = {t.chunk: chunk_at(feed, t.chunk).variants[t.variant_index] for t in schedule.timings}
    context = quality_context(state, feed) if state is not None else None
    return plan_utility(schedule, chosen, w, context)
