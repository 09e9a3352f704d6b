"""Domain types: chunks, codec variants, devices, bandwidth, sessions, plans.

Times are integer milliseconds and sizes integer bytes throughout.  Every
type here is an immutable value; instances can be shared freely between
planner calls and simulated sessions.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Sequence, Union

from .errors import EmptyFeed, InvalidPlan


class ChunkId(NamedTuple):
    """Position of a chunk in the feed; tuple ordering is playback order."""

    video_index: int
    chunk_index: int

    def __str__(self):
        return f"{self.video_index}:{self.chunk_index}"


class DecodeUnit(str, Enum):
    NETWORK = "NETWORK"
    VIDEO_DECODER = "VIDEO_DECODER"
    NEURAL_ACCEL = "NEURAL_ACCEL"


@dataclass(frozen=True)
class PixelCodec:
    bitrate_kbps: int

    @property
    def label(self):
        return f"pixel@{self.bitrate_kbps}"


@dataclass(frozen=True)
class PromptCodec:
    @property
    def label(self):
        return "prompt"


CodecKind = Union[PixelCodec, PromptCodec]


def default_unit_for(codec: CodecKind) -> DecodeUnit:
    if isinstance(codec, PromptCodec):
        return DecodeUnit.NEURAL_ACCEL
    return DecodeUnit.VIDEO_DECODER


@dataclass(frozen=True)
class ChunkVariant:
    codec: CodecKind
    size: int
    quality: float
    decode_latency: int
    decode_unit: DecodeUnit = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.decode_unit is None:
            object.__setattr__(self, "decode_unit", default_unit_for(self.codec))
        else:
            object.__setattr__(self, "decode_unit", DecodeUnit(self.decode_unit))

    @property
    def is_prompt(self) -> bool:
        return isinstance(self.codec, PromptCodec)

    @property
    def bitrate_kbps(self) -> int | None:
        return getattr(self.codec, "bitrate_kbps", None)

    def scaled(self, factor: float) -> ChunkVariant:
        """Copy with the size multiplied by ``factor`` (rounded up, at least 1 byte)."""
        return ChunkVariant(
            self.codec,
            max(1, math.ceil(self.size * factor)),
            self.quality,
            self.decode_latency,
            self.decode_unit,
        )


@dataclass(frozen=True)
class Chunk:
    id: ChunkId
    playout_duration: int
    variants: tuple[ChunkVariant, ...]

    def __post_init__(self):
        object.__setattr__(self, "id", ChunkId(*self.id))
        object.__setattr__(self, "variants", tuple(self.variants))

    def lowest_pixel_index(self) -> int:
        """Index of the cheapest pixel variant; falls back to the smallest variant."""
        pixel = [(v.bitrate_kbps, i) for i, v in enumerate(self.variants) if not v.is_prompt]
        if pixel:
            return min(pixel)[1]
        return min(range(len(self.variants)), key=lambda i: (self.variants[i].size, i))


@dataclass(frozen=True)
class VideoManifest:
    video_id: str
    chunks: tuple[Chunk, ...]

    def __post_init__(self):
        object.__setattr__(self, "chunks", tuple(self.chunks))

    @property
    def duration(self) -> int:
        return sum(c.playout_duration for c in self.chunks)


Feed = Sequence[VideoManifest]


@dataclass(frozen=True)
class DeviceModel:
    """Serial resources of the viewer device.

    NETWORK carries one download at a time; each decode unit runs one job at
    a time in FIFO order without preemption.
    """

    units: frozenset = frozenset(DecodeUnit)

    def __post_init__(self):
        object.__setattr__(self, "units", frozenset(DecodeUnit(u) for u in self.units))

    @property
    def decode_units(self) -> tuple[DecodeUnit, ...]:
        return tuple(sorted(u for u in self.units if u is not DecodeUnit.NETWORK))

    def supports(self, variant: ChunkVariant) -> bool:
        return variant.decode_unit in self.units


@dataclass(frozen=True)
class BandwidthModel:
    """Piecewise-constant throughput; the last sample extends forever.

    Throughput is in kbps, which is numerically bits per millisecond.
    """

    samples: tuple[tuple[int, float], ...]
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        samples = tuple((int(t), r) for t, r in self.samples)
        if not samples:
            raise ValueError("bandwidth model needs at least one sample")
        if samples[0][0] != 0:
            raise ValueError("first bandwidth sample must start at 0 ms")
        for (t0, _), (t1, _) in zip(samples, samples[1:]):
            if t1 <= t0:
                raise ValueError(f"sample times must increase strictly ({t0} then {t1})")
        for t, r in samples:
            if not r > 0 or not math.isfinite(r):
                raise ValueError(f"throughput at {t} ms must be positive, got {r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "_starts", tuple(t for t, _ in samples))

    @classmethod
    def constant(cls, kbps: float) -> BandwidthModel:
        return cls(((0, kbps),))

    @property
    def is_constant(self) -> bool:
        return len(self.samples) == 1

    def segment_index(self, t: int) -> int:
        return bisect.bisect_right(self._starts, t) - 1

    def throughput_at(self, t: int) -> float:
        return self.samples[max(0, self.segment_index(t))][1]

    def bits_between(self, start: int, end: int) -> float:
        """Integral of throughput over ``[start, end]`` in bits."""
        if end <= start:
            return 0
        total = 0
        i = max(0, self.segment_index(start))
        t = start
        while t < end:
            seg_end = self.samples[i + 1][0] if i + 1 < len(self.samples) else end
            stop = min(seg_end, end)
            total += (stop - t) * self.samples[i][1]
            t = stop
            i += 1
        return total


class SessionEntry(NamedTuple):
    video_id: str
    watch_duration: int


@dataclass(frozen=True)
class SessionTrace:
    """How long (content milliseconds) the viewer watches each video before swiping."""

    entries: tuple[SessionEntry, ...]

    def __post_init__(self):
        entries = tuple(SessionEntry(str(v), int(w)) for v, w in self.entries)
        for e in entries:
            if e.watch_duration < 0:
                raise ValueError(f"negative watch duration for video {e.video_id!r}")
        object.__setattr__(self, "entries", entries)

    def __iter__(self) -> Iterator[SessionEntry]:
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class Weights:
    quality: float = 1.0
    variation: float = 1.0
    stall: float = 3.0
    bandwidth: float = 0.3

    def __post_init__(self):
        for name in ("quality", "variation", "stall", "bandwidth"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"weight {name} must be finite and >= 0, got {value}")

    def scaled(self, c: float) -> Weights:
        return Weights(self.quality * c, self.variation * c, self.stall * c, self.bandwidth * c)


class PlanStep(NamedTuple):
    chunk: ChunkId
    variant_index: int


@dataclass(frozen=True)
class Plan:
    """Download decisions; list order is download order, not playback order."""

    steps: tuple[PlanStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "steps", tuple(PlanStep(ChunkId(*c), int(v)) for c, v in self.steps)
        )

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def chunks(self) -> tuple[ChunkId, ...]:
        return tuple(s.chunk for s in self.steps)

    def validate(self, feed: Feed) -> None:
        seen = set()
        for step in self.steps:
            if step.chunk in seen:
                raise InvalidPlan(f"chunk {step.chunk} appears twice in plan")
            seen.add(step.chunk)
            chunk = find_chunk(feed, step.chunk)
            if chunk is None:
                raise InvalidPlan(f"chunk {step.chunk} is not in the feed")
            if not 0 <= step.variant_index < len(chunk.variants):
                raise InvalidPlan(
                    f"variant index {step.variant_index} out of range for chunk {step.chunk}"
                )


def find_chunk(feed: Feed, cid: ChunkId) -> Chunk | None:
    v, c = cid
    if 0 <= v < len(feed) and 0 <= c < len(feed[v].chunks):
        return feed[v].chunks[c]
    return None


def chunk_at(feed: Feed, cid: ChunkId) -> Chunk:
    chunk = find_chunk(feed, cid)
    if chunk is None:
        raise KeyError(cid)
    return chunk


def playback_order(feed: Feed) -> list[ChunkId]:
    if not feed:
        raise EmptyFeed("feed contains no videos")
    return [ChunkId(v, c) for v, video in enumerate(feed) for c in range(len(video.chunks))]


def iter_from(feed: Feed, start: ChunkId) -> Iterator[ChunkId]:
    """Chunk ids in playback order beginning at ``start``, crossing video boundaries."""
    v, c = start
    while v < len(feed):
        while c < len(feed[v].chunks):
            yield ChunkId(v, c)
            c += 1
        v += 1
        c = 0


def validate_manifest(m: VideoManifest) -> list[str]:
    """All invariant violations of one manifest; an empty list means valid."""
    problems = []
    if not m.video_id:
        problems.append("empty video id")
    video_indexes = {c.id.video_index for c in m.chunks}
    if len(video_indexes) > 1:
        problems.append(f"video {m.video_id}: chunks disagree on video index {sorted(video_indexes)}")
    for pos, chunk in enumerate(m.chunks):
        where = f"video {m.video_id} chunk {chunk.id.chunk_index}"
        if chunk.id.chunk_index != pos:
            problems.append(f"{where}: chunk ids not contiguous (expected {pos})")
        if chunk.playout_duration <= 0:
            problems.append(f"{where}: non-positive playout duration")
        if not chunk.variants:
            problems.append(f"{where}: empty variants")
            continue
        prompts = sum(1 for v in chunk.variants if v.is_prompt)
        if prompts > 1:
            problems.append(f"{where}: duplicate prompt variant")
        rates = [v.bitrate_kbps for v in chunk.variants if not v.is_prompt]
        if len(set(rates)) != len(rates):
            problems.append(f"{where}: duplicate bitrates")
        elif rates != sorted(rates):
            problems.append(f"{where}: pixel bitrates not ascending")
        for i, v in enumerate(chunk.variants):
            if v.size <= 0:
                problems.append(f"{where} variant {i}: non-positive size")
            if not 0 <= v.quality <= 1:
                problems.append(f"{where} variant {i}: quality outside [0, 1]")
            if v.decode_latency < 0:
                problems.append(f"{where} variant {i}: negative decode latency")
            if isinstance(v.codec, PixelCodec) and v.codec.bitrate_kbps <= 0:
                problems.append(f"{where} variant {i}: non-positive bitrate")
            if v.decode_unit is not default_unit_for(v.codec):
                problems.append(f"{where} variant {i}: {v.codec.label} routed to {v.decode_unit.value}")
    return problems


def scale_feed(feed: Feed, factor: float) -> list[VideoManifest]:
    return [
        VideoManifest(
            video.video_id,
            tuple(
                Chunk(c.id, c.playout_duration, tuple(v.scaled(factor) for v in c.variants))
                for c in video.chunks
            ),
        )
        for video in feed
    ]


def without_prompts(feed: Feed) -> list[VideoManifest]:
    """The feed restricted to pixel variants (hybrid coding switched off)."""
    out = []
    for video in feed:
        chunks = []
        for c in video.chunks:
            pixel = tuple(v for v in c.variants if not v.is_prompt)
            chunks.append(Chunk(c.id, c.playout_duration, pixel or c.variants))
        out.append(VideoManifest(video.video_id, tuple(chunks)))
    return out
