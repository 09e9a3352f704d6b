"""Codec profiles: per-second size, quality and decode cost per encoding level.

The default profiles are seeded from measured keyframe quality (LPIPS,
lower is better) and keyframe sizes of a pixel codec and the prompt codec:

    bitrate  prompt LPIPS  prompt KB  pixel LPIPS  pixel KB
    200      0.459         8.8        0.543        7.4
    400      0.459         8.8        0.510        11.2
    600      0.459         8.8        0.494        14.8
    1200     0.459         8.8        0.454        27.7

Quality is ``1 - LPIPS``; 900 kbps is linearly interpolated between the
600 and 1200 rows.  Keyframe sizes only inform the prompt level: whole
chunk sizes are ``bytes per second * playout seconds``, so pixel chunks
are sized by their bitrate rather than extrapolated from keyframes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..model import ChunkVariant, DecodeUnit, PixelCodec, PromptCodec

KEYFRAME_TABLE = {
    # bitrate: (prompt_lpips, prompt_kb, pixel_lpips, pixel_kb)
    200: (0.459, 8.8, 0.543, 7.4),
    400: (0.459, 8.8, 0.510, 11.2),
    600: (0.459, 8.8, 0.494, 14.8),
    1200: (0.459, 8.8, 0.454, 27.7),
}

DEFAULT_PIXEL_BITRATES = (200, 400, 600, 900, 1200)
PIXEL_DECODE_MS_PER_SECOND = 1
PROMPT_DECODE_MS_PER_SECOND = 1500
PROMPT_BYTES_PER_SECOND = 8800
PROMPT_TEXT_BYTES = 200


@dataclass(frozen=True)
class ProfileLevel:
    bitrate_kbps: int | None  # None marks the prompt level
    size_per_second: int
    quality: float
    decode_latency_per_second: int
    decode_unit: DecodeUnit
    fixed_bytes: int = 0

    @property
    def codec(self):
        if self.bitrate_kbps is None:
            return PromptCodec()
        return PixelCodec(self.bitrate_kbps)

    def variant(self, playout_ms: int, size_factor: float = 1.0) -> ChunkVariant:
        seconds = playout_ms / 1000
        size = math.ceil(self.size_per_second * seconds * size_factor) + self.fixed_bytes
        return ChunkVariant(
            codec=self.codec,
            size=max(1, size),
            quality=self.quality,
            decode_latency=math.ceil(self.decode_latency_per_second * seconds),
            decode_unit=self.decode_unit,
        )


@dataclass(frozen=True)
class CodecProfile:
    name: str
    levels: tuple[ProfileLevel, ...]

    def variants(self, playout_ms: int, size_factor: float = 1.0) -> list[ChunkVariant]:
        return [lvl.variant(playout_ms, size_factor) for lvl in self.levels]


def _interp_lpips(bitrate: int) -> float:
    if bitrate in KEYFRAME_TABLE:
        return KEYFRAME_TABLE[bitrate][2]
    rates = sorted(KEYFRAME_TABLE)
    lo = max(r for r in rates if r < bitrate)
    hi = min(r for r in rates if r > bitrate)
    a, b = KEYFRAME_TABLE[lo][2], KEYFRAME_TABLE[hi][2]
    return a + (b - a) * (bitrate - lo) / (hi - lo)


def pixel_profile(bitrates=DEFAULT_PIXEL_BITRATES) -> CodecProfile:
    levels = tuple(
        ProfileLevel(
            bitrate_kbps=r,
            size_per_second=r * 1000 // 8,
            quality=round(1 - _interp_lpips(r), 3),
            decode_latency_per_second=PIXEL_DECODE_MS_PER_SECOND,
            decode_unit=DecodeUnit.VIDEO_DECODER,
        )
        for r in sorted(bitrates)
    )
    return CodecProfile("pixel", levels)


def prompt_profile() -> CodecProfile:
    lpips = KEYFRAME_TABLE[1200][0]
    level = ProfileLevel(
        bitrate_kbps=None,
        size_per_second=PROMPT_BYTES_PER_SECOND,
        quality=round(1 - lpips, 3),
        decode_latency_per_second=PROMPT_DECODE_MS_PER_SECOND,
        decode_unit=DecodeUnit.NEURAL_ACCEL,
        fixed_bytes=PROMPT_TEXT_BYTES,
    )
    return CodecProfile("prompt", (level,))


def default_profiles() -> tuple[CodecProfile, CodecProfile]:
    return pixel_profile(), prompt_profile()
