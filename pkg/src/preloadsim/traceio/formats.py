"""File formats for manifests, bandwidth traces and session traces.

Manifest: one JSON document per feed::

    {"schema_version": 1,
     "videos": [{"video_id": "v000",
                 "chunks": [{"index": 0, "playout_ms": 1000,
                             "variants": [{"codec": "pixel", "bitrate_kbps": 200,
                                           "size": 25000, "quality": 0.457,
                                           "decode_ms": 1,
                                           "decode_unit": "VIDEO_DECODER"}, ...]}]}]}

Bandwidth trace: ``timestamp_ms,throughput_kbps`` per line, header optional.
Session trace: ``video_id,watch_ms`` per line, header optional.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..errors import InvalidManifest, ParseError
from ..model import (
    BandwidthModel,
    Chunk,
    ChunkId,
    ChunkVariant,
    DecodeUnit,
    Feed,
    PixelCodec,
    PromptCodec,
    SessionTrace,
    VideoManifest,
    validate_manifest,
)

SCHEMA_VERSION = 1
BANDWIDTH_HEADER = "timestamp_ms,throughput_kbps"
SESSION_HEADER = "video_id,watch_ms"


def _variant_to_json(v: ChunkVariant) -> dict:
    out = {"codec": "prompt" if v.is_prompt else "pixel"}
    if not v.is_prompt:
        out["bitrate_kbps"] = v.bitrate_kbps
    out.update(
        size=v.size, quality=v.quality, decode_ms=v.decode_latency, decode_unit=v.decode_unit.value
    )
    return out


def manifest_to_json(feed: Feed) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "videos": [
            {
                "video_id": video.video_id,
                "chunks": [
                    {
                        "index": c.id.chunk_index,
                        "playout_ms": c.playout_duration,
                        "variants": [_variant_to_json(v) for v in c.variants],
                    }
                    for c in video.chunks
                ],
            }
            for video in feed
        ],
    }


def dumps_manifest(feed: Feed) -> str:
    return json.dumps(manifest_to_json(feed), indent=2) + "\n"


def save_manifest(feed: Feed, path) -> None:
    Path(path).write_text(dumps_manifest(feed))


def _get(obj, key, where, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing key in {where}", path=path, field=key)
    value = obj[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ParseError(f"expected integer in {where}", path=path, field=key)
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ParseError(f"expected number in {where}", path=path, field=key)
    if kind is str and not isinstance(value, str):
        raise ParseError(f"expected string in {where}", path=path, field=key)
    if kind is list and not isinstance(value, list):
        raise ParseError(f"expected list in {where}", path=path, field=key)
    return value


def _parse_variant(obj, where, path) -> ChunkVariant:
    codec_name = _get(obj, "codec", where, path, str)
    if codec_name == "pixel":
        codec = PixelCodec(_get(obj, "bitrate_kbps", where, path, int))
    elif codec_name == "prompt":
        codec = PromptCodec()
    else:
        raise ParseError(f"unknown codec {codec_name!r} in {where}", path=path, field="codec")
    unit_name = _get(obj, "decode_unit", where, path, str)
    try:
        unit = DecodeUnit(unit_name)
    except ValueError:
        raise ParseError(f"unknown decode unit {unit_name!r} in {where}", path=path, field="decode_unit")
    return ChunkVariant(
        codec=codec,
        size=_get(obj, "size", where, path, int),
        quality=float(_get(obj, "quality", where, path, float)),
        decode_latency=_get(obj, "decode_ms", where, path, int),
        decode_unit=unit,
    )


def loads_manifest(text: str, path=None) -> list[VideoManifest]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from None
    version = _get(doc, "schema_version", "document", path, int)
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema version {version}", path=path, field="schema_version")
    feed = []
    for vi, vobj in enumerate(_get(doc, "videos", "document", path, list)):
        vwhere = f"videos[{vi}]"
        video_id = _get(vobj, "video_id", vwhere, path, str)
        chunks = []
        for ci, cobj in enumerate(_get(vobj, "chunks", vwhere, path, list)):
            cwhere = f"video {video_id!r} chunk {ci}"
            index = _get(cobj, "index", cwhere, path, int)
            playout = _get(cobj, "playout_ms", cwhere, path, int)
            variants = tuple(
                _parse_variant(o, f"{cwhere} variant {k}", path)
                for k, o in enumerate(_get(cobj, "variants", cwhere, path, list))
            )
            chunks.append(Chunk(ChunkId(vi, index), playout, variants))
        feed.append(VideoManifest(video_id, tuple(chunks)))
    violations = [v for m in feed for v in validate_manifest(m)]
    ids = [m.video_id for m in feed]
    if len(set(ids)) != len(ids):
        violations.append("duplicate video ids in feed")
    if violations:
        raise InvalidManifest(violations)
    return feed


def load_manifest(path) -> list[VideoManifest]:
    return loads_manifest(Path(path).read_text(), path=path)


def _number(text: str):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    if value.is_integer() and "." not in text and "e" not in text.lower():
        return int(text)
    return value


def _rows(text: str, header: str, path):
    """Yield (line_number, fields) skipping blanks and an optional header."""
    first = True
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if first:
            first = False
            if line.replace(" ", "") == header:
                continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise ParseError("expected two comma-separated fields", path=path, line=lineno)
        yield lineno, fields


def loads_bandwidth_trace(text: str, path=None) -> BandwidthModel:
    samples = []
    for lineno, (ts, rate) in _rows(text, BANDWIDTH_HEADER, path):
        try:
            t = int(ts)
        except ValueError:
            raise ParseError(f"bad timestamp {ts!r}", path=path, line=lineno, field="timestamp_ms")
        try:
            r = _number(rate)
        except ValueError:
            raise ParseError(f"bad throughput {rate!r}", path=path, line=lineno, field="throughput_kbps")
        if r <= 0:
            raise ParseError("throughput must be positive", path=path, line=lineno, field="throughput_kbps")
        if samples and t <= samples[-1][0]:
            raise ParseError("timestamps must increase strictly", path=path, line=lineno, field="timestamp_ms")
        if not samples and t != 0:
            raise ParseError("first sample must be at 0 ms", path=path, line=lineno, field="timestamp_ms")
        samples.append((t, r))
    if not samples:
        raise ParseError("empty bandwidth trace", path=path)
    return BandwidthModel(tuple(samples))


def load_bandwidth_trace(path) -> BandwidthModel:
    return loads_bandwidth_trace(Path(path).read_text(), path=path)


def dumps_bandwidth_trace(bw: BandwidthModel) -> str:
    lines = [BANDWIDTH_HEADER] + [f"{t},{r!r}" for t, r in bw.samples]
    return "\n".join(lines) + "\n"


def save_bandwidth_trace(bw: BandwidthModel, path) -> None:
    Path(path).write_text(dumps_bandwidth_trace(bw))


def loads_session_trace(text: str, path=None) -> SessionTrace:
    entries = []
    for lineno, (video_id, watch) in _rows(text, SESSION_HEADER, path):
        if not video_id:
            raise ParseError("empty video id", path=path, line=lineno, field="video_id")
        try:
            ms = int(watch)
        except ValueError:
            raise ParseError(f"bad watch duration {watch!r}", path=path, line=lineno, field="watch_ms")
        if ms < 0:
            raise ParseError("watch duration must be >= 0", path=path, line=lineno, field="watch_ms")
        entries.append((video_id, ms))
    if not entries:
        raise ParseError("empty session trace", path=path)
    return SessionTrace(tuple(entries))


def load_session_trace(path) -> SessionTrace:
    return loads_session_trace(Path(path).read_text(), path=path)


def dumps_session_trace(trace: SessionTrace) -> str:
    for e in trace:
        if not e.video_id or "," in e.video_id or e.video_id != e.video_id.strip() or len(e.video_id.splitlines()) != 1:
            raise ValueError(f"video id {e.video_id!r} cannot be written as a CSV field")
    lines = [SESSION_HEADER] + [f"{e.video_id},{e.watch_duration}" for e in trace]
    return "\n".join(lines) + "\n"


def save_session_trace(trace: SessionTrace, path) -> None:
    Path(path).write_text(dumps_session_trace(trace))
