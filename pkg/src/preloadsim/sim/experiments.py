"""Batch runs: strategy comparisons and chunk-size sweeps over a trace suite."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..model import Weights, scale_feed
from .engine import SessionMetrics, run_session
from .strategies import SimConfig, StrategyId

CSV_COLUMNS = ("strategy", "trace_id", "stall_ms", "wasted_bytes", "downloaded_bytes", "mean_quality", "qoe")
METRICS = CSV_COLUMNS[2:]


def _run_one(args) -> SessionMetrics:
    case, strategy, w, cfg, scale = args
    feed = case.feed if scale == 1.0 else scale_feed(case.feed, scale)
    return run_session(feed, case.bandwidth, case.session, strategy, w=w, cfg=cfg, trace_id=case.trace_id).metrics


def _run_all(jobs, workers: int | None) -> list[SessionMetrics]:
    # results come back in submission order, so output never depends on scheduling
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_run_one(j) for j in jobs]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


@dataclass(frozen=True)
class ComparisonReport:
    strategies: tuple[str, ...]
    rows: tuple[tuple[str, str, dict], ...]  # (strategy, trace_id, metrics row)
    means: dict  # strategy -> metric -> mean
    ratios: dict  # strategy -> metric -> percent of the first strategy

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for strategy, trace_id, row in self.rows:
            writer.writerow([strategy, trace_id] + [_fmt(row[m]) for m in METRICS])
        for strategy in self.strategies:
            writer.writerow([strategy, "mean"] + [_fmt(self.means[strategy][m]) for m in METRICS])
        for strategy in self.strategies:
            writer.writerow(
                [strategy, "ratio_pct"] + [_fmt(self.ratios[strategy][m]) for m in METRICS]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "baseline": self.strategies[0],
            "strategies": list(self.strategies),
            "sessions": len(self.rows) // max(1, len(self.strategies)),
            "mean": self.means,
            "ratio_pct": self.ratios,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _ratio(value, base) -> float | None:
    # a percentage of a zero or negative baseline has no meaning
    if base == 0:
        return 100.0 if value == 0 else None
    if base < 0:
        return None
    return 100.0 * value / base


def compare_strategies(
    suite,
    strategies,
    w: Weights | None = None,
    cfg: SimConfig | None = None,
    workers: int | None = None,
) -> ComparisonReport:
    """Run every strategy on every suite case; ratios are relative to the first strategy."""
    strategies = [StrategyId.parse(s) if isinstance(s, str) else s for s in strategies]
    if len(strategies) < 2:
        raise ValueError("need at least two strategies to compare")
    w = w or Weights()
    cfg = cfg or SimConfig()
    jobs = [(case, s, w, cfg, 1.0) for s in strategies for case in suite]
    results = _run_all(jobs, workers)

    names = tuple(str(s) for s in strategies)
    rows = []
    means = {}
    it = iter(results)
    for name in names:
        sums = dict.fromkeys(METRICS, 0)
        for case in suite:
            row = next(it).as_row()
            rows.append((name, case.trace_id, row))
            for m in METRICS:
                sums[m] += row[m]
        means[name] = {m: sums[m] / len(suite) for m in METRICS}
    base = means[names[0]]
    ratios = {n: {m: _ratio(means[n][m], base[m]) for m in METRICS} for n in names}
    return ComparisonReport(names, tuple(rows), means, ratios)


@dataclass(frozen=True)
class SweepRow:
    scale: float
    stall_ms: float
    wasted_bytes: float
    downloaded_bytes: float
    qoe: float
    per_trace: tuple[tuple[str, int, int], ...]  # (trace_id, stall, waste)


SWEEP_CONFIG = SimConfig(bitrate_rule="lowest")
SWEEP_COLUMNS = ("scale", "stall_ms", "wasted_bytes", "downloaded_bytes", "qoe")


def chunk_size_sweep(
    suite,
    strategy,
    scales=(1.0, 0.7, 0.5, 0.3),
    w: Weights | None = None,
    cfg: SimConfig | None = None,
    workers: int | None = None,
) -> list[SweepRow]:
    """Rerun the suite with every variant size multiplied by each scale factor.

    The default config pins fixed-K preloading to the lowest bitrate so that
    quality is the same at every scale; an adaptive rule would spend the
    smaller chunks on higher bitrates instead.
    """
    if isinstance(strategy, str):
        strategy = StrategyId.parse(strategy)
    scales = [float(s) for s in scales]
    if any(not 0 < s <= 1 for s in scales):
        raise ValueError("scale factors must lie in (0, 1]")
    w = w or Weights()
    cfg = cfg or SWEEP_CONFIG
    jobs = [(case, strategy, w, cfg, s) for s in scales for case in suite]
    results = _run_all(jobs, workers)
    out = []
    it = iter(results)
    for s in scales:
        ms = [next(it) for _ in suite]
        n = len(ms)
        out.append(
            SweepRow(
                scale=s,
                stall_ms=sum(m.total_stall for m in ms) / n,
                wasted_bytes=sum(m.wasted_bytes for m in ms) / n,
                downloaded_bytes=sum(m.downloaded_bytes for m in ms) / n,
                qoe=sum(m.qoe for m in ms) / n,
                per_trace=tuple(
                    (case.trace_id, m.total_stall, m.wasted_bytes) for case, m in zip(suite, ms)
                ),
            )
        )
    return out


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r.scale)] + [_fmt(getattr(r, c)) for c in SWEEP_COLUMNS[1:]])
    return buf.getvalue()
