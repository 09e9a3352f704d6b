from .engine import (
    EventKind,
    LogRecord,
    PlayedChunk,
    SessionMetrics,
    SessionResult,
    VideoMetrics,
    dumps_event_log,
    run_session,
    session_seed,
)
from .experiments import (
    CSV_COLUMNS,
    ComparisonReport,
    SweepRow,
    chunk_size_sweep,
    compare_strategies,
    sweep_to_csv,
)
from .strategies import (
    HYBRID_OFF,
    MCTS,
    SEQUENTIAL,
    FixedNextK,
    SimConfig,
    StrategyId,
    make_planner,
)

__all__ = [
    "CSV_COLUMNS",
    "ComparisonReport",
    "EventKind",
    "FixedNextK",
    "HYBRID_OFF",
    "LogRecord",
    "MCTS",
    "PlayedChunk",
    "SEQUENTIAL",
    "SessionMetrics",
    "SessionResult",
    "SimConfig",
    "StrategyId",
    "SweepRow",
    "VideoMetrics",
    "chunk_size_sweep",
    "compare_strategies",
    "dumps_event_log",
    "make_planner",
    "run_session",
    "session_seed",
    "sweep_to_csv",
]
