"""Serialization, codec profiles and synthetic data generation."""

from .formats import (
    BANDWIDTH_HEADER,
    SCHEMA_VERSION,
    SESSION_HEADER,
    dumps_bandwidth_trace,
    dumps_manifest,
    dumps_session_trace,
    load_bandwidth_trace,
    load_manifest,
    load_session_trace,
    loads_bandwidth_trace,
    loads_manifest,
    loads_session_trace,
    save_bandwidth_trace,
    save_manifest,
    save_session_trace,
)
from .profiles import (
    KEYFRAME_TABLE,
    CodecProfile,
    ProfileLevel,
    default_profiles,
    pixel_profile,
    prompt_profile,
)
from .synthetic import (
    BANDWIDTH_PATTERNS,
    SuiteCase,
    gen_synthetic_bandwidth,
    gen_synthetic_feed,
    gen_synthetic_sessions,
    stress_suite,
    synthetic_suite,
)

__all__ = [
    "BANDWIDTH_HEADER",
    "BANDWIDTH_PATTERNS",
    "CodecProfile",
    "KEYFRAME_TABLE",
    "ProfileLevel",
    "SCHEMA_VERSION",
    "SESSION_HEADER",
    "SuiteCase",
    "default_profiles",
    "dumps_bandwidth_trace",
    "dumps_manifest",
    "dumps_session_trace",
    "gen_synthetic_bandwidth",
    "gen_synthetic_feed",
    "gen_synthetic_sessions",
    "load_bandwidth_trace",
    "load_manifest",
    "load_session_trace",
    "loads_bandwidth_trace",
    "loads_manifest",
    "loads_session_trace",
    "pixel_profile",
    "prompt_profile",
    "save_bandwidth_trace",
    "save_manifest",
    "save_session_trace",
    "stress_suite",
    "synthetic_suite",
]
