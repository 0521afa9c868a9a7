"""Configuration, sweeps, caching and report generation."""

from h1cavity.pipeline.cache import ResultCache, cache_key, default_cache_dir
from h1cavity.pipeline.config import SweepPlan, load_config
from h1cavity.pipeline.report import report
from h1cavity.pipeline.sweep import analyse_point, run_sweep

__all__ = [
    "ResultCache",
    "SweepPlan",
    "analyse_point",
    "cache_key",
    "default_cache_dir",
    "load_config",
    "report",
    "run_sweep",
]
