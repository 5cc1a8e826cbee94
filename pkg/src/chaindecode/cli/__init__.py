"""Command-line front end: geometry, configuration and figure suites."""
from .config import ConfigError, RunConfig, build_config
from .geometry import Geometry, geometry_to_stats, optimal_rate

__all__ = ["ConfigError", "RunConfig", "build_config", "Geometry", "geometry_to_stats", "optimal_rate"]
