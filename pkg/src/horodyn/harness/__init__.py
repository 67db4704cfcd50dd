from .config import ConfigError, ScenarioConfig, load_config
from .report import Report, write_report
from .suites import run_suite

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "Report",
    "write_report",
    "run_suite",
]
