from .config_loader import (
    ConfigLoader,
    ConfigError,
    ConfigIOError,
    Diagnostic,
    ExperimentConfig,
    EXPERIMENTS,
    validate_config,
)
from .experiments import (
    ExperimentError,
    ExperimentResult,
    Workspace,
    RUNNERS,
    run_experiment,
)
from .reporting import write_report, write_csv, write_json, format_float

__all__ = [
    # Configuration
    "ConfigLoader",
    "ConfigError",
    "ConfigIOError",
    "Diagnostic",
    "ExperimentConfig",
    "EXPERIMENTS",
    "validate_config",
    # Experiments
    "ExperimentError",
    "ExperimentResult",
    "Workspace",
    "RUNNERS",
    "run_experiment",
    # Reporting
    "write_report",
    "write_csv",
    "write_json",
    "format_float",
]
