from .commands import ExperimentCLI
from .parser import create_argument_parser

__all__ = ["ExperimentCLI", "create_argument_parser"]
