"""
Main entry point for the pipeline CLI.

This module allows running the pipeline as a Python module:
python -m src.cli <command> [args]
"""

import sys

from .pipeline_cli import main

if __name__ == "__main__":
    sys.exit(main())
