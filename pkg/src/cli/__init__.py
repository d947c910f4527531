"""
Command-line entry point for the lens-vlm pipeline.
"""

from .pipeline_cli import LensPipelineCLI, build_parser, main

__all__ = [
    'LensPipelineCLI',
    'build_parser',
    'main',
]
