"""
lens-vlm toolkit

Visual text compression with selective expansion: rendering and token
accounting, dataset construction, a multi-turn tool protocol driven against
external model endpoints, scoring, and a selection-vs-extraction simulator.
"""

__version__ = "1.0.0"
__description__ = "Selective expansion toolkit for compressed visual reading"

__all__ = [
    'common',
    'render',
    'ledger',
    'corpus',
    'protocol',
    'scoring',
    'simlab',
    'cli',
]
