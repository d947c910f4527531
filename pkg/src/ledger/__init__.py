"""
Token accounting: source token counters, per-episode reader ledgers,
compression rates and KV-cache arithmetic.
"""

from .tokens import TokenCounter, CharRatioTokenCounter, HuggingFaceTokenCounter, get_token_counter
from .budget import (
    LedgerError,
    UndefinedRatioError,
    ExpansionKind,
    Expansion,
    TokenLedger,
    EcrAggregate,
    icr,
    ecr,
    kv_bytes,
    kv_mib,
    kv_bytes_per_token,
    reduction_percent,
    aggregate_ecr,
    format_ledger_report,
    KIB,
    MIB,
)

__all__ = [
    'TokenCounter',
    'CharRatioTokenCounter',
    'HuggingFaceTokenCounter',
    'get_token_counter',
    'LedgerError',
    'UndefinedRatioError',
    'ExpansionKind',
    'Expansion',
    'TokenLedger',
    'EcrAggregate',
    'icr',
    'ecr',
    'kv_bytes',
    'kv_mib',
    'kv_bytes_per_token',
    'reduction_percent',
    'aggregate_ecr',
    'format_ledger_report',
    'KIB',
    'MIB',
]
