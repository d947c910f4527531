"""
Reader token accounting.

A TokenLedger records every source-derived token the reader processes in
one episode: the initial visual tokens of all pages plus the payload of
each expansion. Prompts, questions and the model's own reasoning are not
counted.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional

logger = logging.getLogger("ledger")

KIB = 1024
MIB = 1024 * 1024


class LedgerError(Exception):
    """Base exception for ledger accounting errors."""
    pass


class UndefinedRatioError(LedgerError):
    """Raised when a ratio has a zero denominator."""
    pass


class ExpansionKind(Enum):
    TEXT = "text"
    OCR_TEXT = "ocr_text"
    IMAGE = "image"


@dataclass(frozen=True)
class Expansion:
    turn: int
    kind: ExpansionKind
    cost: int
    image_index: Optional[int] = None


@dataclass
class TokenLedger:
    """Per-episode record of reader-visible tokens."""
    source_tokens: int
    initial_visual_tokens: int
    expansions: List[Expansion] = field(default_factory=list)

    def __post_init__(self):
        if self.source_tokens < 0 or self.initial_visual_tokens < 0:
            raise LedgerError("Token counts must be non-negative")

    def append(self, turn: int, kind: ExpansionKind, cost: int, image_index: Optional[int] = None) -> Expansion:
        """
        Record one expansion payload.

        Raises:
            LedgerError: If cost is below 1 (reader_total must strictly grow)
        """
        if cost < 1:
            raise LedgerError(f"Expansion cost must be >= 1, got {cost}")
        expansion = Expansion(turn=turn, kind=ExpansionKind(kind), cost=cost, image_index=image_index)
        self.expansions.append(expansion)
        logger.debug(f"Ledger append: turn={turn} kind={expansion.kind.value} cost={cost} image={image_index}")
        return expansion

    @property
    def expansion_tokens(self) -> int:
        return sum(expansion.cost for expansion in self.expansions)

    @property
    def reader_total(self) -> int:
        return self.initial_visual_tokens + self.expansion_tokens

    @property
    def expanded_pages(self) -> List[int]:
        return [e.image_index for e in self.expansions if e.image_index is not None]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source_tokens": self.source_tokens,
            "initial_visual_tokens": self.initial_visual_tokens,
            "expansions": [
                {"turn": e.turn, "kind": e.kind.value, "cost": e.cost, "image_index": e.image_index}
                for e in self.expansions
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TokenLedger":
        ledger = cls(source_tokens=data["source_tokens"], initial_visual_tokens=data["initial_visual_tokens"])
        for item in data.get("expansions", []):
            ledger.append(item["turn"], ExpansionKind(item["kind"]), item["cost"], item.get("image_index"))
        return ledger


def icr(ledger: TokenLedger) -> float:
    """
    Input compression rate N / sum(n_k).

    Raises:
        UndefinedRatioError: If there are no initial visual tokens
    """
    if ledger.initial_visual_tokens <= 0:
        raise UndefinedRatioError("ICR undefined: zero initial visual tokens")
    return ledger.source_tokens / ledger.initial_visual_tokens


def ecr(ledger: TokenLedger) -> float:
    """
    Effective compression rate N / reader_total.

    Raises:
        UndefinedRatioError: If the reader processed no tokens
    """
    if ledger.reader_total <= 0:
        raise UndefinedRatioError("ECR undefined: zero reader tokens")
    return ledger.source_tokens / ledger.reader_total


def kv_bytes_per_token(layers: int = 8, kv_heads: int = 4, head_dim: int = 256, dtype_bytes: int = 2) -> int:
    """KV-cache bytes per token: one key and one value vector per attention layer."""
    return 2 * layers * kv_heads * head_dim * dtype_bytes


def kv_bytes(tokens: int, bytes_per_token: int) -> int:
    if tokens < 0:
        raise LedgerError(f"Token count must be non-negative, got {tokens}")
    return tokens * bytes_per_token


def kv_mib(num_bytes: int) -> float:
    """Bytes expressed in MiB to one decimal."""
    return round(num_bytes / MIB, 1)


def reduction_percent(baseline_tokens: int, method_tokens: int) -> float:
    """
    Percentage reduction of ``method_tokens`` relative to ``baseline_tokens``.

    Raises:
        UndefinedRatioError: If the baseline is zero
    """
    if baseline_tokens <= 0:
        raise UndefinedRatioError("Reduction undefined: zero baseline")
    return 100.0 * (1 - method_tokens / baseline_tokens)


@dataclass(frozen=True)
class EcrAggregate:
    """Benchmark-level ECR under both aggregation rules."""
    mean_of_ratios: float
    ratio_of_sums: float
    count: int


def aggregate_ecr(ledgers: Iterable[TokenLedger]) -> EcrAggregate:
    """
    Aggregate ECR across episodes.

    ``mean_of_ratios`` averages per-episode ECRs; ``ratio_of_sums`` divides
    total source tokens by total reader tokens.

    Raises:
        UndefinedRatioError: If no ledger has reader tokens
    """
    usable = [ledger for ledger in ledgers if ledger.reader_total > 0]
    if not usable:
        raise UndefinedRatioError("ECR aggregate undefined: no ledgers with reader tokens")
    mean = sum(ecr(ledger) for ledger in usable) / len(usable)
    pooled = sum(l.source_tokens for l in usable) / sum(l.reader_total for l in usable)
    return EcrAggregate(mean_of_ratios=mean, ratio_of_sums=pooled, count=len(usable))


def format_ledger_report(ledger: TokenLedger, bytes_per_token: int = kv_bytes_per_token(), label: str = "") -> str:
    """Human-readable ledger summary: N, sum(n_k), expansions, ICR, ECR and KV MiB."""
    lines = [f"Ledger {label}".rstrip()]
    lines.append(f"  source tokens N:        {ledger.source_tokens}")
    lines.append(f"  initial visual tokens:  {ledger.initial_visual_tokens}")
    for e in ledger.expansions:
        target = f" image {e.image_index}" if e.image_index is not None else ""
        lines.append(f"  expansion turn {e.turn}: {e.kind.value}{target} +{e.cost}")
    lines.append(f"  reader total:           {ledger.reader_total}")
    try:
        lines.append(f"  ICR: {icr(ledger):.2f}x  ECR: {ecr(ledger):.2f}x")
    except UndefinedRatioError as e:
        lines.append(f"  ICR/ECR: undefined ({e})")
    lines.append(f"  KV cache: {kv_mib(kv_bytes(ledger.reader_total, bytes_per_token))} MiB")
    return "\n".join(lines)
