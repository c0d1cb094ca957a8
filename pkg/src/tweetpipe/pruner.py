"""Reduce analysis CSVs to their most relevant entries.

Relevance is the row count, the only signal present; pruning is sorting
plus truncation, and is idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analyzer import AnalysisRow

ORDER_COUNT_DESC = "count_desc"
ORDER_KEY_ASC = "key_asc"
ORDERS = (ORDER_COUNT_DESC, ORDER_KEY_ASC)

DEFAULT_LIMIT = 100


@dataclass(frozen=True)
class PruneConfig:
    limit: int = DEFAULT_LIMIT
    order: str = ORDER_COUNT_DESC

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise ValueError("limit must be at least 1")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")


def prune(rows, cfg: PruneConfig) -> list[AnalysisRow]:
    """Top rows per the configured order, at most cfg.limit of them.

    count_desc sorts by descending count with ties broken by ascending
    key; key_asc sorts by key alone. Both are total orders over distinct
    rows, so the result is deterministic and pruning twice changes
    nothing.
    """
    if cfg.order == ORDER_COUNT_DESC:
        ordered = sorted(rows, key=lambda r: (-r.count, r.key))
    else:
        ordered = sorted(rows, key=lambda r: (r.key, -r.count))
    return ordered[: cfg.limit]
