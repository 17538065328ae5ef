"""Embedded SQL execution over CSV files.

The adapter contract is tiny: run one statement against one registered
table read straight from its file. The polars backend normalizes column
names (strip + casefold) at load so generated SQL can reference headers
the same way the rest of the pipeline does; collisions after
normalization get deterministic numeric suffixes.
"""

import logging
from pathlib import Path
from typing import Dict, List, Protocol, Sequence, Tuple

import polars as pl

from .corpus import normalize_header
from .errors import EngineError

log = logging.getLogger(__name__)


class SqlEngine(Protocol):
    id: str

    def run(self, sql: str, table_name: str, csv_path: Path) -> List[Tuple]: ...


def normalized_columns(headers: Sequence[str]) -> List[str]:
    """Normalized header names in table order, suffixed on collision.

    Mirrors the rename the engine applies, so prompts and validation see
    exactly the columns SQL can reference.
    """
    out: List[str] = []
    used: Dict[str, int] = {}
    for h in headers:
        name = normalize_header(h)
        n = used.get(name, 0)
        used[name] = n + 1
        out.append(name if n == 0 else f"{name}_{n + 1}")
    return out


class PolarsSqlEngine:
    """Runs SQL against a lazily scanned CSV via the polars SQL interface."""

    id = "polars"

    def __init__(self, infer_schema_length: int = 200):
        self.infer_schema_length = infer_schema_length

    def run(self, sql: str, table_name: str, csv_path: Path) -> List[Tuple]:
        try:
            frame = pl.scan_csv(
                csv_path,
                infer_schema_length=self.infer_schema_length,
                encoding="utf8-lossy",
                try_parse_dates=False,
            )
            original = frame.collect_schema().names()
            frame = frame.rename(dict(zip(original, normalized_columns(original))))
            ctx = pl.SQLContext(frames={table_name: frame})
            return ctx.execute(sql, eager=True).rows()
        except (pl.exceptions.PolarsError, OSError) as exc:
            raise EngineError(f"{table_name}: {exc}") from exc
