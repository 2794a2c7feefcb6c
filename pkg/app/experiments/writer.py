"""Persistence of sweep results: CSV tables plus a sibling JSON audit file."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from app.errors import OutputError
from app.models import CSV_COLUMNS, SweepRow
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")


def _serialize_value(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, tuple):
        return list(value)
    return str(value)


def rows_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    """Fixed-column table of sweep rows (None becomes an empty CSV cell)."""
    return pd.DataFrame.from_records([row.csv_record() for row in rows], columns=list(CSV_COLUMNS))


class SweepWriter:
    """Write one study's CSV and audit JSON next to each other (atomic replace)."""

    def __init__(self, csv_path: Path) -> None:
        self.csv_path = Path(csv_path)

    @property
    def audit_path(self) -> Path:
        return self.csv_path.with_suffix(".json")

    def sibling(self, suffix: str) -> Path:
        """``<stem><suffix>`` in the same directory, e.g. ``_log_tension.csv``."""
        return self.csv_path.with_name(f"{self.csv_path.stem}{suffix}")

    def write_rows(self, rows: Iterable[SweepRow]) -> Path:
        frame = rows_frame(rows)
        self.write_table(frame, self.csv_path)
        logger.info("Wrote %d sweep rows to %s", len(frame.index), self.csv_path)
        return self.csv_path

    def write_table(self, frame: pd.DataFrame, path: Path) -> Path:
        def dump(tmp_path: Path) -> None:
            frame.to_csv(tmp_path, index=False)

        return self._atomic_write(path, dump)

    def write_audit(self, payload: dict[str, Any]) -> Path:
        document = {"created_at": datetime.now(timezone.utc).isoformat(), **payload}

        def dump(tmp_path: Path) -> None:
            with tmp_path.open("w", encoding="utf-8") as handle:
                json.dump(document, handle, indent=2, default=_serialize_value)

        self._atomic_write(self.audit_path, dump)
        logger.info("Wrote sweep audit to %s", self.audit_path)
        return self.audit_path

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    def _atomic_write(self, path: Path, dump) -> Path:
        tmp_path = path.with_suffix(path.suffix + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            dump(tmp_path)
            tmp_path.replace(path)
        except OSError as exc:
            raise OutputError(f"Cannot write {path}: {exc.strerror or exc}") from exc
        return path
