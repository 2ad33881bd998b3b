"""Price files to percentage log returns."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError

MISSING = {"", "null", "na", "nan", "n/a", "."}


@dataclass(frozen=True)
class ReturnsSeries:
    """Percentage log returns ``100 * log(p_t / p_{t-1})``.

    ``dates`` holds the date of the later price of each pair when the file
    has a ``Date`` column.  ``skipped_rows`` counts rows whose price was missing.
    """

    r: np.ndarray
    dates: Optional[list[str]]
    skipped_rows: int

    @property
    def T(self) -> int:
        return int(self.r.shape[0])


def load_returns(path, column: str) -> ReturnsSeries:
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if column not in header:
            raise ConfigError(f"column {column!r} not in {path} (have {header})")
        col = header.index(column)
        lowered = [h.lower() for h in header]
        date_col = lowered.index("date") if "date" in lowered else None
        prices, dates, skipped = [], [], 0
        # data rows start on line 2 of the file
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            cell = row[col].strip() if col < len(row) else ""
            if cell.lower() in MISSING:
                skipped += 1
                continue
            try:
                price = float(cell)
            except ValueError:
                raise DataError(f"row {line_no}: price {cell!r} is not a number") from None
            if not math.isfinite(price) or price <= 0:
                raise DataError(f"row {line_no}: price must be positive and finite, got {cell!r}")
            prices.append(price)
            if date_col is not None:
                dates.append(row[date_col].strip() if date_col < len(row) else "")
    if len(prices) < 2:
        raise DataError(f"{path}: need at least two prices, found {len(prices)}")
    p = np.asarray(prices, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore"):
        r = 100.0 * np.log(p[1:] / p[:-1])
    bad = np.flatnonzero(~np.isfinite(r))
    if bad.size:
        raise DataError(f"return {int(bad[0]) + 1} is not finite (price ratio out of range)")
    return ReturnsSeries(r=r, dates=dates[1:] if date_col is not None else None, skipped_rows=skipped)
