"""Daily return panels: ingestion, validation, composites, calendar helpers.

CSV layout is ``date,<asset1>,<asset2>,...`` with ISO-8601 dates and plain
decimal values; parsing is locale-independent. Panels are immutable after
construction and safe to share.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    EmptyPanel,
    ImplausibleReturn,
    MissingValue,
    NonMonotonicDates,
    NonPositivePrice,
    UnknownAsset,
    WeightSumError,
)

__all__ = [
    "ReturnPanel",
    "CompositeSpec",
    "load_panel",
    "composite_index",
    "month_ends",
    "inner_join",
]


@dataclass(frozen=True)
class ReturnPanel:
    """Date-indexed matrix of daily returns (decimal fractions).

    Invariants enforced on construction: strictly increasing dates, unique
    assets, finite values, and |r| < 1 for every cell.
    """

    dates: tuple[dt.date, ...]
    assets: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        dates = tuple(self.dates)
        assets = tuple(str(a) for a in self.assets)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            values = values.reshape(len(dates), len(assets))
        if values.shape != (len(dates), len(assets)):
            raise DataError(
                f"values shape {values.shape} inconsistent with "
                f"{len(dates)} dates x {len(assets)} assets"
            )
        if len(assets) == 0:
            raise DataError("panel needs at least one asset column")
        if len(set(assets)) != len(assets):
            raise DataError("asset identifiers must be unique")
        for i in range(1, len(dates)):
            if dates[i] <= dates[i - 1]:
                raise NonMonotonicDates(
                    f"dates must be strictly increasing; {dates[i]} follows {dates[i - 1]}"
                )
        if not np.all(np.isfinite(values)):
            raise MissingValue("panel contains non-finite return values")
        if values.size and np.abs(values).max() >= 1.0:
            bad = np.unravel_index(int(np.abs(values).argmax()), values.shape)
            raise ImplausibleReturn(
                f"|return| >= 1 at {dates[bad[0]]}, asset {assets[bad[1]]}"
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def column(self, asset: str) -> np.ndarray:
        if asset not in self.assets:
            raise UnknownAsset(f"asset {asset!r} not in panel {self.assets}")
        return self.values[:, self.assets.index(asset)]

    def subset(self, assets) -> "ReturnPanel":
        assets = list(assets)
        idx = []
        for a in assets:
            if a not in self.assets:
                raise UnknownAsset(f"asset {a!r} not in panel {self.assets}")
            idx.append(self.assets.index(a))
        return ReturnPanel(self.dates, tuple(assets), self.values[:, idx])

    def through(self, last_date: dt.date) -> "ReturnPanel":
        """Rows dated on or before ``last_date``."""
        n = int(np.searchsorted(np.array(self.dates), last_date, side="right"))
        return ReturnPanel(self.dates[:n], self.assets, self.values[:n])

    def tail(self, n: int) -> "ReturnPanel":
        n = min(n, len(self))
        return ReturnPanel(self.dates[len(self) - n :], self.assets, self.values[len(self) - n :])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.values.copy(), index=pd.DatetimeIndex(self.dates), columns=list(self.assets)
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ReturnPanel":
        dates = tuple(pd.Timestamp(d).date() for d in frame.index)
        return cls(dates, tuple(str(c) for c in frame.columns), frame.to_numpy(dtype=float))


@dataclass(frozen=True)
class CompositeSpec:
    """Fixed-weight composite, rebalanced daily back to the target weights."""

    weights: dict = field(default_factory=dict)
    rebalance: str = "daily"

    def __post_init__(self):
        w = {str(k): float(v) for k, v in self.weights.items()}
        total = sum(w.values())
        if abs(total - 1.0) > 1e-12:
            raise WeightSumError(f"composite weights sum to {total!r}, expected 1")
        if any(v < 0 for v in w.values()):
            raise WeightSumError("composite weights must be nonnegative")
        if self.rebalance != "daily":
            raise DataError(f"unsupported rebalance mode {self.rebalance!r}")
        object.__setattr__(self, "weights", w)


def _parse_cell(text: str, row: int, col: str) -> float:
    stripped = text.strip()
    if stripped == "" or stripped.lower() in {"nan", "na", "null"}:
        raise MissingValue(f"missing value at data row {row}, column {col!r}")
    try:
        return float(stripped)
    except ValueError:
        raise MissingValue(
            f"non-numeric value {text!r} at data row {row}, column {col!r}"
        ) from None


def load_panel(path, kind: str = "returns") -> ReturnPanel:
    """Read a CSV panel of daily prices or returns.

    ``kind="prices"`` converts levels to simple returns p_t/p_{t-1} - 1 and
    drops the first row.
    """
    if kind not in {"prices", "returns"}:
        raise DataError(f"kind must be 'prices' or 'returns', got {kind!r}")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyPanel(f"{path}: file is empty") from None
        if len(header) < 2:
            raise DataError(f"{path}: header must be 'date,<asset1>,...'")
        assets = tuple(h.strip() for h in header[1:])
        dates: list[dt.date] = []
        rows: list[list[float]] = []
        for i, row in enumerate(reader, start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise MissingValue(f"{path}: data row {i} has {len(row)} cells, expected {len(header)}")
            try:
                dates.append(dt.date.fromisoformat(row[0].strip()))
            except ValueError:
                raise NonMonotonicDates(
                    f"{path}: unparseable ISO-8601 date {row[0]!r} at data row {i}"
                ) from None
            rows.append([_parse_cell(c, i, assets[j]) for j, c in enumerate(row[1:])])
    if not rows:
        raise EmptyPanel(f"{path}: no data rows")
    values = np.array(rows, dtype=float)
    if kind == "prices":
        if values.min() <= 0:
            bad = np.unravel_index(int(values.argmin()), values.shape)
            raise NonPositivePrice(
                f"price {values[bad]!r} at {dates[bad[0]]}, asset {assets[bad[1]]}"
            )
        for i in range(1, len(dates)):
            if dates[i] <= dates[i - 1]:
                raise NonMonotonicDates(
                    f"dates must be strictly increasing; {dates[i]} follows {dates[i - 1]}"
                )
        values = values[1:] / values[:-1] - 1.0
        dates = dates[1:]
    return ReturnPanel(tuple(dates), assets, values)


def composite_index(panel: ReturnPanel, spec: CompositeSpec, name: str = "composite") -> ReturnPanel:
    """Daily-rebalanced weighted return series as a single-column panel."""
    for asset in spec.weights:
        if asset not in panel.assets:
            raise UnknownAsset(f"asset {asset!r} not in panel {panel.assets}")
    w = np.array([spec.weights.get(a, 0.0) for a in panel.assets])
    return ReturnPanel(panel.dates, (name,), panel.values @ w)


def month_ends(panel: ReturnPanel) -> list[dt.date]:
    """Last trading date of each calendar month present, ascending."""
    if len(panel) == 0:
        raise EmptyPanel("panel has no rows")
    out: list[dt.date] = []
    for d in panel.dates:
        if out and (out[-1].year, out[-1].month) == (d.year, d.month):
            out[-1] = d
        else:
            out.append(d)
    return out


def inner_join(first: ReturnPanel, *rest: ReturnPanel) -> ReturnPanel:
    """Align panels on their common dates and concatenate columns."""
    panels = (first, *rest)
    names = [a for p in panels for a in p.assets]
    if len(set(names)) != len(names):
        raise DataError("inner_join requires distinct asset names across panels")
    common = set(panels[0].dates)
    for p in panels[1:]:
        common &= set(p.dates)
    if not common:
        raise EmptyPanel("panels share no dates")
    dates = tuple(sorted(common))
    cols = []
    for p in panels:
        pos = {d: i for i, d in enumerate(p.dates)}
        cols.append(p.values[[pos[d] for d in dates]])
    return ReturnPanel(dates, tuple(names), np.hstack(cols))
