"""Intervention-intensity indices built from daily article counts.

The pipeline: per-outlet daily counts -> monthly grand means (simple or
per-outlet standardized) -> optional aggregation -> unit-max normalization
into an "on" or "off" index -> netting ``on - w * off`` with ``w`` either
fixed or picked by a grid-searched dynamic regression.  A separate variant
nets entity-list additions against removals.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    AlignmentError,
    CoverageWarning,
    DegenerateDataError,
    GapError,
    NormalizationError,
    SampleError,
    SeriesError,
)
from .regression import ols
from .timeseries import (
    align,
    CalendarKind,
    CalendarSeries,
    Frequency,
    lag,
    PeriodLabel,
)

__all__ = [
    "IndexKind",
    "ArticleCountPanel",
    "IntensityIndex",
    "EntityFlowSeries",
    "monthly_mean_count",
    "standardized_monthly_count",
    "normalize_unit_max",
    "net_index",
    "grid_search_weight",
    "GridSearchResult",
    "GridPoint",
    "sdn_index",
    "read_counts_csv",
    "read_flows_csv",
    "write_index_csv",
]


class IndexKind(str, Enum):
    ON = "on"
    OFF = "off"
    NET = "net"
    SDN_NET = "sdn_net"


def _month_index(year: int, month: int) -> int:
    return year * 12 + (month - 1)


@dataclass(frozen=True)
class ArticleCountPanel:
    """Daily article counts per outlet.

    ``counts`` maps outlet -> day -> non-negative count.  A day present for
    any outlet counts toward that month's publishing days; outlets without an
    entry on such a day contribute zero articles.
    """

    outlets: tuple[str, ...]
    counts: Mapping[str, Mapping[date, int]]

    def __post_init__(self) -> None:
        if not self.outlets:
            raise SeriesError("panel needs at least one outlet")
        if len(set(self.outlets)) != len(self.outlets):
            raise SeriesError("duplicate outlet identifiers")
        frozen: dict[str, dict[date, int]] = {}
        any_day = False
        for outlet in self.outlets:
            per_outlet = dict(self.counts.get(outlet, {}))
            for day, count in per_outlet.items():
                if count < 0:
                    raise SeriesError(f"negative count for {outlet} on {day}")
            any_day = any_day or bool(per_outlet)
            frozen[outlet] = per_outlet
        if not any_day:
            raise SeriesError("panel holds no daily observations")
        object.__setattr__(self, "counts", frozen)

    def month_days(self) -> dict[int, set[date]]:
        """Union of covered days per month, keyed by absolute month index."""
        days: dict[int, set[date]] = {}
        for per_outlet in self.counts.values():
            for day in per_outlet:
                days.setdefault(_month_index(day.year, day.month), set()).add(day)
        return days


@dataclass(frozen=True)
class IntensityIndex:
    """A scaled intervention series with its normalization provenance."""

    series: CalendarSeries
    kind: IndexKind
    normalization_max: float
    net_weight: float | None = None

    def __post_init__(self) -> None:
        if self.kind in (IndexKind.NET, IndexKind.SDN_NET):
            if self.net_weight is None:
                raise ValueError(f"{self.kind.value} index requires net_weight")
        elif self.net_weight is not None:
            raise ValueError(f"{self.kind.value} index must not carry net_weight")


@dataclass(frozen=True)
class EntityFlowSeries:
    """Per-period additions and removals of sanctioned entities."""

    frequency: Frequency
    start: PeriodLabel
    additions: np.ndarray
    removals: np.ndarray

    def __post_init__(self) -> None:
        additions = np.asarray(self.additions, dtype=float)
        removals = np.asarray(self.removals, dtype=float)
        if additions.shape != removals.shape or additions.ndim != 1:
            raise SeriesError("additions and removals must be 1-D and equal length")
        if additions.size == 0:
            raise SeriesError("entity flow series is empty")
        if (additions < 0).any() or (removals < 0).any():
            raise SeriesError("entity flow counts must be non-negative")
        for arr, name in ((additions, "additions"), (removals, "removals")):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        self.start.validate(self.frequency)


def monthly_mean_count(panel: ArticleCountPanel) -> CalendarSeries:
    """Grand mean of counts over outlets and publishing days, per month.

    Months inside the panel span with no publishing days are reported via
    :class:`CoverageWarning` and excluded; because exclusion leaves a hole in
    the month run, a :class:`GapError` follows.
    """
    month_days = panel.month_days()
    first, last = min(month_days), max(month_days)
    empty = [m for m in range(first, last + 1) if m not in month_days]
    if empty:
        labels = ", ".join(
            PeriodLabel.from_index(m, Frequency.MONTHLY).format(Frequency.MONTHLY)
            for m in empty
        )
        warnings.warn(f"months with no publishing days excluded: {labels}", CoverageWarning)
        raise GapError(f"excluded months leave an interior gap: {labels}")
    n_outlets = len(panel.outlets)
    values = []
    for m in range(first, last + 1):
        days = month_days[m]
        total = 0
        for per_outlet in panel.counts.values():
            total += sum(per_outlet.get(day, 0) for day in days)
        values.append(total / (n_outlets * len(days)))
    return CalendarSeries(
        frequency=Frequency.MONTHLY,
        calendar=CalendarKind.GREGORIAN,
        start=PeriodLabel.from_index(first, Frequency.MONTHLY),
        values=np.array(values),
    )


def standardized_monthly_count(panel: ArticleCountPanel) -> CalendarSeries:
    """Average of per-outlet monthly means, each scaled by its own dispersion.

    Every outlet's monthly mean series is divided by its full-sample standard
    deviation (denominator T-1) before averaging, so outlets with fat count
    levels do not dominate the cross-outlet mean.
    """
    month_days = panel.month_days()
    months = sorted(month_days)
    if len(months) < 2:
        raise SampleError("standardization needs at least 2 covered months")
    first, last = months[0], months[-1]
    if months != list(range(first, last + 1)):
        raise GapError("panel months are not contiguous")
    per_outlet_means = np.empty((len(panel.outlets), len(months)))
    for i, outlet in enumerate(panel.outlets):
        counts = panel.counts[outlet]
        for t, m in enumerate(months):
            days = month_days[m]
            per_outlet_means[i, t] = sum(counts.get(day, 0) for day in days) / len(days)
    sigma = per_outlet_means.std(axis=1, ddof=1)
    flat = np.nonzero(sigma == 0)[0]
    if flat.size:
        raise DegenerateDataError(
            f"outlet {panel.outlets[flat[0]]!r} has constant monthly means"
        )
    standardized = (per_outlet_means / sigma[:, None]).mean(axis=0)
    return CalendarSeries(
        frequency=Frequency.MONTHLY,
        calendar=CalendarKind.GREGORIAN,
        start=PeriodLabel.from_index(first, Frequency.MONTHLY),
        values=standardized,
    )


def normalize_unit_max(
    series: CalendarSeries,
    window: tuple[PeriodLabel | None, PeriodLabel | None] | None = None,
    kind: IndexKind = IndexKind.ON,
) -> IntensityIndex:
    """Divide by the maximum over ``window`` so the in-window peak is exactly 1.

    Values outside the window may exceed 1; that is part of the definition,
    not an error.
    """
    if kind not in (IndexKind.ON, IndexKind.OFF):
        raise ValueError("unit-max normalization builds on/off indices only")
    series = series.trimmed()
    windowed = series if window is None else series.window(*window)
    peak = float(np.max(windowed.values))
    if peak <= 0:
        raise NormalizationError("window maximum must be positive")
    return IntensityIndex(
        series=series.replace_values(series.values / peak),
        kind=kind,
        normalization_max=peak,
    )


def net_index(on: IntensityIndex, off: IntensityIndex, w: float) -> IntensityIndex:
    """Net intervention index ``on - w * off`` over identically aligned series."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"net weight must lie in [0, 1], got {w}")
    a, b = on.series, off.series
    if (
        a.frequency is not b.frequency
        or a.start != b.start
        or len(a) != len(b)
    ):
        raise AlignmentError("on and off indices must cover identical periods")
    return IntensityIndex(
        series=a.replace_values(a.values - w * b.values),
        kind=IndexKind.NET,
        normalization_max=on.normalization_max,
        net_weight=w,
    )


@dataclass(frozen=True)
class GridPoint:
    weight: float
    ssr: float
    loglik: float


@dataclass(frozen=True)
class GridSearchResult:
    """Chosen netting weight plus the full profile for flatness reporting."""

    w_hat: float
    points: tuple[GridPoint, ...]
    nobs: int

    @property
    def relative_ssr_spread(self) -> float:
        """(max - min) / min of SSR across the grid; small means a flat profile."""
        ssr = [p.ssr for p in self.points]
        return (max(ssr) - min(ssr)) / min(ssr)


def grid_search_weight(
    on: IntensityIndex,
    off: IntensityIndex,
    dy: CalendarSeries,
    grid_step: float = 0.1,
) -> GridSearchResult:
    """Pick the netting weight by likelihood over a grid of candidate weights.

    For each ``w`` on the open-interval grid the regression of growth on its
    own lag and the lagged net index is fit by least squares; the weight with
    the highest Gaussian likelihood (lowest SSR) wins, ties going to the
    smaller ``w``.
    """
    if not 0 < grid_step < 0.5:
        raise ValueError("grid step must lie in (0, 0.5)")
    if dy.frequency is not Frequency.QUARTERLY:
        raise AlignmentError("grid search expects quarterly growth data")
    n_points = int(round(1.0 / grid_step)) - 1
    grid = np.round(np.arange(1, n_points + 1) * grid_step, 10)
    (y, y_lag, on_lag, off_lag), _ = align(
        dy, lag(dy, 1), lag(on.series, 1), lag(off.series, 1)
    )
    nobs = len(y)
    if nobs < 10:
        raise SampleError(f"grid search needs >= 10 quarters of overlap, got {nobs}")
    points = []
    for w in grid:
        s_lag = on_lag - w * off_lag
        fit = ols(y, np.column_stack([y_lag, s_lag]), names=("dy.L1", "s.L1"))
        ssr = float(fit.residuals @ fit.residuals)
        loglik = -0.5 * nobs * (math.log(2 * math.pi) + math.log(ssr / nobs) + 1.0)
        points.append(GridPoint(weight=float(w), ssr=ssr, loglik=loglik))
    best = min(range(len(points)), key=lambda i: points[i].ssr)
    return GridSearchResult(w_hat=points[best].weight, points=tuple(points), nobs=nobs)


def sdn_index(flows: EntityFlowSeries, w: float = 0.4) -> IntensityIndex:
    """Net entity additions against removals, scaled by the sample maximum.

    Negative values are legitimate: periods dominated by removals fall below
    zero after netting.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"net weight must lie in [0, 1], got {w}")
    net = flows.additions - w * flows.removals
    peak = float(np.max(net))
    if peak <= 0:
        raise NormalizationError("netted flow maximum must be positive")
    series = CalendarSeries(
        frequency=flows.frequency,
        calendar=CalendarKind.GREGORIAN,
        start=flows.start,
        values=net / peak,
    )
    return IntensityIndex(
        series=series,
        kind=IndexKind.SDN_NET,
        normalization_max=peak,
        net_weight=w,
    )


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def read_counts_csv(path: str | Path) -> ArticleCountPanel:
    """Read daily counts from a ``date,outlet,count`` CSV (ISO dates)."""
    path = Path(path)
    counts: dict[str, dict[date, int]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != [
            "date",
            "outlet",
            "count",
        ]:
            raise SeriesError(f"{path}: expected header 'date,outlet,count'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise SeriesError(f"{path}:{lineno}: expected 'date,outlet,count'")
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise SeriesError(f"{path}:{lineno}: bad date {row[0]!r}") from exc
            outlet = row[1].strip()
            if not outlet:
                raise SeriesError(f"{path}:{lineno}: empty outlet")
            try:
                count = int(row[2])
            except ValueError as exc:
                raise SeriesError(f"{path}:{lineno}: bad count {row[2]!r}") from exc
            if count < 0:
                raise SeriesError(f"{path}:{lineno}: negative count")
            per_outlet = counts.setdefault(outlet, {})
            if day in per_outlet:
                raise SeriesError(f"{path}:{lineno}: duplicate row for {outlet} {day}")
            per_outlet[day] = count
    if not counts:
        raise SeriesError(f"{path}: no data rows")
    return ArticleCountPanel(outlets=tuple(sorted(counts)), counts=counts)


def read_flows_csv(path: str | Path) -> EntityFlowSeries:
    """Read entity flows from a ``period,additions,removals`` CSV."""
    path = Path(path)
    rows: list[tuple[PeriodLabel, float, float]] = []
    freq: Frequency | None = None
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != [
            "period",
            "additions",
            "removals",
        ]:
            raise SeriesError(f"{path}: expected header 'period,additions,removals'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise SeriesError(f"{path}:{lineno}: expected 3 columns")
            try:
                label, found = PeriodLabel.parse(row[0], freq)
                rows.append((label, float(row[1]), float(row[2])))
            except (SeriesError, ValueError) as exc:
                raise SeriesError(f"{path}:{lineno}: {exc}") from exc
            freq = freq or found
    if not rows or freq is None:
        raise SeriesError(f"{path}: no data rows")
    rows.sort(key=lambda item: item[0].to_index(freq))
    indices = [label.to_index(freq) for label, _, _ in rows]
    if indices != list(range(indices[0], indices[0] + len(indices))):
        raise SeriesError(f"{path}: periods not contiguous")
    return EntityFlowSeries(
        frequency=freq,
        start=rows[0][0],
        additions=np.array([a for _, a, _ in rows]),
        removals=np.array([r for _, _, r in rows]),
    )


def write_index_csv(index: IntensityIndex, path: str | Path) -> None:
    """Export as ``period,value,kind`` rows."""
    path = Path(path)
    series = index.series
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["period", "value", "kind"])
        for label, value in zip(series.labels(), series.values):
            writer.writerow([label, repr(float(value)), index.kind.value])
