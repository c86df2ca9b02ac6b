"""Calendar-aware series containers and transforms.

A :class:`CalendarSeries` is a contiguous run of values stamped with a
frequency (monthly/quarterly/annual) and a calendar (Gregorian/Iranian).
Module functions cover Iranian-to-Gregorian conversion, frequency
aggregation, log differencing, lagging, alignment, and two-column CSV I/O.

Period label grammar: annual ``YYYY``, quarterly ``YYYYQn``, monthly
``YYYY-MM``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DomainError,
    FrequencyError,
    SeriesError,
)

__all__ = [
    "Frequency",
    "CalendarKind",
    "PeriodLabel",
    "CalendarSeries",
    "convert_iranian_annual",
    "convert_iranian_quarterly",
    "convert_iranian_monthly",
    "aggregate",
    "log_diff",
    "lag",
    "pad_span",
    "align",
    "series_correlation",
    "read_series_csv",
    "write_series_csv",
]


class Frequency(str, Enum):
    MONTHLY = "monthly"
    QUARTERLY = "quarterly"
    ANNUAL = "annual"

    @property
    def periods_per_year(self) -> int:
        return {"monthly": 12, "quarterly": 4, "annual": 1}[self.value]


class CalendarKind(str, Enum):
    GREGORIAN = "gregorian"
    IRANIAN = "iranian"


_QUARTER_RE = re.compile(r"^(-?\d{1,6})Q([1-4])$")
_MONTH_RE = re.compile(r"^(-?\d{1,6})-(\d{2})$")
_YEAR_RE = re.compile(r"^(-?\d{1,6})$")


@dataclass(frozen=True, order=True)
class PeriodLabel:
    """A calendar period: year plus month/quarter subperiod (None for annual)."""

    year: int
    subperiod: int | None = None

    def validate(self, frequency: Frequency) -> None:
        ppy = frequency.periods_per_year
        if frequency is Frequency.ANNUAL:
            if self.subperiod is not None:
                raise SeriesError(f"annual label must not carry a subperiod: {self!r}")
        else:
            if self.subperiod is None or not 1 <= self.subperiod <= ppy:
                raise SeriesError(
                    f"subperiod out of range for {frequency.value}: {self!r}"
                )

    def to_index(self, frequency: Frequency) -> int:
        """Absolute period count since year 0, used for shift arithmetic."""
        self.validate(frequency)
        ppy = frequency.periods_per_year
        sub = 0 if self.subperiod is None else self.subperiod - 1
        return self.year * ppy + sub

    @staticmethod
    def from_index(index: int, frequency: Frequency) -> "PeriodLabel":
        ppy = frequency.periods_per_year
        year, sub = divmod(index, ppy)
        if frequency is Frequency.ANNUAL:
            return PeriodLabel(year)
        return PeriodLabel(year, sub + 1)

    def shift(self, steps: int, frequency: Frequency) -> "PeriodLabel":
        return PeriodLabel.from_index(self.to_index(frequency) + steps, frequency)

    def format(self, frequency: Frequency) -> str:
        self.validate(frequency)
        if frequency is Frequency.ANNUAL:
            return f"{self.year:04d}"
        if frequency is Frequency.QUARTERLY:
            return f"{self.year:04d}Q{self.subperiod}"
        return f"{self.year:04d}-{self.subperiod:02d}"

    @staticmethod
    def parse(text: str, frequency: Frequency | None = None) -> tuple["PeriodLabel", Frequency]:
        """Parse a period label, inferring the frequency from its shape.

        When ``frequency`` is given the parsed shape must match it.
        """
        text = text.strip()
        m = _QUARTER_RE.match(text)
        if m:
            parsed = PeriodLabel(int(m.group(1)), int(m.group(2)))
            found = Frequency.QUARTERLY
        else:
            m = _MONTH_RE.match(text)
            if m:
                month = int(m.group(2))
                if not 1 <= month <= 12:
                    raise SeriesError(f"month out of range in period label {text!r}")
                parsed = PeriodLabel(int(m.group(1)), month)
                found = Frequency.MONTHLY
            elif _YEAR_RE.match(text):
                parsed = PeriodLabel(int(text))
                found = Frequency.ANNUAL
            else:
                raise SeriesError(f"unparseable period label {text!r}")
        if frequency is not None and found is not frequency:
            raise SeriesError(
                f"period label {text!r} is {found.value}, expected {frequency.value}"
            )
        return parsed, found


@dataclass(frozen=True)
class CalendarSeries:
    """Contiguous values at a fixed frequency with a start period.

    Values are float64 and immutable.  NaN markers are accepted only at the
    edges; interior gaps are rejected at construction.  ``units`` is free-text
    metadata carried through transforms that preserve it.
    """

    frequency: Frequency
    calendar: CalendarKind
    start: PeriodLabel
    values: np.ndarray
    units: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise SeriesError("series values must be one-dimensional")
        if values.size == 0:
            raise SeriesError("series must hold at least one value")
        finite = np.isfinite(values)
        if not finite.all():
            if np.isinf(values).any():
                raise SeriesError("series values must be finite or NaN")
            first, last = np.argmax(finite), len(finite) - 1 - np.argmax(finite[::-1])
            if not finite.any() or not finite[first : last + 1].all():
                raise SeriesError("missing markers are permitted only at the edges")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        self.start.validate(self.frequency)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> PeriodLabel:
        return self.start.shift(len(self.values) - 1, self.frequency)

    def periods(self) -> list[PeriodLabel]:
        return [self.start.shift(i, self.frequency) for i in range(len(self.values))]

    def labels(self) -> list[str]:
        return [p.format(self.frequency) for p in self.periods()]

    def index_of(self, label: PeriodLabel) -> int:
        offset = label.to_index(self.frequency) - self.start.to_index(self.frequency)
        if not 0 <= offset < len(self.values):
            raise AlignmentError(
                f"period {label.format(self.frequency)} outside series span"
            )
        return offset

    def value_at(self, label: PeriodLabel) -> float:
        return float(self.values[self.index_of(label)])

    def window(self, start: PeriodLabel | None, end: PeriodLabel | None) -> "CalendarSeries":
        """Slice inclusive of both endpoints (None keeps that edge)."""
        i = 0 if start is None else self.index_of(start)
        j = len(self.values) - 1 if end is None else self.index_of(end)
        if j < i:
            raise AlignmentError("window end precedes window start")
        return self.replace_values(self.values[i : j + 1], start=self.start.shift(i, self.frequency))

    def replace_values(
        self,
        values: np.ndarray | Sequence[float],
        start: PeriodLabel | None = None,
        frequency: Frequency | None = None,
        calendar: CalendarKind | None = None,
    ) -> "CalendarSeries":
        return CalendarSeries(
            frequency=frequency or self.frequency,
            calendar=calendar or self.calendar,
            start=start or self.start,
            values=np.asarray(values, dtype=float),
            units=self.units,
        )

    def trimmed(self) -> "CalendarSeries":
        """Drop edge NaN markers; error if nothing finite remains."""
        finite = np.isfinite(self.values)
        if finite.all():
            return self
        first = int(np.argmax(finite))
        last = len(finite) - 1 - int(np.argmax(finite[::-1]))
        return self.replace_values(
            self.values[first : last + 1], start=self.start.shift(first, self.frequency)
        )


# ---------------------------------------------------------------------------
# Iranian -> Gregorian conversions
#
# Each output period mixes the previous and current input periods with fixed
# weights, so the converted series is one observation shorter at the start
# and the calendar flag flips.  Numerators and the common denominator are
# kept separate so that rational fixtures come out exact.
# ---------------------------------------------------------------------------

_CONVERSION_WEIGHTS = {
    Frequency.ANNUAL: (80.0, 285.0, 365.0),
    Frequency.QUARTERLY: (8.0, 1.0, 9.0),
    Frequency.MONTHLY: (1.0, 2.0, 3.0),
}


def _convert_iranian(series: CalendarSeries, frequency: Frequency) -> CalendarSeries:
    if series.frequency is not frequency:
        raise FrequencyError(
            f"expected a {frequency.value} series, got {series.frequency.value}"
        )
    if series.calendar is not CalendarKind.IRANIAN:
        raise DomainError("conversion input must be on the Iranian calendar")
    series = series.trimmed()
    if len(series) < 2:
        raise SeriesError("calendar conversion needs at least 2 observations")
    prev_w, curr_w, denom = _CONVERSION_WEIGHTS[frequency]
    x = series.values
    converted = (prev_w * x[:-1] + curr_w * x[1:]) / denom
    return series.replace_values(
        converted,
        start=series.start.shift(1, frequency),
        calendar=CalendarKind.GREGORIAN,
    )


def convert_iranian_annual(series: CalendarSeries) -> CalendarSeries:
    """Convert an annual Iranian-calendar series to Gregorian years.

    Each Gregorian year takes 80/365 of the previous Iranian year and
    285/365 of the current one.
    """
    return _convert_iranian(series, Frequency.ANNUAL)


def convert_iranian_quarterly(series: CalendarSeries) -> CalendarSeries:
    """Quarterly conversion with weights 8/9 (previous) and 1/9 (current)."""
    return _convert_iranian(series, Frequency.QUARTERLY)


def convert_iranian_monthly(series: CalendarSeries) -> CalendarSeries:
    """Monthly conversion with weights 1/3 (previous) and 2/3 (current)."""
    return _convert_iranian(series, Frequency.MONTHLY)


# ---------------------------------------------------------------------------
# Aggregation and transforms
# ---------------------------------------------------------------------------

_FINENESS = {Frequency.MONTHLY: 3, Frequency.QUARTERLY: 2, Frequency.ANNUAL: 1}


def aggregate(
    series: CalendarSeries,
    target: Frequency,
    method: str = "mean",
) -> CalendarSeries:
    """Aggregate to a coarser frequency; partial head/tail windows are dropped.

    ``method`` is one of ``mean``, ``sum``, ``last``.
    """
    if method not in ("mean", "sum", "last"):
        raise ValueError(f"unknown aggregation method {method!r}")
    if _FINENESS[target] >= _FINENESS[series.frequency]:
        raise FrequencyError(
            f"target frequency {target.value} is not coarser than {series.frequency.value}"
        )
    series = series.trimmed()
    step = series.frequency.periods_per_year // target.periods_per_year
    start_idx = series.start.to_index(series.frequency)
    # advance to the first source period opening a whole target period
    head = (-start_idx) % step
    usable = len(series) - head
    blocks = usable // step
    if blocks < 1:
        raise SeriesError("series does not cover a single whole target period")
    chunk = series.values[head : head + blocks * step].reshape(blocks, step)
    if method == "mean":
        out = chunk.mean(axis=1)
    elif method == "sum":
        out = chunk.sum(axis=1)
    else:
        out = chunk[:, -1]
    new_start = PeriodLabel.from_index((start_idx + head) // step, target)
    return series.replace_values(out, start=new_start, frequency=target)


def log_diff(series: CalendarSeries) -> CalendarSeries:
    """First difference of the natural log; one observation shorter."""
    series = series.trimmed()
    if len(series) < 2:
        raise SeriesError("log difference needs at least 2 observations")
    bad = np.nonzero(series.values <= 0)[0]
    if bad.size:
        where = series.start.shift(int(bad[0]), series.frequency)
        raise DomainError(
            f"non-positive value at {where.format(series.frequency)}; cannot take logs"
        )
    logs = np.log(series.values)
    return series.replace_values(
        logs[1:] - logs[:-1], start=series.start.shift(1, series.frequency)
    )


def lag(series: CalendarSeries, steps: int = 1) -> CalendarSeries:
    """Relabel the series ``steps`` periods later, so labels align x_{t-steps} with t."""
    return series.replace_values(
        series.values, start=series.start.shift(steps, series.frequency)
    )


def pad_span(
    series: CalendarSeries,
    start: PeriodLabel,
    end: PeriodLabel,
    fill: float = 0.0,
) -> CalendarSeries:
    """Embed the series in [start, end], filling uncovered periods with ``fill``.

    The requested span must contain the series span.
    """
    freq = series.frequency
    lead = series.start.to_index(freq) - start.to_index(freq)
    trail = end.to_index(freq) - series.end.to_index(freq)
    if lead < 0 or trail < 0:
        raise AlignmentError("pad_span target must contain the series span")
    values = np.concatenate(
        [np.full(lead, fill), series.values, np.full(trail, fill)]
    )
    return series.replace_values(values, start=start)


def align(*series: CalendarSeries) -> tuple[list[np.ndarray], PeriodLabel]:
    """Intersect the spans of the given series; returns arrays plus the common start.

    All series must share frequency and calendar.  Raises
    :class:`AlignmentError` when the overlap is empty.
    """
    if not series:
        raise ValueError("align needs at least one series")
    freq = series[0].frequency
    cal = series[0].calendar
    trimmed = []
    for s in series:
        if s.frequency is not freq:
            raise AlignmentError(
                f"frequency mismatch: {s.frequency.value} vs {freq.value}"
            )
        if s.calendar is not cal:
            raise AlignmentError(f"calendar mismatch: {s.calendar.value} vs {cal.value}")
        trimmed.append(s.trimmed())
    lo = max(s.start.to_index(freq) for s in trimmed)
    hi = min(s.end.to_index(freq) for s in trimmed)
    if hi < lo:
        raise AlignmentError("series have no overlapping periods")
    arrays = []
    for s in trimmed:
        offset = lo - s.start.to_index(freq)
        arrays.append(np.asarray(s.values[offset : offset + hi - lo + 1]))
    return arrays, PeriodLabel.from_index(lo, freq)


def series_correlation(a: CalendarSeries, b: CalendarSeries) -> float:
    """Pearson correlation over the overlapping periods of two series."""
    (xa, xb), _ = align(a, b)
    if len(xa) < 2:
        raise AlignmentError("correlation needs at least 2 overlapping periods")
    if np.std(xa) == 0 or np.std(xb) == 0:
        raise DomainError("correlation undefined for a constant series")
    return float(np.corrcoef(xa, xb)[0, 1])


# ---------------------------------------------------------------------------
# CSV ingestion / export: two columns `period,value`, header required, UTF-8.
# ---------------------------------------------------------------------------


def read_series_csv(
    path: str | Path,
    calendar: CalendarKind = CalendarKind.GREGORIAN,
    units: str = "",
) -> CalendarSeries:
    """Read a ``period,value`` CSV into a series, inferring the frequency."""
    path = Path(path)
    rows: list[tuple[PeriodLabel, float]] = []
    freq: Frequency | None = None
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["period", "value"]:
            raise SeriesError(f"{path}: expected header 'period,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise SeriesError(f"{path}:{lineno}: expected 'period,value'")
            try:
                label, found = PeriodLabel.parse(row[0], freq)
            except SeriesError as exc:
                raise SeriesError(f"{path}:{lineno}: {exc}") from exc
            freq = freq or found
            try:
                value = float(row[1])
            except ValueError as exc:
                raise SeriesError(f"{path}:{lineno}: bad value {row[1]!r}") from exc
            rows.append((label, value))
    if not rows or freq is None:
        raise SeriesError(f"{path}: no data rows")
    rows.sort(key=lambda item: item[0].to_index(freq))
    indices = [label.to_index(freq) for label, _ in rows]
    expected = range(indices[0], indices[0] + len(indices))
    if indices != list(expected):
        missing = sorted(set(expected) - set(indices))
        shown = PeriodLabel.from_index(missing[0], freq).format(freq) if missing else "?"
        raise SeriesError(f"{path}: periods not contiguous (first gap at {shown})")
    return CalendarSeries(
        frequency=freq,
        calendar=calendar,
        start=rows[0][0],
        values=np.array([v for _, v in rows]),
        units=units,
    )


def write_series_csv(series: CalendarSeries, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["period", "value"])
        for label, value in zip(series.labels(), series.values):
            writer.writerow([label, repr(float(value))])
