"""Price sheets, log-returns and normalized return histograms."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np


class PriceSheetError(ValueError):
    """Malformed price sheet; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyInputError(PriceSheetError):
    pass


class MonotonicityError(PriceSheetError):
    pass


class RangeError(ValueError):
    """Every return fell outside the histogram range."""


@dataclass(frozen=True)
class PriceSeries:
    timestamps: np.ndarray = field(repr=False)
    prices: np.ndarray = field(repr=False)
    interval: float | None = None

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        s = np.asarray(self.prices, dtype=float)
        if t.shape != s.shape or t.ndim != 1:
            raise ValueError("timestamps and prices must be 1-d arrays of equal length")
        if t.size < 2:
            raise ValueError("a price series needs at least two rows")
        if not np.all(s > 0):
            raise ValueError("prices must be positive")
        if not np.all(np.diff(t) > 0):
            raise MonotonicityError("timestamps must be strictly increasing")
        interval = self.interval
        if interval is None:
            interval = float(np.median(np.diff(t)))
        if not interval > 0:
            raise ValueError("sampling interval must be positive")
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "prices", s)
        object.__setattr__(self, "interval", float(interval))

    def __len__(self):
        return self.prices.size

    @property
    def sample_count(self) -> int:
        return self.prices.size

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(self.timestamps, self.prices * factor, self.interval)


def _parse_time(text: str) -> float:
    try:
        return float(int(text))
    except ValueError:
        pass
    value = text.strip()
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    stamp = datetime.fromisoformat(value)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _split(line: str, delimiter: str | None):
    if delimiter is None:
        return line.split()
    return next(csv.reader([line], delimiter=delimiter))


def _sniff_delimiter(line: str) -> str | None:
    for d in (",", "\t", ";", "|"):
        if d in line:
            return d
    return None


def load_price_sheet(source, delimiter: str | None = None, interval: float | None = None) -> PriceSeries:
    """Parse a two-column ``timestamp, price`` sheet.

    ``source`` may be a path, a text or byte stream, or raw bytes. Timestamps
    are integer epoch seconds or ISO-8601, detected from the first data row;
    a non-numeric first field on the first line marks a header. The
    delimiter is sniffed when not given (comma, tab, semicolon, pipe, or
    whitespace).
    """
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(io.StringIO(text)) if ln.strip()]
    if not lines:
        raise EmptyInputError("empty price sheet")
    if delimiter is None:
        delimiter = _sniff_delimiter(lines[0][1])
    first = _split(lines[0][1], delimiter)
    if first and not _is_number(first[0]) and not _looks_like_time(first[0]):
        lines = lines[1:]
    if not lines:
        raise EmptyInputError("price sheet has a header but no data")
    epoch = None
    times, prices = [], []
    for lineno, ln in lines:
        fields = [f.strip() for f in _split(ln, delimiter)]
        if len(fields) != 2:
            raise PriceSheetError(f"expected 2 columns, found {len(fields)}", lineno)
        tfield, pfield = fields
        if epoch is None:
            epoch = _is_integer(tfield)
        try:
            t = float(int(tfield)) if epoch else _parse_time(tfield)
        except ValueError:
            raise PriceSheetError(f"bad timestamp {tfield!r}", lineno) from None
        try:
            price = float(pfield)
        except ValueError:
            raise PriceSheetError(f"bad price {pfield!r}", lineno) from None
        if not (price > 0 and math.isfinite(price)):
            raise PriceSheetError(f"price must be positive, got {pfield}", lineno)
        if times and t <= times[-1]:
            what = "duplicate" if t == times[-1] else "decreasing"
            raise MonotonicityError(f"{what} timestamp {tfield!r}", lineno)
        times.append(t)
        prices.append(price)
    if len(prices) < 2:
        raise PriceSheetError("a price sheet needs at least two data rows")
    return PriceSeries(np.array(times), np.array(prices), interval)


def _is_integer(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def _looks_like_time(text: str) -> bool:
    try:
        _parse_time(text)
        return True
    except ValueError:
        return False


def log_returns(series: PriceSeries, stride: int = 1, gap_tolerance: float = 0.1,
                diagnostics: dict | None = None) -> np.ndarray:
    """Log-returns ``log(P_i / P_{i-stride})`` over pairs spanning ``stride`` intervals.

    Pairs whose time difference exceeds ``stride * interval * (1 + gap_tolerance)``
    (overnight or weekend gaps) are skipped; pass a dict as ``diagnostics`` to
    receive the counts.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if len(series) <= stride:
        raise ValueError("series is too short for this stride")
    lp = np.log(series.prices)
    ret = lp[stride:] - lp[:-stride]
    span = series.timestamps[stride:] - series.timestamps[:-stride]
    keep = span <= stride * series.interval * (1.0 + gap_tolerance)
    if diagnostics is not None:
        diagnostics.update(pairs=int(ret.size), skipped_gaps=int(np.count_nonzero(~keep)))
    return ret[keep]


@dataclass(frozen=True)
class EmpiricalHistogram:
    bin_centers: np.ndarray
    density: np.ndarray
    errbar: np.ndarray
    counts: np.ndarray
    bins: int
    span: float
    sample_count: int
    out_of_range: int = 0

    @property
    def width(self) -> float:
        return self.span / self.bins

    @property
    def edges(self) -> np.ndarray:
        h = self.width
        return np.append(self.bin_centers - h / 2, self.bin_centers[-1] + h / 2)


def build_histogram(returns, bins: int, span: float, center: str | float = "zero") -> EmpiricalHistogram:
    """Histogram of returns on ``bins`` uniform bins covering ``center +- span/2``.

    Densities are counts divided by the bin width and normalized to unit
    integral; error bars are the Poisson deviation ``sqrt(count)`` under the
    same scaling. ``center`` is ``"zero"``, ``"mean"`` or a number.
    """
    x = np.asarray(returns, dtype=float)
    if x.size == 0:
        raise ValueError("no returns to histogram")
    if bins < 2:
        raise ValueError("need at least two bins")
    if not span > 0:
        raise ValueError("span must be positive")
    if center == "zero":
        mid = 0.0
    elif center == "mean":
        mid = float(np.mean(x))
    else:
        mid = float(center)
    edges = mid + span * (np.arange(bins + 1) / bins - 0.5)
    counts, _ = np.histogram(x, bins=edges)
    inside = int(counts.sum())
    if inside == 0:
        raise RangeError("every return lies outside the histogram range")
    width = span / bins
    density = counts / width / inside
    errbar = np.sqrt(counts) / width / inside
    centers = 0.5 * (edges[:-1] + edges[1:])
    return EmpiricalHistogram(centers, density, errbar, counts, bins, float(span), int(x.size), int(x.size - inside))
