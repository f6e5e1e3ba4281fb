"""Input files, the statutory release calendar and point-in-time queries.

Everything a strategy sees goes through :class:`MarketData`. Queries take a
date ``t`` and never return anything dated (or released) after ``t``.
"""

from __future__ import annotations

import csv
import math
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

TICKER_RE = re.compile(r"^[A-Z][A-Z0-9]*[0-9]$")

BAR_COLUMNS = ["ticker", "date", "open", "high", "low", "close", "volume"]
STATEMENT_COLUMNS = [
    "ticker", "year", "quarter", "revenue", "opex", "gross_profit", "ebit",
    "net_income", "assets", "liabilities", "equity", "op_cash_flow", "shares_out",
]
RISK_FREE_COLUMNS = ["date", "annual_rate"]
INDEX_WEIGHT_COLUMNS = ["as_of", "ticker", "weight"]


class DataError(Exception):
    """Base class for input-data problems."""


class ParseError(DataError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class SchemaError(DataError):
    pass


class ValidationError(DataError):
    pass


class DataGapError(DataError):
    """A price is missing where the simulation needs one."""

    def __init__(self, asset: str, day: date, strategy: str | None = None):
        self.asset = asset
        self.day = day
        self.strategy = strategy
        where = f"{strategy}: " if strategy else ""
        super().__init__(f"{where}no bar for open position {asset} on {day.isoformat()}")


# ---------------------------------------------------------------- records


@dataclass(frozen=True, slots=True)
class DailyBar:
    asset: str
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def check(self) -> None:
        where = f"{self.asset} {self.date.isoformat()}"
        vals = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ValidationError(f"{where}: prices must be finite and positive")
        if not (self.low <= self.high):
            raise ValidationError(f"{where}: low {self.low} > high {self.high}")
        if not (self.low <= self.open <= self.high):
            raise ValidationError(f"{where}: open {self.open} outside [low, high]")
        if not (self.low <= self.close <= self.high):
            raise ValidationError(f"{where}: close {self.close} outside [low, high]")
        if not (math.isfinite(self.volume) and self.volume >= 0):
            raise ValidationError(f"{where}: negative volume")


@dataclass(frozen=True, slots=True)
class StatementRecord:
    company: str
    year: int
    quarter: int
    revenue: float
    operating_expenses: float
    gross_profit: float
    ebit: float
    net_income: float
    total_assets: float
    total_liabilities: float
    equity: float
    operating_cash_flow: float
    shares_outstanding: float
    release_date: date

    @property
    def fiscal_quarter(self) -> tuple[int, int]:
        return (self.year, self.quarter)

    @property
    def quarter_index(self) -> int:
        """Consecutive integer per fiscal quarter; adjacent quarters differ by 1."""
        return self.year * 4 + self.quarter - 1

    def check(self) -> None:
        where = f"{self.company} Q{self.quarter} {self.year}"
        if self.quarter not in (1, 2, 3, 4):
            raise ValidationError(f"{where}: quarter must be 1-4")
        amounts = (
            self.revenue, self.operating_expenses, self.gross_profit, self.ebit,
            self.net_income, self.total_assets, self.total_liabilities,
            self.equity, self.operating_cash_flow,
        )
        if not all(math.isfinite(v) for v in amounts):
            raise ValidationError(f"{where}: non-finite amount")
        if not (math.isfinite(self.shares_outstanding) and self.shares_outstanding > 0):
            raise ValidationError(f"{where}: shares_out must be positive")
        if self.release_date <= quarter_end(self.year, self.quarter):
            raise ValidationError(f"{where}: release date {self.release_date} not after quarter end")


@dataclass(frozen=True)
class RiskFreeSeries:
    entries: tuple[tuple[date, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "_dates", [d for d, _ in self.entries])
        prev = None
        for d, r in self.entries:
            if prev is not None and d <= prev:
                raise ValidationError(f"risk-free dates not strictly increasing at {d}")
            if not (math.isfinite(r) and r >= 0):
                raise ValidationError(f"risk-free rate at {d} must be >= 0")
            prev = d

    def rate_at(self, t: date) -> float:
        """Annual rate in effect on ``t``; 0 before the first entry."""
        i = bisect_right(self._dates, t)
        return self.entries[i - 1][1] if i else 0.0

    def daily_factor(self, t: date, days_per_year: int = 252) -> float:
        return (1.0 + self.rate_at(t)) ** (1.0 / days_per_year)


@dataclass(frozen=True, slots=True)
class IndexWeights:
    as_of: date
    weights: dict[str, float]

    def normalized(self) -> "IndexWeights":
        total = math.fsum(self.weights.values())
        if total <= 0:
            raise ValidationError(f"index weights at {self.as_of} sum to zero")
        return IndexWeights(self.as_of, {k: v / total for k, v in self.weights.items()})


# --------------------------------------------------------- release calendar

_RELEASE_RULE = {1: (0, 5, 31), 2: (0, 8, 31), 3: (0, 11, 30), 4: (1, 2, 28)}
_QUARTER_END = {1: (3, 31), 2: (6, 30), 3: (9, 30), 4: (12, 31)}


def quarter_end(year: int, quarter: int) -> date:
    m, d = _QUARTER_END[quarter]
    return date(year, m, d)


def release_date_for(year: int, quarter: int) -> date:
    """Statutory availability date of a fiscal quarter's statement.

    Q4 -> Feb 28 of the next year (no leap-day shift), Q1 -> May 31,
    Q2 -> Aug 31, Q3 -> Nov 30.
    """
    if quarter not in _RELEASE_RULE:
        raise ValidationError(f"quarter must be 1-4, got {quarter}")
    dy, m, d = _RELEASE_RULE[quarter]
    return date(year + dy, m, d)


def fiscal_quarter_released_on(d: date) -> tuple[int, int] | None:
    """Inverse of :func:`release_date_for`; None if ``d`` is not a statutory date."""
    for q, (dy, m, day) in _RELEASE_RULE.items():
        if d.month == m and d.day == day:
            return (d.year - dy, q)
    return None


def release_dates_between(start: date, end: date) -> list[date]:
    """All statutory release dates in ``[start, end]``, ascending."""
    out = []
    for year in range(start.year - 1, end.year + 1):
        for q in (1, 2, 3, 4):
            d = release_date_for(year, q)
            if start <= d <= end:
                out.append(d)
    return sorted(out)


def quarter_label(year: int, quarter: int) -> str:
    return f"Q{quarter} {year}"


# ------------------------------------------------------------------ parsing


def _fmt(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _rows(path) -> Iterator[tuple[int, dict[str, str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, reader.line_num,
                                 f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, dict(zip(header, (c.strip() for c in row)))


def _header(path) -> list[str]:
    with open(path, newline="") as fh:
        first = fh.readline()
    if not first:
        raise SchemaError(f"{path}: empty file")
    return [h.strip() for h in next(csv.reader([first]))]


def _require_columns(path, required: Iterable[str]) -> list[str]:
    header = _header(path)
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    return header


def _parse_ticker(path, line, raw: str) -> str:
    if not TICKER_RE.match(raw):
        raise ParseError(path, line, f"bad ticker {raw!r}")
    return raw


def _parse_date(path, line, raw: str) -> date:
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ParseError(path, line, f"bad date {raw!r}") from None


def _parse_float(path, line, name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(path, line, f"bad number for {name}: {raw!r}") from None


def _parse_int(path, line, name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(path, line, f"bad integer for {name}: {raw!r}") from None


def bar_from_row(path, line: int, r: dict[str, str]) -> DailyBar:
    return DailyBar(
        asset=_parse_ticker(path, line, r["ticker"]),
        date=_parse_date(path, line, r["date"]),
        open=_parse_float(path, line, "open", r["open"]),
        high=_parse_float(path, line, "high", r["high"]),
        low=_parse_float(path, line, "low", r["low"]),
        close=_parse_float(path, line, "close", r["close"]),
        volume=_parse_float(path, line, "volume", r["volume"]),
    )


def iter_rows(path, required: Iterable[str]) -> Iterator[tuple[int, dict[str, str]]]:
    """Checked header, then ``(line, row)`` pairs; blank lines are skipped."""
    _require_columns(path, required)
    return _rows(path)


def iter_bars(path) -> Iterator[tuple[int, DailyBar]]:
    """Yield ``(line, bar)`` without invariant checks; parse errors still raise."""
    for line, r in iter_rows(path, BAR_COLUMNS):
        yield line, bar_from_row(path, line, r)


def load_bars(path) -> dict[str, tuple[DailyBar, ...]]:
    """Read a bars CSV into date-sorted series keyed by ticker."""
    series: dict[str, dict[date, DailyBar]] = {}
    for line, bar in iter_bars(path):
        bar.check()
        per_asset = series.setdefault(bar.asset, {})
        if bar.date in per_asset:
            raise ValidationError(f"{path}:{line}: duplicate bar {bar.asset} {bar.date}")
        per_asset[bar.date] = bar
    return {a: tuple(v[d] for d in sorted(v)) for a, v in sorted(series.items())}


def statement_from_row(path, line: int, r: dict[str, str]) -> StatementRecord:
    year = _parse_int(path, line, "year", r["year"])
    quarter = _parse_int(path, line, "quarter", r["quarter"])
    if quarter not in (1, 2, 3, 4):
        raise ValidationError(f"{path}:{line}: quarter must be 1-4, got {quarter}")
    if r.get("release_date"):
        released = _parse_date(path, line, r["release_date"])
    else:
        released = release_date_for(year, quarter)
    num = {c: _parse_float(path, line, c, r[c]) for c in STATEMENT_COLUMNS[3:]}
    return StatementRecord(
        company=_parse_ticker(path, line, r["ticker"]),
        year=year,
        quarter=quarter,
        revenue=num["revenue"],
        operating_expenses=num["opex"],
        gross_profit=num["gross_profit"],
        ebit=num["ebit"],
        net_income=num["net_income"],
        total_assets=num["assets"],
        total_liabilities=num["liabilities"],
        equity=num["equity"],
        operating_cash_flow=num["op_cash_flow"],
        shares_outstanding=num["shares_out"],
        release_date=released,
    )


def iter_statements(path) -> Iterator[tuple[int, StatementRecord]]:
    for line, r in iter_rows(path, STATEMENT_COLUMNS):
        yield line, statement_from_row(path, line, r)


def load_statements(path) -> dict[str, tuple[StatementRecord, ...]]:
    """Read a statements CSV; records sorted by fiscal quarter per company.

    Without a ``release_date`` column (or with a blank cell) the statutory
    calendar supplies the release date.
    """
    out: dict[str, dict[tuple[int, int], StatementRecord]] = {}
    for line, rec in iter_statements(path):
        rec.check()
        per = out.setdefault(rec.company, {})
        if rec.fiscal_quarter in per:
            raise ValidationError(
                f"{path}:{line}: duplicate statement {rec.company} Q{rec.quarter} {rec.year}")
        per[rec.fiscal_quarter] = rec
    return {c: tuple(v[k] for k in sorted(v)) for c, v in sorted(out.items())}


def load_risk_free(path) -> RiskFreeSeries:
    _require_columns(path, RISK_FREE_COLUMNS)
    entries = []
    for line, r in _rows(path):
        entries.append((_parse_date(path, line, r["date"]),
                        _parse_float(path, line, "annual_rate", r["annual_rate"])))
    return RiskFreeSeries(tuple(entries))


def load_index_weights(path) -> list[IndexWeights]:
    _require_columns(path, INDEX_WEIGHT_COLUMNS)
    by_date: dict[date, dict[str, float]] = {}
    for line, r in _rows(path):
        d = _parse_date(path, line, r["as_of"])
        w = _parse_float(path, line, "weight", r["weight"])
        if not (math.isfinite(w) and w >= 0):
            raise ValidationError(f"{path}:{line}: weight must be non-negative")
        by_date.setdefault(d, {})[_parse_ticker(path, line, r["ticker"])] = w
    return [IndexWeights(d, by_date[d]) for d in sorted(by_date)]


def load_universe(path=None) -> tuple[str, ...]:
    """Tickers, one per line. Without a path, the bundled 36-asset list."""
    if path is None:
        text = resources.files("alphax").joinpath("data/universe.txt").read_text()
    else:
        text = Path(path).read_text()
    tickers = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    for t in tickers:
        if not TICKER_RE.match(t):
            raise ValidationError(f"bad ticker in universe: {t!r}")
    if len(set(tickers)) != len(tickers):
        raise ValidationError("duplicate ticker in universe")
    return tuple(tickers)


# ---------------------------------------------------------------- writing


def bars_to_csv(bars: dict[str, Iterable[DailyBar]]) -> str:
    lines = [",".join(BAR_COLUMNS)]
    for asset in sorted(bars):
        for b in bars[asset]:
            lines.append(",".join([b.asset, b.date.isoformat(), _fmt(b.open), _fmt(b.high),
                                   _fmt(b.low), _fmt(b.close), _fmt(b.volume)]))
    return "\n".join(lines) + "\n"


def statements_to_csv(statements: dict[str, Iterable[StatementRecord]]) -> str:
    lines = [",".join(STATEMENT_COLUMNS + ["release_date"])]
    for company in sorted(statements):
        for s in statements[company]:
            nums = (s.revenue, s.operating_expenses, s.gross_profit, s.ebit, s.net_income,
                    s.total_assets, s.total_liabilities, s.equity, s.operating_cash_flow,
                    s.shares_outstanding)
            lines.append(",".join([s.company, str(s.year), str(s.quarter)]
                                  + [_fmt(x) for x in nums] + [s.release_date.isoformat()]))
    return "\n".join(lines) + "\n"


def risk_free_to_csv(series: RiskFreeSeries) -> str:
    lines = [",".join(RISK_FREE_COLUMNS)]
    lines += [f"{d.isoformat()},{_fmt(r)}" for d, r in series.entries]
    return "\n".join(lines) + "\n"


def index_weights_to_csv(snapshots: Iterable[IndexWeights]) -> str:
    lines = [",".join(INDEX_WEIGHT_COLUMNS)]
    for snap in snapshots:
        for t in sorted(snap.weights):
            lines.append(f"{snap.as_of.isoformat()},{t},{_fmt(snap.weights[t])}")
    return "\n".join(lines) + "\n"


def universe_to_text(tickers: Iterable[str]) -> str:
    return "".join(f"{t}\n" for t in tickers)


# ------------------------------------------------------------ PIT access


def mid_price(bar: DailyBar) -> float:
    """Fill price for scheduled trades: mean of the day's high and low."""
    return (bar.high + bar.low) / 2.0


@dataclass
class MarketData:
    """Immutable-by-convention bundle of every input, with as-of queries."""

    bars: dict[str, tuple[DailyBar, ...]]
    statements: dict[str, tuple[StatementRecord, ...]]
    risk_free: RiskFreeSeries
    index_weights: list[IndexWeights] = field(default_factory=list)
    universe: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.universe:
            self.universe = tuple(sorted(self.bars))
        self._bar_dates = {a: [b.date for b in s] for a, s in self.bars.items()}
        # statements per company ordered by release date, for as-of bisection
        self._by_release = {
            c: sorted(s, key=lambda r: (r.release_date, r.quarter_index))
            for c, s in self.statements.items()
        }
        self._release_dates = {c: [r.release_date for r in s] for c, s in self._by_release.items()}
        self._weight_dates = [w.as_of for w in self.index_weights]
        self._calendar = sorted({d for ds in self._bar_dates.values() for d in ds})

    @classmethod
    def from_files(cls, bars, statements, risk_free, index_weights=None, universe=None):
        return cls(
            bars=load_bars(bars),
            statements=load_statements(statements),
            risk_free=load_risk_free(risk_free),
            index_weights=load_index_weights(index_weights) if index_weights else [],
            universe=load_universe(universe) if universe else load_universe(),
        )

    # -- bars

    def bar_at_or_before(self, asset: str, t: date) -> DailyBar | None:
        dates = self._bar_dates.get(asset)
        if not dates:
            return None
        i = bisect_right(dates, t)
        return self.bars[asset][i - 1] if i else None

    def bar_on(self, asset: str, t: date) -> DailyBar | None:
        bar = self.bar_at_or_before(asset, t)
        return bar if bar is not None and bar.date == t else None

    def bars_before(self, asset: str, t: date) -> tuple[DailyBar, ...]:
        """Every bar strictly before ``t``."""
        dates = self._bar_dates.get(asset, [])
        return self.bars.get(asset, ())[: bisect_left(dates, t)]

    def trading_days(self, start: date | None = None, end: date | None = None) -> list[date]:
        """Union of all bar dates, optionally clipped to ``[start, end]``."""
        return [d for d in self._calendar
                if (start is None or d >= start) and (end is None or d <= end)]

    def next_trading_day(self, t: date) -> date | None:
        i = bisect_left(self._calendar, t)
        return self._calendar[i] if i < len(self._calendar) else None

    # -- statements

    def as_of_statements(self, company: str, t: date) -> StatementRecord | None:
        """Most recently released statement with release_date <= t."""
        dates = self._release_dates.get(company)
        if not dates:
            return None
        i = bisect_right(dates, t)
        return self._by_release[company][i - 1] if i else None

    def statements_released(self, company: str, t: date) -> list[StatementRecord]:
        """All statements released on or before ``t``, in fiscal order."""
        dates = self._release_dates.get(company)
        if not dates:
            return []
        i = bisect_right(dates, t)
        return sorted(self._by_release[company][:i], key=lambda r: r.quarter_index)

    # -- benchmarks

    def index_weights_as_of(self, t: date) -> IndexWeights | None:
        i = bisect_right(self._weight_dates, t)
        return self.index_weights[i - 1] if i else None

    # -- test support

    def truncated(self, t: date) -> "MarketData":
        """Copy with every record dated (or released) after ``t`` removed."""
        return MarketData(
            bars={a: tuple(b for b in s if b.date <= t) for a, s in self.bars.items()},
            statements={c: tuple(r for r in s if r.release_date <= t)
                        for c, s in self.statements.items()},
            risk_free=RiskFreeSeries(tuple(e for e in self.risk_free.entries if e[0] <= t)),
            index_weights=[w for w in self.index_weights if w.as_of <= t],
            universe=self.universe,
        )
