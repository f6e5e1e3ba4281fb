"""Seeded synthetic universe: bars, statements, Selic path, index weights.

Fundamentals follow a persistent per-company quality factor; prices drift
toward a fair value implied by trailing earnings, so value signals carry
some information. Values are rounded to the 6-decimal file precision before
the OHLC envelope is enforced, so written files reload exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .market_data import (
    DailyBar,
    IndexWeights,
    MarketData,
    RiskFreeSeries,
    StatementRecord,
    bars_to_csv,
    index_weights_to_csv,
    load_universe,
    release_date_for,
    risk_free_to_csv,
    statements_to_csv,
    universe_to_text,
)

# excluded financials; they appear in the index file but never in the universe
_NON_UNIVERSE = ("ITUB4", "BBDC4")

FILE_NAMES = {
    "bars": "bars.csv",
    "statements": "statements.csv",
    "risk_free": "risk_free.csv",
    "index_weights": "index_weights.csv",
    "universe": "universe.txt",
}


@dataclass
class SyntheticDataset:
    bars: dict[str, tuple[DailyBar, ...]]
    statements: dict[str, tuple[StatementRecord, ...]]
    risk_free: RiskFreeSeries
    index_weights: list[IndexWeights]
    universe: tuple[str, ...]

    def market_data(self) -> MarketData:
        return MarketData(self.bars, self.statements, self.risk_free,
                          self.index_weights, self.universe)

    def files(self) -> dict[str, str]:
        """File name -> text content, as written by :meth:`write`."""
        return {
            FILE_NAMES["bars"]: bars_to_csv(self.bars),
            FILE_NAMES["statements"]: statements_to_csv(self.statements),
            FILE_NAMES["risk_free"]: risk_free_to_csv(self.risk_free),
            FILE_NAMES["index_weights"]: index_weights_to_csv(self.index_weights),
            FILE_NAMES["universe"]: universe_to_text(self.universe),
        }

    def write(self, out_dir) -> dict[str, Path]:
        from .reports import atomic_write_text

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, text in self.files().items():
            paths[name] = out / name
            atomic_write_text(paths[name], text)
        return paths


def _tickers(n: int) -> tuple[str, ...]:
    base = load_universe()
    if n <= len(base):
        return base[:n]
    extra = [f"SYN{i:03d}3" for i in range(n - len(base))]
    return base + tuple(extra)


def _business_days(start: date, end: date) -> list[date]:
    days = []
    d = start
    while d <= end:
        if d.weekday() < 5 and not (d.month == 1 and d.day == 1) \
                and not (d.month == 12 and d.day == 25):
            days.append(d)
        d += timedelta(days=1)
    return days


def _r6(x: float) -> float:
    return round(float(x), 6)


def generate_synthetic_universe(
    seed: int,
    n_assets: int,
    n_quarters: int,
    start_year: int = 2018,
    start_quarter: int = 1,
    tail_days: int = 92,
) -> SyntheticDataset:
    """Build a deterministic synthetic dataset.

    Statements cover ``n_quarters`` fiscal quarters starting at
    ``(start_year, start_quarter)``; release dates follow the statutory
    calendar. Bars run from the first fiscal quarter's start until
    ``tail_days`` after the last release date.
    """
    if n_assets < 1:
        raise ValueError("n_assets must be >= 1")
    if n_quarters < 2:
        raise ValueError("n_quarters must be >= 2")
    if start_quarter not in (1, 2, 3, 4):
        raise ValueError("start_quarter must be 1-4")

    rng = np.random.default_rng(seed)
    tickers = _tickers(n_assets)
    quarters = []
    y, q = start_year, start_quarter
    for _ in range(n_quarters):
        quarters.append((y, q))
        y, q = (y + 1, 1) if q == 4 else (y, q + 1)

    # ---- fundamentals
    statements: dict[str, tuple[StatementRecord, ...]] = {}
    eps_path: dict[str, list[float]] = {}
    for t in tickers:
        quality = rng.normal()
        revenue = float(np.exp(rng.normal(np.log(2e9), 0.6)))
        equity = revenue * rng.uniform(2.0, 4.0)
        leverage = float(np.exp(rng.normal(0.0, 0.4)))
        shares = float(np.round(np.exp(rng.normal(np.log(5e8), 0.5))))
        recs, ttm = [], []
        for k, (yy, qq) in enumerate(quarters):
            quality = 0.8 * quality + 0.6 * rng.normal()
            growth = 0.01 + 0.02 * quality + 0.03 * rng.normal()
            revenue *= math.exp(growth)
            season = 1.0 + 0.05 * math.sin(math.pi * qq / 2.0)
            rev_q = revenue * season
            net_margin = 0.08 + 0.04 * quality + 0.03 * rng.normal()
            ebit_margin = net_margin + 0.05 + 0.01 * abs(rng.normal())
            gross_margin = ebit_margin + 0.2 + 0.02 * abs(rng.normal())
            net_income = rev_q * net_margin
            ebit = rev_q * ebit_margin
            gross = rev_q * gross_margin
            equity += 0.6 * net_income
            leverage *= math.exp(0.05 * rng.normal() - 0.01 * quality)
            liabilities = abs(equity) * leverage
            ocf = net_income * rng.uniform(0.8, 1.4) + 0.02 * rev_q
            recs.append(StatementRecord(
                company=t, year=yy, quarter=qq,
                revenue=_r6(rev_q), operating_expenses=_r6(gross - ebit),
                gross_profit=_r6(gross), ebit=_r6(ebit), net_income=_r6(net_income),
                total_assets=_r6(equity + liabilities), total_liabilities=_r6(liabilities),
                equity=_r6(equity), operating_cash_flow=_r6(ocf),
                shares_outstanding=shares, release_date=release_date_for(yy, qq),
            ))
            ttm.append(net_income)
        statements[t] = tuple(recs)
        # TTM EPS per fiscal quarter (annualised from partial history at the start)
        eps = []
        for k in range(len(ttm)):
            window = ttm[max(0, k - 3): k + 1]
            eps.append(sum(window) * 4.0 / len(window) / shares)
        eps_path[t] = eps

    # ---- calendar
    first_day = date(quarters[0][0], 3 * quarters[0][1] - 2, 1)
    last_release = release_date_for(*quarters[-1])
    days = _business_days(first_day, last_release + timedelta(days=tail_days))
    # fiscal quarter in effect for each day (prices anticipate the quarter's results)
    q_index = {yq: k for k, yq in enumerate(quarters)}

    def quarter_of(d: date) -> int:
        yq = (d.year, (d.month - 1) // 3 + 1)
        if yq in q_index:
            return q_index[yq]
        return 0 if d < first_day else len(quarters) - 1

    # ---- prices
    market = rng.normal(0.0, 0.008, size=len(days))
    bars: dict[str, tuple[DailyBar, ...]] = {}
    for t in tickers:
        pe = float(np.exp(rng.normal(np.log(9.0), 0.25)))
        vol = rng.uniform(0.012, 0.025)
        base_volume = float(np.exp(rng.normal(np.log(2e6), 0.5)))
        eps = eps_path[t]
        floor_value = abs(statements[t][0].equity) / statements[t][0].shares_outstanding * 0.3

        def fair(k: int) -> float:
            return max(pe * eps[k], floor_value, 0.5)

        log_p = math.log(fair(0)) + rng.normal(0.0, 0.2)
        prev_close = math.exp(log_p)
        series = []
        noise = rng.normal(size=(len(days), 4))
        for i, d in enumerate(days):
            target = math.log(fair(quarter_of(d)))
            log_p += 0.012 * (target - log_p) + vol * noise[i, 0] + market[i]
            close = _r6(math.exp(log_p))
            opn = _r6(prev_close * math.exp(0.3 * vol * noise[i, 1]))
            high = _r6(max(opn, close) * math.exp(0.5 * vol * abs(noise[i, 2])))
            low = _r6(min(opn, close) * math.exp(-0.5 * vol * abs(noise[i, 3])))
            high = max(high, opn, close)
            low = min(low, opn, close)
            volume = float(round(base_volume * math.exp(0.3 * noise[i, 1] * noise[i, 2])))
            series.append(DailyBar(t, d, opn, high, low, close, volume))
            prev_close = close
        bars[t] = tuple(series)

    # ---- Selic: monthly steps of 25bp
    rate = 0.065
    entries = []
    month = date(first_day.year, first_day.month, 1)
    while month <= days[-1]:
        entries.append((month, round(rate, 4)))
        rate = min(0.14, max(0.02, rate + 0.0025 * int(rng.integers(-1, 2))))
        month = date(month.year + (month.month == 12), month.month % 12 + 1, 1)
    risk_free = RiskFreeSeries(tuple(entries))

    # ---- index weights at each release date, proportional to a drifting cap
    caps = {t: float(np.exp(rng.normal(0.0, 0.7))) for t in tickers + _NON_UNIVERSE}
    weights = []
    for yq in quarters:
        as_of = release_date_for(*yq)
        if as_of > days[-1]:
            break
        for t in caps:
            caps[t] *= math.exp(0.1 * rng.normal())
        total = sum(caps.values())
        weights.append(IndexWeights(as_of, {t: _r6(c / total * 0.8) for t, c in caps.items()}))

    return SyntheticDataset(bars, statements, risk_free, weights, tickers)
