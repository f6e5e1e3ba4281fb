"""Fundamental ratios and the four cross-sectional 1-5 indicator scores.

Ratios that would divide by a zero or negative quantity are ``None``
(undefined) and rank worst. Ranks run 1 (worst) .. N (best); ties go to the
lexicographically smaller ticker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from datetime import date
from typing import Sequence

from .market_data import MarketData, StatementRecord, mid_price

INDICATORS = ("profitability", "solvency", "valuation", "growth")

# ratio name, higher-is-better
COMPONENTS: dict[str, tuple[tuple[str, bool], ...]] = {
    "profitability": (("roe", True), ("net_margin", True), ("ebit_margin", True)),
    "solvency": (("debt_to_equity", False), ("cash_flow_coverage", True)),
    "valuation": (("earnings_yield", True), ("book_yield", True), ("sales_yield", True)),
    "growth": (("revenue_growth_yoy", True), ("net_income_growth_yoy", True)),
}


@dataclass(frozen=True)
class RawFundamentals:
    roe: float | None = None
    net_margin: float | None = None
    ebit_margin: float | None = None
    debt_to_equity: float | None = None
    cash_flow_coverage: float | None = None
    earnings_yield: float | None = None
    book_yield: float | None = None
    sales_yield: float | None = None
    revenue_growth_yoy: float | None = None
    net_income_growth_yoy: float | None = None
    eps_ttm: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class IndicatorScores:
    profitability: int
    solvency: int
    valuation: int
    growth: int

    def __getitem__(self, name: str) -> int:
        return getattr(self, name)


@dataclass(frozen=True)
class PanelRow:
    raw: RawFundamentals
    scores: IndicatorScores
    composites: dict[str, float]  # mean rank rescaled to [0, 1]
    price: float
    statement: StatementRecord


@dataclass(frozen=True)
class IndicatorPanel:
    as_of: date
    rows: dict[str, PanelRow]


def _div(num: float | None, den: float | None) -> float | None:
    if num is None or den is None or den <= 0:
        return None
    return num / den


def _ttm(history: Sequence[StatementRecord], end: int) -> dict[str, float] | None:
    """Four-quarter sums of flow items ending at ``history[end]``.

    None unless the four quarters are present and consecutive.
    """
    if end < 3:
        return None
    window = history[end - 3: end + 1]
    if window[-1].quarter_index - window[0].quarter_index != 3:
        return None
    return {
        "revenue": math.fsum(r.revenue for r in window),
        "net_income": math.fsum(r.net_income for r in window),
        "ebit": math.fsum(r.ebit for r in window),
        "op_cash_flow": math.fsum(r.operating_cash_flow for r in window),
    }


def compute_raw(history: Sequence[StatementRecord], price: float) -> RawFundamentals:
    """Ratios for one asset from its released statements (fiscal order) and price.

    Flow items use trailing-four-quarter sums, balance-sheet items the latest
    statement; growth compares the TTM sum with the TTM sum a year earlier.
    """
    if not history:
        raise ValueError("compute_raw needs at least one statement")
    if not price > 0:
        raise ValueError("price must be positive")
    last = history[-1]
    shares = last.shares_outstanding
    flows = _ttm(history, len(history) - 1)

    prior = None
    for j in range(len(history) - 1, -1, -1):
        if history[j].quarter_index == last.quarter_index - 4:
            prior = _ttm(history, j)
            break

    def growth(key):
        if flows is None or prior is None or prior[key] <= 0:
            return None
        return flows[key] / prior[key] - 1.0

    ni = flows["net_income"] if flows else None
    rev = flows["revenue"] if flows else None
    return RawFundamentals(
        roe=_div(ni, last.equity),
        net_margin=_div(ni, rev),
        ebit_margin=_div(flows["ebit"] if flows else None, rev),
        debt_to_equity=_div(last.total_liabilities, last.equity),
        cash_flow_coverage=_div(flows["op_cash_flow"] if flows else None,
                                last.total_liabilities),
        earnings_yield=None if ni is None else ni / shares / price,
        book_yield=last.equity / shares / price,
        sales_yield=None if rev is None else rev / shares / price,
        revenue_growth_yoy=growth("revenue"),
        net_income_growth_yoy=growth("net_income"),
        eps_ttm=None if ni is None else ni / shares,
    )


def rank_values(values: dict[str, float | None], higher_is_better: bool = True) -> dict[str, int]:
    """Ranks 1 (worst) .. N (best). Undefined values are worst; ticker breaks ties."""
    sign = 1.0 if higher_is_better else -1.0

    def best_first(item):
        ticker, v = item
        return (v is None, 0.0 if v is None else -sign * v, ticker)

    ordered = sorted(values.items(), key=best_first)
    n = len(ordered)
    return {ticker: n - i for i, (ticker, _) in enumerate(ordered)}


def quintile_score(rank: int, n: int) -> int:
    if n == 1:
        return 3
    return 1 + (4 * (rank - 1)) // (n - 1)


def score_cross_section(raw: dict[str, RawFundamentals]):
    """Scores and normalized composites for every asset in ``raw``.

    Returns ``(scores, composites)``; both empty for an empty cross-section.
    """
    n = len(raw)
    if n == 0:
        return {}, {}
    scores: dict[str, dict[str, int]] = {a: {} for a in raw}
    composites: dict[str, dict[str, float]] = {a: {} for a in raw}
    for indicator, parts in COMPONENTS.items():
        rank_sum = {a: 0 for a in raw}
        for name, higher in parts:
            ranks = rank_values({a: getattr(r, name) for a, r in raw.items()}, higher)
            for a, rk in ranks.items():
                rank_sum[a] += rk
        final = rank_values({a: float(s) for a, s in rank_sum.items()})
        for a in raw:
            scores[a][indicator] = quintile_score(final[a], n)
            mean_rank = rank_sum[a] / len(parts)
            composites[a][indicator] = 0.5 if n == 1 else (mean_rank - 1.0) / (n - 1)
    return ({a: IndicatorScores(**s) for a, s in scores.items()}, composites)


def build_panel(data: MarketData, t: date, universe: Sequence[str] | None = None) -> IndicatorPanel:
    """Cross-section at ``t`` over every asset with a released statement and a price."""
    raw, prices, stmts = {}, {}, {}
    for asset in (universe if universe is not None else data.universe):
        history = data.statements_released(asset, t)
        bar = data.bar_at_or_before(asset, t)
        if not history or bar is None:
            continue
        prices[asset] = mid_price(bar)
        raw[asset] = compute_raw(history, prices[asset])
        stmts[asset] = history[-1]
    scores, composites = score_cross_section(raw)
    rows = {a: PanelRow(raw[a], scores[a], composites[a], prices[a], stmts[a]) for a in sorted(raw)}
    return IndicatorPanel(t, rows)


def _inv(y: float | None) -> str:
    return "" if y is None or y <= 0 else f"{1.0 / y:.6f}"


def panel_to_csv(panel: IndicatorPanel) -> str:
    """Debug dump: scores, P/E, P/B, P/S and price per asset (blank = undefined)."""
    lines = ["ticker,profitability,solvency,valuation,growth,pe,pb,ps,price"]
    for a, row in panel.rows.items():
        s, r = row.scores, row.raw
        lines.append(f"{a},{s.profitability},{s.solvency},{s.valuation},{s.growth},"
                     f"{_inv(r.earnings_yield)},{_inv(r.book_yield)},{_inv(r.sales_yield)},"
                     f"{row.price:.6f}")
    return "\n".join(lines) + "\n"
