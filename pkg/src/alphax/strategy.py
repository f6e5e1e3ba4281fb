"""Order generation: AlphaX, technical baselines and benchmark tracks.

Strategy objects are driven by :func:`alphax.engine.run_backtest`. Each one
names its decision days and, on those days, returns a :class:`Decision`.
AlphaX decisions carry a selection that the engine turns into trades via its
rebalance step; the others carry orders directly.
"""

from __future__ import annotations

import statistics
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import date
from typing import Literal, Sequence

from .indicators import INDICATORS, IndicatorPanel
from .market_data import (
    IndexWeights,
    MarketData,
    fiscal_quarter_released_on,
    quarter_label,
    release_dates_between,
)
from .technical import indicator_series
from .valuation import PriceProjection, ValuationConfig, Valuator

RISK_FREE = "SELIC"

Side = Literal["buy", "sell"]
Reason = Literal["rebalance", "take_profit", "stop_loss", "vertical", "signal", "end"]


class StrategyError(Exception):
    pass


@dataclass(frozen=True)
class Order:
    asset: str
    side: Side
    weight_fraction: float = 1.0
    reason: Reason = "rebalance"
    take_profit: float | None = None

    def __post_init__(self):
        if self.side == "buy" and not (0.0 < self.weight_fraction <= 1.0):
            raise ValueError("buy weight must be in (0, 1]")


@dataclass
class AlphaXConfig:
    max_assets: int = 4
    growth_threshold: int = 2
    stop_loss: float = 0.10

    def __post_init__(self):
        if self.max_assets < 1:
            raise ValueError("alphax.max_assets must be >= 1")
        if not 0.0 < self.stop_loss < 1.0:
            raise ValueError("alphax.stop_loss must be in (0, 1)")


_TECH_DEFAULT_BANDS = {"rsi": (30.0, 70.0), "stochastic": (20.0, 80.0), "mfi": (20.0, 80.0)}


@dataclass
class TechnicalConfig:
    kind: str = "rsi"
    window: int = 14
    oversold: float | None = None
    overbought: float | None = None
    max_positions: int = 4
    idle_cash_risk_free: bool = False

    def __post_init__(self):
        if self.kind not in _TECH_DEFAULT_BANDS:
            raise ValueError(f"unknown technical indicator {self.kind!r}")
        lo, hi = _TECH_DEFAULT_BANDS[self.kind]
        if self.oversold is None:
            self.oversold = lo
        if self.overbought is None:
            self.overbought = hi
        if not 0.0 <= self.oversold < self.overbought <= 100.0:
            raise ValueError("need 0 <= oversold < overbought <= 100")
        if self.window < 2:
            raise ValueError("tech.window must be >= 2")
        if self.max_positions < 1:
            raise ValueError("tech.max_positions must be >= 1")


@dataclass
class Decision:
    orders: list[Order] = field(default_factory=list)
    # AlphaX: ranked (asset, expected_return) plus the projections behind it
    selection: list[tuple[str, float]] | None = None
    projections: dict[str, PriceProjection] = field(default_factory=dict)
    label: str | None = None


# ------------------------------------------------------------------ AlphaX


def alphax_select(panel: IndicatorPanel, projections: dict[str, PriceProjection],
                  cfg: AlphaXConfig | None = None) -> list[tuple[str, float]]:
    """Filter on scores, rank by expected return, keep the best ``max_assets``.

    Profitability, solvency and valuation must be strictly above the
    cross-sectional median score; growth only needs ``growth_threshold``.
    """
    cfg = cfg or AlphaXConfig()
    if not panel.rows:
        return []
    medians = {k: statistics.median(r.scores[k] for r in panel.rows.values())
               for k in INDICATORS if k != "growth"}
    survivors = []
    for asset, row in panel.rows.items():
        if any(row.scores[k] <= m for k, m in medians.items()):
            continue
        if row.scores.growth < cfg.growth_threshold:
            continue
        proj = projections.get(asset)
        if proj is None or not proj.expected_return > 0:
            continue
        survivors.append((asset, proj.expected_return))
    survivors.sort(key=lambda p: (-p[1], p[0]))
    return survivors[: cfg.max_assets]


def alphax_allocate(selection: Sequence[tuple[str, float]]) -> list[Order]:
    """Equal weights across the selection, or everything to the risk-free sleeve."""
    if not selection:
        return [Order(RISK_FREE, "buy", 1.0, "rebalance")]
    k = len(selection)
    return [Order(asset, "buy", 1.0 / k, "rebalance") for asset, _ in selection]


# --------------------------------------------------------------- technical


def technical_step(held: Sequence[str], values: dict[str, float | None],
                   cfg: TechnicalConfig) -> list[Order]:
    """Exit overbought holdings, then fill free slots with the most oversold names."""
    orders = [Order(a, "sell", 1.0, "signal") for a in sorted(held)
              if values.get(a) is not None and values[a] > cfg.overbought]
    remaining = len(held) - len(orders)
    free = cfg.max_positions - remaining
    if free <= 0:
        return orders
    held_set = set(held)
    candidates = sorted(
        (v, a) for a, v in values.items()
        if v is not None and v < cfg.oversold and a not in held_set
    )
    for _, a in candidates[:free]:
        orders.append(Order(a, "buy", 1.0 / cfg.max_positions, "signal"))
    return orders


# ------------------------------------------------------------------ NIbov


def nibov_weights(weights: IndexWeights | None, universe: Sequence[str]) -> IndexWeights:
    """Index weights restricted to ``universe`` and renormalised to sum to 1."""
    if weights is None:
        raise StrategyError("no index weights available")
    allowed = set(universe)
    kept = {a: w for a, w in weights.weights.items() if a in allowed and w > 0}
    if not kept:
        raise StrategyError(f"no universe asset in index weights as of {weights.as_of}")
    return IndexWeights(weights.as_of, kept).normalized()


# ------------------------------------------------------------ schedule


def decision_schedule(data: MarketData) -> dict[date, date]:
    """Statutory release date -> execution day (first trading day on or after it)."""
    days = data.trading_days()
    if not days:
        return {}
    out = {}
    for d in release_dates_between(days[0], days[-1]):
        i = bisect_left(days, d)
        if i < len(days):
            out[d] = days[i]
    return out


# -------------------------------------------------------------- strategies


class Strategy:
    """Base class. ``sweep_to_risk_free`` routes idle money into the Selic sleeve."""

    name = "base"
    sweep_to_risk_free = True
    stop_loss_fraction: float | None = None

    def decision_days(self, data: MarketData, days: Sequence[date]) -> set[date]:
        return set()

    def vertical_after(self, t: date) -> date | None:
        return None

    def decide(self, t: date, held: Sequence[str], data: MarketData) -> Decision:
        return Decision()


class SelicStrategy(Strategy):
    name = "selic"


class _QuarterlyStrategy(Strategy):
    def decision_days(self, data, days):
        self._schedule = decision_schedule(data)
        self._exec = sorted(set(self._schedule.values()))
        self._labels = {}
        for scheduled, ex in self._schedule.items():
            y, q = fiscal_quarter_released_on(scheduled)
            self._labels[ex] = quarter_label(y, q)
        in_range = set(days)
        return {d for d in self._exec if d in in_range}

    def vertical_after(self, t):
        i = bisect_left(self._exec, t)
        if i < len(self._exec) and self._exec[i] == t:
            i += 1
        return self._exec[i] if i < len(self._exec) else None


class AlphaXStrategy(_QuarterlyStrategy):
    name = "alphax"

    def __init__(self, cfg: AlphaXConfig | None = None,
                 valuation: ValuationConfig | None = None):
        self.cfg = cfg or AlphaXConfig()
        self.stop_loss_fraction = self.cfg.stop_loss
        self.valuation = valuation or ValuationConfig()
        self.valuator: Valuator | None = None

    def decision_days(self, data, days):
        out = super().decision_days(data, days)
        self.valuator = Valuator(data, self._exec, self.valuation)
        return out

    def decide(self, t, held, data):
        panel = self.valuator.panel(t)
        projections = self.valuator.project_all(t)
        selection = alphax_select(panel, projections, self.cfg)
        return Decision(selection=selection, projections=projections, label=self._labels.get(t))


class NIbovStrategy(_QuarterlyStrategy):
    name = "nibov"

    def decide(self, t, held, data):
        target = nibov_weights(data.index_weights_as_of(t), data.universe)
        tradable = {a: w for a, w in target.weights.items() if data.bar_on(a, t) is not None}
        if not tradable:
            raise StrategyError(f"no tradable NIbov constituent on {t}")
        target = IndexWeights(t, tradable).normalized()
        orders = [Order(a, "sell", 1.0, "rebalance") for a in sorted(held)]
        orders += [Order(a, "buy", w, "rebalance") for a, w in sorted(target.weights.items())]
        return Decision(orders=orders, label=self._labels.get(t))


class TechnicalStrategy(Strategy):
    """Daily oscillator strategy; signals use closes strictly before the fill day."""

    def __init__(self, cfg: TechnicalConfig):
        self.cfg = cfg
        self.name = cfg.kind
        self.sweep_to_risk_free = cfg.idle_cash_risk_free
        self._series: dict[str, tuple[list[date], list[float | None]]] = {}

    def decision_days(self, data, days):
        self._series = {}
        for a in data.universe:
            bars = data.bars.get(a, ())
            self._series[a] = ([b.date for b in bars],
                               indicator_series(self.cfg.kind, bars, self.cfg.window))
        return set(days)

    def value_before(self, asset: str, t: date) -> float | None:
        dates, values = self._series.get(asset, ([], []))
        i = bisect_left(dates, t)
        return values[i - 1] if i else None

    def decide(self, t, held, data):
        values = {a: self.value_before(a, t) for a in data.universe
                  if data.bar_on(a, t) is not None or a in held}
        return Decision(orders=technical_step(held, values, self.cfg))


STRATEGY_NAMES = ("alphax", "rsi", "stochastic", "mfi", "selic", "nibov")
