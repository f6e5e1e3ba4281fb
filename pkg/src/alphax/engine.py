"""Daily event loop with triple-barrier exits and a Selic sleeve.

Per trading day, in order:

1. accrue interest on the risk-free balance for the period since the
   previous trading day;
2. check take-profit / stop-loss barriers on open positions;
3. on a decision day, ask the strategy and fill its orders at mid price;
4. mark to market at the close and append to the equity curve.

Positions still open on the last day are sold at that day's mid price.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

from .market_data import DailyBar, DataGapError, MarketData, mid_price
from .strategy import RISK_FREE, Decision, Order, Strategy
from .valuation import PriceProjection

log = logging.getLogger(__name__)

DAYS_PER_YEAR = 252


@dataclass
class EngineConfig:
    initial_capital: float = 1_000_000.0
    per_trade_bps: float = 0.0


@dataclass
class Position:
    id: int
    asset: str
    entry_date: date
    entry_price: float
    quantity: float
    take_profit_price: float | None = None
    stop_loss_price: float | None = None
    vertical_date: date | None = None


@dataclass
class TradeRecord:
    date: date
    asset: str
    side: str
    qty: float
    price: float
    reason: str
    cash_after: float
    equity_after: float
    position_id: int
    fee: float = 0.0


@dataclass
class PortfolioState:
    cash: float
    risk_free_balance: float = 0.0
    positions: dict[str, Position] = field(default_factory=dict)
    equity_curve: list[tuple[date, float, float, int]] = field(default_factory=list)

    @property
    def liquid(self) -> float:
        return self.cash + self.risk_free_balance

    def equity(self, marks: dict[str, float]) -> float:
        return self.liquid + math.fsum(p.quantity * marks[a] for a, p in self.positions.items())


@dataclass
class BacktestRun:
    strategy: str
    config: dict
    initial_capital: float
    equity_curve: list[tuple[date, float, float, int]]
    ledger: list[TradeRecord]
    allocations: list[tuple[str, list[str]]]
    risk_free_returns: list[float]  # per-period Selic return aligned with equity returns
    interest: list[float]  # interest credited on each day of the curve

    @property
    def dates(self) -> list[date]:
        return [row[0] for row in self.equity_curve]

    @property
    def equity(self) -> list[float]:
        return [row[1] for row in self.equity_curve]

    @property
    def final_equity(self) -> float:
        return self.equity_curve[-1][1]


class BacktestError(Exception):
    pass


# ---------------------------------------------------------------- barriers


def check_barriers(position: Position, bar: DailyBar) -> tuple[str, float] | None:
    """Exit triggered by ``bar``, as ``(reason, fill_price)``, or None.

    A bar touching both barriers is treated as a stop-loss. The vertical
    barrier never exits here; the rebalance step on that day decides.
    """
    if bar.date <= position.entry_date:
        return None
    tp, sl = position.take_profit_price, position.stop_loss_price
    hit_tp = tp is not None and bar.high >= tp
    hit_sl = sl is not None and bar.low <= sl
    if hit_sl:
        return ("stop_loss", sl)
    if hit_tp:
        return ("take_profit", tp)
    return None


@dataclass
class RebalancePlan:
    orders: list[Order]
    refresh: dict[str, float]  # kept asset -> new take-profit price


def rebalance(held: Sequence[str], selection: Sequence[tuple[str, float]],
              projections: dict[str, PriceProjection]) -> RebalancePlan:
    """Trades needed to move from ``held`` to ``selection``.

    Re-selected holdings are kept and get a refreshed take-profit; only the
    symmetric difference trades. New names are weighted ``1/k`` for a
    selection of size ``k``; an empty selection parks everything in Selic.
    """
    selected = [a for a, _ in selection]
    chosen = set(selected)
    orders = [Order(a, "sell", 1.0, "rebalance") for a in sorted(held) if a not in chosen]
    refresh = {a: projections[a].projected_price for a in selected if a in set(held)}
    if not selected:
        orders.append(Order(RISK_FREE, "buy", 1.0, "rebalance"))
        return RebalancePlan(orders, refresh)
    k = len(selected)
    for a in selected:
        if a not in set(held):
            orders.append(Order(a, "buy", 1.0 / k, "rebalance",
                                take_profit=projections[a].projected_price))
    return RebalancePlan(orders, refresh)


# ------------------------------------------------------------------ engine


class _Book:
    """Mutable portfolio plus its trade ledger for a single run."""

    def __init__(self, capital: float, sweep: bool, bps: float):
        self.state = PortfolioState(cash=0.0 if sweep else capital,
                                    risk_free_balance=capital if sweep else 0.0)
        self.sweep = sweep
        self.bps = bps
        self.ledger: list[TradeRecord] = []
        self._ids = itertools.count(1)

    def _deposit(self, amount: float):
        if self.sweep:
            self.state.risk_free_balance += amount
        else:
            self.state.cash += amount

    def _withdraw(self, amount: float):
        from_cash = min(amount, self.state.cash)
        self.state.cash -= from_cash
        self.state.risk_free_balance -= amount - from_cash
        if self.state.risk_free_balance < 0:
            self.state.risk_free_balance = 0.0

    def _record(self, t, pos, side, qty, price, reason, marks, fee):
        self.ledger.append(TradeRecord(t, pos.asset, side, qty, price, reason,
                                       self.state.liquid, self.state.equity(marks),
                                       pos.id, fee))

    def sell(self, t, asset, price, reason, marks):
        pos = self.state.positions.pop(asset)
        gross = pos.quantity * price
        fee = gross * self.bps / 1e4
        self._deposit(gross - fee)
        self._record(t, pos, "sell", pos.quantity, price, reason, marks, fee)

    def buy(self, t, asset, price, amount, reason, marks, take_profit=None,
            stop_loss=None, vertical=None):
        amount = min(amount, self.state.liquid)
        if amount <= 0:
            return
        fee = amount * self.bps / 1e4
        self._withdraw(amount)
        pos = Position(next(self._ids), asset, t, price, (amount - fee) / price,
                       take_profit, stop_loss, vertical)
        self.state.positions[asset] = pos
        self._record(t, pos, "buy", pos.quantity, price, reason, marks, fee)

    def sweep_cash(self):
        self.state.risk_free_balance += self.state.cash
        self.state.cash = 0.0


def _mids(data: MarketData, assets, t: date) -> dict[str, float]:
    out = {}
    for a in assets:
        bar = data.bar_on(a, t)
        if bar is None:
            raise DataGapError(a, t)
        out[a] = mid_price(bar)
    return out


def run_backtest(data: MarketData, strategy: Strategy, start: date, end: date,
                 config: EngineConfig | None = None, snapshot: dict | None = None) -> BacktestRun:
    """Simulate ``strategy`` over every trading day in ``[start, end]``."""
    cfg = config or EngineConfig()
    days = data.trading_days(start, end)
    if not days:
        raise BacktestError(f"no trading days between {start} and {end}")
    decision_days = strategy.decision_days(data, days)
    book = _Book(cfg.initial_capital, strategy.sweep_to_risk_free, cfg.per_trade_bps)
    state = book.state
    allocations: list[tuple[str, list[str]]] = []
    rf_returns: list[float] = []
    interest: list[float] = []

    for i, t in enumerate(days):
        # 1. interest for (previous day, t]
        credited = 0.0
        if i > 0:
            factor = data.risk_free.daily_factor(days[i - 1], DAYS_PER_YEAR)
            rf_returns.append(factor - 1.0)
            credited = state.risk_free_balance * (factor - 1.0)
            state.risk_free_balance += credited
        interest.append(credited)

        bars = {}
        for a in state.positions:
            bar = data.bar_on(a, t)
            if bar is None:
                raise DataGapError(a, t)
            bars[a] = bar
        marks = {a: mid_price(b) for a, b in bars.items()}

        # 2. barriers
        for a in sorted(state.positions):
            hit = check_barriers(state.positions[a], bars[a])
            if hit is not None:
                book.sell(t, a, hit[1], hit[0], marks)

        # 3. strategy
        if t in decision_days:
            decision = strategy.decide(t, sorted(state.positions), data)
            _execute(book, data, strategy, decision, t, cfg, allocations)

        # end of run: liquidate at mid
        if i == len(days) - 1:
            marks = _mids(data, state.positions, t)
            for a in sorted(state.positions):
                book.sell(t, a, marks[a], "end", marks)

        # 4. mark at close
        closes = {a: data.bar_on(a, t).close for a in state.positions}
        state.equity_curve.append((t, state.equity(closes), state.risk_free_balance,
                                   len(state.positions)))

    return BacktestRun(
        strategy=strategy.name,
        config=dict(snapshot or {}),
        initial_capital=cfg.initial_capital,
        equity_curve=state.equity_curve,
        ledger=book.ledger,
        allocations=allocations,
        risk_free_returns=rf_returns,
        interest=interest,
    )


def _execute(book: _Book, data: MarketData, strategy: Strategy, decision: Decision,
             t: date, cfg: EngineConfig, allocations: list):
    state = book.state
    orders = decision.orders
    refresh: dict[str, float] = {}
    vertical = strategy.vertical_after(t)
    if decision.selection is not None:
        plan = rebalance(sorted(state.positions), decision.selection, decision.projections)
        orders, refresh = plan.orders, plan.refresh
        allocations.append((decision.label or t.isoformat(), [a for a, _ in decision.selection]))
    elif decision.label is not None:
        allocations.append((decision.label, sorted(o.asset for o in orders if o.side == "buy")))

    for a, tp in refresh.items():
        pos = state.positions[a]
        pos.take_profit_price = tp
        pos.vertical_date = vertical

    buy_assets = [o.asset for o in orders if o.side == "buy" and o.asset != RISK_FREE]
    tradable = {a for a in buy_assets if data.bar_on(a, t) is not None}
    for a in buy_assets:
        if a not in tradable:
            log.warning("%s: no bar for %s on %s, order skipped", strategy.name, a, t)
    marks = _mids(data, set(state.positions), t)
    marks.update({a: mid_price(data.bar_on(a, t)) for a in tradable})

    for o in orders:
        if o.side == "sell" and o.asset in state.positions:
            reason = o.reason
            if reason == "rebalance" and state.positions[o.asset].vertical_date == t:
                reason = "vertical"
            book.sell(t, o.asset, marks[o.asset], reason, marks)

    equity = state.equity(marks)
    buys = [o for o in orders if o.side == "buy" and o.asset in tradable]
    wanted = math.fsum(o.weight_fraction * equity for o in buys)
    scale = min(1.0, state.liquid / wanted) if wanted > 0 else 0.0
    for o in buys:
        price = marks[o.asset]
        stop = tp = None
        if decision.selection is not None:
            tp = o.take_profit
            stop = price * (1.0 - strategy.stop_loss_fraction)
        book.buy(t, o.asset, price, o.weight_fraction * equity * scale, o.reason, marks,
                 take_profit=tp, stop_loss=stop, vertical=vertical if tp is not None else None)
    if any(o.asset == RISK_FREE for o in orders):
        book.sweep_cash()


# ------------------------------------------------------------------ replay


def replay_ledger(run: BacktestRun) -> float:
    """Final equity rebuilt from initial capital, interest and trade cash flows."""
    by_day: dict[date, list[TradeRecord]] = {}
    for rec in run.ledger:
        by_day.setdefault(rec.date, []).append(rec)
    liquid = run.initial_capital
    open_qty: dict[int, float] = {}
    for t, credited in zip(run.dates, run.interest):
        liquid += credited
        for rec in by_day.get(t, ()):
            if rec.side == "buy":
                liquid -= rec.qty * rec.price + rec.fee
                open_qty[rec.position_id] = rec.qty
            else:
                liquid += rec.qty * rec.price - rec.fee
                open_qty.pop(rec.position_id)
    if open_qty:
        raise BacktestError(f"positions never closed: {sorted(open_qty)}")
    return liquid
