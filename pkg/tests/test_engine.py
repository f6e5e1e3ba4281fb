from datetime import date

import pytest

from alphax import engine as eng
from alphax.market_data import DataGapError, MarketData, RiskFreeSeries
from alphax.strategy import RISK_FREE, AlphaXStrategy, SelicStrategy
from alphax.valuation import ForestConfig, PriceProjection, ValuationConfig

from builders import (
    IdleStrategy,
    ScriptedStrategy,
    bar,
    bars_from_closes,
    market,
    random_barrier_case,
    weekdays,
)


def position(tp=120.0, sl=90.0):
    return eng.Position(1, "PETR3", date(2021, 3, 1), 100.0, 10.0, tp, sl, date(2021, 5, 31))


D = date(2021, 3, 2)


# --------------------------------------------------------------- barriers


def test_take_profit_fills_at_target():
    assert eng.check_barriers(position(), bar("PETR3", D, 110, 121, 105, 115)) == \
        ("take_profit", 120.0)


def test_stop_loss_fills_at_stop():
    assert eng.check_barriers(position(), bar("PETR3", D, 92, 95, 89, 91)) == ("stop_loss", 90.0)


def test_double_touch_is_stop_loss():
    assert eng.check_barriers(position(), bar("PETR3", D, 100, 121, 89, 100)) == \
        ("stop_loss", 90.0)


def test_no_touch_and_entry_day():
    assert eng.check_barriers(position(), bar("PETR3", D, 100, 119, 91, 100)) is None
    assert eng.check_barriers(position(), bar("PETR3", date(2021, 3, 1), 100, 130, 80, 100)) is None


# -------------------------------------------------------------- rebalance


def _proj(*assets):
    return {a: PriceProjection(a, 10.0, 12.0, 0.2, None, None) for a in assets}


def test_same_selection_is_no_op():
    held = ["AAAA3", "BBBB3", "CCCC3", "DDDD3"]
    plan = eng.rebalance(held, [(a, 0.2) for a in held], _proj(*held))
    assert plan.orders == []
    assert plan.refresh == {a: 12.0 for a in held}


def test_empty_selection_exits_everything():
    plan = eng.rebalance(["PRIO3", "PETR3", "GOAU4"], [], {})
    assert [(o.asset, o.side) for o in plan.orders] == [
        ("GOAU4", "sell"), ("PETR3", "sell"), ("PRIO3", "sell"), (RISK_FREE, "buy")]


def test_partial_overlap_trades_symmetric_difference():
    held = ["AAAA3", "BBBB3", "CCCC3"]
    sel = [("BBBB3", 0.3), ("DDDD3", 0.2)]
    plan = eng.rebalance(held, sel, _proj("BBBB3", "DDDD3"))
    traded = {o.asset for o in plan.orders}
    assert traded == set(held) ^ {"BBBB3", "DDDD3"}
    assert [o.weight_fraction for o in plan.orders if o.side == "buy"] == [0.5]


# ---------------------------------------------------------------- accrual


def _cash_market(n_days, rate):
    days = weekdays(date(2021, 1, 4), n_days)
    return market({"AAAA3": bars_from_closes("AAAA3", days, [10.0] * n_days)}, rate=rate), days


def test_all_cash_year_compounds_daily():
    data, days = _cash_market(253, 0.10)
    run = eng.run_backtest(data, SelicStrategy(), days[0], days[-1])
    assert run.final_equity == pytest.approx(1_000_000 * 1.10, rel=1e-9)
    assert len(run.equity_curve) == 253


def test_idle_strategy_follows_accrual_path():
    data, days = _cash_market(40, 0.0725)
    run = eng.run_backtest(data, IdleStrategy(), days[0], days[-1])
    factor = 1.0725 ** (1 / 252)
    for i, eq in enumerate(run.equity):
        assert eq == pytest.approx(1_000_000 * factor ** i, rel=1e-12)
    assert run.ledger == []


def test_rate_change_applies_from_next_day():
    days = weekdays(date(2021, 1, 4), 5)
    data = MarketData({"AAAA3": bars_from_closes("AAAA3", days, [10.0] * 5)}, {},
                      RiskFreeSeries(((date(2020, 1, 1), 0.0), (days[2], 0.5))))
    run = eng.run_backtest(data, IdleStrategy(), days[0], days[-1])
    assert run.equity[:3] == [1_000_000.0] * 3
    assert run.equity[3] == pytest.approx(1_000_000 * 1.5 ** (1 / 252))


# --------------------------------------------------------------- trading


def test_take_profit_then_selic_until_next_decision():
    days = weekdays(date(2021, 3, 1), 30)
    closes = [100.0] * 5 + [125.0] * 25
    data = market({"AAAA3": bars_from_closes("AAAA3", days, closes, spread=0.0)}, rate=0.1)
    strat = ScriptedStrategy({days[0]: {"AAAA3": 120.0}, days[20]: {}})
    run = eng.run_backtest(data, strat, days[0], days[-1])
    kinds = [(r.asset, r.side, r.reason, r.price) for r in run.ledger]
    assert kinds == [("AAAA3", "buy", "rebalance", 100.0), ("AAAA3", "sell", "take_profit", 120.0)]
    assert run.equity_curve[6][2] > 0  # proceeds earn Selic
    assert eng.replay_ledger(run) == pytest.approx(run.final_equity, rel=1e-12)


def test_reselected_position_is_kept_with_fresh_target():
    days = weekdays(date(2021, 3, 1), 30)
    data = market({"AAAA3": bars_from_closes("AAAA3", days, [100.0] * 30, spread=0.0)})
    strat = ScriptedStrategy({days[0]: {"AAAA3": 130.0}, days[10]: {"AAAA3": 101.0}})
    run = eng.run_backtest(data, strat, days[0], days[-1])
    # zero-range bars never reach the refreshed target
    assert [r.reason for r in run.ledger] == ["rebalance", "end"]
    # with a 1% range, the refreshed 100.5 target fills the day after the refresh
    strat = ScriptedStrategy({days[0]: {"AAAA3": 130.0}, days[10]: {"AAAA3": 100.5}})
    data = market({"AAAA3": bars_from_closes("AAAA3", days, [100.0] * 30, spread=0.01)})
    run = eng.run_backtest(data, strat, days[0], days[-1])
    assert [(r.reason, r.price) for r in run.ledger] == [
        ("rebalance", 100.0), ("take_profit", 100.5)]
    assert run.ledger[1].date == days[11]


def test_deselected_on_vertical_date():
    days = weekdays(date(2021, 3, 1), 30)
    data = market({"AAAA3": bars_from_closes("AAAA3", days, [100.0] * 30),
                   "BBBB3": bars_from_closes("BBBB3", days, [50.0] * 30)})
    strat = ScriptedStrategy({days[0]: {"AAAA3": 130.0}, days[10]: {"BBBB3": 60.0}})
    run = eng.run_backtest(data, strat, days[0], days[-1])
    assert [(r.asset, r.side, r.reason) for r in run.ledger] == [
        ("AAAA3", "buy", "rebalance"), ("AAAA3", "sell", "vertical"),
        ("BBBB3", "buy", "rebalance"), ("BBBB3", "sell", "end")]
    assert run.allocations == [(days[0].isoformat(), ["AAAA3"]), (days[10].isoformat(), ["BBBB3"])]


def test_missing_bar_for_open_position_is_data_gap():
    days = weekdays(date(2021, 3, 1), 10)
    series = bars_from_closes("AAAA3", days, [100.0] * 10)
    data = market({"AAAA3": series[:5] + series[6:],
                   "BBBB3": bars_from_closes("BBBB3", days, [10.0] * 10)})
    strat = ScriptedStrategy({days[0]: {"AAAA3": 150.0}})
    with pytest.raises(DataGapError, match="AAAA3"):
        eng.run_backtest(data, strat, days[0], days[-1])


def test_costs_reduce_equity():
    days = weekdays(date(2021, 3, 1), 20)
    data = market({"AAAA3": bars_from_closes("AAAA3", days, [100.0] * 20, spread=0.0)}, rate=0.0)
    strat = ScriptedStrategy({days[0]: {"AAAA3": 150.0}})
    free = eng.run_backtest(data, strat, days[0], days[-1])
    costly = eng.run_backtest(data, strat, days[0], days[-1], eng.EngineConfig(per_trade_bps=10))
    assert free.final_equity == pytest.approx(1_000_000.0)
    assert costly.final_equity < free.final_equity
    assert eng.replay_ledger(costly) == pytest.approx(costly.final_equity, rel=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_random_paths_conserve_cash(seed):
    data, strat, days = random_barrier_case(seed)
    run = eng.run_backtest(data, strat, days[0], days[-1])
    assert eng.replay_ledger(run) == pytest.approx(run.final_equity, rel=1e-11)
    assert run.dates == days
    assert all(eq > 0 for eq in run.equity)


def test_alphax_positions_bracket_entry(small_market):
    days = small_market.trading_days()
    strat = AlphaXStrategy(valuation=ValuationConfig(ForestConfig(n_trees=10, seed=1)))
    run = eng.run_backtest(small_market, strat, days[0], days[-1])
    buys = {r.position_id: r for r in run.ledger if r.side == "buy"}
    sells = {r.position_id: r for r in run.ledger if r.side == "sell"}
    assert buys and set(buys) == set(sells)
    for pid, s in sells.items():
        if s.reason == "stop_loss":
            assert s.price == pytest.approx(buys[pid].price * 0.9)
