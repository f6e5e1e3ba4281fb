from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from alphax import indicators as ind

import oracles
from builders import statement

RATIOS = [f for parts in ind.COMPONENTS.values() for f, _ in parts]


def history(company, quarters, **overrides):
    """Consecutive quarters from Q1 2018; per-quarter fields from callables."""
    out = []
    for k in range(quarters):
        y, q = 2018 + k // 4, k % 4 + 1
        kw = {name: f(k) for name, f in overrides.items()}
        out.append(statement(company, y, q, **kw))
    return out


def test_roe_from_ttm_net_income():
    h = history("PETR3", 4, net_income=lambda k: 2.5, equity=lambda k: 100.0)
    raw = ind.compute_raw(h, price=10.0)
    assert raw.roe == pytest.approx(0.10, abs=1e-15)


def test_zero_equity_leaves_ratios_undefined():
    h = history("PETR3", 4, equity=lambda k: 0.0)
    raw = ind.compute_raw(h, price=10.0)
    assert raw.roe is None
    assert raw.debt_to_equity is None


def test_short_history_has_no_ttm():
    raw = ind.compute_raw(history("PETR3", 3), price=10.0)
    assert raw.roe is None and raw.earnings_yield is None
    assert raw.book_yield is not None


def test_growth_matches_hand_recomputation():
    revs = [100, 110, 95, 120, 130, 105, 125, 140]
    nis = [10, -4, 12, 9, 14, 8, 11, 15]
    h = history("PETR3", 8, revenue=lambda k: float(revs[k]), net_income=lambda k: float(nis[k]),
                shares=lambda k: 20.0, equity=lambda k: 200.0)
    raw = ind.compute_raw(h, price=5.0)
    # trailing sums by hand: revenue 425 -> 500, net income 27 -> 48
    assert raw.revenue_growth_yoy == pytest.approx(500 / 425 - 1, rel=1e-15)
    assert raw.net_income_growth_yoy == pytest.approx(48 / 27 - 1, rel=1e-15)
    assert raw.eps_ttm == pytest.approx(48 / 20)
    assert raw.earnings_yield == pytest.approx(48 / 20 / 5.0)
    assert raw.net_margin == pytest.approx(48 / 500)


def test_negative_earnings_give_negative_yield():
    h = history("PETR3", 4, net_income=lambda k: -1.0)
    assert ind.compute_raw(h, price=10.0).earnings_yield < 0


def test_gap_in_quarters_breaks_ttm():
    h = history("PETR3", 5)
    del h[2]
    assert ind.compute_raw(h, price=10.0).roe is None


# ----------------------------------------------------------------- scores


def test_five_ordered_assets_score_one_to_five():
    raw = {f"A{i}3": ind.RawFundamentals(**{r: float(i) if r != "debt_to_equity" else -float(i)
                                            for r in RATIOS})
           for i in range(1, 6)}
    scores, _ = ind.score_cross_section(raw)
    for k in ind.INDICATORS:
        assert [scores[f"A{i}3"][k] for i in range(1, 6)] == [1, 2, 3, 4, 5]


def test_two_assets_score_one_and_five():
    raw = {"AAAA3": ind.RawFundamentals(roe=0.2), "BBBB3": ind.RawFundamentals(roe=0.1)}
    scores, _ = ind.score_cross_section(raw)
    assert scores["AAAA3"].profitability == 5
    assert scores["BBBB3"].profitability == 1


def test_single_asset_scores_three():
    scores, comp = ind.score_cross_section({"AAAA3": ind.RawFundamentals(roe=0.2)})
    assert all(scores["AAAA3"][k] == 3 for k in ind.INDICATORS)


def test_identical_assets_tie_break_by_ticker():
    same = ind.RawFundamentals(**{r: 1.0 for r in RATIOS})
    raw = {t: same for t in ("CCCC3", "AAAA3", "BBBB3")}
    first, _ = ind.score_cross_section(raw)
    again, _ = ind.score_cross_section(dict(reversed(list(raw.items()))))
    assert first == again
    assert [first[t].growth for t in ("AAAA3", "BBBB3", "CCCC3")] == [5, 3, 1]


def test_empty_cross_section():
    assert ind.score_cross_section({}) == ({}, {})


def test_undefined_ranks_worst():
    ranks = ind.rank_values({"AAAA3": None, "BBBB3": -5.0, "CCCC3": 1.0})
    assert ranks == {"AAAA3": 1, "BBBB3": 2, "CCCC3": 3}


value = st.one_of(st.none(), st.integers(-3, 3).map(float))
raw_st = st.builds(ind.RawFundamentals, **{r: value for r in RATIOS})
TICKERS = ["AAAA3", "BBBB3", "CCCC3", "DDDD3", "EEEE3", "FFFF3"]


def _oracle_scores(raw):
    n = len(raw)
    out = {a: {} for a in raw}
    for name, parts in ind.COMPONENTS.items():
        total = {a: 0 for a in raw}
        for ratio, higher in parts:
            r = oracles.pairwise_rank({a: getattr(v, ratio) for a, v in raw.items()}, higher)
            for a in raw:
                total[a] += r[a]
        final = oracles.pairwise_rank({a: float(s) for a, s in total.items()})
        for a in raw:
            out[a][name] = oracles.bucket(final[a], n)
    return out


@settings(max_examples=300, deadline=None)
@given(st.lists(raw_st, min_size=1, max_size=6))
def test_scores_match_brute_force(raws):
    raw = dict(zip(TICKERS, raws))
    scores, _ = ind.score_cross_section(raw)
    expected = _oracle_scores(raw)
    for a in raw:
        assert {k: scores[a][k] for k in ind.INDICATORS} == expected[a]


@settings(max_examples=200, deadline=None)
@given(st.lists(raw_st, min_size=2, max_size=6), st.sampled_from(RATIOS),
       st.sampled_from([0.25, 0.5, 2.0, 8.0]))
def test_scores_invariant_to_positive_scaling(raws, ratio, c):
    raw = dict(zip(TICKERS, raws))
    scaled = {a: replace(v, **{ratio: None if getattr(v, ratio) is None
                               else getattr(v, ratio) * c}) for a, v in raw.items()}
    assert ind.score_cross_section(raw)[0] == ind.score_cross_section(scaled)[0]


@settings(max_examples=300, deadline=None)
@given(st.lists(raw_st, min_size=2, max_size=6), st.data())
def test_improving_one_ratio_never_lowers_its_score(raws, data):
    raw = dict(zip(TICKERS, raws))
    asset = data.draw(st.sampled_from(sorted(raw)))
    indicator = data.draw(st.sampled_from(ind.INDICATORS))
    ratio, higher = data.draw(st.sampled_from(ind.COMPONENTS[indicator]))
    old = getattr(raw[asset], ratio)
    step = data.draw(st.integers(1, 4)) * (1.0 if higher else -1.0)
    new = 0.0 if old is None else old + step  # any defined value beats undefined
    before = ind.score_cross_section(raw)[0][asset][indicator]
    raw[asset] = replace(raw[asset], **{ratio: new})
    after = ind.score_cross_section(raw)[0][asset][indicator]
    assert after >= before


def test_scores_are_repeatable(small_market):
    t = small_market.trading_days()[-1]
    a = ind.build_panel(small_market, t)
    b = ind.build_panel(small_market, t)
    assert a == b
    assert all(1 <= r.scores[k] <= 5 for r in a.rows.values() for k in ind.INDICATORS)


def test_panel_rows_are_point_in_time(small_market):
    t = small_market.trading_days()[200]
    panel = ind.build_panel(small_market, t)
    assert panel.rows
    for a, row in panel.rows.items():
        b = small_market.bar_at_or_before(a, t)
        assert row.statement.release_date <= t
        assert row.price == (b.high + b.low) / 2


def test_panel_csv_header(small_market):
    panel = ind.build_panel(small_market, small_market.trading_days()[-1])
    lines = ind.panel_to_csv(panel).splitlines()
    assert lines[0] == "ticker,profitability,solvency,valuation,growth,pe,pb,ps,price"
    assert len(lines) == 1 + len(panel.rows)
