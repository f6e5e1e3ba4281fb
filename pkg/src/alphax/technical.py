"""RSI (Wilder), Stochastic %K and Money Flow Index.

The point functions take the trailing window of data and return ``None`` when
there is not enough of it. The ``*_series`` variants evaluate the same
formula at every index using only data up to that index.
"""

from __future__ import annotations

from typing import Sequence

from .market_data import DailyBar


def _rsi_from_averages(avg_gain: float, avg_loss: float) -> float:
    if avg_loss == 0.0:
        return 100.0 if avg_gain > 0.0 else 50.0
    if avg_gain == 0.0:
        return 0.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def rsi_series(closes: Sequence[float], window: int = 14) -> list[float | None]:
    """Wilder RSI at every index; seeded with the simple mean of the first
    ``window`` changes, then smoothed with factor ``1/window``."""
    out: list[float | None] = [None] * len(closes)
    if len(closes) < window + 1:
        return out
    gains = [max(b - a, 0.0) for a, b in zip(closes, closes[1:])]
    losses = [max(a - b, 0.0) for a, b in zip(closes, closes[1:])]
    avg_gain = sum(gains[:window]) / window
    avg_loss = sum(losses[:window]) / window
    out[window] = _rsi_from_averages(avg_gain, avg_loss)
    for i in range(window, len(gains)):
        avg_gain = (avg_gain * (window - 1) + gains[i]) / window
        avg_loss = (avg_loss * (window - 1) + losses[i]) / window
        out[i + 1] = _rsi_from_averages(avg_gain, avg_loss)
    return out


def compute_rsi(closes: Sequence[float], window: int = 14) -> float | None:
    if len(closes) < window + 1:
        return None
    return rsi_series(closes, window)[-1]


def compute_stochastic(bars: Sequence[DailyBar], window: int = 14) -> float | None:
    """%K of the last bar against the last ``window`` bars' range; 50 if flat."""
    if len(bars) < window:
        return None
    recent = bars[-window:]
    hh = max(b.high for b in recent)
    ll = min(b.low for b in recent)
    if hh == ll:
        return 50.0
    k = 100.0 * (recent[-1].close - ll) / (hh - ll)
    return min(100.0, max(0.0, k))


def compute_mfi(bars: Sequence[DailyBar], window: int = 14) -> float | None:
    """Money Flow Index over the last ``window + 1`` bars.

    Zero negative flow gives 100, zero positive flow 0; with no flow on
    either side (flat typical price or no volume) the index is 50.
    """
    if len(bars) < window + 1:
        return None
    recent = bars[-(window + 1):]
    typical = [(b.high + b.low + b.close) / 3.0 for b in recent]
    pos = neg = 0.0
    for i in range(1, len(recent)):
        flow = typical[i] * recent[i].volume
        if typical[i] > typical[i - 1]:
            pos += flow
        elif typical[i] < typical[i - 1]:
            neg += flow
    if pos == 0.0 and neg == 0.0:
        return 50.0
    if neg == 0.0:
        return 100.0
    if pos == 0.0:
        return 0.0
    return 100.0 - 100.0 / (1.0 + pos / neg)


def indicator_series(kind: str, bars: Sequence[DailyBar], window: int = 14) -> list[float | None]:
    """Value of ``kind`` ('rsi', 'stochastic', 'mfi') at each bar index."""
    if kind == "rsi":
        return rsi_series([b.close for b in bars], window)
    if kind == "stochastic":
        return [compute_stochastic(bars[max(0, i + 1 - window): i + 1], window)
                for i in range(len(bars))]
    if kind == "mfi":
        return [compute_mfi(bars[max(0, i - window): i + 1], window) for i in range(len(bars))]
    raise ValueError(f"unknown indicator {kind!r}")
