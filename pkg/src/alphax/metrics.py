"""Performance statistics: returns, drawdown, Sharpe/Sortino, PSR and minTRL.

Undefined results (zero deviation, out-of-domain PSR) come back as ``nan``
and render as ``n/a`` in reports. Annualisation uses 252 periods per year.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

PERIODS_PER_YEAR = 252
PSR_THRESHOLDS = (0.0, 0.01, 0.1)
NAN = float("nan")
# deviations below this are rounding noise in per-period returns, not dispersion
ZERO_DEVIATION = 1e-14

_STD_NORMAL = NormalDist()


class MetricError(ValueError):
    pass


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise MetricError(f"quantile needs p in (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


# ---------------------------------------------------------------- returns


def simple_returns(equity: Sequence[float]) -> np.ndarray:
    e = np.asarray(equity, dtype=float)
    return e[1:] / e[:-1] - 1.0


def excess_returns(equity: Sequence[float], risk_free: Sequence[float]) -> np.ndarray:
    r = simple_returns(equity)
    rf = np.asarray(risk_free, dtype=float)
    if len(rf) != len(r):
        raise MetricError("risk-free series must align with returns")
    return r - rf


def total_return(equity: Sequence[float]) -> float:
    if len(equity) < 2:
        raise MetricError("need at least two equity points")
    if equity[0] <= 0:
        raise MetricError("initial equity must be positive")
    return equity[-1] / equity[0] - 1.0


def cagr(equity: Sequence[float], periods_per_year: int = PERIODS_PER_YEAR) -> float:
    """Growth annualised over ``len(equity) - 1`` return periods."""
    if len(equity) < 2:
        raise MetricError("need at least two equity points")
    if equity[0] <= 0 or equity[-1] <= 0:
        raise MetricError("equity must be positive")
    years = (len(equity) - 1) / periods_per_year
    return (equity[-1] / equity[0]) ** (1.0 / years) - 1.0


def max_drawdown(equity: Sequence[float]) -> float:
    """Worst peak-to-trough loss as a non-positive fraction."""
    e = np.asarray(equity, dtype=float)
    if len(e) == 0:
        raise MetricError("empty equity curve")
    return float(min(0.0, np.min(e / np.maximum.accumulate(e) - 1.0)))


def sharpe_sortino(excess: Sequence[float],
                   periods_per_year: int = PERIODS_PER_YEAR) -> tuple[float, float]:
    """Annualised Sharpe and Sortino of per-period excess returns.

    Downside deviation is ``sqrt(sum(min(x, 0)^2) / (n - 1))``. Either ratio
    is ``nan`` when its deviation is at or below ``ZERO_DEVIATION``.
    """
    x = np.asarray(excess, dtype=float)
    n = len(x)
    if n < 2:
        return NAN, NAN
    mean = x.mean()
    std = x.std(ddof=1)
    downside = math.sqrt(float(np.sum(np.minimum(x, 0.0) ** 2)) / (n - 1))
    scale = math.sqrt(periods_per_year)
    sharpe = mean / std * scale if std > ZERO_DEVIATION else NAN
    sortino = mean / downside * scale if downside > ZERO_DEVIATION else NAN
    return float(sharpe), float(sortino)


# ------------------------------------------------------------------- PSR


@dataclass(frozen=True)
class MomentStats:
    n: int
    mean: float
    std: float
    skewness: float
    kurtosis: float  # non-excess: 3 for a normal distribution

    @property
    def sharpe(self) -> float:
        return self.mean / self.std if self.std > ZERO_DEVIATION else NAN


def moment_stats(x: Sequence[float]) -> MomentStats:
    """Sample moments with bias-corrected skewness and kurtosis.

    Needs n >= 4 for the corrections; smaller samples fall back to the
    plain moment ratios.
    """
    a = np.asarray(x, dtype=float)
    n = len(a)
    if n < 2:
        raise MetricError("need at least two observations")
    mean = float(a.mean())
    d = a - mean
    m2 = float(np.mean(d ** 2))
    std = float(a.std(ddof=1))
    if std <= ZERO_DEVIATION:
        return MomentStats(n, mean, 0.0, 0.0, 3.0)
    g1 = float(np.mean(d ** 3)) / m2 ** 1.5
    g2 = float(np.mean(d ** 4)) / m2 ** 2 - 3.0
    if n >= 4:
        skew = g1 * math.sqrt(n * (n - 1)) / (n - 2)
        excess = ((n + 1) * g2 + 6.0) * (n - 1) / ((n - 2) * (n - 3))
    else:
        skew, excess = g1, g2
    return MomentStats(n, mean, std, skew, excess + 3.0)


def _sr_variance_factor(stats: MomentStats, sr: float) -> float:
    return 1.0 - stats.skewness * sr + (stats.kurtosis - 1.0) / 4.0 * sr * sr


def psr(stats: MomentStats, sr_star: float) -> float:
    """Probability that the true per-period Sharpe exceeds ``sr_star``."""
    if stats.n < 2 or not stats.std > ZERO_DEVIATION:
        return NAN
    sr = stats.sharpe
    disc = _sr_variance_factor(stats, sr)
    if not disc > 0:
        return NAN
    return normal_cdf((sr - sr_star) * math.sqrt(stats.n - 1) / math.sqrt(disc))


def min_trl(stats: MomentStats, sr_star: float, confidence: float = 0.95) -> float:
    """Observations needed for PSR(sr_star) to reach ``confidence``."""
    if not stats.std > ZERO_DEVIATION:
        return NAN
    sr = stats.sharpe
    if not sr > sr_star:
        return math.inf
    disc = _sr_variance_factor(stats, sr)
    if not disc > 0:
        return NAN
    z = normal_quantile(confidence)
    return 1.0 + disc * (z / (sr - sr_star)) ** 2


# ----------------------------------------------------------------- report


@dataclass
class MetricReport:
    strategy: str
    total_return: float
    cagr: float
    sharpe_annualized: float
    sortino_annualized: float
    max_drawdown: float
    psr_0: float
    psr_0_01: float
    psr_0_1: float
    min_trl_0: float
    min_trl_0_01: float
    min_trl_0_1: float
    confidence_level: float

    def as_dict(self) -> dict:
        return asdict(self)


REPORT_FIELDS = [f for f in MetricReport.__dataclass_fields__]


def metric_report(strategy: str, equity: Sequence[float], risk_free: Sequence[float],
                  confidence: float = 0.95) -> MetricReport:
    x = excess_returns(equity, risk_free)
    sharpe, sortino = sharpe_sortino(x)
    if len(x) >= 2:
        stats = moment_stats(x)
        psrs = [psr(stats, s) for s in PSR_THRESHOLDS]
        trls = [min_trl(stats, s, confidence) for s in PSR_THRESHOLDS]
    else:
        psrs = trls = [NAN] * len(PSR_THRESHOLDS)
    return MetricReport(
        strategy=strategy,
        total_return=total_return(equity),
        cagr=cagr(equity),
        sharpe_annualized=sharpe,
        sortino_annualized=sortino,
        max_drawdown=max_drawdown(equity),
        psr_0=psrs[0], psr_0_01=psrs[1], psr_0_1=psrs[2],
        min_trl_0=trls[0], min_trl_0_01=trls[1], min_trl_0_1=trls[2],
        confidence_level=confidence,
    )
