"""Price projection: a bagged regression-tree forest plus P/E mean reversion.

The forest learns the ratio of next-decision price to current price from the
indicator composites and valuation multiples. Training rows come only from
pairs of past decision dates that both precede the date being projected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np

from .indicators import INDICATORS, IndicatorPanel, build_panel
from .market_data import MarketData

FEATURES = (
    "profitability", "solvency", "valuation", "growth",
    "earnings_yield", "book_yield", "sales_yield",
    "revenue_growth_yoy", "net_income_growth_yoy", "price",
)


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 5
    min_leaf: int = 5
    seed: int = 0
    max_features: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True


@dataclass
class ValuationConfig:
    forest: ForestConfig = field(default_factory=ForestConfig)
    ensemble_weights: tuple[float, float] = (1.0, 1.0)  # (forest, reversion)
    reversion_window: int = 8


# ------------------------------------------------------------------ trees


def _bounded_mean(values: np.ndarray, axis=None) -> np.ndarray:
    # float summation can drift past the extremes (e.g. a mean of equal values)
    return np.clip(np.mean(values, axis=axis), np.min(values, axis=axis),
                   np.max(values, axis=axis))


@dataclass
class RegressionTree:
    """Flat-array binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] \
                    else self.right[node]
            out[i] = self.value[node]
        return out

    def leaves(self) -> list[int]:
        return [i for i, f in enumerate(self.feature) if f < 0]


def best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best threshold on one feature by summed child squared error.

    Returns ``(sse, threshold)`` or None when no split leaves ``min_leaf``
    rows on both sides. Rows with ``x <= threshold`` go left.
    """
    n = len(x)
    if n < 2 * min_leaf:
        return None
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    csum = np.cumsum(ys)
    csq = np.cumsum(ys * ys)
    k = np.arange(max(min_leaf, 1), n - max(min_leaf, 1) + 1)  # left child size
    k = k[xs[k - 1] < xs[k]]
    if len(k) == 0:
        return None
    left_sse = csq[k - 1] - csum[k - 1] ** 2 / k
    right_sum = csum[-1] - csum[k - 1]
    right_sse = (csq[-1] - csq[k - 1]) - right_sum ** 2 / (n - k)
    total = left_sse + right_sse
    j = int(np.argmin(total))
    lo, hi = xs[k[j] - 1], xs[k[j]]
    thr = (lo + hi) / 2.0
    if not (lo <= thr < hi):
        thr = lo
    return float(total[j]), float(thr)


def fit_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, max_depth: int,
             min_leaf: int, max_features: int) -> RegressionTree:
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(_bounded_mean(y[idx])))
        count.append(len(idx))
        return len(feature) - 1

    def grow(idx, depth):
        node = new_node(idx)
        yy = y[idx]
        if depth >= max_depth or len(idx) < 2 * min_leaf or np.all(yy == yy[0]):
            return node
        parent_sse = float(np.sum((yy - yy.mean()) ** 2))
        candidates = rng.choice(X.shape[1], size=max_features, replace=False)
        best = None
        for f in candidates:
            found = best_split(X[idx, f], yy, min_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
        if best is None or not best[0] < parent_sse:
            return node
        _, thr, f = best
        go_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return RegressionTree(np.array(feature), np.array(threshold), np.array(left),
                          np.array(right), np.array(value), np.array(count))


@dataclass
class ForestModel:
    trees: list[RegressionTree]
    config: ForestConfig
    n_features: int
    target_range: tuple[float, float]

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _bounded_mean(np.array([t.predict(X) for t in self.trees]), axis=0)


def fit_forest(X, y, config: ForestConfig | None = None) -> ForestModel | None:
    """Bagged regression trees; None when there is nothing to train on.

    Each tree gets its own generator spawned from ``config.seed``, so results
    do not depend on the order trees are built in.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        return None
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be (n_rows, n_features) matching y")
    d = X.shape[1]
    mf = config.max_features or math.ceil(math.sqrt(d))
    mf = min(mf, d)
    trees = []
    for child in np.random.SeedSequence(config.seed).spawn(config.n_trees):
        rng = np.random.default_rng(child)
        if config.bootstrap:
            sample = rng.integers(0, len(y), size=len(y))
        else:
            sample = np.arange(len(y))
        trees.append(fit_tree(X[sample], y[sample], rng, config.max_depth,
                              config.min_leaf, mf))
    return ForestModel(trees, config, d, (float(y.min()), float(y.max())))


# -------------------------------------------------------------- reversion


def predict_reversion(earnings_yields: Sequence[float | None], current_eps: float | None):
    """Mean historical P/E times current EPS, or None if unavailable.

    P/E is defined only where the earnings yield is positive; at least two
    such quarters and a positive current EPS are required.
    """
    pes = [1.0 / ey for ey in earnings_yields if ey is not None and ey > 0]
    if len(pes) < 2 or current_eps is None or current_eps <= 0:
        return None
    return math.fsum(pes) / len(pes) * current_eps


# ------------------------------------------------------------- projection


@dataclass(frozen=True)
class PriceProjection:
    asset: str
    current_price: float
    projected_price: float
    expected_return: float
    forest_price: float | None
    reversion_price: float | None


def combine_projection(asset: str, current_price: float, forest_ratio: float | None,
                       reversion_price: float | None,
                       weights: tuple[float, float] = (1.0, 1.0)) -> PriceProjection | None:
    """Weighted mean of the available components; None if neither exists."""
    if not current_price > 0:
        raise ValueError(f"no positive price for {asset}")
    forest_price = None if forest_ratio is None else forest_ratio * current_price
    parts = [(p, w) for p, w in ((forest_price, weights[0]), (reversion_price, weights[1]))
             if p is not None and w > 0]
    if not parts:
        return None
    projected = math.fsum(p * w for p, w in parts) / math.fsum(w for _, w in parts)
    return PriceProjection(asset, current_price, projected,
                           (projected - current_price) / current_price,
                           forest_price, reversion_price)


def feature_matrix(panel: IndicatorPanel) -> tuple[list[str], np.ndarray]:
    """One row per panel asset; undefined entries take the column median."""
    assets = list(panel.rows)
    cols = []
    for name in FEATURES:
        if name in INDICATORS:
            col = [panel.rows[a].composites[name] for a in assets]
        elif name == "price":
            col = [panel.rows[a].price for a in assets]
        else:
            col = [getattr(panel.rows[a].raw, name) for a in assets]
        known = [v for v in col if v is not None]
        fill = float(np.median(known)) if known else 0.0
        cols.append([fill if v is None else v for v in col])
    X = np.array(cols, dtype=float).T if assets else np.empty((0, len(FEATURES)))
    return assets, X


class Valuator:
    """Projects prices at decision dates from a fixed schedule of past dates.

    ``decision_days`` is the full chronological schedule (including dates
    before the backtest window); only entries before the queried date are
    ever used for training.
    """

    def __init__(self, data: MarketData, decision_days: Sequence[date],
                 config: ValuationConfig | None = None, universe: Sequence[str] | None = None):
        self.data = data
        self.decision_days = sorted(decision_days)
        self.config = config or ValuationConfig()
        self.universe = tuple(universe if universe is not None else data.universe)
        self._panels: dict[date, IndicatorPanel] = {}

    def panel(self, t: date) -> IndicatorPanel:
        if t not in self._panels:
            self._panels[t] = build_panel(self.data, t, self.universe)
        return self._panels[t]

    def training_panel(self, t: date) -> tuple[np.ndarray, np.ndarray]:
        """Rows (features at t_k, price_{k+1}/price_k) with t_k < t_{k+1} < t."""
        past = [d for d in self.decision_days if d < t]
        X_parts, y_parts = [], []
        for d0, d1 in zip(past, past[1:]):
            p0, p1 = self.panel(d0), self.panel(d1)
            assets, X = feature_matrix(p0)
            keep = [i for i, a in enumerate(assets) if a in p1.rows]
            if not keep:
                continue
            X_parts.append(X[keep])
            y_parts.append([p1.rows[assets[i]].price / p0.rows[assets[i]].price for i in keep])
        if not X_parts:
            return np.empty((0, len(FEATURES))), np.empty(0)
        return np.vstack(X_parts), np.concatenate([np.asarray(v) for v in y_parts])

    def fit(self, t: date) -> ForestModel | None:
        X, y = self.training_panel(t)
        return fit_forest(X, y, self.config.forest)

    def reversion_price(self, asset: str, t: date) -> float | None:
        past = [d for d in self.decision_days if d < t][-self.config.reversion_window:]
        yields = [self.panel(d).rows[asset].raw.earnings_yield
                  for d in past if asset in self.panel(d).rows]
        row = self.panel(t).rows.get(asset)
        return predict_reversion(yields, row.raw.eps_ttm if row else None)

    def project_all(self, t: date) -> dict[str, PriceProjection]:
        panel = self.panel(t)
        model = self.fit(t)
        assets, X = feature_matrix(panel)
        ratios = model.predict(X) if (model is not None and assets) else [None] * len(assets)
        out = {}
        for a, ratio in zip(assets, ratios):
            proj = combine_projection(
                a, panel.rows[a].price, None if ratio is None else float(ratio),
                self.reversion_price(a, t), self.config.ensemble_weights)
            if proj is not None:
                out[a] = proj
        return out

    def project(self, asset: str, t: date) -> PriceProjection | None:
        if asset not in self.panel(t).rows:
            raise ValueError(f"no price or statement for {asset} at {t}")
        return self.project_all(t).get(asset)
