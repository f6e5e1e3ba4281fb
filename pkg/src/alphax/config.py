"""Run configuration: a flat YAML mapping of dotted keys plus CLI overrides."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import yaml

from .engine import EngineConfig
from .strategy import STRATEGY_NAMES, AlphaXConfig, TechnicalConfig
from .valuation import ForestConfig, ValuationConfig


class ConfigError(Exception):
    pass


DEFAULTS: dict[str, object] = {
    "data.bars": "bars.csv",
    "data.statements": "statements.csv",
    "data.risk_free": "risk_free.csv",
    "data.index_weights": "index_weights.csv",
    "data.universe": "universe.txt",
    "run.strategies": list(STRATEGY_NAMES),
    "run.from": None,
    "run.to": None,
    "run.out": "out",
    "run.seed": None,
    "run.initial_capital": 1_000_000.0,
    "forest.n_trees": 100,
    "forest.max_depth": 5,
    "forest.min_leaf": 5,
    "forest.seed": None,
    "ensemble.weights": [1.0, 1.0],
    "reversion.window_quarters": 8,
    "alphax.max_assets": 4,
    "alphax.growth_threshold": 2,
    "alphax.stop_loss": 0.10,
    "tech.window": 14,
    "tech.oversold": None,
    "tech.overbought": None,
    "tech.max_positions": 4,
    "tech.idle_cash_risk_free": False,
    "costs.per_trade_bps": 0.0,
    "metrics.confidence": 0.95,
}


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _as_date(v, key):
    if v is None or isinstance(v, date):
        return v
    try:
        return date.fromisoformat(str(v))
    except ValueError:
        raise ConfigError(f"{key}: expected YYYY-MM-DD, got {v!r}") from None


@dataclass
class RunConfig:
    values: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None, for_run: bool = True) -> "RunConfig":
        """Read ``path`` (optional), apply ``overrides`` and validate.

        ``for_run=False`` skips checks that only matter for a backtest, such
        as the seed requirement.
        """
        raw = {}
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            try:
                loaded = yaml.safe_load(path.read_text()) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(f"bad YAML in {path}: {exc}") from exc
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: expected a mapping of keys")
            raw = _flatten(loaded)
            base = path.parent
        unknown = sorted(set(raw) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = dict(DEFAULTS)
        values.update(raw)
        for k, v in (overrides or {}).items():
            if k not in DEFAULTS:
                raise ConfigError(f"unknown override {k}")
            if v is not None:
                values[k] = v
        cfg = cls(values, base)
        cfg.validate(for_run)
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def path(self, key) -> Path:
        p = Path(self.values[key])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def strategies(self) -> list[str]:
        s = self.values["run.strategies"]
        if isinstance(s, str):
            s = [x.strip() for x in s.split(",") if x.strip()]
        return list(s)

    @property
    def start(self) -> date | None:
        return _as_date(self.values["run.from"], "run.from")

    @property
    def end(self) -> date | None:
        return _as_date(self.values["run.to"], "run.to")

    @property
    def seed(self) -> int:
        return int(self.values["run.seed"] or 0)

    def validate(self, for_run: bool = True) -> None:
        names = self.strategies
        if not names:
            raise ConfigError("run.strategies is empty")
        bad = [n for n in names if n not in STRATEGY_NAMES]
        if bad:
            raise ConfigError(f"unknown strategies: {', '.join(bad)}")
        if for_run and "alphax" in names and self.values["run.seed"] is None \
                and self.values["forest.seed"] is None:
            raise ConfigError("a seed (run.seed or --seed) is required for alphax")
        if self.start and self.end and self.start > self.end:
            raise ConfigError("run.from is after run.to")
        try:
            self.alphax_config()
            self.valuation_config()
            for kind in ("rsi", "stochastic", "mfi"):
                self.technical_config(kind)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        c = self.values["metrics.confidence"]
        if not 0 < float(c) < 1:
            raise ConfigError("metrics.confidence must be in (0, 1)")

    # -- module configs

    def alphax_config(self) -> AlphaXConfig:
        v = self.values
        return AlphaXConfig(int(v["alphax.max_assets"]), int(v["alphax.growth_threshold"]),
                            float(v["alphax.stop_loss"]))

    def valuation_config(self) -> ValuationConfig:
        v = self.values
        seed = v["forest.seed"] if v["forest.seed"] is not None else v["run.seed"]
        weights = tuple(float(w) for w in v["ensemble.weights"])
        if len(weights) != 2 or min(weights) < 0 or sum(weights) <= 0:
            raise ValueError("ensemble.weights must be two non-negative numbers")
        forest = ForestConfig(int(v["forest.n_trees"]), int(v["forest.max_depth"]),
                              int(v["forest.min_leaf"]), int(seed or 0))
        if forest.n_trees < 1 or forest.max_depth < 0 or forest.min_leaf < 1:
            raise ValueError("forest.n_trees >= 1, forest.max_depth >= 0, forest.min_leaf >= 1")
        return ValuationConfig(forest, weights, int(v["reversion.window_quarters"]))

    def technical_config(self, kind: str) -> TechnicalConfig:
        v = self.values
        return TechnicalConfig(
            kind=kind, window=int(v["tech.window"]),
            oversold=None if v["tech.oversold"] is None else float(v["tech.oversold"]),
            overbought=None if v["tech.overbought"] is None else float(v["tech.overbought"]),
            max_positions=int(v["tech.max_positions"]),
            idle_cash_risk_free=bool(v["tech.idle_cash_risk_free"]),
        )

    def engine_config(self) -> EngineConfig:
        return EngineConfig(float(self.values["run.initial_capital"]),
                            float(self.values["costs.per_trade_bps"]))

    def snapshot(self) -> dict:
        """Resolved settings minus the output location."""
        out = {}
        for k, v in self.values.items():
            if k == "run.out":
                continue
            if isinstance(v, date):
                v = v.isoformat()
            if isinstance(v, tuple):
                v = list(v)
            out[k] = v
        out["run.strategies"] = self.strategies
        return out

    def snapshot_yaml(self) -> str:
        return yaml.safe_dump(self.snapshot(), sort_keys=True, default_flow_style=None)
