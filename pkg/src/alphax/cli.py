"""Command line: ``validate``, ``backtest`` and ``synth``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 data gap during a backtest.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import yaml

from . import market_data as md
from .config import ConfigError, RunConfig
from .engine import BacktestRun, EngineConfig, run_backtest
from .indicators import panel_to_csv
from .metrics import MetricReport, metric_report
from .reports import (
    allocation_csv,
    atomic_write_text,
    equity_csv,
    ledger_csv,
    metrics_csv,
    metrics_json,
    psr_table_csv,
)
from .strategy import (
    AlphaXStrategy,
    NIbovStrategy,
    SelicStrategy,
    StrategyError,
    TechnicalStrategy,
)
from .synthetic import FILE_NAMES, generate_synthetic_universe

log = logging.getLogger("alphax")

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_GAP = 0, 1, 2, 3


# ---------------------------------------------------------------- validate


@dataclass
class ValidationReport:
    counts: dict[str, int] = field(default_factory=dict)
    coverage: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = ["rows:"]
        lines += [f"  {k}: {v}" for k, v in self.counts.items()]
        lines.append("coverage:")
        lines += [f"  {c}" for c in self.coverage]
        for w in self.warnings:
            lines.append(f"warning: {w}")
        for v in self.violations:
            lines.append(f"violation: {v}")
        lines.append(f"{len(self.violations)} violations")
        return "\n".join(lines) + "\n"


def _scan(path, required, convert, report: ValidationReport, key: str) -> list:
    """Parse every row, recording problems instead of stopping at the first."""
    out = []
    try:
        md.iter_rows(path, required)
    except md.DataError as exc:
        report.violations.append(str(exc))
        return out
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        n = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            n += 1
            line = reader.line_num
            if len(row) != len(header):
                report.violations.append(f"{path}:{line}: expected {len(header)} fields")
                continue
            try:
                rec = convert(path, line, dict(zip(header, (c.strip() for c in row))))
                if hasattr(rec, "check"):
                    rec.check()
                out.append((line, rec))
            except md.DataError as exc:
                msg = str(exc)
                report.violations.append(msg if msg.startswith(str(path)) else f"{path}:{line}: {msg}")
    report.counts[key] = n
    return out


def _rf_row(path, line, r):
    return (md._parse_date(path, line, r["date"]),
            md._parse_float(path, line, "annual_rate", r["annual_rate"]))


def _weight_row(path, line, r):
    return (md._parse_date(path, line, r["as_of"]), md._parse_ticker(path, line, r["ticker"]),
            md._parse_float(path, line, "weight", r["weight"]))


def validate_inputs(cfg: RunConfig) -> ValidationReport:
    """Load every input and report counts, coverage and invariant violations."""
    rep = ValidationReport()
    try:
        universe = md.load_universe(cfg.path("data.universe"))
        rep.counts["universe"] = len(universe)
    except md.DataError as exc:
        rep.violations.append(str(exc))
        universe = ()

    bars = _scan(cfg.path("data.bars"), md.BAR_COLUMNS, md.bar_from_row, rep, "bars")
    seen: dict[str, list[date]] = {}
    for line, b in bars:
        dates = seen.setdefault(b.asset, [])
        if b.date in dates:
            rep.violations.append(f"{cfg.path('data.bars')}:{line}: duplicate bar {b.asset} {b.date}")
        dates.append(b.date)
    for a in sorted(seen):
        ds = sorted(seen[a])
        rep.coverage.append(f"bars {a}: {len(ds)} days {ds[0]} .. {ds[-1]}")

    stmts = _scan(cfg.path("data.statements"), md.STATEMENT_COLUMNS, md.statement_from_row,
                  rep, "statements")
    quarters: dict[str, set[int]] = {}
    for line, s in stmts:
        qs = quarters.setdefault(s.company, set())
        if s.quarter_index in qs:
            rep.violations.append(f"{cfg.path('data.statements')}:{line}: duplicate statement "
                                  f"{s.company} Q{s.quarter} {s.year}")
        qs.add(s.quarter_index)
    for c in sorted(quarters):
        qs = sorted(quarters[c])
        first, last = divmod(qs[0], 4), divmod(qs[-1], 4)
        rep.coverage.append(f"statements {c}: {len(qs)} quarters "
                            f"Q{first[1] + 1} {first[0]} .. Q{last[1] + 1} {last[0]}")
        for gap in sorted(set(range(qs[0], qs[-1] + 1)) - set(qs)):
            y, q = divmod(gap, 4)
            rep.warnings.append(f"{c}: missing statement for Q{q + 1} {y}")

    rf = _scan(cfg.path("data.risk_free"), md.RISK_FREE_COLUMNS, _rf_row, rep, "risk_free")
    try:
        md.RiskFreeSeries(tuple(e for _, e in rf))
    except md.DataError as exc:
        rep.violations.append(f"{cfg.path('data.risk_free')}: {exc}")

    weights = _scan(cfg.path("data.index_weights"), md.INDEX_WEIGHT_COLUMNS, _weight_row, rep,
                    "index_weights")
    for line, (_, t, w) in weights:
        if w < 0:
            rep.violations.append(f"{cfg.path('data.index_weights')}:{line}: negative weight {t}")

    for a in universe:
        if a not in seen:
            rep.warnings.append(f"{a}: in universe but has no bars")
        if a not in quarters:
            rep.warnings.append(f"{a}: in universe but has no statements")
    return rep


def cmd_validate(args) -> int:
    cfg = RunConfig.load(args.config, for_run=False)
    rep = validate_inputs(cfg)
    sys.stdout.write(rep.render())
    return EXIT_OK if rep.ok else EXIT_INVALID


# ---------------------------------------------------------------- backtest


def load_data(cfg: RunConfig) -> md.MarketData:
    return md.MarketData.from_files(
        cfg.path("data.bars"), cfg.path("data.statements"), cfg.path("data.risk_free"),
        cfg.path("data.index_weights"), cfg.path("data.universe"))


def build_strategy(name: str, cfg: RunConfig):
    if name == "alphax":
        return AlphaXStrategy(cfg.alphax_config(), cfg.valuation_config())
    if name in ("rsi", "stochastic", "mfi"):
        return TechnicalStrategy(cfg.technical_config(name))
    if name == "selic":
        return SelicStrategy()
    if name == "nibov":
        return NIbovStrategy()
    raise ConfigError(f"unknown strategy {name}")


def run_all(cfg: RunConfig, data: md.MarketData | None = None) -> dict[str, tuple[BacktestRun, MetricReport]]:
    data = data or load_data(cfg)
    days = data.trading_days()
    start = cfg.start or days[0]
    end = cfg.end or days[-1]
    snapshot = cfg.snapshot()
    engine_cfg: EngineConfig = cfg.engine_config()
    results = {}
    for name in cfg.strategies:
        strat = build_strategy(name, cfg)
        try:
            run = run_backtest(data, strat, start, end, engine_cfg, snapshot)
        except md.DataGapError as exc:
            raise md.DataGapError(exc.asset, exc.day, strategy=name) from exc
        except StrategyError as exc:
            raise StrategyError(f"{name}: {exc}") from exc
        rep = metric_report(name, run.equity, run.risk_free_returns,
                            float(cfg["metrics.confidence"]))
        results[name] = (run, rep)
    return results


def write_outputs(out: Path, cfg: RunConfig, results, data=None, dump_panels=False) -> None:
    for name, (run, rep) in results.items():
        d = out / name
        atomic_write_text(d / "ledger.csv", ledger_csv(run))
        atomic_write_text(d / "equity.csv", equity_csv(run))
        atomic_write_text(d / "metrics.csv", metrics_csv([rep]))
        atomic_write_text(d / "metrics.json", metrics_json([rep]))
        if run.allocations:
            atomic_write_text(d / "allocations.csv", allocation_csv(run))
    reports = [rep for _, rep in results.values()]
    atomic_write_text(out / "comparison.csv", metrics_csv(reports))
    atomic_write_text(out / "comparison.json", metrics_json(reports))
    atomic_write_text(out / "psr_report.csv", psr_table_csv(reports))
    atomic_write_text(out / "config_snapshot.yaml", cfg.snapshot_yaml())


def cmd_backtest(args) -> int:
    overrides = {
        "run.strategies": args.strategies,
        "run.from": args.date_from,
        "run.to": args.date_to,
        "run.seed": args.seed,
        "run.out": args.out,
    }
    if args.seed is not None:
        overrides["forest.seed"] = args.seed
    cfg = RunConfig.load(args.config, overrides)
    out = Path(cfg["run.out"])
    if not out.is_absolute() and args.out is None:
        out = cfg.base_dir / out
    try:
        data = load_data(cfg)
    except md.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        results = run_all(cfg, data)
    except md.DataGapError as exc:
        print(f"error: data gap: {exc}", file=sys.stderr)
        return EXIT_GAP
    write_outputs(out, cfg, results)
    if args.dump_panels and "alphax" in results:
        run = results["alphax"][0]
        strat = AlphaXStrategy(cfg.alphax_config(), cfg.valuation_config())
        for day in sorted(strat.decision_days(data, run.dates)):
            atomic_write_text(out / "alphax" / "panels" / f"{day.isoformat()}.csv",
                              panel_to_csv(strat.valuator.panel(day)))
    sys.stdout.write(metrics_csv([rep for _, rep in results.values()]))
    return EXIT_OK


# ------------------------------------------------------------------- synth


def synth_config(dataset, n_quarters: int, seed: int) -> dict:
    days = sorted({b.date for s in dataset.bars.values() for b in s})
    some = next(iter(dataset.statements.values()))
    first = some[max(0, n_quarters - 18)]
    return {
        "data": dict(FILE_NAMES),
        "run": {
            "from": md.release_date_for(first.year, first.quarter).isoformat(),
            "to": days[-1].isoformat(),
            "seed": seed,
            "out": "out",
        },
    }


def cmd_synth(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        print(f"error: {out} is not empty (use --force)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ds = generate_synthetic_universe(args.seed, args.assets, args.quarters)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ds.write(out)
    atomic_write_text(out / "config.yaml",
                      yaml.safe_dump(synth_config(ds, args.quarters, args.seed), sort_keys=False))
    print(f"wrote {len(FILE_NAMES) + 1} files to {out}")
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alphax", description="AlphaX backtesting toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check input files")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("backtest", help="run strategies and write reports")
    b.add_argument("--config", required=True)
    b.add_argument("--strategies", help="comma-separated, e.g. alphax,rsi,selic")
    b.add_argument("--from", dest="date_from")
    b.add_argument("--to", dest="date_to")
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.add_argument("--dump-panels", action="store_true",
                   help="write per-decision indicator panels for alphax")
    b.set_defaults(func=cmd_backtest)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--assets", type=int, default=5)
    s.add_argument("--quarters", type=int, default=8)
    s.add_argument("--out", required=True)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except md.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except StrategyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
