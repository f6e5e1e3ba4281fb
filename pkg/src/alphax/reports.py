"""CSV/JSON artifacts: ledger, equity curve, allocation table, metric tables.

Numbers are written at fixed precision so output files are byte-stable.
Every file goes through :func:`atomic_write_text`.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Sequence

from .engine import BacktestRun
from .metrics import PSR_THRESHOLDS, REPORT_FIELDS, MetricReport

DISPLAY_NAMES = {
    "alphax": "AlphaX", "rsi": "RSI", "stochastic": "Stochastic", "mfi": "MFI",
    "selic": "Selic", "nibov": "NIbov",
}


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x, digits: int = 6) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "n/a"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float):
        s = f"{x:.{digits}f}"
        return "0." + "0" * digits if s == "-0." + "0" * digits else s
    return str(x)


def _json_value(x):
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return round(x, 10)
    return x


def ledger_csv(run: BacktestRun) -> str:
    lines = ["date,asset,side,qty,price,reason,cash_after,equity_after"]
    for r in run.ledger:
        lines.append(",".join([r.date.isoformat(), r.asset, r.side, fmt(r.qty, 8), fmt(r.price),
                               r.reason, fmt(r.cash_after), fmt(r.equity_after)]))
    return "\n".join(lines) + "\n"


def equity_csv(run: BacktestRun) -> str:
    lines = ["date,equity,risk_free_balance,n_positions"]
    for d, eq, rf, n in run.equity_curve:
        lines.append(f"{d.isoformat()},{fmt(eq)},{fmt(rf)},{n}")
    return "\n".join(lines) + "\n"


def allocation_csv(run: BacktestRun) -> str:
    lines = ["quarter,assets"]
    for label, assets in run.allocations:
        lines.append(f"{label},{';'.join(assets) if assets else 'No stocks'}")
    return "\n".join(lines) + "\n"


def metrics_csv(reports: Sequence[MetricReport]) -> str:
    lines = [",".join(REPORT_FIELDS)]
    for rep in reports:
        row = rep.as_dict()
        row["strategy"] = DISPLAY_NAMES.get(rep.strategy, rep.strategy)
        lines.append(",".join(fmt(row[f]) for f in REPORT_FIELDS))
    return "\n".join(lines) + "\n"


def metrics_json(reports: Sequence[MetricReport]) -> str:
    rows = []
    for rep in reports:
        row = {k: _json_value(v) for k, v in rep.as_dict().items()}
        row["strategy"] = DISPLAY_NAMES.get(rep.strategy, rep.strategy)
        rows.append(row)
    return json.dumps(rows, indent=2) + "\n"


def psr_table_csv(reports: Sequence[MetricReport]) -> str:
    """PSR and minTRL per threshold (rows) by strategy (columns)."""
    names = [DISPLAY_NAMES.get(r.strategy, r.strategy) for r in reports]
    lines = ["metric," + ",".join(names)]
    suffixes = ("0", "0_01", "0_1")
    for thr, suf in zip(PSR_THRESHOLDS, suffixes):
        label = f"{thr:g}"
        lines.append(f"PSR({label})," + ",".join(fmt(getattr(r, f"psr_{suf}")) for r in reports))
        lines.append(f"minTRL({label}),"
                     + ",".join(fmt(getattr(r, f"min_trl_{suf}"), 2) for r in reports))
    return "\n".join(lines) + "\n"
