"""Regenerate the frozen golden fixtures under tests/golden.

Run from the repository root after an intentional output change:

    python3 tests/make_golden.py

then review the diff before committing.
"""

from __future__ import annotations

import shutil
from pathlib import Path

from alphax.cli import main

ROOT = Path(__file__).parent / "golden"

# 10 assets, 2018Q1..2025Q1: the backtest covers 18 quarterly decisions
LARGE = ["--seed", "1", "--assets", "10", "--quarters", "29"]
SMALL = ["--seed", "1", "--assets", "5", "--quarters", "8"]


def build(name: str, synth_args: list[str]) -> None:
    base = ROOT / name
    if base.exists():
        shutil.rmtree(base)
    data = base / "data"
    assert main(["synth", *synth_args, "--out", str(data)]) == 0
    assert main(["backtest", "--config", str(data / "config.yaml"),
                 "--out", str(base / "expected")]) == 0


if __name__ == "__main__":
    build("large", LARGE)
    build("small", SMALL)
