import re

import pytest
import yaml

from alphax.cli import main
from alphax.config import ConfigError, RunConfig


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth") / "data"
    assert main(["synth", "--seed", "1", "--assets", "5", "--quarters", "8", "--out", str(d)]) == 0
    return d


def copy_dataset(src, dst):
    dst.mkdir(parents=True, exist_ok=True)
    for p in src.iterdir():
        if p.is_file():
            (dst / p.name).write_text(p.read_text())
    return dst / "config.yaml"


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------- synth


def test_synth_writes_all_inputs(synth_dir):
    names = {p.name for p in synth_dir.iterdir()}
    assert names == {"bars.csv", "statements.csv", "risk_free.csv", "index_weights.csv",
                     "universe.txt", "config.yaml"}
    cfg = yaml.safe_load((synth_dir / "config.yaml").read_text())
    assert cfg["run"]["seed"] == 1


def test_synth_refuses_non_empty_dir(synth_dir, capsys):
    args = ["synth", "--seed", "2", "--out", str(synth_dir)]
    assert main(args) == 2
    assert "not empty" in capsys.readouterr().err


def test_synth_force_and_seeds_differ(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--seed", "1", "--out", str(a)]) == 0
    assert main(["synth", "--seed", "2", "--out", str(b)]) == 0
    assert (a / "bars.csv").read_text() != (b / "bars.csv").read_text()
    assert main(["synth", "--seed", "2", "--out", str(a), "--force"]) == 0
    assert (a / "bars.csv").read_text() == (b / "bars.csv").read_text()


def test_synth_rejects_zero_quarters(tmp_path):
    assert main(["synth", "--seed", "1", "--quarters", "0", "--out", str(tmp_path / "x")]) == 2


# ------------------------------------------------------------- validate


def test_validate_clean_fixture(synth_dir, capsys):
    assert main(["validate", "--config", str(synth_dir / "config.yaml")]) == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("0 violations")
    assert "bars ABEV3:" in out


def test_validate_reports_bad_bar(synth_dir, tmp_path, capsys):
    cfg = copy_dataset(synth_dir, tmp_path / "d")
    bars = (tmp_path / "d" / "bars.csv")
    lines = bars.read_text().splitlines()
    t, d, o, h, lo, c, v = lines[5].split(",")
    lines[5] = ",".join([t, d, o, lo, h, c, v])  # swap high and low
    bars.write_text("\n".join(lines) + "\n")
    assert main(["validate", "--config", str(cfg)]) == 1
    out = capsys.readouterr().out
    assert f"{t} {d}" in out and "1 violations" in out


def test_validate_warns_on_missing_quarter(synth_dir, tmp_path, capsys):
    cfg = copy_dataset(synth_dir, tmp_path / "d")
    stmts = tmp_path / "d" / "statements.csv"
    lines = stmts.read_text().splitlines()
    victim = lines[3].split(",")
    del lines[3]
    stmts.write_text("\n".join(lines) + "\n")
    assert main(["validate", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert f"warning: {victim[0]}: missing statement for Q{victim[2]} {victim[1]}" in out


def test_validate_unreadable_file(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("data:\n  bars: nope.csv\n")
    assert main(["validate", "--config", str(cfg)]) == 1


# ------------------------------------------------------------- backtest


def test_backtest_five_strategies_and_determinism(synth_dir, tmp_path, capsys):
    cfg = str(synth_dir / "config.yaml")
    strategies = "alphax,rsi,mfi,stochastic,selic"
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["backtest", "--config", cfg, "--strategies", strategies, "--out", str(out1)]) == 0
    assert main(["backtest", "--config", cfg, "--strategies", strategies, "--out", str(out2)]) == 0
    rows = (out1 / "comparison.csv").read_text().splitlines()
    assert len(rows) == 6
    assert [r.split(",")[0] for r in rows[1:]] == ["AlphaX", "RSI", "MFI", "Stochastic", "Selic"]
    assert tree_bytes(out1) == tree_bytes(out2)
    assert not [p for p in out1.rglob("*.tmp")]
    snap = yaml.safe_load((out1 / "config_snapshot.yaml").read_text())
    assert snap["run.strategies"] == strategies.split(",")


def test_backtest_allocation_table_shape(synth_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["backtest", "--config", str(synth_dir / "config.yaml"), "--strategies", "alphax",
                 "--out", str(out), "--dump-panels"]) == 0
    lines = (out / "alphax" / "allocations.csv").read_text().splitlines()
    assert lines[0] == "quarter,assets"
    for row in lines[1:]:
        assert re.fullmatch(r"Q[1-4] \d{4},(No stocks|[A-Z0-9]+(;[A-Z0-9]+){0,3})", row), row
    assert list((out / "alphax" / "panels").glob("*.csv"))


def test_backtest_overrides_seed_and_dates(synth_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["backtest", "--config", str(synth_dir / "config.yaml"), "--strategies",
                 "selic", "--from", "2019-01-02", "--to", "2019-06-28", "--seed", "9",
                 "--out", str(out)]) == 0
    eq = (out / "selic" / "equity.csv").read_text().splitlines()
    assert eq[1].startswith("2019-01-02,") and eq[-1].startswith("2019-06-28,")
    snap = yaml.safe_load((out / "config_snapshot.yaml").read_text())
    assert snap["run.seed"] == 9 and snap["forest.seed"] == 9


def test_backtest_data_gap_exit_code(synth_dir, tmp_path, capsys):
    cfg = copy_dataset(synth_dir, tmp_path / "d")
    bars = tmp_path / "d" / "bars.csv"
    lines = bars.read_text().splitlines()
    # drop a mid-quarter bar (2019-01-15) of an asset the index tracker holds
    idx = next(i for i, ln in enumerate(lines) if ln.startswith("ABEV3,2019-01-15,"))
    del lines[idx]
    bars.write_text("\n".join(lines) + "\n")
    assert main(["backtest", "--config", str(cfg), "--strategies", "nibov",
                 "--out", str(tmp_path / "o")]) == 3
    assert "ABEV3" in capsys.readouterr().err


def test_backtest_config_errors(synth_dir, tmp_path, capsys):
    base = synth_dir / "config.yaml"
    bad = tmp_path / "bad.yaml"
    bad.write_text(base.read_text() + "bogus:\n  key: 1\n")
    assert main(["backtest", "--config", str(bad)]) == 2
    assert "bogus.key" in capsys.readouterr().err
    assert main(["backtest", "--config", str(base), "--strategies", "alphax,momentum"]) == 2
    assert main(["backtest", "--config", str(base), "--from", "2020-01-01",
                 "--to", "2019-01-01"]) == 2


# --------------------------------------------------------------- config


def test_seed_required_for_alphax(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("run:\n  strategies: [alphax]\n")
    with pytest.raises(ConfigError, match="seed"):
        RunConfig.load(p)
    p.write_text("run:\n  strategies: [rsi, selic]\n")
    assert RunConfig.load(p).strategies == ["rsi", "selic"]


def test_overrides_win_and_paths_resolve(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("run:\n  seed: 3\nforest:\n  n_trees: 7\n")
    cfg = RunConfig.load(p, {"forest.n_trees": 11, "run.seed": None})
    assert cfg.valuation_config().forest.n_trees == 11
    assert cfg.valuation_config().forest.seed == 3
    assert cfg.path("data.bars") == tmp_path / "bars.csv"


def test_invalid_module_values(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("run:\n  seed: 1\nalphax:\n  stop_loss: 1.5\n")
    with pytest.raises(ConfigError):
        RunConfig.load(p)
    p.write_text("run:\n  seed: 1\ntech:\n  oversold: 90\n  overbought: 10\n")
    with pytest.raises(ConfigError):
        RunConfig.load(p)
