import csv
import json
import os
from pathlib import Path

import pytest

from gkdvlab.cli import _canonical, main, run_id


def run_cli(tmp_path, *argv):
    os.environ["OUTPUT_DIR"] = str(tmp_path)
    try:
        return main(list(argv))
    finally:
        del os.environ["OUTPUT_DIR"]


def _summary(tmp_path):
    paths = list(Path(tmp_path).glob("*/summary.json"))
    assert len(paths) == 1
    return json.loads(paths[0].read_text())


DRY_COMMANDS = [
    ["ground-state", "--p", "3"],
    ["profiles", "--p", "4"],
    ["residual", "--p", "3"],
    ["ode", "--p", "3"],
    ["shoot", "--p", "3"],
    ["evolve", "--p", "3"],
    ["track", "--p", "3"],
    ["interaction", "--p", "3"],
    ["fit", "--csv", "nowhere.csv"],
]


@pytest.mark.parametrize("argv", DRY_COMMANDS,
                         ids=[c[0] for c in DRY_COMMANDS])
def test_dry_run_everywhere(tmp_path, argv, capsys):
    assert run_cli(tmp_path, *argv, "--dry-run") == 0
    out = capsys.readouterr().out
    assert "dry run" in out
    assert "would call" in out
    # nothing written
    assert list(Path(tmp_path).iterdir()) == []


def test_run_id_deterministic():
    cfg = {"experiment": "ode", "p": 3, "t_in": 10.0}
    assert run_id(cfg) == run_id(dict(reversed(list(cfg.items()))))
    assert run_id(cfg) != run_id({**cfg, "p": 4})
    assert len(run_id(cfg)) == 12


def test_canonical_config_roundtrip():
    cfg = {"experiment": "shoot", "p": 4, "t_in": 1000.0, "t0": 20.0,
           "exact_law": False}
    back = json.loads(_canonical(cfg))
    assert back == cfg
    assert _canonical(back) == _canonical(cfg)


def test_ground_state_run(tmp_path, capsys):
    assert run_cli(tmp_path, "ground-state", "--p", "3") == 0
    summary = _summary(tmp_path)
    assert summary["schema_version"] == 1
    assert summary["passed"] is True
    assert summary["metrics"]["c"] == pytest.approx(4.0, abs=1e-6)
    assert summary["run_id"] == run_id(summary["config"])
    assert "[PASS]" in capsys.readouterr().out


def test_failing_tolerance_exits_nonzero(tmp_path, capsys):
    # a deliberately coarse profile grid cannot hit the residual tolerance
    code = run_cli(tmp_path, "profiles", "--p", "4", "--n", "2048",
                   "--half-width", "40")
    assert code == 1
    summary = _summary(tmp_path)
    assert summary["passed"] is False
    assert "[FAIL]" in capsys.readouterr().out


def test_ode_run_emits_csv(tmp_path):
    assert run_cli(tmp_path, "ode", "--p", "3", "--exact-law",
                   "--t-end", "1000") == 0
    csv_path = list(Path(tmp_path).glob("*/ode.csv"))[0]
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "mu1", "mu2", "z1", "z2", "zeta", "xi",
                       "tube_flags"]
    assert len(rows) > 100
    assert float(rows[1][0]) == pytest.approx(10.0)


def test_fit_subcommand_on_series(tmp_path):
    import numpy as np
    series = tmp_path / "series.csv"
    with open(series, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "z"])
        for t in np.linspace(20, 200, 200):
            wr.writerow([t, 2.0 * np.log(4.0 * t)])
    assert run_cli(tmp_path, "fit", "--csv", str(series),
                   "--alpha", "16.0") == 0
    summary = _summary(tmp_path)
    assert summary["metrics"]["c_fit"] == pytest.approx(4.0, abs=1e-10)


def test_identical_configs_identical_run_dirs(tmp_path):
    run_cli(tmp_path / "a", "ground-state", "--p", "3")
    run_cli(tmp_path / "b", "ground-state", "--p", "3")
    name_a = list((tmp_path / "a").iterdir())[0].name
    name_b = list((tmp_path / "b").iterdir())[0].name
    assert name_a == name_b
