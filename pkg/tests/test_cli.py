from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from geosens.cli import main
from geosens.experiments import COLUMNS, SCHEMA_VERSION

HERE = Path(__file__).parent


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run_cli(tmp_path, experiment, text, *flags):
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out.txt"
    code = main([experiment, "--config", cfg, "--out", str(out), *flags])
    return code, out.read_text() if out.exists() else None


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_example1_rows_schema_and_seed_echo(tmp_path):
    code, text = run_cli(tmp_path, "example1", "experiment = example1\nseed = 17\nn = 40\n")
    assert code == 0
    rows = rows_of(text)
    assert len(rows) == 9
    assert list(rows[0]) == list(COLUMNS["example1"])
    assert {r["seed"] for r in rows} == {"17"}
    assert {r["schema_version"] for r in rows} == {str(SCHEMA_VERSION)}
    assert [float(r["p"]) for r in rows] == pytest.approx([0.1 * k for k in range(1, 10)])
    assert all(float(r["elapsed_s"]) == 0.0 for r in rows)


def test_example2_default_grid_times_index_sets(tmp_path):
    code, text = run_cli(tmp_path, "example2", "experiment = example2\nseed = 2\nn = 30\n")
    assert code == 0
    rows = rows_of(text)
    assert len(rows) == 22
    assert sorted({r["nu"] for r in rows}) == ["1", "2"]


def test_reruns_are_byte_identical(tmp_path):
    text = "experiment = example1\nseed = 9\nn = 40\nbootstrap = 100\ngrid = 0.3, 0.6\nmsd_replicates = 2\n"
    _, first = run_cli(tmp_path, "example1", text)
    _, second = run_cli(tmp_path, "example1", text)
    assert first == second
    rows = rows_of(first)
    assert [r["row_type"] for r in rows].count("msd") == 1


def test_flags_override_file(tmp_path):
    code, text = run_cli(tmp_path, "example3", "experiment = example3\nseed = 1\nn = 30\ngrid = 2\n", "--seed", "5", "--n", "25", "--mode", "incomplete:40")
    assert code == 0
    row = rows_of(text)[0]
    assert (row["seed"], row["n"], row["mode"]) == ("5", "25", "incomplete:40")
    assert float(row["max_constraint_error"]) < 1e-12


def test_json_mirrors_csv(tmp_path):
    base = "experiment = stiffness\nseed = 4\nn = 30\ncases = gamma\nlambda_mu = 0.01\nlambda_k = 0.01, 1\n"
    _, as_csv = run_cli(tmp_path, "stiffness", base)
    _, as_json = run_cli(tmp_path, "stiffness", base, "--format", "json")
    rows = rows_of(as_csv)
    doc = json.loads(as_json)
    records = doc["rows"] if isinstance(doc, dict) else doc
    assert len(records) == len(rows) == 4
    for rec, row in zip(records, rows):
        assert set(rec) == set(row)
        assert float(rec["b_hat"]) == float(row["b_hat"])


def test_custom_model_and_no_nan(tmp_path, monkeypatch):
    monkeypatch.syspath_prepend(str(HERE))
    code, text = run_cli(
        tmp_path,
        "custom",
        "experiment = custom\nseed = 3\nn = 40\nhook = cli_hooks:additive\nmanifold = realline\ninputs = uniform(0, 1); normal(0, 1)\nnu = 1; 2\n",
    )
    assert code == 0
    for row in rows_of(text):
        for key, val in row.items():
            try:
                assert math.isfinite(float(val)), key
            except ValueError:
                pass


def test_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.syspath_prepend(str(HERE))
    assert run_cli(tmp_path, "example1", "experiment = example1\nn = 30\n")[0] == 2
    assert run_cli(tmp_path, "example1", "experiment = example1\nseed = 1\nwhatever = 3\n")[0] == 2
    assert run_cli(tmp_path, "example1", "experiment = example1\nseed = 1\nn = 30\nnu = 3\n")[0] == 2
    assert run_cli(tmp_path, "example1", "experiment = example1\nseed = 1\np = 1.5\ngrid = 2\nsweep = alpha\n")[0] == 2
    assert run_cli(tmp_path, "custom", "experiment = custom\nseed = 1\nhook = cli_hooks:missing\nmanifold = realline\ninputs = uniform(0, 1)\n")[0] == 2
    code, text = run_cli(
        tmp_path, "custom", "experiment = custom\nseed = 1\nn = 30\nhook = cli_hooks:constant\nmanifold = realline\ninputs = uniform(0, 1); uniform(0, 1)\n"
    )
    assert code == 4 and text is None
    assert "degenerate" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["example1"])
    assert info.value.code == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import geosens.cli as cli
    from geosens.errors import NumericalFailure

    def boom(cfg):
        raise NumericalFailure("non-finite value")

    monkeypatch.setattr(cli, "run", boom)
    assert run_cli(tmp_path, "example1", "experiment = example1\nseed = 1\n")[0] == 3


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, "experiment = example3\nseed = 1\nn = 20\ngrid = 1\nnu = 1\n")
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "geosens", "example3", "--config", cfg], capture_output=True, text=True, env=env, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("schema_version,")
