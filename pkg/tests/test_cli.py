import argparse
import subprocess
import sys

import numpy as np
import pytest

from fastshed.cli import EXIT_INPUT, EXIT_OK, EXIT_RESULT, main, parse_pair, parse_range
from fastshed.dynamics import nadir, run_scenario
from fastshed.io import read_csv_table, read_matrix_csv, read_surface_csv
from fastshed.lse import build_shedding_matrix

from conftest import GOLDEN


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def short_scenario(tmp_path, fixture_files):
    text = open(fixture_files["trip_g2.toml"]).read().replace("duration = 8.0", "duration = 4.0")
    path = tmp_path / "short.toml"
    path.write_text(text)
    return str(path)


# --------------------------------------------------------------------------
# argument helpers


@pytest.mark.parametrize("text, values", [
    ("0:12:4", [0.0, 4.0, 8.0, 12.0]),
    ("0.1:0.3:0.1", [0.1, 0.2, 0.3]),
    ("0:1:0.3", [0.0, 0.3, 0.6, 0.9]),
    ("5", [5.0]),
])
def test_parse_range(text, values):
    assert parse_range(text) == pytest.approx(values)


@pytest.mark.parametrize("text", ["1:2", "a:b:c", "3:1:1", "0:1:0", "0:1:-1"])
def test_parse_range_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_range(text)


def test_parse_pair():
    assert parse_pair("0:12") == (0.0, 12.0)


# --------------------------------------------------------------------------
# subcommands


def test_validate_ok(capsys, fixture_files):
    code, out, _ = run(capsys, "validate", fixture_files["fixture.toml"])
    assert code == EXIT_OK and "ok (3 busbars, 2 busties, 4 generators, 12 loads)" in out


def test_validate_lists_findings(capsys, tmp_path, fixture_files):
    text = open(fixture_files["fixture.toml"]).read().replace('busbar = "B3"', 'busbar = "B7"', 1)
    bad = tmp_path / "bad.toml"
    bad.write_text(text)
    code, out, _ = run(capsys, "validate", str(bad))
    assert code == EXIT_INPUT
    assert "dangling-reference" in out and "B7" in out


def test_empty_config_is_an_input_error(capsys, tmp_path):
    empty = tmp_path / "empty.toml"
    empty.write_text("")
    code, _, err = run(capsys, "validate", str(empty))
    assert code == EXIT_INPUT and "empty" in err


@pytest.mark.parametrize("argv", [["frobnicate"], ["sm"], ["simulate", "a", "b", "--bogus"], []])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT and "usage" in err


def test_sm_matches_library(capsys, config, snapshot, fixture_files):
    code, out, err = run(capsys, "sm", fixture_files["fixture.toml"], fixture_files["snapshot.toml"])
    assert code == EXIT_OK and err == ""
    ids, labels, entries = read_matrix_csv(out)
    m = build_shedding_matrix(config, snapshot)
    assert ids == list(m.load_ids) and labels == m.catalog.labels
    assert np.array_equal(entries, m.entries)


def test_sm_infeasible_column_exits_1(capsys, tmp_path, fixture_files):
    text = open(fixture_files["snapshot.toml"]).read().replace("sr_override = 2.0", "sr_override = 0.0")
    path = tmp_path / "snap.toml"
    path.write_text(text)
    code, out, err = run(capsys, "sm", fixture_files["fixture.toml"], str(path))
    assert code == EXIT_RESULT
    assert "warning:" in err and out.startswith("load_id,")


def test_simulate_without_shedding(capsys, plant, scenario, fixture_files, tmp_path):
    csv_path = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "simulate", fixture_files["fixture.toml"], fixture_files["trip_g2.toml"],
                       "--no-shedding", "-o", str(csv_path))
    trace = run_scenario(plant.config, scenario, plant.fls, governors=plant.governors, shedding=False)
    assert code == EXIT_RESULT
    assert out.strip() == f"nadir: {nadir(trace):.4f} Hz, relay: TRIPPED"
    header, data = read_csv_table(csv_path.read_text())
    assert header[:2] == ["time", "frequency"] and data.shape[0] == len(trace.time)
    assert np.array_equal(data[:, 1], trace.frequency)


def test_simulate_with_shedding_to_stdout(capsys, short_scenario, fixture_files):
    code, out, err = run(capsys, "simulate", fixture_files["fixture.toml"], short_scenario, "--every", "100")
    assert code == EXIT_OK
    assert err.startswith("nadir: ") and "relay: not tripped" in err
    header, data = read_csv_table(out)
    assert data.shape[0] == 41 and data[1, 0] == pytest.approx(0.1)


def test_simulate_rejects_unbalanced_scenario(capsys, tmp_path, fixture_files):
    text = open(fixture_files["trip_g2.toml"]).read().replace("G1 = 11.5", "G1 = 12.5")
    path = tmp_path / "s.toml"
    path.write_text(text)
    code, _, err = run(capsys, "simulate", fixture_files["fixture.toml"], str(path))
    assert code == EXIT_INPUT and "does not match" in err


def test_sweep(capsys, short_scenario, fixture_files):
    code, out, _ = run(capsys, "sweep", fixture_files["fixture.toml"], short_scenario,
                       "--sr", "0:8:8", "--delay", "0.1:0.2:0.1")
    assert code == EXIT_OK
    rows = read_surface_csv(out)
    assert [(r[0], r[1]) for r in rows] == [(0.0, 0.1), (0.0, 0.2), (8.0, 0.1), (8.0, 0.2)]
    assert rows[0][2] >= rows[1][2] and rows[0][2] >= rows[2][2]


def test_select_sr(capsys, short_scenario, fixture_files):
    code, out, _ = run(capsys, "select-sr", fixture_files["fixture.toml"], short_scenario,
                       "--threshold", "48", "--margin", "0.5")
    assert code == EXIT_OK
    assert out.startswith("sr: ") and "target: 48.5000 Hz" in out and "simulations: 8" in out


def test_select_sr_infeasible(capsys, short_scenario, fixture_files):
    code, out, _ = run(capsys, "select-sr", fixture_files["fixture.toml"], short_scenario, "--margin", "1.9")
    assert code == EXIT_RESULT and out.startswith("infeasible:")


def test_codegen_matches_golden(capsys, tmp_path, fixture_files):
    out_path = tmp_path / "fixture.st"
    code, _, _ = run(capsys, "codegen", fixture_files["fixture.toml"], "-o", str(out_path))
    assert code == EXIT_OK
    assert out_path.read_bytes() == (GOLDEN / "fixture.st").read_bytes()
    code, out, _ = run(capsys, "codegen", fixture_files["fixture.toml"], "--real-type", "REAL")
    assert code == EXIT_OK and "OF REAL" in out and "LREAL" not in out


# --------------------------------------------------------------------------
# entry points


def test_module_entry_point(fixture_files):
    res = subprocess.run([sys.executable, "-m", "fastshed", "sm", fixture_files["fixture.toml"],
                          fixture_files["snapshot.toml"]], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("load_id,trip:G1")


def test_module_help():
    res = subprocess.run([sys.executable, "-m", "fastshed", "sweep", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "a:b:step" in res.stdout
