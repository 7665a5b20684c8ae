import csv
import io
from dataclasses import replace

import pytest

from amapmt import cli
from amapmt.config import preset
from amapmt.network import Network
from amapmt.runner import (
    COMPARISON_COLUMNS,
    RUN_COLUMNS,
    emit_report,
    run_matrix,
    run_one,
    standard_error,
)
from amapmt.scheduler import ALL_MODES, Mode


@pytest.fixture(scope="module")
def short():
    return replace(preset("table-5-4"), duration=2.0, seeds=(1, 2, 3))


@pytest.fixture(scope="module")
def matrix(short):
    return run_matrix(short, ALL_MODES)


def test_four_policies_three_seeds_twelve_results(matrix):
    assert len(matrix) == 12
    assert [(r.policy, r.seed) for r in matrix] == [(m, s) for m in ALL_MODES for s in (1, 2, 3)]


def test_rerun_gives_identical_report(short):
    a = run_one(short, Mode.AMAPMT, 2)
    b = run_one(short, "amapmt", 2)
    assert a.report == b.report


def test_parallel_matches_serial(short, matrix):
    par = run_matrix(short, ALL_MODES, workers=2)
    assert [r.report for r in par] == [r.report for r in matrix]


def test_offered_traffic_identical_across_policies(matrix):
    for seed in (1, 2, 3):
        offered = {
            tuple((c.offered_pkts, c.offered_bytes) for c in r.report.rows())
            for r in matrix if r.seed == seed
        }
        assert len(offered) == 1


def test_transaction_log_identical_across_policies(short):
    logs = []
    for mode in ALL_MODES:
        net = Network(short, short.policy.with_mode(mode), 5)
        net.run()
        logs.append(net.traffic_log)
    assert all(log == logs[0] for log in logs[1:])
    assert logs[0]


def test_emit_single_result(tmp_path, short):
    r = run_one(short, Mode.AMAPMT, 1)
    emit_report([r], tmp_path)
    rows = list(csv.reader(io.StringIO((tmp_path / "runs.csv").read_text())))
    assert tuple(rows[0]) == RUN_COLUMNS
    assert len(rows) == 1 + 6
    assert [row[3] for row in rows[1:]] == ["voice", "video", "ftp", "data", "email", "all"]


def test_emit_matrix_and_byte_identical_reemit(tmp_path, matrix):
    first = [p.read_bytes() for p in emit_report(matrix, tmp_path / "a")]
    second = [p.read_bytes() for p in emit_report(matrix, tmp_path / "b")]
    assert first == second
    comp = list(csv.reader(io.StringIO((tmp_path / "a" / "comparison.csv").read_text())))
    assert tuple(comp[0]) == COMPARISON_COLUMNS
    assert len(comp) == 1 + 4 * 6
    runs = (tmp_path / "a" / "runs.csv").read_text().splitlines()
    assert len(runs) == 1 + 12 * 6
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert "baseline-none" in summary and "MPTD" in summary


def test_emit_needs_results(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_standard_error():
    assert standard_error([1.0]) is None
    assert standard_error([1.0, 3.0]) == pytest.approx(1.0)


# -- CLI -----------------------------------------------------------------------


def test_cli_presets(capsys):
    assert cli.main(["presets"]) == 0
    assert "table-5-3-ber1e-12" in capsys.readouterr().out
    assert cli.main(["presets", "--dump", "table-5-2"]) == 0
    assert "[source.email]" in capsys.readouterr().out


def test_cli_run_writes_outputs_and_trace(tmp_path):
    trace = tmp_path / "trace.txt"
    code = cli.main(["run", "--scenario", "table-5-1", "--policy", "ttl-only", "--seed", "4",
                     "--duration", "0.5", "--out", str(tmp_path / "out"), "--trace", str(trace),
                     "--check"])
    assert code == 0
    assert (tmp_path / "out" / "runs.csv").exists()
    first = trace.read_text().splitlines()[0]
    assert first.split(",")[3] in {"arrival", "frame-boundary"}


def test_cli_compare(tmp_path, capsys):
    code = cli.main(["compare", "--duration", "0.5", "--seeds", "1-2",
                     "--policy", "amapmt", "--policy", "baseline-none",
                     "--distribution", "exponential"])
    assert code == 0
    out = capsys.readouterr().out
    assert "amapmt" in out and "baseline-none" in out


def test_cli_scenario_file(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text(cli.dumps(preset("table-5-2")).replace("duration = 60.0", "duration = 0.3"))
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 0


def test_cli_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nname = x\nduration = 1\nseeds = 1\nbogus = 2\n")
    assert cli.main(["run", "--scenario", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.ini:5" in err


def test_cli_seed_parsing():
    assert cli._seeds("1-3,7") == (1, 2, 3, 7)
