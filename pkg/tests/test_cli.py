import io
import math
import subprocess
import sys

import pytest

from coupledpid.cli import main
from coupledpid.report import CSV_HEADER
from coupledpid.scenarios import builtin_scenarios


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_list_shows_six_fixtures():
    code, out, _ = run("list")
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == list(builtin_scenarios())


def test_run_twice_gives_identical_csv():
    a = run("run", "--scenario", "level-pi", "--seed", "7")
    b = run("run", "--scenario", "level-pi", "--seed", "7")
    assert a[0] == 0 and a[1] == b[1]
    assert a[1].startswith(CSV_HEADER + "\n")
    # ts = 0.0999998 puts 1201 samples in 120 s
    assert len(a[1].splitlines()) == 1 + math.ceil(120.0 / 0.0999998) == 1 + 1201


def test_run_duration_override():
    code, out, _ = run("run", "--scenario", "pump-pi", "--duration", "1.0")
    assert code == 0 and len(out.splitlines()) == 1 + math.ceil(1.0 / 0.0999998)


def test_run_writes_files_deterministically(tmp_path):
    for sub in ("a", "b"):
        assert run("run", "--scenario", "valve-pid", "--seed", "3", "--out", str(tmp_path / sub))[0] == 0
    for suffix in ("csv", "svg"):
        assert (tmp_path / "a" / f"valve-pid.{suffix}").read_bytes() == \
            (tmp_path / "b" / f"valve-pid.{suffix}").read_bytes()


def test_run_from_file(tmp_path):
    path = tmp_path / "demo.scn"
    path.write_text("[plant]\ntype = pump\n[controller]\nkp = 6.799\nti = 3.174\n[run]\nduration = 2\n")
    code, out, _ = run("run", "--scenario", str(path))
    assert code == 0 and len(out.splitlines()) == 21


def test_compare_level_fixtures(tmp_path):
    code, out, _ = run("compare", "--pi", "level-pi", "--pid", "level-pid", "--out", str(tmp_path))
    assert code == 0
    row = next(line.split() for line in out.splitlines() if line.startswith("settling_time"))
    pi, pid, winner = float(row[2]), float(row[3]), row[4]
    assert pid < pi and winner == "PID"
    assert (tmp_path / "report.txt").read_text() == out
    assert {p.name for p in tmp_path.iterdir()} == {"level-pi.csv", "level-pid.csv", "compare.svg", "report.txt"}


def test_tune_streams_log_and_scenario():
    code, out, _ = run("tune", "--scenario", "pump-pi", "--kind", "pi", "--budget", "15")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("relay ku=")
    assert sum(line.startswith("eval ") for line in lines) <= 15
    assert "[controller]" in out and "td = 0.0" in out


@pytest.mark.parametrize("argv", [[], ["bogus"], ["run"], ["run", "--scenario", "level-pi", "--seed", "x"],
                                  ["tune", "--scenario", "level-pi", "--kind", "pd"]])
def test_usage_errors_exit_1(argv):
    code, out, err = run(*argv)
    assert code == 1 and out == "" and "error" in err


def test_configuration_errors_exit_1(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("[plant]\ntype = level\n[controller]\nkp = 1\nti = -1\n")
    code, _, err = run("run", "--scenario", str(bad))
    assert code == 1 and "line 5" in err and "ti" in err
    assert run("run", "--scenario", "no-such-fixture")[0] == 1


def test_numeric_failure_exits_2(tmp_path):
    path = tmp_path / "blowup.scn"
    path.write_text("[plant]\ntype = integrator\ngain = 1e308\ninit_y = 0\n"
                    "[controller]\nkp = 1\nti = none\ninitial_output = none\n"
                    "[profile]\nsetpoint = 0:50\n")
    code, _, err = run("run", "--scenario", str(path))
    assert code == 2 and "sample" in err


def test_identification_failure_exits_2(tmp_path):
    path = tmp_path / "short.scn"
    path.write_text("[plant]\ntype = first-order\n[controller]\nkp = 1\nti = 1\n[run]\nduration = 1\n")
    code, _, err = run("tune", "--scenario", str(path), "--kind", "pid")
    assert code == 2 and "crossings" in err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "coupledpid.cli", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "level-pid" in proc.stdout
