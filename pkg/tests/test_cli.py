"""Test module for the command-line front-end.

Commands run on the shipped model at small grid resolutions and are checked
through their exit codes and JSON reports.
"""
import json
import math
from typing import Any, Callable, Dict, List

import pandas as pd
import pytest

from lattice_spectra.cli import RunRequest, main, parse_momentum, parse_scalar, parse_sweep, run
from lattice_spectra.exceptions import PreconditionError
from lattice_spectra.run_store import RunStore

BAD_HOPPING = """
[model]
name = bad
[dispersion 1]
0 0 0 -3.0
1 0 0 0.5
-1 0 0 0.5
0 1 0 0.5
0 -1 0 0.5
0 0 1 0.5
0 0 -1 0.5
[dispersion 2]
same_as = 1
[dispersion 3]
same_as = 1
[potential 1]
0 0 0 1.0
[potential 2]
same_as = 1
[potential 3]
same_as = 1
"""


def _run_main(test_dirs: Dict[str, str], args: List[str]) -> Dict[str, Any]:
    code = main(args + ["--model", test_dirs["model"], "--out", test_dirs["report"]])
    with open(test_dirs["report"], "r", encoding="utf-8") as f:
        report = json.load(f)
    report["exit_code"] = code
    return report


@pytest.mark.parametrize(
    "text, expected",
    [
        ("0.25", 0.25),
        ("pi", math.pi),
        ("-pi/2", -math.pi / 2),
        ("3pi/4", 3 * math.pi / 4),
        ("2*pi/3", 2 * math.pi / 3),
        ("PI", math.pi),
    ],
)
def test_parse_scalar(text: str, expected: float) -> None:
    """Test floats and multiples of π."""
    assert parse_scalar(text) == pytest.approx(expected)


@pytest.mark.parametrize("text", ["pie", "pi/0", "", "1,2"])
def test_parse_scalar_rejects(text: str) -> None:
    """Test that unreadable scalars are precondition errors."""
    with pytest.raises(PreconditionError):
        parse_scalar(text)


def test_parse_momentum_and_sweep() -> None:
    """Test momentum normalization and sweep validation."""
    assert parse_momentum("pi,-pi,0") == pytest.approx((math.pi, math.pi, 0.0))
    with pytest.raises(PreconditionError):
        parse_momentum("0,0")
    assert parse_sweep("-3:-1:5") == (-3.0, -1.0, 5)
    for bad in ("-1:-3:5", "0:1:1", "0:1", "0:1:x"):
        with pytest.raises(PreconditionError):
            parse_sweep(bad)


def test_unknown_command_rejected() -> None:
    """Test that requests are limited to the known commands."""
    with pytest.raises(PreconditionError):
        RunRequest("plot")


def test_validate_is_deterministic(test_dirs: Dict[str, str]) -> None:
    """Test that validate succeeds and writes identical bytes twice."""
    report = _run_main(test_dirs, ["validate"])
    assert report["exit_code"] == 0
    assert report["verdicts"]["valid"] is True
    assert report["model"]["name"] == "identical-nn-zr"
    assert report["results"]["mass_defects"] == pytest.approx([0.0, 0.0, 0.0], abs=1e-10)
    with open(test_dirs["report"], "rb") as f:
        first = f.read()
    _run_main(test_dirs, ["validate"])
    with open(test_dirs["report"], "rb") as f:
        assert f.read() == first


def test_validate_reports_failed_clause(test_dirs: Dict[str, str], write_model: Callable[..., str]) -> None:
    """Test exit code 2 and the failing clause for a bad hopping table."""
    path = write_model(BAD_HOPPING)
    code = main(["validate", "--model", path, "--out", test_dirs["report"]])
    with open(test_dirs["report"], "r", encoding="utf-8") as f:
        report = json.load(f)
    assert code == 2
    assert report["verdicts"]["valid"] is False
    clauses = [c["clause"] for t in report["results"]["tables"] for c in t["clauses"] if not c["passed"]]
    assert clauses == ["dispersion.sign"] * 3


def test_twobody_with_auto_sweep(test_dirs: Dict[str, str]) -> None:
    """Test the twobody command with an automatic z-sweep and CSV output."""
    report = _run_main(test_dirs, ["twobody", "--n", "6", "--z-sweep", "--csv", test_dirs["csv"]])
    assert report["exit_code"] == 0
    assert len(report["results"]["spectrum"]["below"]) == 1
    assert report["verdicts"]["fredholm_zeros_are_eigenvalues"] is True
    assert report["verdicts"]["count_matches_spectrum"] is True
    table = pd.read_csv(test_dirs["csv"])
    assert list(table.columns) == ["z", "count", "determinant"]
    assert len(table) == 20
    assert table["count"].is_monotonic_increasing


def test_twobody_explicit_z(test_dirs: Dict[str, str]) -> None:
    """Test a single z inside the band: no count, no determinant."""
    report = _run_main(test_dirs, ["twobody", "--n", "4", "--k", "pi/2,0,0", "--z", "3"])
    row = report["results"]["table"][0]
    assert row == {"z": 3.0, "count": None, "determinant": None}
    assert report["inputs"]["k"] == pytest.approx([math.pi / 2, 0.0, 0.0])


def test_channel_and_essential(test_dirs: Dict[str, str]) -> None:
    """Test the channel and essential commands on a coarse grid."""
    channel = _run_main(test_dirs, ["channel", "--n", "4", "--alpha", "2", "--csv", test_dirs["csv"]])
    assert channel["exit_code"] == 0
    assert channel["verdicts"]["interval_count"] == 1
    assert channel["verdicts"]["gap_components_covered"] is True
    assert len(pd.read_csv(test_dirs["csv"])) == channel["results"]["channel"]["sample_count"] > 0

    essential = _run_main(test_dirs, ["essential", "--n", "3"])
    assert essential["exit_code"] == 0
    assert essential["verdicts"] == {"finite": True, "interval_count": 1}
    assert essential["results"]["intervals"][0][0] < 0.0


def test_oracle_and_fiber_test(test_dirs: Dict[str, str]) -> None:
    """Test the brute-force comparison commands."""
    oracle = _run_main(test_dirs, ["oracle", "--n", "3"])
    assert oracle["exit_code"] == 0
    assert oracle["verdicts"]["contained"] is True
    assert oracle["results"]["eigenvalue_count"] == 729

    fibers = _run_main(test_dirs, ["fiber-test", "--n", "2", "--alpha", "3"])
    assert fibers["verdicts"]["fibers_match"] is True


def test_faddeev_operator_report(test_dirs: Dict[str, str]) -> None:
    """Test the faddeev command at one spectral parameter."""
    report = _run_main(test_dirs, ["faddeev", "--n", "2", "--z", "-30"])
    assert report["exit_code"] == 0
    assert report["verdicts"]["well_conditioned_far_below"] is True
    assert report["results"]["operator"]["ranks"] == [8, 8, 8]


@pytest.mark.parametrize(
    "args, code",
    [
        (["oracle", "--n", "5"], 3),
        (["faddeev", "--n", "2", "--z", "1"], 3),
        (["twobody", "--K", "1,2"], 3),
        (["channel", "--gap-tol", "-1"], 3),
        (["twobody", "--z-sweep", "1:0:4"], 3),
    ],
)
def test_precondition_exit_codes(test_dirs: Dict[str, str], args: List[str], code: int) -> None:
    """Test that precondition violations exit with 3."""
    assert main(args + ["--model", test_dirs["model"], "--out", test_dirs["report"]]) == code


def test_missing_model_exit_code(test_dirs: Dict[str, str]) -> None:
    """Test that an unreadable model file exits with 2 and an error report."""
    report, code = run(RunRequest("essential", test_dirs["temp_dir"] + "/missing.cfg"), db_path="")
    assert code == 2
    assert report.results["error"]["type"] == "ConfigParseError"
    assert report.verdicts == {"ok": False}


def test_stdout_and_run_ledger(test_dirs: Dict[str, str], capsys: pytest.CaptureFixture) -> None:
    """Test printing to stdout and recording into the ledger."""
    code = main(["validate", "--model", test_dirs["model"], "--db", test_dirs["db"]])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["command"] == "validate"

    main(["fiber-test", "--model", test_dirs["model"], "--n", "5", "--db", test_dirs["db"]])
    stats = RunStore(test_dirs["db"]).get_statistics()
    assert stats["total_runs"] == 2
    assert stats["runs_by_exit_code"] == {0: 1, 3: 1}
    latest = RunStore(test_dirs["db"]).get_recent_runs(limit=1)[0]
    assert latest[1] == "fiber-test"
