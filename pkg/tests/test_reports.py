"""Test module for JSON reports and CSV tables."""
import json
import os
from typing import Dict

import numpy as np
import pandas as pd
import pytest

from lattice_spectra import __version__
from lattice_spectra.reports import SpectralReport, to_plain, write_csv


def test_to_plain_converts_numpy_and_non_finite() -> None:
    """Test conversion of numpy values, tuples and non-finite floats."""
    value = {
        "a": np.float64(1.5),
        "b": np.arange(3),
        "c": (np.int64(2), np.bool_(True)),
        "d": [float("inf"), -np.inf, np.nan],
        1: None
    }
    assert to_plain(value) == {"a": 1.5, "b": [0, 1, 2], "c": [2, True], "d": ["inf", "-inf", "nan"], "1": None}
    json.dumps(to_plain(value))


def test_report_json_is_deterministic() -> None:
    """Test sorted keys, the trailing newline and the round trip."""
    report = SpectralReport("essential", inputs={"n": 3, "K": (0.0, 0.0, 0.0)}, results={"z": np.float64(-2.0)})
    text = report.to_json()
    assert text.endswith("\n")
    assert text == SpectralReport("essential", inputs={"K": [0.0, 0.0, 0.0], "n": 3}, results={"z": -2.0}).to_json()
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["version"] == __version__
    assert SpectralReport.from_json(text).to_dict() == data


def test_from_json_rejects_missing_keys() -> None:
    """Test that a report without its required keys is refused."""
    with pytest.raises(ValueError):
        SpectralReport.from_json('{"command": "validate"}')


def test_write_report_and_csv(test_dirs: Dict[str, str]) -> None:
    """Test writing a report and a CSV table to disk."""
    report = SpectralReport("twobody", verdicts={"ok": True})
    report.write(test_dirs["report"])
    with open(test_dirs["report"], "r", encoding="utf-8") as f:
        assert json.load(f)["verdicts"] == {"ok": True}

    rows = [{"z": -1.0 / 3.0, "count": 1, "determinant": None}, {"count": 0, "z": -0.5, "determinant": 0.25}]
    frame = write_csv(rows, test_dirs["csv"], ["z", "count", "determinant"])
    assert list(frame.columns) == ["z", "count", "determinant"]
    assert os.path.exists(test_dirs["csv"])
    loaded = pd.read_csv(test_dirs["csv"])
    assert loaded["z"].tolist() == pytest.approx([-1.0 / 3.0, -0.5], rel=1e-15)
    assert np.isnan(loaded["determinant"][0])
