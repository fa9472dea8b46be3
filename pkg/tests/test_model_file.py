"""Test module for the model-file reader."""
from typing import Callable

import pytest

from lattice_spectra.config import DEFAULT_MODEL_PATH
from lattice_spectra.exceptions import ConfigParseError, ModelValidationError
from lattice_spectra.model import ModelConfig, nearest_neighbor_dispersion, zero_range_potential
from lattice_spectra.model_file import format_model, parse_config, parse_model_text, read_model_file

VALID = """
[model]
name = tiny
grid_n = 4

[dispersion 1]
0 0 0 3.0
1 0 0 -0.5
-1 0 0 -0.5
0 1 0 -0.5
0 -1 0 -0.5
0 0 1 -0.5
0 0 -1 -0.5
[dispersion 2]
same_as = 1
[dispersion 3]
same_as = 2
[potential 1]
0 0 0 8.0   # zero range
[potential 2]
same_as = 1
[potential 3]
same_as = 1
"""


def _with_dispersion_one(rows: str) -> str:
    head, tail = VALID.split("[dispersion 2]")
    start = head.index("[dispersion 1]")
    return head[:start] + "[dispersion 1]\n" + rows + "\n[dispersion 2]" + tail


def test_shipped_fixture_parses() -> None:
    """Test that the shipped model loads with unit masses."""
    model = parse_config(DEFAULT_MODEL_PATH)
    assert model.name == "identical-nn-zr"
    assert model.grid_n == 8
    assert model.derived.masses == pytest.approx((1.0, 1.0, 1.0))
    assert model.dispersion(3) == nearest_neighbor_dispersion()
    assert model.potential(2) == zero_range_potential(8.0)


def test_parse_resolves_same_as_chains() -> None:
    """Test header values, comments and chained same_as references."""
    parsed = parse_model_text(VALID, "tiny.cfg")
    assert parsed.name == "tiny"
    assert parsed.grid_n == 4
    assert parsed.dispersions[2] == parsed.dispersions[0]
    assert parsed.potentials[1].entry((0, 0, 0)) == 8.0
    assert all(r.passed for r in parsed.validation_reports())


def test_name_defaults_to_file_stem() -> None:
    """Test that a missing name falls back to the file name."""
    parsed = parse_model_text(VALID.replace("name = tiny\n", ""), "/tmp/some-model.cfg")
    assert parsed.name == "some-model"


@pytest.mark.parametrize(
    "text, line",
    [
        (VALID.replace("[potential 3]\nsame_as = 1\n", ""), 21),
        (VALID.replace("[potential 3]", "[potential 4]"), 22),
        (VALID.replace("[potential 3]", "[potential 2]"), 22),
        (VALID.replace("[model]", "[models]"), 2),
        (VALID.replace("grid_n = 4", "resolution = 4"), 4),
        (VALID.replace("0 0 0 8.0", "0 0 8.0"), 19),
        (VALID.replace("0 0 0 8.0", "0 0 x 8.0"), 19),
        (VALID.replace("[dispersion 3]\nsame_as = 2", "[dispersion 3]\nsame_as = 3"), 16),
        (VALID.replace("[potential 2]\nsame_as = 1", "[potential 2]\n0 0 0 1.0\nsame_as = 1"), 22),
    ],
)
def test_parse_errors_report_line(text: str, line: int) -> None:
    """Test that malformed files fail with the offending line."""
    with pytest.raises(ConfigParseError) as excinfo:
        parse_model_text(text, "bad.cfg")
    assert excinfo.value.line == line
    assert excinfo.value.exit_code == 2


def test_positive_neighbor_hopping_fails_sign_clause(write_model: Callable[..., str]) -> None:
    """Test that a table with a positive |s| = 1 entry is rejected by name."""
    text = _with_dispersion_one("0 0 0 -3.0\n1 0 0 0.5\n-1 0 0 0.5\n0 1 0 0.5\n0 -1 0 0.5\n0 0 1 0.5\n0 0 -1 0.5")
    path = write_model(text)
    reports = read_model_file(path).validation_reports()
    assert [c.clause for c in reports[0].failed()] == ["dispersion.sign"]
    with pytest.raises(ModelValidationError) as excinfo:
        parse_config(path)
    assert excinfo.value.clause == "dispersion.sign"


def test_missing_file() -> None:
    """Test that a missing file is a parse error at line 0."""
    with pytest.raises(ConfigParseError) as excinfo:
        read_model_file("/nonexistent/model.cfg")
    assert excinfo.value.line == 0


def test_format_model_round_trip(unequal_model: ModelConfig, write_model: Callable[..., str]) -> None:
    """Test that a formatted model reads back unchanged."""
    text = format_model(unequal_model)
    assert "same_as = 1" in text
    model = parse_config(write_model(text, "unequal.cfg"))
    assert model == unequal_model
