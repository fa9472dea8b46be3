"""Reader for plain-text model files.

A model file has a ``[model]`` header section with ``key = value`` lines and
one section per coefficient table, ``[dispersion N]`` and ``[potential N]`` for
N = 1, 2, 3. Table rows are whitespace-separated ``s1 s2 s3 value``; a table
may instead repeat another one of the same kind with ``same_as = M``.
Everything after ``#`` is a comment.
"""
import logging
import os
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from lattice_spectra.config import MODEL_SETTINGS
from lattice_spectra.exceptions import ConfigParseError, ModelValidationError
from lattice_spectra.model import (
    LatticeCoefficients,
    ModelConfig,
    Triple,
    ValidationReport,
    validate_dispersion,
    validate_potential,
)

logger = logging.getLogger(__name__)

_SECTION = re.compile(r"^\[\s*(model|dispersion|potential)(?:\s+(\d+))?\s*\]$")
_MODEL_KEYS = ("name", "grid_n", "support_radius")
TABLE_KINDS = ("dispersion", "potential")


@dataclass
class _Section:
    kind: str
    index: int
    line: int
    rows: List[Tuple[float, float, float, float]]
    same_as: Optional[int] = None


@dataclass(frozen=True)
class ModelFile:
    """Parsed but not yet validated model file.

    Attributes:
        path: Source file.
        name: Model label.
        grid_n: Default grid resolution.
        support_radius: Truncation limit for validation.
        dispersions: Tables of particles 1, 2, 3.
        potentials: Tables of channels 1, 2, 3.
    """

    path: str
    name: str
    grid_n: int
    support_radius: int
    dispersions: Triple
    potentials: Triple

    def validation_reports(self) -> List[ValidationReport]:
        """Every hypothesis clause of every table; never raises."""
        return [
            validate_dispersion(c, f"dispersion {i}", self.support_radius)
            for i, c in enumerate(self.dispersions, start=1)
        ] + [
            validate_potential(c, f"potential {i}", self.support_radius)
            for i, c in enumerate(self.potentials, start=1)
        ]

    def build(self) -> ModelConfig:
        """Validate the tables and build the model.

        Raises:
            ModelValidationError: Naming the first failed clause.
            DegenerateDispersionError: If an effective mass is undefined.
        """
        return ModelConfig(
            dispersions=self.dispersions,
            potentials=self.potentials,
            grid_n=self.grid_n,
            name=self.name,
            max_support_radius=self.support_radius
        )


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_int(value: str, key: str, path: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigParseError(f"{key} must be an integer, got {value!r}", path, line)


def parse_model_text(text: str, path: str = "<string>") -> ModelFile:
    """Parse model-file text.

    Args:
        text: File contents.
        path: Name used in error messages.

    Returns:
        ModelFile: Resolved tables.

    Raises:
        ConfigParseError: On malformed lines, unknown keys, duplicate or
            missing sections, or a ``same_as`` that does not resolve.
    """
    header: Dict[str, str] = {}
    sections: Dict[Tuple[str, int], _Section] = {}
    current: Optional[_Section] = None
    in_model = False
    last_line = 0

    for number, raw in enumerate(text.splitlines(), start=1):
        last_line = number
        line = _strip(raw)
        if not line:
            continue
        match = _SECTION.match(line)
        if match:
            kind, index = match.group(1), match.group(2)
            if kind == "model":
                if index is not None:
                    raise ConfigParseError("[model] takes no index", path, number)
                in_model, current = True, None
                continue
            if index is None or int(index) not in (1, 2, 3):
                raise ConfigParseError(f"[{kind}] needs an index 1, 2 or 3", path, number)
            key = (kind, int(index))
            if key in sections:
                raise ConfigParseError(f"duplicate section [{kind} {index}]", path, number)
            current = sections[key] = _Section(kind, int(index), number, [])
            in_model = False
            continue
        if line.startswith("["):
            raise ConfigParseError(f"unknown section header {line!r}", path, number)

        if "=" in line:
            name, value = (part.strip() for part in line.split("=", 1))
            if in_model:
                if name not in _MODEL_KEYS:
                    raise ConfigParseError(f"unknown [model] key {name!r}", path, number)
                header[name] = value
            elif current is not None and name == "same_as":
                if current.rows:
                    raise ConfigParseError("same_as cannot be mixed with table rows", path, number)
                current.same_as = _parse_int(value, "same_as", path, number)
            else:
                raise ConfigParseError(f"unexpected assignment {name!r}", path, number)
            continue

        if current is None:
            raise ConfigParseError("table row outside a dispersion or potential section", path, number)
        if current.same_as is not None:
            raise ConfigParseError("same_as cannot be mixed with table rows", path, number)
        fields = line.split()
        if len(fields) != 4:
            raise ConfigParseError(f"expected 's1 s2 s3 value', got {line!r}", path, number)
        try:
            s = [int(v) for v in fields[:3]]
            value = float(fields[3])
        except ValueError:
            raise ConfigParseError(f"malformed table row {line!r}", path, number)
        current.rows.append((s[0], s[1], s[2], value))

    for kind in TABLE_KINDS:
        for index in (1, 2, 3):
            if (kind, index) not in sections:
                raise ConfigParseError(f"missing section [{kind} {index}]", path, last_line)

    def resolve(kind: str, index: int) -> LatticeCoefficients:
        seen = [index]
        section = sections[(kind, index)]
        while section.same_as is not None:
            target = section.same_as
            if (kind, target) not in sections:
                raise ConfigParseError(f"same_as = {target} names no [{kind} {target}]", path, section.line)
            if target in seen:
                raise ConfigParseError(f"same_as cycle through [{kind} {index}]", path, section.line)
            seen.append(target)
            section = sections[(kind, target)]
        return LatticeCoefficients.from_rows(section.rows)

    grid_n = _parse_int(header.get("grid_n", str(MODEL_SETTINGS["default_grid_n"])), "grid_n", path, 0)
    radius = _parse_int(
        header.get("support_radius", str(MODEL_SETTINGS["max_support_radius"])), "support_radius", path, 0
    )
    default_name = os.path.splitext(os.path.basename(path))[0]
    return ModelFile(
        path=path,
        name=header.get("name", default_name),
        grid_n=grid_n,
        support_radius=radius,
        dispersions=tuple(resolve("dispersion", i) for i in (1, 2, 3)),  # type: ignore[arg-type]
        potentials=tuple(resolve("potential", i) for i in (1, 2, 3))  # type: ignore[arg-type]
    )


def read_model_file(path: str) -> ModelFile:
    """Read and parse a model file.

    Raises:
        ConfigParseError: If the file is missing or malformed.
    """
    if not os.path.isfile(path):
        raise ConfigParseError("model file not found", path, 0)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_model_text(text, path)


def parse_config(path: str) -> ModelConfig:
    """Read a model file and build the validated :class:`ModelConfig`.

    Args:
        path: Model file.

    Returns:
        ModelConfig: The validated model.

    Raises:
        ConfigParseError: With the offending line.
        ModelValidationError: With the failed clause name.
    """
    try:
        model = read_model_file(path).build()
    except (ConfigParseError, ModelValidationError) as e:
        logger.error(f"Could not load model from {path}: {str(e)}")
        raise
    logger.info(f"Loaded model '{model.name}' from {path} (masses {model.derived.masses})")
    return model


def format_model(model: ModelConfig) -> str:
    """Render a model in the file format read by :func:`parse_model_text`."""
    lines = [
        "[model]",
        f"name = {model.name}",
        f"grid_n = {model.grid_n}",
        f"support_radius = {model.max_support_radius}"
    ]
    for kind, tables in (("dispersion", model.dispersions), ("potential", model.potentials)):
        for index, table in enumerate(tables, start=1):
            lines += ["", f"[{kind} {index}]"]
            first = tables.index(table) + 1
            if first != index:
                lines.append(f"same_as = {first}")
                continue
            lines += [f"{s[0]} {s[1]} {s[2]} {v!r}" for s, v in table.entries]
    return "\n".join(lines) + "\n"
