"""Machine-readable run reports.

A report is a JSON object with the keys ``command``, ``inputs``, ``model``,
``results``, ``verdicts`` and ``version``, written with sorted keys so that a
fixed run always produces the same bytes. Tabular results (z-sweeps, branch
samples) can additionally be written as CSV for plotting.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from lattice_spectra import __version__

logger = logging.getLogger(__name__)

REPORT_KEYS = ("command", "inputs", "model", "results", "verdicts", "version")


def to_plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-ready Python objects.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isfinite(number):
            return number
        return "nan" if math.isnan(number) else ("inf" if number > 0 else "-inf")
    return value


@dataclass
class SpectralReport:
    """Result of one CLI run.

    Attributes:
        command: Command that produced the report.
        inputs: Echo of the resolved request parameters.
        model: Full resolved model (``ModelConfig.to_dict``).
        results: Bands, intervals, eigenvalues and tables.
        verdicts: Pass/fail outcomes of the checks the command ran.
        version: Package version.

    Wall-clock timings are not part of the report, so equal runs serialize to
    identical bytes; they go to the log and the run ledger instead.
    """

    command: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    model: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    verdicts: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> Dict[str, Any]:
        return to_plain({key: getattr(self, key) for key in REPORT_KEYS})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SpectralReport":
        """Rebuild a report from :meth:`to_json` output.

        Raises:
            ValueError: If a required key is missing.
        """
        data = json.loads(text)
        missing = [key for key in REPORT_KEYS if key not in data]
        if missing:
            raise ValueError(f"report is missing keys {missing}")
        return cls(**{key: data[key] for key in REPORT_KEYS})

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
        logger.info(f"Wrote {self.command} report to {path}")


def table_frame(rows: Sequence[Mapping[str, Any]], columns: Optional[List[str]] = None) -> pd.DataFrame:
    """DataFrame of report table rows, columns in the given or first-row order."""
    frame = pd.DataFrame([to_plain(r) for r in rows])
    if columns is not None:
        frame = frame.reindex(columns=columns)
    return frame


def write_csv(rows: Sequence[Mapping[str, Any]], path: str, columns: Optional[List[str]] = None) -> pd.DataFrame:
    """Write table rows as CSV for plotting and return the frame."""
    frame = table_frame(rows, columns)
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return frame
