"""Command-line front-end for Lattice Spectra.

Each command loads a model file, runs one library computation and emits a
deterministic JSON report (to ``--out`` or stdout), optionally with a CSV
table for plotting. Exit codes:

    0  success
    2  model file invalid (parse error or failed hypothesis clause)
    3  precondition violated (bad momentum, z outside the domain, grid too large)
    4  numerical failure (eigensolver or descent did not converge)
"""
import argparse
import logging
import math
import re
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lattice_spectra import __version__
from lattice_spectra.channel import analyze_channel, gap_component_coverage, spectator_grid
from lattice_spectra.config import DEFAULT_MODEL_PATH, RUN_DB_PATH, THREE_BODY_SETTINGS
from lattice_spectra.exceptions import ModelValidationError, PreconditionError, SpectralError
from lattice_spectra.model import ModelConfig, hessian_mass_defect
from lattice_spectra.model_file import parse_config, read_model_file
from lattice_spectra.reports import SpectralReport, write_csv
from lattice_spectra.run_store import RunStore
from lattice_spectra.threebody import (
    FaddeevAssembler,
    channel_threshold,
    essential_spectrum,
    faddeev_eigenvalue_scan,
    fiber_equivalence_test,
    oracle_compare,
    potential_norm,
)
from lattice_spectra.torus import make_grid, normalize
from lattice_spectra.twobody import (
    band,
    count_eigenvalues,
    discrete_spectrum,
    fredholm_determinant,
    fredholm_zeros,
)

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "twobody", "channel", "essential", "faddeev", "oracle", "fiber-test")

_PI_LITERAL = re.compile(
    r"^(?P<sign>[+-]?)(?P<coef>\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*pi(?:\s*/\s*(?P<den>\d+(?:\.\d*)?))?$"
)

AUTO_SWEEP = "auto"


def parse_scalar(text: str) -> float:
    """Parse a float or a multiple of π such as ``pi``, ``-pi/2``, ``3pi/4``, ``2*pi/3``.

    Raises:
        PreconditionError: If the text is neither.
    """
    value = text.strip().lower()
    try:
        return float(value)
    except ValueError:
        pass
    match = _PI_LITERAL.match(value)
    if not match:
        raise PreconditionError(f"cannot read {text!r} as a number or multiple of pi")
    result = math.pi * float(match.group("coef") or 1.0)
    if match.group("den"):
        denominator = float(match.group("den"))
        if denominator == 0.0:
            raise PreconditionError(f"division by zero in {text!r}")
        result /= denominator
    return -result if match.group("sign") == "-" else result


def parse_momentum(text: str) -> Tuple[float, float, float]:
    """Parse ``x,y,z`` into a point of (−π, π]³."""
    parts = text.split(",")
    if len(parts) != 3:
        raise PreconditionError(f"momenta need three comma-separated entries, got {text!r}")
    return tuple(float(v) for v in normalize([parse_scalar(p) for p in parts]))  # type: ignore[return-value]


def parse_sweep(text: str) -> Tuple[float, float, int]:
    """Parse ``LO:HI:STEPS``.

    Raises:
        PreconditionError: If the range is malformed, reversed or has fewer than 2 steps.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise PreconditionError(f"z-sweep must be LO:HI:STEPS, got {text!r}")
    lo, hi = parse_scalar(parts[0]), parse_scalar(parts[1])
    try:
        steps = int(parts[2])
    except ValueError:
        raise PreconditionError(f"z-sweep step count must be an integer, got {parts[2]!r}")
    if steps < 2 or not lo < hi:
        raise PreconditionError(f"z-sweep needs LO < HI and at least 2 steps, got {text!r}")
    return lo, hi, steps


@dataclass
class RunRequest:
    """One CLI invocation.

    Attributes:
        command: One of :data:`COMMANDS`.
        model_path: Model file.
        params: Command-specific parameters (``K``, ``k``, ``alpha``, ``n``,
            ``z``, ``z_sweep``, ``gap_tol``, ``threads``, ``csv``).
    """

    command: str
    model_path: str = DEFAULT_MODEL_PATH
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise PreconditionError(f"unknown command {self.command!r}; expected one of {COMMANDS}")

    def get(self, key: str, default: Any = None) -> Any:
        value = self.params.get(key)
        return default if value is None else value


def _grid_n(request: RunRequest, model: ModelConfig, cap: Optional[int] = None) -> int:
    n = request.get("n", model.grid_n if cap is None else min(model.grid_n, cap))
    return int(n)


def _sweep_values(request: RunRequest, auto: Callable[[], Tuple[float, float, int]]) -> Optional[np.ndarray]:
    sweep = request.get("z_sweep")
    if sweep is None:
        return None
    lo, hi, steps = auto() if sweep == AUTO_SWEEP else sweep
    return np.linspace(lo, hi, steps)


def _emit_csv(request: RunRequest, rows: List[Dict[str, Any]], columns: List[str]) -> None:
    path = request.get("csv")
    if path is None:
        return
    write_csv(rows, path, columns)


def _run_validate(request: RunRequest) -> Tuple[SpectralReport, int]:
    model_file = read_model_file(request.model_path)
    reports = model_file.validation_reports()
    valid = all(r.passed for r in reports)
    results: Dict[str, Any] = {"tables": [r.to_dict() for r in reports]}
    code = 0
    model: Dict[str, Any] = {
        "name": model_file.name,
        "grid_n": model_file.grid_n,
        "max_support_radius": model_file.support_radius,
        "dispersions": [c.to_rows() for c in model_file.dispersions],
        "potentials": [c.to_rows() for c in model_file.potentials]
    }
    if valid:
        try:
            model = model_file.build().to_dict()
            results["mass_defects"] = [hessian_mass_defect(c) for c in model_file.dispersions]
        except SpectralError as e:
            logger.error(f"Model {model_file.name} is degenerate: {str(e)}")
            results["error"] = {"type": type(e).__name__, "message": str(e)}
            valid, code = False, e.exit_code
    else:
        failed = [f"{r.subject}: {c.clause}" for r in reports for c in r.failed()]
        logger.warning(f"Model {model_file.name} fails {failed}")
        code = ModelValidationError.exit_code
    return SpectralReport("validate", results=results, model=model, verdicts={"valid": valid}), code


def _run_twobody(request: RunRequest) -> Tuple[SpectralReport, int]:
    model = parse_config(request.model_path)
    alpha = int(request.get("alpha", 1))
    k = request.get("k", (0.0, 0.0, 0.0))
    n = _grid_n(request, model)
    grid = make_grid(n)
    b = band(model, alpha, k, grid)
    spectrum = discrete_spectrum(model, alpha, k, grid, known_band=b)
    # every grid eigenvalue under the band, for the determinant and count checks
    below = np.asarray(discrete_spectrum(model, alpha, k, grid, continuum_tol=0.0, known_band=b).below)
    zeros = fredholm_zeros(model, alpha, k, grid)
    results: Dict[str, Any] = {
        "spectrum": spectrum.to_dict(),
        "below_band": below.tolist(),
        "fredholm_zeros": zeros
    }
    verdicts: Dict[str, Any] = {
        "fredholm_zeros_are_eigenvalues": all(
            bool(below.size) and float(np.min(np.abs(below - z))) < 1e-8 for z in zeros
        )
    }

    def auto() -> Tuple[float, float, int]:
        depth = float(np.sum(model.potential(alpha).values)) + 1.0
        return b.lo - depth, b.lo - 1e-3 * max(1.0, abs(b.lo)), 20

    rows = []
    z_values = _sweep_values(request, auto)
    if request.get("z") is not None:
        z_values = np.append([] if z_values is None else z_values, float(request.get("z")))
    for z in [] if z_values is None else z_values.tolist():
        row: Dict[str, Any] = {"z": z, "count": None, "determinant": None}
        if z < b.lo:
            row["count"] = count_eigenvalues(model, alpha, k, z, grid, known_band=b)
        if not b.contains(z):
            row["determinant"] = fredholm_determinant(model, alpha, k, z, grid, known_band=b)
        rows.append(row)
    if rows:
        results["table"] = rows
        verdicts["count_matches_spectrum"] = all(
            r["count"] == int(np.sum(below < r["z"])) for r in rows if r["count"] is not None
        )
        _emit_csv(request, rows, ["z", "count", "determinant"])
    inputs = {"alpha": alpha, "k": list(k), "n": n}
    return SpectralReport("twobody", inputs=inputs, model=model.to_dict(), results=results, verdicts=verdicts), 0


def _sample_rows(spectrum: Any) -> List[Dict[str, Any]]:
    return [
        {"alpha": spectrum.alpha, "p_index": s.p_index, "p1": s.p[0], "p2": s.p[1], "p3": s.p[2],
         "branch": s.branch, "value": s.value}
        for s in spectrum.samples
    ]


_SAMPLE_COLUMNS = ["alpha", "p_index", "p1", "p2", "p3", "branch", "value"]


def _run_channel(request: RunRequest) -> Tuple[SpectralReport, int]:
    model = parse_config(request.model_path)
    alpha = int(request.get("alpha", 1))
    K = request.get("K", (0.0, 0.0, 0.0))
    n = _grid_n(request, model)
    grid = make_grid(n)
    spectrum = analyze_channel(
        model, alpha, K, grid, gap_tol=request.get("gap_tol"), threads=request.get("threads")
    )
    coverage = gap_component_coverage(spectrum, spectator_grid(grid, model, alpha, K), spectrum.gap_tol)
    _emit_csv(request, _sample_rows(spectrum), _SAMPLE_COLUMNS)
    results = {"channel": spectrum.to_dict(), "band": spectrum.band.to_dict(), "coverage": coverage.to_dict()}
    verdicts = {"gap_components_covered": coverage.covered, "interval_count": spectrum.union.count}
    inputs = {"alpha": alpha, "K": list(K), "n": n, "gap_tol": request.get("gap_tol")}
    return SpectralReport("channel", inputs=inputs, model=model.to_dict(), results=results, verdicts=verdicts), 0


def _run_essential(request: RunRequest) -> Tuple[SpectralReport, int]:
    model = parse_config(request.model_path)
    K = request.get("K", (0.0, 0.0, 0.0))
    n = _grid_n(request, model)
    essential = essential_spectrum(
        model, K, make_grid(n), gap_tol=request.get("gap_tol"), threads=request.get("threads")
    )
    _emit_csv(request, [row for c in essential.channels for row in _sample_rows(c)], _SAMPLE_COLUMNS)
    verdicts = {"interval_count": essential.union.count, "finite": True}
    inputs = {"K": list(K), "n": n, "gap_tol": request.get("gap_tol")}
    return SpectralReport(
        "essential", inputs=inputs, model=model.to_dict(), results=essential.to_dict(), verdicts=verdicts
    ), 0


def _run_faddeev(request: RunRequest) -> Tuple[SpectralReport, int]:
    model = parse_config(request.model_path)
    K = request.get("K", (0.0, 0.0, 0.0))
    n = _grid_n(request, model, THREE_BODY_SETTINGS["full_h_max_n"])
    grid = make_grid(n)
    assembler = FaddeevAssembler(model, K, grid)
    norm = potential_norm(model)
    far = assembler.band.lo - 10.0 * max(norm, 1.0)
    far_sigma = assembler.operator(far).smallest_singular_value()
    results: Dict[str, Any] = {"band": assembler.band.to_dict(), "potential_norm": norm, "far_sigma_min": far_sigma}
    verdicts: Dict[str, Any] = {"well_conditioned_far_below": far_sigma > 0.5}

    if request.get("z") is not None:
        op = assembler.operator(float(request.get("z")))
        results["operator"] = {
            "z": op.z,
            "sigma_min": op.smallest_singular_value(),
            "ranks": list(op.ranks),
            "condition_numbers": list(op.condition_numbers),
            "block_norms": op.block_norms().tolist()
        }

    def auto() -> Tuple[float, float, int]:
        bound = channel_threshold(model, K, grid, threads=request.get("threads"))
        lo = assembler.band.lo - 3.0 * norm - 1.0
        return lo, bound - 1e-6 * max(1.0, abs(bound)), THREE_BODY_SETTINGS["scan_points"]

    z_values = _sweep_values(request, auto)
    if z_values is not None:
        scan = faddeev_eigenvalue_scan(model, K, z_values, grid, threads=request.get("threads"))
        results["scan"] = scan.to_dict()
        verdicts["candidate_count"] = len(scan.candidates)
        _emit_csv(request, [{"z": z, "sigma_min": s} for z, s in scan.samples], ["z", "sigma_min"])
    inputs = {"K": list(K), "n": n, "z": request.get("z"), "z_sweep": _sweep_echo(request)}
    return SpectralReport("faddeev", inputs=inputs, model=model.to_dict(), results=results, verdicts=verdicts), 0


def _sweep_echo(request: RunRequest) -> Any:
    sweep = request.get("z_sweep")
    return list(sweep) if isinstance(sweep, tuple) else sweep


def _run_oracle(request: RunRequest) -> Tuple[SpectralReport, int]:
    model = parse_config(request.model_path)
    K = request.get("K", (0.0, 0.0, 0.0))
    n = _grid_n(request, model, THREE_BODY_SETTINGS["full_h_max_n"])
    report = oracle_compare(model, K, make_grid(n), gap_tol=request.get("gap_tol"), threads=request.get("threads"))
    verdicts = {
        "containment_fraction": report.containment_fraction,
        "contained": report.containment_fraction == 1.0 and not report.violations
    }
    inputs = {"K": list(K), "n": n, "gap_tol": request.get("gap_tol")}
    return SpectralReport(
        "oracle", inputs=inputs, model=model.to_dict(), results=report.to_dict(), verdicts=verdicts
    ), 0


def _run_fiber_test(request: RunRequest) -> Tuple[SpectralReport, int]:
    model = parse_config(request.model_path)
    alpha = int(request.get("alpha", 1))
    n = _grid_n(request, model, THREE_BODY_SETTINGS["full_h_max_n"])
    report = fiber_equivalence_test(model, alpha, make_grid(n))
    verdicts = {"fibers_match": report.max_deviation is not None and report.max_deviation < 1e-9}
    return SpectralReport(
        "fiber-test", inputs={"alpha": alpha, "n": n}, model=model.to_dict(), results=report.to_dict(),
        verdicts=verdicts
    ), 0


HANDLERS: Dict[str, Callable[[RunRequest], Tuple[SpectralReport, int]]] = {
    "validate": _run_validate,
    "twobody": _run_twobody,
    "channel": _run_channel,
    "essential": _run_essential,
    "faddeev": _run_faddeev,
    "oracle": _run_oracle,
    "fiber-test": _run_fiber_test
}


def run(request: RunRequest, db_path: Optional[str] = None) -> Tuple[SpectralReport, int]:
    """Execute a request and map library errors to exit codes.

    Args:
        request: The parsed invocation.
        db_path: Run ledger to record into; defaults to ``LATTICE_SPECTRA_RUN_DB``.

    Returns:
        Tuple[SpectralReport, int]: The report (an error report on failure)
        and the exit code.
    """
    start = time.perf_counter()
    try:
        report, code = HANDLERS[request.command](request)
    except SpectralError as e:
        logger.error(f"{request.command} failed: {type(e).__name__}: {str(e)}")
        report = SpectralReport(
            request.command,
            results={"error": {"type": type(e).__name__, "message": str(e)}},
            verdicts={"ok": False}
        )
        code = e.exit_code
    report.inputs.setdefault("model_path", request.model_path)
    elapsed = time.perf_counter() - start
    logger.info(f"{request.command} finished with exit code {code} in {elapsed:.3f}s")

    db_path = RUN_DB_PATH if db_path is None else db_path
    if db_path:
        RunStore(db_path).record_run(
            request.command, report.model.get("name"), report.to_json(), code, elapsed
        )
    return report, code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lattice-spectra",
        description="Spectral analysis of lattice two- and three-particle operators.",
        epilog="exit codes: 0 ok, 2 model file invalid, 3 precondition violated, 4 numerical failure",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--model", default=DEFAULT_MODEL_PATH, help="model file (default: shipped fixture)")
    parser.add_argument("--K", dest="K", help="total momentum x,y,z; entries like pi/2 are accepted")
    parser.add_argument("--k", dest="k", help="pair momentum x,y,z")
    parser.add_argument("--alpha", type=int, choices=(1, 2, 3), help="channel index")
    parser.add_argument("--n", type=int, help="grid points per axis")
    parser.add_argument("--z", help="spectral parameter")
    parser.add_argument(
        "--z-sweep", dest="z_sweep", nargs="?", const=AUTO_SWEEP, metavar="LO:HI:STEPS",
        help="sweep of spectral parameters; without a value a range below the threshold is chosen"
    )
    parser.add_argument("--gap-tol", dest="gap_tol", type=float, help="merge tolerance for interval assembly")
    parser.add_argument("--out", help="write the JSON report here instead of stdout")
    parser.add_argument("--csv", help="write the command's sample table as CSV")
    parser.add_argument("--threads", type=int, help="worker cap for parameter sweeps")
    parser.add_argument("--db", help="record the run in this SQLite ledger")
    parser.add_argument("--log-level", dest="log_level", help="logging level, e.g. DEBUG")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def request_from_args(args: argparse.Namespace) -> RunRequest:
    """Resolve parsed arguments into a :class:`RunRequest`.

    Raises:
        PreconditionError: If a momentum, z or sweep value cannot be read.
    """
    params: Dict[str, Any] = {
        "K": parse_momentum(args.K) if args.K else None,
        "k": parse_momentum(args.k) if args.k else None,
        "alpha": args.alpha,
        "n": args.n,
        "z": parse_scalar(args.z) if args.z is not None else None,
        "z_sweep": None,
        "gap_tol": args.gap_tol,
        "threads": args.threads,
        "csv": args.csv
    }
    if args.z_sweep is not None:
        params["z_sweep"] = AUTO_SWEEP if args.z_sweep == AUTO_SWEEP else parse_sweep(args.z_sweep)
    if args.gap_tol is not None and args.gap_tol <= 0.0:
        raise PreconditionError(f"--gap-tol must be positive, got {args.gap_tol}")
    return RunRequest(args.command, args.model, params)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of ``lattice-spectra``; returns the exit code."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(getattr(logging, args.log_level.upper(), logging.INFO))
    try:
        request = request_from_args(args)
    except SpectralError as e:
        logger.error(f"Invalid arguments: {str(e)}")
        return e.exit_code

    report, code = run(request, db_path=args.db)
    if args.out:
        report.write(args.out)
    else:
        sys.stdout.write(report.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
