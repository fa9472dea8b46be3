"""SQLite ledger of command-line runs.

Every CLI invocation can be recorded with its command, model name, full JSON
report, exit code and wall-clock time. The ledger is optional and only used
when a database path is configured.
"""
import json
import logging
import os
import sqlite3
from typing import Any, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "schema.sql")

_COLUMNS = ("id", "command", "model_name", "report_json", "exit_code", "elapsed_s", "created_at")


class RunStore:
    """Manages the SQLite database of recorded runs.

    Attributes:
        db_path (str): Path to the SQLite database file.
    """

    def __init__(self, db_path: str = "runs.db") -> None:
        """Initialize the store and create missing tables.

        Args:
            db_path: Path to the SQLite database file. Defaults to "runs.db".
        """
        self.db_path = db_path
        self._init_db()

    def _init_db(self) -> None:
        """Execute ``schema.sql`` from the package directory.

        Raises:
            FileNotFoundError: If schema.sql is not found.
            sqlite3.Error: If there's an error executing the schema.
        """
        with open(SCHEMA_PATH, "r") as f:
            schema = f.read()

        with sqlite3.connect(self.db_path) as conn:
            conn.executescript(schema)

    def record_run(
        self,
        command: str,
        model_name: Optional[str],
        report_json: str,
        exit_code: int = 0,
        elapsed_s: Optional[float] = None
    ) -> int:
        """Add a run to the ledger.

        Args:
            command: CLI command that was run.
            model_name: Name of the model, if one was loaded.
            report_json: The serialized report (or error summary).
            exit_code: Process exit code.
            elapsed_s: Wall-clock time of the run in seconds.

        Returns:
            int: The ID of the newly inserted run.
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("""
                INSERT INTO runs (command, model_name, report_json, exit_code, elapsed_s)
                VALUES (?, ?, ?, ?, ?)
            """, (command, model_name, report_json, exit_code, elapsed_s))
            logger.debug(f"Recorded {command} run {cursor.lastrowid} in {self.db_path}")
            return cursor.lastrowid

    def get_run(self, run_id: int) -> Optional[Tuple]:
        """Get a run by ID.

        Returns:
            Optional[Tuple]: Run row, or None if not found.
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
            return cursor.fetchone()

    def get_recent_runs(self, limit: int = 20, command: Optional[str] = None) -> List[Tuple]:
        """Most recent runs first, optionally restricted to one command."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            if command is None:
                cursor.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,))
            else:
                cursor.execute(
                    "SELECT * FROM runs WHERE command = ? ORDER BY id DESC LIMIT ?", (command, limit)
                )
            return cursor.fetchall()

    def get_statistics(self) -> Dict[str, Any]:
        """Run counts per command and exit code, and mean elapsed time per command."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            stats: Dict[str, Any] = {}

            cursor.execute("SELECT COUNT(*) FROM runs")
            stats["total_runs"] = cursor.fetchone()[0]

            cursor.execute("SELECT command, COUNT(*) FROM runs GROUP BY command")
            stats["runs_by_command"] = dict(cursor.fetchall())

            cursor.execute("SELECT exit_code, COUNT(*) FROM runs GROUP BY exit_code")
            stats["runs_by_exit_code"] = dict(cursor.fetchall())

            cursor.execute("SELECT command, AVG(elapsed_s) FROM runs GROUP BY command")
            stats["mean_elapsed_s"] = {c: float(v or 0.0) for c, v in cursor.fetchall()}

            return stats

    def export_runs(self, path: Optional[str] = None) -> List[Dict[str, Any]]:
        """Export every run as a list of dicts, oldest first.

        Args:
            path: If given, the list is also written there as JSON.

        Returns:
            List[Dict[str, Any]]: Runs with their reports decoded.
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM runs ORDER BY id")
            rows = cursor.fetchall()

        runs = []
        for row in rows:
            run = dict(zip(_COLUMNS, row))
            try:
                run["report"] = json.loads(run.pop("report_json"))
            except json.JSONDecodeError:
                logger.warning(f"Run {run['id']} has an undecodable report")
                run["report"] = None
            runs.append(run)

        if path is not None:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(runs, f, indent=2)
            logger.info(f"Exported {len(runs)} runs to {path}")
        return runs
