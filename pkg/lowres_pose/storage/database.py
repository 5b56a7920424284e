"""SQLite run ledger: what was run, with which config, and how it ended."""

import json
import sqlite3
import uuid
from contextlib import contextmanager
from datetime import date, datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from lowres_pose.config import settings


class LedgerEncoder(json.JSONEncoder):
    """JSON encoder that handles datetimes, paths and numpy scalars."""

    def default(self, obj):
        if isinstance(obj, (datetime, date)):
            return obj.isoformat()
        if isinstance(obj, Path):
            return str(obj)
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return super().default(obj)


class Database:
    """SQLite run ledger.

    Nothing read from here feeds back into training, so recording a run never
    changes its outputs.
    """

    def __init__(self, db_path: Optional[str] = None):
        self.db_path = db_path or settings.database_path
        self._ensure_db_dir()
        self._init_schema()

    def _ensure_db_dir(self) -> None:
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)

    def _init_schema(self) -> None:
        with self.get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    command TEXT NOT NULL,
                    config TEXT,
                    seed INTEGER,
                    status TEXT NOT NULL,
                    error_message TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    completed_at TIMESTAMP
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS run_events (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    event_type TEXT NOT NULL,
                    details TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            """)

            cursor.execute(
                "CREATE INDEX IF NOT EXISTS idx_run_events_run ON run_events(run_id)"
            )
            conn.commit()

    @contextmanager
    def get_connection(self) -> Iterator[sqlite3.Connection]:
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def start_run(
        self,
        command: str,
        config: Optional[Dict[str, Any]] = None,
        seed: Optional[int] = None,
    ) -> str:
        """Record a started run and return its id."""
        run_id = uuid.uuid4().hex
        with self.get_connection() as conn:
            conn.execute(
                "INSERT INTO runs (run_id, command, config, seed, status) VALUES (?, ?, ?, ?, ?)",
                (
                    run_id,
                    command,
                    json.dumps(config, cls=LedgerEncoder, sort_keys=True) if config else None,
                    seed,
                    "running",
                ),
            )
            conn.commit()
        return run_id

    def finish_run(self, run_id: str, status: str = "completed", error_message: str = "") -> None:
        with self.get_connection() as conn:
            conn.execute(
                """
                UPDATE runs SET status = ?, error_message = ?, completed_at = CURRENT_TIMESTAMP
                WHERE run_id = ?
            """,
                (status, error_message or None, run_id),
            )
            conn.commit()

    def log_event(
        self, run_id: str, event_type: str, details: Optional[Dict[str, Any]] = None
    ) -> None:
        with self.get_connection() as conn:
            conn.execute(
                "INSERT INTO run_events (run_id, event_type, details) VALUES (?, ?, ?)",
                (
                    run_id,
                    event_type,
                    json.dumps(details, cls=LedgerEncoder, sort_keys=True) if details else None,
                ),
            )
            conn.commit()

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        with self.get_connection() as conn:
            row = conn.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,)).fetchone()
        if row is None:
            return None
        run = dict(row)
        run["config"] = json.loads(run["config"]) if run["config"] else None
        return run

    def list_runs(self, command: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        query = "SELECT * FROM runs"
        params: List[Any] = []
        if command:
            query += " WHERE command = ?"
            params.append(command)
        query += " ORDER BY created_at DESC, rowid DESC LIMIT ?"
        params.append(limit)
        with self.get_connection() as conn:
            return [dict(row) for row in conn.execute(query, params).fetchall()]

    def get_events(self, run_id: str, event_type: Optional[str] = None) -> List[Dict[str, Any]]:
        query = "SELECT * FROM run_events WHERE run_id = ?"
        params: List[Any] = [run_id]
        if event_type:
            query += " AND event_type = ?"
            params.append(event_type)
        query += " ORDER BY id"
        with self.get_connection() as conn:
            rows = conn.execute(query, params).fetchall()
        events = []
        for row in rows:
            event = dict(row)
            event["details"] = json.loads(event["details"]) if event["details"] else None
            events.append(event)
        return events


# Global database instance
_db: Optional[Database] = None


def get_db() -> Database:
    """Get global database instance."""
    global _db
    if _db is None:
        _db = Database()
    return _db


def reset_db(db: Optional[Database] = None) -> None:
    """Replace the global instance (``None`` reopens from settings on next use)."""
    global _db
    _db = db
