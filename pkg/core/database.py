"""SQLite store for benchmark campaigns, their records and training traces."""

import json
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from core.config import get_settings


class ResultStore:
    """SQLite database of campaign runs."""

    def __init__(self, db_path: Optional[Union[str, Path]] = None):
        if db_path is None:
            db_path = get_settings().ensure_data_dir() / "results.db"

        self.db_path = str(db_path)
        self._init_db()

    def _init_db(self):
        """Initialize database tables."""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS campaigns (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    master_seed INTEGER NOT NULL,
                    manifest TEXT NOT NULL,
                    created TEXT
                )
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS records (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    campaign_id INTEGER NOT NULL REFERENCES campaigns(id),
                    n INTEGER NOT NULL,
                    seed INTEGER NOT NULL,
                    method TEXT NOT NULL,
                    ratio REAL,
                    ratio_clamped INTEGER DEFAULT 0,
                    idx INTEGER,
                    iterations INTEGER,
                    wall_ms REAL,
                    trace_ref TEXT
                )
            """)
            conn.execute("""
                CREATE INDEX IF NOT EXISTS idx_records_campaign
                ON records(campaign_id)
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS traces (
                    trace_ref TEXT NOT NULL,
                    k INTEGER NOT NULL,
                    loss REAL,
                    grad_norm REAL,
                    step_size REAL,
                    PRIMARY KEY (trace_ref, k)
                )
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS settings (
                    key TEXT PRIMARY KEY,
                    value TEXT
                )
            """)
            conn.commit()

    def add_campaign(self, master_seed: int, manifest: dict) -> int:
        """Register a campaign and return its id."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "INSERT INTO campaigns (master_seed, manifest, created) VALUES (?, ?, ?)",
                (master_seed, json.dumps(manifest, sort_keys=True), datetime.now().isoformat())
            )
            conn.commit()
            return cursor.lastrowid

    def add_records(self, campaign_id: int, records: list[dict]):
        """Insert benchmark rows (dicts with the BenchRecord fields)."""
        with sqlite3.connect(self.db_path) as conn:
            conn.executemany("""
                INSERT INTO records
                (campaign_id, n, seed, method, ratio, ratio_clamped, idx, iterations, wall_ms, trace_ref)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, [
                (campaign_id, r["n"], r["seed"], r["method"], r["ratio"], int(r["ratio_clamped"]),
                 r["index"], r["iterations"], r["wall_ms"], r["trace_ref"])
                for r in records
            ])
            conn.commit()

    def add_trace(self, trace_ref: str, rows: list[tuple]):
        """Store (k, loss, grad_norm, step_size) rows of one training trace."""
        with sqlite3.connect(self.db_path) as conn:
            conn.executemany(
                "INSERT OR REPLACE INTO traces (trace_ref, k, loss, grad_norm, step_size) VALUES (?, ?, ?, ?, ?)",
                [(trace_ref, *row) for row in rows]
            )
            conn.commit()

    def get_records(self, campaign_id: int) -> list[dict]:
        """Records of a campaign in insertion order."""
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute(
                "SELECT * FROM records WHERE campaign_id = ? ORDER BY id", (campaign_id,)
            )
            return [dict(row) for row in cursor.fetchall()]

    def get_trace(self, trace_ref: str) -> list[dict]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute(
                "SELECT k, loss, grad_norm, step_size FROM traces WHERE trace_ref = ? ORDER BY k",
                (trace_ref,)
            )
            return [dict(row) for row in cursor.fetchall()]

    def list_campaigns(self) -> list[dict]:
        """All campaigns, newest first, with the manifest decoded."""
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute("SELECT * FROM campaigns ORDER BY id DESC")
            rows = [dict(row) for row in cursor.fetchall()]
        for row in rows:
            row["manifest"] = json.loads(row["manifest"])
        return rows

    # Settings helpers
    def get_setting(self, key: str, default: str = None) -> Optional[str]:
        """Get a setting value."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "SELECT value FROM settings WHERE key = ?", (key,)
            )
            row = cursor.fetchone()
            return row[0] if row else default

    def set_setting(self, key: str, value: str):
        """Set a setting value."""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute(
                "INSERT OR REPLACE INTO settings (key, value) VALUES (?, ?)",
                (key, value)
            )
            conn.commit()
