"""
Database layer for the Kac walk laboratory.

Tables:
- runs: one row per CLI invocation (config hash, command, exit code, manifest)
- log_z_cache: log-partition table cache (managed by cache.py)
"""

import json
import os
import sqlite3
from datetime import datetime
from typing import Optional

from config import DB_PATH


def _connect() -> sqlite3.Connection:
    directory = os.path.dirname(DB_PATH)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return sqlite3.connect(DB_PATH)


def init_db():
    """Initialize the database with all required tables."""
    conn = _connect()
    c = conn.cursor()

    # Runs table - one row per CLI command
    c.execute("""
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            config_hash TEXT NOT NULL,
            command TEXT NOT NULL,
            seed INTEGER,
            out_dir TEXT,
            exit_code INTEGER NOT NULL,
            manifest_json TEXT NOT NULL,
            created_at TEXT NOT NULL
        )
    """)

    c.execute("CREATE INDEX IF NOT EXISTS idx_runs_hash ON runs(config_hash)")
    c.execute("CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command)")

    conn.commit()
    conn.close()

    from cache import init_cache_table
    init_cache_table()


def save_run(
    config_hash: str,
    command: str,
    exit_code: int,
    manifest: dict,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> int:
    """Register a finished run."""
    conn = _connect()
    c = conn.cursor()
    now = datetime.utcnow().isoformat()

    c.execute("""
        INSERT INTO runs (
            config_hash, command, seed, out_dir, exit_code, manifest_json, created_at
        ) VALUES (?, ?, ?, ?, ?, ?, ?)
    """, (
        config_hash,
        command,
        seed,
        out_dir,
        int(exit_code),
        json.dumps(manifest, sort_keys=True),
        now,
    ))

    run_id = c.lastrowid
    conn.commit()
    conn.close()
    return run_id


def fetch_runs(limit: int = 50, command: Optional[str] = None) -> list[dict]:
    """Fetch recent runs, optionally filtered by command."""
    conn = _connect()
    c = conn.cursor()

    if command:
        c.execute("""
            SELECT id, config_hash, command, seed, out_dir, exit_code, created_at
            FROM runs
            WHERE command = ?
            ORDER BY id DESC LIMIT ?
        """, (command, limit))
    else:
        c.execute("""
            SELECT id, config_hash, command, seed, out_dir, exit_code, created_at
            FROM runs
            ORDER BY id DESC LIMIT ?
        """, (limit,))

    rows = c.fetchall()
    conn.close()

    return [
        {
            "id": r[0],
            "config_hash": r[1],
            "command": r[2],
            "seed": r[3],
            "out_dir": r[4],
            "exit_code": r[5],
            "created_at": r[6],
        }
        for r in rows
    ]


def get_run_by_id(run_id: int) -> Optional[dict]:
    """Fetch a single run, manifest included."""
    conn = _connect()
    c = conn.cursor()

    c.execute("""
        SELECT id, config_hash, command, seed, out_dir, exit_code, manifest_json, created_at
        FROM runs
        WHERE id = ?
    """, (run_id,))

    row = c.fetchone()
    conn.close()

    if not row:
        return None

    return {
        "id": row[0],
        "config_hash": row[1],
        "command": row[2],
        "seed": row[3],
        "out_dir": row[4],
        "exit_code": row[5],
        "manifest": json.loads(row[6]),
        "created_at": row[7],
    }


def runs_with_hash(config_hash: str) -> list[dict]:
    """All runs of one configuration, oldest first."""
    conn = _connect()
    c = conn.cursor()
    c.execute("SELECT id, exit_code, created_at FROM runs WHERE config_hash = ? ORDER BY id", (config_hash,))
    rows = c.fetchall()
    conn.close()
    return [{"id": r[0], "exit_code": r[1], "created_at": r[2]} for r in rows]
