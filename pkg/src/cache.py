"""
Log-partition table cache.

Ensures that log Z_m tables for the same base density and resolution are
computed once and reused across runs.

Cache key: hash(density samples, grid, m, radius range, table resolution)
"""

import hashlib
import json
import os
import sqlite3
from datetime import datetime, timedelta
from typing import Optional

import numpy as np

from config import CACHE_TTL_DAYS, DB_PATH


def density_digest(values: np.ndarray, grid: dict) -> str:
    """Digest of the density samples and their grid."""
    digest = hashlib.sha256(np.ascontiguousarray(values, dtype=np.float64).tobytes())
    digest.update(json.dumps(grid, sort_keys=True).encode())
    return digest.hexdigest()


def _generate_cache_key(
    digest: str,
    m: int,
    rho_max: float,
    radial_nodes: int,
    split_nodes: int,
) -> str:
    """Generate a cache key for one log Z_m table."""
    key_string = f"{digest}|{m}|{rho_max!r}|{radial_nodes}|{split_nodes}"
    return hashlib.sha256(key_string.encode()).hexdigest()[:32]


def _connect() -> sqlite3.Connection:
    directory = os.path.dirname(DB_PATH)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return sqlite3.connect(DB_PATH)


def init_cache_table():
    """Initialize the log-partition cache table."""
    conn = _connect()
    c = conn.cursor()
    c.execute("""
        CREATE TABLE IF NOT EXISTS log_z_cache (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            cache_key TEXT UNIQUE NOT NULL,
            density_digest TEXT NOT NULL,
            m INTEGER NOT NULL,
            rho_max REAL NOT NULL,
            radial_nodes INTEGER NOT NULL,
            log_values BLOB NOT NULL,
            created_at TEXT NOT NULL,
            expires_at TEXT NOT NULL,
            hit_count INTEGER DEFAULT 0
        )
    """)
    c.execute("""
        CREATE INDEX IF NOT EXISTS idx_log_z_key ON log_z_cache(cache_key)
    """)
    c.execute("""
        CREATE INDEX IF NOT EXISTS idx_log_z_density ON log_z_cache(density_digest, m)
    """)
    conn.commit()
    conn.close()


def get_cached_table(
    digest: str,
    m: int,
    rho_max: float,
    radial_nodes: int,
    split_nodes: int,
) -> Optional[np.ndarray]:
    """
    Retrieve cached log Z_m values if available and not expired.

    Args:
        digest: density_digest of the base density
        m: particle count of the table
        rho_max: largest radius of the table grid
        radial_nodes: number of radius nodes
        split_nodes: angular split nodes used to build the table

    Returns:
        Array of log Z_m values on the radius grid, or None if not found/expired
    """
    init_cache_table()
    cache_key = _generate_cache_key(digest, m, rho_max, radial_nodes, split_nodes)

    conn = _connect()
    c = conn.cursor()
    c.execute("""
        SELECT log_values, expires_at, id
        FROM log_z_cache
        WHERE cache_key = ?
    """, (cache_key,))
    row = c.fetchone()

    if row:
        blob, expires_at, row_id = row
        if datetime.fromisoformat(expires_at) > datetime.utcnow():
            c.execute("""
                UPDATE log_z_cache
                SET hit_count = hit_count + 1
                WHERE id = ?
            """, (row_id,))
            conn.commit()
            conn.close()
            values = np.frombuffer(blob, dtype=np.float64).copy()
            return values if values.size == radial_nodes else None

    conn.close()
    return None


def store_cached_table(
    digest: str,
    m: int,
    rho_max: float,
    radial_nodes: int,
    split_nodes: int,
    log_values: np.ndarray,
    ttl_days: int = CACHE_TTL_DAYS,
):
    """Store a log Z_m table in the cache (upsert)."""
    init_cache_table()
    cache_key = _generate_cache_key(digest, m, rho_max, radial_nodes, split_nodes)
    now = datetime.utcnow()
    expires_at = now + timedelta(days=ttl_days)
    blob = np.ascontiguousarray(log_values, dtype=np.float64).tobytes()

    conn = _connect()
    c = conn.cursor()
    c.execute("""
        INSERT INTO log_z_cache
            (cache_key, density_digest, m, rho_max, radial_nodes,
             log_values, created_at, expires_at, hit_count)
        VALUES (?, ?, ?, ?, ?, ?, ?, ?, 0)
        ON CONFLICT(cache_key) DO UPDATE SET
            log_values = excluded.log_values,
            created_at = excluded.created_at,
            expires_at = excluded.expires_at
    """, (
        cache_key, digest, m, rho_max, radial_nodes,
        blob, now.isoformat(), expires_at.isoformat()
    ))
    conn.commit()
    conn.close()


def clear_expired_cache() -> int:
    """Remove expired entries from the cache."""
    init_cache_table()
    conn = _connect()
    c = conn.cursor()
    c.execute("""
        DELETE FROM log_z_cache
        WHERE expires_at < ?
    """, (datetime.utcnow().isoformat(),))
    deleted = c.rowcount
    conn.commit()
    conn.close()
    return deleted


def get_cache_stats() -> dict:
    """Get cache statistics."""
    init_cache_table()
    conn = _connect()
    c = conn.cursor()

    c.execute("SELECT COUNT(*) FROM log_z_cache")
    total_entries = c.fetchone()[0]

    c.execute("SELECT SUM(hit_count) FROM log_z_cache")
    total_hits = c.fetchone()[0] or 0

    c.execute("""
        SELECT density_digest, COUNT(*) as count
        FROM log_z_cache
        GROUP BY density_digest
        ORDER BY count DESC
        LIMIT 10
    """)
    top_densities = [(digest[:12], count) for digest, count in c.fetchall()]

    conn.close()

    return {
        "total_entries": total_entries,
        "total_hits": total_hits,
        "top_densities": top_densities,
    }
