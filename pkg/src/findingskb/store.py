"""Embedded document storage for beliefs.

Documents are keyed by (class, belief_id) with a secondary index on
class. The default backend is an embedded sqlite file; an in-memory
variant backs tests and short-lived tooling. An append-only log records
every assertion, revision and retraction for audit export.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass, field
from typing import Iterator, Optional


@dataclass
class BeliefRecord:
    cls: str
    belief_id: str
    payload: dict
    derived_from: list[str] = field(default_factory=list)
    asserted_at: str = ""
    origin: str = "external"  # external | derived

    def key(self) -> str:
        return f"{self.cls}:{self.belief_id}"

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "belief_id": self.belief_id,
            "payload": self.payload,
            "derived_from": list(self.derived_from),
            "asserted_at": self.asserted_at,
            "origin": self.origin,
        }


class DocumentStore:
    """Sqlite-backed store; pass path=":memory:" for a throwaway instance.

    Writes are grouped into transactions by the knowledge-base writer so
    a fixpoint batch commits atomically.
    """

    def __init__(self, path: str = ":memory:"):
        self.path = path
        # the knowledge base serializes writes behind its own lock, so the
        # connection may be shared across server worker threads
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS beliefs ("
            " cls TEXT NOT NULL, belief_id TEXT NOT NULL,"
            " payload TEXT NOT NULL, derived_from TEXT NOT NULL,"
            " asserted_at TEXT NOT NULL, origin TEXT NOT NULL,"
            " PRIMARY KEY (cls, belief_id))"
        )
        self._conn.execute("CREATE INDEX IF NOT EXISTS idx_beliefs_cls ON beliefs (cls)")
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS log ("
            " seq INTEGER PRIMARY KEY AUTOINCREMENT,"
            " op TEXT NOT NULL, cls TEXT NOT NULL, belief_id TEXT NOT NULL,"
            " payload TEXT, ts TEXT NOT NULL)"
        )
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS batches ("
            " seq INTEGER PRIMARY KEY AUTOINCREMENT, belief_keys TEXT NOT NULL)"
        )
        self._conn.commit()

    # -- transactions -------------------------------------------------

    def begin(self) -> None:
        self._conn.execute("BEGIN")

    def commit(self) -> None:
        self._conn.commit()

    def rollback(self) -> None:
        self._conn.rollback()

    def close(self) -> None:
        self._conn.close()

    # -- belief CRUD --------------------------------------------------

    def put(self, rec: BeliefRecord, log_op: Optional[str] = "assert") -> None:
        self._conn.execute(
            "INSERT OR REPLACE INTO beliefs (cls, belief_id, payload, derived_from, asserted_at, origin)"
            " VALUES (?, ?, ?, ?, ?, ?)",
            (
                rec.cls,
                rec.belief_id,
                json.dumps(rec.payload, sort_keys=True),
                json.dumps(sorted(rec.derived_from)),
                rec.asserted_at,
                rec.origin,
            ),
        )
        if log_op:
            self._log(log_op, rec.cls, rec.belief_id, rec.payload, rec.asserted_at)

    def get(self, cls: str, belief_id: str) -> Optional[BeliefRecord]:
        row = self._conn.execute(
            "SELECT cls, belief_id, payload, derived_from, asserted_at, origin"
            " FROM beliefs WHERE cls = ? AND belief_id = ?",
            (cls, belief_id),
        ).fetchone()
        return self._row_to_record(row) if row else None

    def find_by_id(self, belief_id: str) -> Optional[BeliefRecord]:
        row = self._conn.execute(
            "SELECT cls, belief_id, payload, derived_from, asserted_at, origin"
            " FROM beliefs WHERE belief_id = ?",
            (belief_id,),
        ).fetchone()
        return self._row_to_record(row) if row else None

    def delete(self, cls: str, belief_id: str, log_op: Optional[str] = "retract") -> None:
        self._conn.execute("DELETE FROM beliefs WHERE cls = ? AND belief_id = ?", (cls, belief_id))
        if log_op:
            self._log(log_op, cls, belief_id, None, "")

    def iter_class(self, cls: str) -> Iterator[BeliefRecord]:
        rows = self._conn.execute(
            "SELECT cls, belief_id, payload, derived_from, asserted_at, origin"
            " FROM beliefs WHERE cls = ? ORDER BY belief_id",
            (cls,),
        ).fetchall()
        for row in rows:
            yield self._row_to_record(row)

    def classes(self) -> list[str]:
        rows = self._conn.execute("SELECT DISTINCT cls FROM beliefs ORDER BY cls").fetchall()
        return [r[0] for r in rows]

    def count(self, cls: str) -> int:
        return self._conn.execute("SELECT COUNT(*) FROM beliefs WHERE cls = ?", (cls,)).fetchone()[0]

    def clear_class(self, cls: str) -> None:
        self._conn.execute("DELETE FROM beliefs WHERE cls = ?", (cls,))

    # -- batch bookkeeping (for deterministic replay) ------------------

    def record_batch(self, belief_keys: list[str]) -> int:
        cur = self._conn.execute("INSERT INTO batches (belief_keys) VALUES (?)", (json.dumps(belief_keys),))
        return cur.lastrowid

    def iter_batches(self) -> Iterator[tuple[int, list[str]]]:
        rows = self._conn.execute("SELECT seq, belief_keys FROM batches ORDER BY seq").fetchall()
        for seq, keys in rows:
            yield seq, json.loads(keys)

    def rewrite_batches(self, batches: list[list[str]]) -> None:
        self._conn.execute("DELETE FROM batches")
        for keys in batches:
            self._conn.execute("INSERT INTO batches (belief_keys) VALUES (?)", (json.dumps(keys),))

    # -- audit log -----------------------------------------------------

    def _log(self, op: str, cls: str, belief_id: str, payload: Optional[dict], ts: str) -> None:
        self._conn.execute(
            "INSERT INTO log (op, cls, belief_id, payload, ts) VALUES (?, ?, ?, ?, ?)",
            (op, cls, belief_id, json.dumps(payload, sort_keys=True) if payload is not None else None, ts),
        )

    def export_log(self) -> Iterator[dict]:
        """Full belief log as documents, in append order."""
        rows = self._conn.execute("SELECT seq, op, cls, belief_id, payload, ts FROM log ORDER BY seq").fetchall()
        for seq, op, cls, belief_id, payload, ts in rows:
            yield {
                "seq": seq,
                "op": op,
                "class": cls,
                "belief_id": belief_id,
                "payload": json.loads(payload) if payload else None,
                "ts": ts,
            }

    @staticmethod
    def _row_to_record(row) -> BeliefRecord:
        cls, belief_id, payload, derived_from, asserted_at, origin = row
        return BeliefRecord(
            cls=cls,
            belief_id=belief_id,
            payload=json.loads(payload),
            derived_from=json.loads(derived_from),
            asserted_at=asserted_at,
            origin=origin,
        )
