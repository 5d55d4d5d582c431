"""Durable annotation store: one sqlite file holding crawled candidates and
the human-approved description per class.

Writes go through a single lock and commit before returning, so a submitted
annotation survives process death. Reads open fresh cursors and never block
behind the writer (WAL journal).
"""

from __future__ import annotations

import sqlite3
import threading
from datetime import datetime, timezone
from pathlib import Path

from .crawl import CandidateSet
from .errors import (IncompleteExportError, InvalidArgumentError,
                     MalformedInputError)

STATUS_PENDING = "pending"
STATUS_DONE = "done"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS classes (
    class_id    TEXT PRIMARY KEY,
    name        TEXT NOT NULL,
    status      TEXT NOT NULL DEFAULT 'pending',
    version     INTEGER NOT NULL DEFAULT 0,
    definition  TEXT,
    annotator   TEXT,
    duration_s  REAL,
    exemplar_url TEXT,
    updated_at  TEXT
);
CREATE TABLE IF NOT EXISTS candidates (
    class_id    TEXT NOT NULL,
    idx         INTEGER NOT NULL,
    sentence    TEXT NOT NULL,
    source      TEXT NOT NULL,
    PRIMARY KEY (class_id, idx)
);
"""


class AnnotationStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        with self._lock:
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- writes ------------------------------------------------------------

    def put_candidates(self, candidate_set: CandidateSet,
                       exemplar_url: str | None = None) -> None:
        """Insert or refresh a class's candidate list; keeps any annotation."""
        with self._lock:
            cur = self._conn.cursor()
            cur.execute(
                "INSERT INTO classes (class_id, name, exemplar_url, updated_at)"
                " VALUES (?, ?, ?, ?)"
                " ON CONFLICT(class_id) DO UPDATE SET name=excluded.name,"
                " exemplar_url=excluded.exemplar_url",
                (candidate_set.class_id, candidate_set.query, exemplar_url,
                 _now()))
            cur.execute("DELETE FROM candidates WHERE class_id = ?",
                        (candidate_set.class_id,))
            cur.executemany(
                "INSERT INTO candidates (class_id, idx, sentence, source)"
                " VALUES (?, ?, ?, ?)",
                [(candidate_set.class_id, i, c.text, c.source)
                 for i, c in enumerate(candidate_set.candidates)])
            self._conn.commit()

    def submit_annotation(self, class_id: str, selected: list[int],
                          text: str | None = None, annotator: str = "",
                          duration_s: float | None = None,
                          expected_version: int | None = None) -> dict:
        """Record the final description for a class.

        The composed definition is the free text when given, otherwise the
        selected candidate sentences joined in order. Last writer wins; a
        stale expected_version is accepted but flagged as a conflict.
        """
        with self._lock:
            cur = self._conn.cursor()
            row = cur.execute("SELECT version FROM classes WHERE class_id = ?",
                              (class_id,)).fetchone()
            if row is None:
                raise KeyError(class_id)
            current_version = row["version"]
            conflict = (expected_version is not None
                        and expected_version != current_version)
            if text is not None and text.strip():
                definition = " ".join(text.split())
            else:
                sentences = cur.execute(
                    "SELECT idx, sentence FROM candidates WHERE class_id = ?"
                    " ORDER BY idx", (class_id,)).fetchall()
                by_idx = {r["idx"]: r["sentence"] for r in sentences}
                missing = [i for i in selected if i not in by_idx]
                if missing:
                    raise InvalidArgumentError(
                        f"candidate indices {missing} do not exist for {class_id}")
                definition = " ".join(by_idx[i] for i in selected)
            if not definition.strip():
                raise MalformedInputError(
                    f"{class_id}: composed description is empty")
            new_version = current_version + 1
            cur.execute(
                "UPDATE classes SET status=?, version=?, definition=?,"
                " annotator=?, duration_s=?, updated_at=? WHERE class_id=?",
                (STATUS_DONE, new_version, definition, annotator, duration_s,
                 _now(), class_id))
            self._conn.commit()
        return {"class_id": class_id, "version": new_version,
                "conflict": conflict, "definition": definition}

    # -- reads ---------------------------------------------------------------

    def list_classes(self, status: str | None = None) -> list[dict]:
        query = ("SELECT class_id, name, status, version FROM classes"
                 + (" WHERE status = ?" if status else "")
                 + " ORDER BY class_id")
        cur = self._conn.execute(query, (status,) if status else ())
        return [dict(r) for r in cur.fetchall()]

    def get_class(self, class_id: str) -> dict:
        row = self._conn.execute(
            "SELECT * FROM classes WHERE class_id = ?", (class_id,)).fetchone()
        if row is None:
            raise KeyError(class_id)
        candidates = self._conn.execute(
            "SELECT idx, sentence, source FROM candidates WHERE class_id = ?"
            " ORDER BY idx", (class_id,)).fetchall()
        out = dict(row)
        out["candidates"] = [dict(c) for c in candidates]
        return out

    def counts(self) -> dict[str, int]:
        cur = self._conn.execute(
            "SELECT status, COUNT(*) AS n FROM classes GROUP BY status")
        out = {STATUS_PENDING: 0, STATUS_DONE: 0}
        out.update({r["status"]: r["n"] for r in cur.fetchall()})
        return out

    def export_records(self, partial: bool = False) -> list[dict]:
        """Final description records: body is "name : definition"."""
        counts = self.counts()
        if counts[STATUS_PENDING] and not partial:
            raise IncompleteExportError(
                f"{counts[STATUS_PENDING]} classes still pending; "
                "pass partial=True to export the finished subset")
        rows = self._conn.execute(
            "SELECT class_id, name, definition FROM classes WHERE status = ?"
            " ORDER BY class_id", (STATUS_DONE,)).fetchall()
        return [{"subject_id": r["class_id"], "name": r["name"],
                 "body": f"{r['name']} : {r['definition']}",
                 "definition": r["definition"]} for r in rows]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def export_descriptions(store: AnnotationStore, path: str | Path,
                        partial: bool = False) -> int:
    """Write the final description file; returns the record count."""
    import json
    records = store.export_records(partial=partial)
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return len(records)
