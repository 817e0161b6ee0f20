"""Append-only JSONL session store with crash recovery.

One JSON object per line; a partial write can only corrupt the final line,
so recovery truncates a trailing malformed line and keeps everything before
it. Writes are serialized behind a lock (single-writer discipline); lookups
read the in-memory index without locking.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path

from ..errors import DuplicateSessionError, SessionNotFoundError, StoreError
from .types import SessionQuadruple

log = logging.getLogger(__name__)


class SessionStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[str, SessionQuadruple] = {}
        self._order: list[str] = []
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        raw = self.path.read_bytes()
        if not raw:
            return
        lines = raw.split(b"\n")
        # A well-formed file ends with a newline, leaving one empty tail entry.
        trailing_complete = lines[-1] == b""
        if trailing_complete:
            lines = lines[:-1]
        for i, line in enumerate(lines):
            last = i == len(lines) - 1
            try:
                record = SessionQuadruple.from_dict(json.loads(line.decode("utf-8")))
            except (ValueError, KeyError, UnicodeDecodeError) as exc:
                if last:
                    log.warning(
                        "session store %s: dropping trailing malformed line %d (%s)",
                        self.path, i + 1, exc,
                    )
                    self._truncate_to_valid(lines[:i])
                    return
                raise StoreError(
                    f"session store {self.path}: malformed line {i + 1} "
                    f"before end of file: {exc}"
                ) from exc
            if record.session_id in self._index:
                raise StoreError(
                    f"session store {self.path}: duplicate session_id "
                    f"{record.session_id!r} on line {i + 1}"
                )
            self._index[record.session_id] = record
            self._order.append(record.session_id)

    def _truncate_to_valid(self, good_lines: list[bytes]) -> None:
        data = b"".join(line + b"\n" for line in good_lines)
        self.path.write_bytes(data)
        # Re-parse the retained prefix through the normal path.
        self._index.clear()
        self._order.clear()
        if data:
            self._load()

    def put(self, q: SessionQuadruple) -> None:
        """Insert a new record; duplicates are rejected, the append is durable."""
        q.validate()
        with self._lock:
            if q.session_id in self._index:
                raise DuplicateSessionError(q.session_id)
            line = json.dumps(q.to_dict(), ensure_ascii=False) + "\n"
            try:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as exc:
                raise StoreError(f"session store {self.path}: write failed: {exc}") from exc
            self._index[q.session_id] = q
            self._order.append(q.session_id)

    def get(self, session_id: str) -> SessionQuadruple:
        try:
            return self._index[session_id]
        except KeyError:
            raise SessionNotFoundError(session_id) from None

    def __contains__(self, session_id: str) -> bool:
        return session_id in self._index

    def __len__(self) -> int:
        return len(self._index)

    def ids(self) -> list[str]:
        """Session ids in insertion order."""
        return list(self._order)

    def recent(self, limit: int) -> list[SessionQuadruple]:
        """The most recently inserted records, newest first."""
        return [self._index[sid] for sid in reversed(self._order[-limit:])] if limit > 0 else []

    def all(self) -> list[SessionQuadruple]:
        return [self._index[sid] for sid in self._order]

    def purge(self, created_before_ms: int | None = None) -> int:
        """Remove matching records and compact the file.

        created_before_ms of None removes everything. Returns the number of
        records removed. The compacted file is written to a sibling temp file
        and swapped in atomically.
        """
        with self._lock:
            if created_before_ms is None:
                keep = []
            else:
                keep = [q for q in self.all() if q.created_at >= created_before_ms]
            removed = len(self._index) - len(keep)
            if removed == 0:
                return 0
            tmp = self.path.with_suffix(self.path.suffix + ".compact")
            try:
                with open(tmp, "w", encoding="utf-8") as f:
                    for q in keep:
                        f.write(json.dumps(q.to_dict(), ensure_ascii=False) + "\n")
                    f.flush()
                    os.fsync(f.fileno())
                os.replace(tmp, self.path)
            except OSError as exc:
                raise StoreError(f"session store {self.path}: compaction failed: {exc}") from exc
            self._index = {q.session_id: q for q in keep}
            self._order = [q.session_id for q in keep]
            return removed
