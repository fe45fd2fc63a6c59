"""Dataset ingestion and persistence.

Uploads are parsed from CSV (RFC-4180) or JSONL, their layout inferred from
column names, and the canonical records persisted in a single SQLite file per
deployment. Analysis results are stored alongside with content-hash keys so
re-running an identical job is idempotent.
"""
from __future__ import annotations

import csv
import io
import json
import sqlite3
import threading
import uuid
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources as importlib_resources
from pathlib import Path

import yaml

from .errors import BuiltinProtected, NoTextColumn, NotFound, ParseError, WrongLayout

MESSAGE_LEVEL = "message-level"
CONVERSATION_LEVEL = "conversation-level"

# Canonical JSONL field names, also used for export.
CANONICAL_FIELDS = ("id", "text", "conversation_id", "speaker", "turn_index", "label")


@dataclass
class MessageRecord:
    id: str
    text: str
    conversation_key: str | None = None
    speaker: str | None = None
    turn_index: int | None = None
    gold_label: str | None = None

    def to_canonical(self) -> dict:
        """Render with the canonical JSONL field names, omitting empty fields."""
        out: dict = {"id": self.id, "text": self.text}
        if self.conversation_key is not None:
            out["conversation_id"] = self.conversation_key
        if self.speaker is not None:
            out["speaker"] = self.speaker
        if self.turn_index is not None:
            out["turn_index"] = self.turn_index
        if self.gold_label is not None:
            out["label"] = self.gold_label
        return out


@dataclass
class ConversationRecord:
    key: str
    turns: list[MessageRecord]
    participants: set[str]


@dataclass
class DatasetDescriptor:
    dataset_id: str
    name: str
    layout: str
    column_map: dict[str, str]
    record_count: int
    origin: str  # "user-upload" | "builtin-benchmark"

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "name": self.name,
            "layout": self.layout,
            "column_map": self.column_map,
            "record_count": self.record_count,
            "origin": self.origin,
        }


@dataclass
class IngestReport:
    record_count: int
    dropped_empty: int

    def to_json(self) -> dict:
        return {"record_count": self.record_count, "dropped_empty": self.dropped_empty}


@dataclass
class LayoutInfo:
    layout: str
    column_map: dict[str, str]  # source column -> canonical field


def _load_synonyms() -> dict[str, list[str]]:
    path = importlib_resources.files("toxiscope").joinpath("resources/column_synonyms.yaml")
    return yaml.safe_load(path.read_text(encoding="utf-8"))


_SYNONYMS = _load_synonyms()


def infer_layout(header: list[str]) -> LayoutInfo:
    """Infer message- vs conversation-level layout from column names.

    Conversation-level requires both a conversation-key column and a speaker
    column; otherwise the dataset is message-level as long as a text column
    exists. Matching is case-insensitive; the first synonym hit per canonical
    field wins (in header order).
    """
    if not header:
        raise NoTextColumn("empty header")
    lowered = {name.lower(): name for name in header}

    column_map: dict[str, str] = {}
    for canonical, synonyms in _SYNONYMS.items():
        for syn in synonyms:
            if syn in lowered:
                column_map[lowered[syn]] = canonical
                break

    mapped = set(column_map.values())
    if "text" not in mapped:
        raise NoTextColumn(f"no recognizable text column in {header!r}")
    layout = (
        CONVERSATION_LEVEL
        if "conversation_key" in mapped and "speaker" in mapped
        else MESSAGE_LEVEL
    )
    return LayoutInfo(layout=layout, column_map=column_map)


def _rows_from_csv(raw: bytes) -> tuple[list[str], list[dict]]:
    text = raw.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty file")
    except csv.Error as exc:
        raise ParseError(1, str(exc))
    rows = []
    row_no = 1
    try:
        for row in reader:
            row_no += 1
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(row_no, f"expected {len(header)} fields, got {len(row)}")
            rows.append(dict(zip(header, row)))
    except csv.Error as exc:
        raise ParseError(row_no + 1, str(exc))
    return header, rows


def _rows_from_jsonl(raw: bytes) -> tuple[list[str], list[dict]]:
    rows = []
    header: list[str] = []
    seen = set()
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}")
        if not isinstance(obj, dict):
            raise ParseError(lineno, "expected an object per line")
        for key in obj:
            if key not in seen:
                seen.add(key)
                header.append(key)
        rows.append(obj)
    if not rows:
        raise ParseError(1, "empty file")
    return header, rows


def _coerce_turn_index(value, row_no: int) -> int | None:
    if value is None or value == "":
        return None
    try:
        idx = int(value)
    except (TypeError, ValueError):
        raise ParseError(row_no, f"turn_index {value!r} is not an integer")
    if idx < 0:
        raise ParseError(row_no, f"turn_index {idx} is negative")
    return idx


def records_from_rows(
    header: list[str], rows: list[dict], info: LayoutInfo
) -> tuple[list[MessageRecord], int]:
    """Map raw rows to canonical records, dropping empty-text rows.

    Returns (records, dropped_count). Conversation rows missing a turn_index
    get one assigned from file order within their conversation.
    """
    reverse = {canon: src for src, canon in info.column_map.items()}
    records: list[MessageRecord] = []
    dropped = 0
    auto_turn: dict[str, int] = defaultdict(int)
    for row_no, row in enumerate(rows, start=2):
        raw_text = row.get(reverse["text"])
        text = str(raw_text).strip() if raw_text is not None else ""
        if not text:
            dropped += 1
            continue

        def cell(canon: str):
            src = reverse.get(canon)
            if src is None:
                return None
            value = row.get(src)
            if value is None or value == "":
                return None
            return value

        conv_key = cell("conversation_key")
        conv_key = str(conv_key) if conv_key is not None else None
        turn_index = _coerce_turn_index(cell("turn_index"), row_no)
        if info.layout == CONVERSATION_LEVEL and conv_key is not None and turn_index is None:
            turn_index = auto_turn[conv_key]
            auto_turn[conv_key] += 1

        rec_id = cell("id")
        rec_id = str(rec_id) if rec_id is not None else f"r{len(records) + dropped}"
        speaker = cell("speaker")
        label = cell("gold_label")
        records.append(
            MessageRecord(
                id=rec_id,
                text=text,
                conversation_key=conv_key,
                speaker=str(speaker) if speaker is not None else None,
                turn_index=turn_index,
                gold_label=str(label) if label is not None else None,
            )
        )
    seen_ids = set()
    for rec in records:
        if rec.id in seen_ids:
            raise ParseError(0, f"duplicate record id {rec.id!r}")
        seen_ids.add(rec.id)
    return records, dropped


_SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS datasets (
    dataset_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    layout TEXT NOT NULL,
    column_map TEXT NOT NULL,
    record_count INTEGER NOT NULL,
    origin TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS records (
    dataset_id TEXT NOT NULL,
    pos INTEGER NOT NULL,
    id TEXT NOT NULL,
    text TEXT NOT NULL,
    conversation_key TEXT,
    speaker TEXT,
    turn_index INTEGER,
    gold_label TEXT,
    PRIMARY KEY (dataset_id, pos)
);
CREATE INDEX IF NOT EXISTS idx_records_conv ON records (dataset_id, conversation_key);
CREATE TABLE IF NOT EXISTS results (
    dataset_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    payload TEXT NOT NULL,
    created_at TEXT NOT NULL,
    PRIMARY KEY (dataset_id, kind, content_hash)
);
CREATE TABLE IF NOT EXISTS personas (
    dataset_id TEXT NOT NULL,
    speaker TEXT NOT NULL,
    payload TEXT NOT NULL,
    created_at TEXT NOT NULL,
    PRIMARY KEY (dataset_id, speaker)
);
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    payload TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class DataStore:
    """SQLite-backed store for datasets, analysis results and snapshots.

    Reads may run concurrently; writes to one dataset are serialized by a
    per-dataset lock (SQLite serializes cross-dataset writes at the file
    level, which is stricter than required but harmless).
    """

    def __init__(self, db_path: str | Path):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()
        with self._connect() as conn:
            conn.executescript(_SCHEMA_SQL)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path, timeout=30.0)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA journal_mode = WAL")
        conn.execute("PRAGMA busy_timeout = 30000")
        return conn

    def _lock_for(self, dataset_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[dataset_id]

    # --- ingestion -----------------------------------------------------

    def ingest_dataset(
        self,
        name: str,
        raw_bytes: bytes,
        fmt: str,
        origin: str = "user-upload",
        dataset_id: str | None = None,
    ) -> tuple[DatasetDescriptor, IngestReport]:
        if fmt == "csv":
            header, rows = _rows_from_csv(raw_bytes)
        elif fmt == "jsonl":
            header, rows = _rows_from_jsonl(raw_bytes)
        else:
            raise ParseError(0, f"unsupported format {fmt!r}")
        info = infer_layout(header)
        records, dropped = records_from_rows(header, rows, info)
        dataset_id = dataset_id or f"ds-{uuid.uuid4().hex[:10]}"
        descriptor = DatasetDescriptor(
            dataset_id=dataset_id,
            name=name,
            layout=info.layout,
            column_map=info.column_map,
            record_count=len(records),
            origin=origin,
        )
        with self._lock_for(dataset_id), self._connect() as conn:
            conn.execute(
                "INSERT INTO datasets VALUES (?, ?, ?, ?, ?, ?, ?)",
                (
                    dataset_id,
                    name,
                    info.layout,
                    json.dumps(info.column_map),
                    len(records),
                    origin,
                    _now(),
                ),
            )
            conn.executemany(
                "INSERT INTO records VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                [
                    (
                        dataset_id,
                        pos,
                        r.id,
                        r.text,
                        r.conversation_key,
                        r.speaker,
                        r.turn_index,
                        r.gold_label,
                    )
                    for pos, r in enumerate(records)
                ],
            )
        return descriptor, IngestReport(record_count=len(records), dropped_empty=dropped)

    # --- lookup ----------------------------------------------------------

    def get_dataset(self, dataset_id: str) -> DatasetDescriptor:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT * FROM datasets WHERE dataset_id = ?", (dataset_id,)
            ).fetchone()
        if row is None:
            raise NotFound(f"dataset {dataset_id!r}")
        return DatasetDescriptor(
            dataset_id=row["dataset_id"],
            name=row["name"],
            layout=row["layout"],
            column_map=json.loads(row["column_map"]),
            record_count=row["record_count"],
            origin=row["origin"],
        )

    def list_datasets(self) -> list[DatasetDescriptor]:
        with self._connect() as conn:
            rows = conn.execute("SELECT dataset_id FROM datasets ORDER BY created_at").fetchall()
        return [self.get_dataset(r["dataset_id"]) for r in rows]

    def get_records(self, dataset_id: str) -> list[MessageRecord]:
        self.get_dataset(dataset_id)
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT * FROM records WHERE dataset_id = ? ORDER BY pos", (dataset_id,)
            ).fetchall()
        return [self._record_from_row(r) for r in rows]

    @staticmethod
    def _record_from_row(row: sqlite3.Row) -> MessageRecord:
        return MessageRecord(
            id=row["id"],
            text=row["text"],
            conversation_key=row["conversation_key"],
            speaker=row["speaker"],
            turn_index=row["turn_index"],
            gold_label=row["gold_label"],
        )

    def list_conversations(self, dataset_id: str) -> list[str]:
        descriptor = self.get_dataset(dataset_id)
        if descriptor.layout != CONVERSATION_LEVEL:
            raise WrongLayout(f"dataset {dataset_id!r} is {descriptor.layout}")
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT DISTINCT conversation_key FROM records"
                " WHERE dataset_id = ? ORDER BY pos",
                (dataset_id,),
            ).fetchall()
        return [r["conversation_key"] for r in rows if r["conversation_key"] is not None]

    def get_conversation(self, dataset_id: str, conversation_key: str) -> ConversationRecord:
        descriptor = self.get_dataset(dataset_id)
        if descriptor.layout != CONVERSATION_LEVEL:
            raise WrongLayout(f"dataset {dataset_id!r} is {descriptor.layout}")
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT * FROM records WHERE dataset_id = ? AND conversation_key = ?"
                " ORDER BY pos",
                (dataset_id, conversation_key),
            ).fetchall()
        if not rows:
            raise NotFound(f"conversation {conversation_key!r} in dataset {dataset_id!r}")
        # Sort by turn_index; ties keep original file order (sort is stable).
        turns = [self._record_from_row(r) for r in rows]
        turns.sort(key=lambda r: r.turn_index if r.turn_index is not None else 0)
        participants = {t.speaker for t in turns if t.speaker is not None}
        return ConversationRecord(key=conversation_key, turns=turns, participants=participants)

    # --- deletion --------------------------------------------------------

    def delete_dataset(self, dataset_id: str) -> None:
        descriptor = self.get_dataset(dataset_id)
        if descriptor.origin == "builtin-benchmark":
            raise BuiltinProtected(f"dataset {dataset_id!r} is a builtin benchmark")
        with self._lock_for(dataset_id), self._connect() as conn:
            conn.execute("DELETE FROM records WHERE dataset_id = ?", (dataset_id,))
            conn.execute("DELETE FROM results WHERE dataset_id = ?", (dataset_id,))
            conn.execute("DELETE FROM personas WHERE dataset_id = ?", (dataset_id,))
            conn.execute("DELETE FROM datasets WHERE dataset_id = ?", (dataset_id,))

    # --- export ----------------------------------------------------------

    def export_dataset(self, dataset_id: str, fmt: str = "jsonl") -> bytes:
        records = self.get_records(dataset_id)
        if fmt == "jsonl":
            lines = [json.dumps(r.to_canonical(), ensure_ascii=False) for r in records]
            return ("\n".join(lines) + "\n").encode("utf-8")
        if fmt == "csv":
            buf = io.StringIO(newline="")
            writer = csv.DictWriter(buf, fieldnames=list(CANONICAL_FIELDS))
            writer.writeheader()
            for r in records:
                writer.writerow({k: v for k, v in r.to_canonical().items()})
            return buf.getvalue().encode("utf-8")
        raise ParseError(0, f"unsupported export format {fmt!r}")

    # --- analysis results -------------------------------------------------

    def put_result(self, dataset_id: str, kind: str, content_hash: str, payload: dict) -> None:
        with self._lock_for(dataset_id), self._connect() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO results VALUES (?, ?, ?, ?, ?)",
                (dataset_id, kind, content_hash, json.dumps(payload), _now()),
            )

    def get_result(self, dataset_id: str, kind: str, content_hash: str) -> dict | None:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT payload FROM results WHERE dataset_id = ? AND kind = ?"
                " AND content_hash = ?",
                (dataset_id, kind, content_hash),
            ).fetchone()
        return json.loads(row["payload"]) if row else None

    def list_results(self, dataset_id: str, kind: str | None = None) -> list[dict]:
        query = "SELECT kind, content_hash, created_at FROM results WHERE dataset_id = ?"
        params: tuple = (dataset_id,)
        if kind is not None:
            query += " AND kind = ?"
            params = (dataset_id, kind)
        with self._connect() as conn:
            rows = conn.execute(query + " ORDER BY created_at", params).fetchall()
        return [dict(r) for r in rows]

    def latest_result(self, dataset_id: str, kind: str) -> dict | None:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT payload FROM results WHERE dataset_id = ? AND kind = ?"
                " ORDER BY created_at DESC LIMIT 1",
                (dataset_id, kind),
            ).fetchone()
        return json.loads(row["payload"]) if row else None

    # --- personas ----------------------------------------------------------

    def put_persona(self, dataset_id: str, speaker: str, payload: dict) -> None:
        with self._lock_for(dataset_id), self._connect() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO personas VALUES (?, ?, ?, ?)",
                (dataset_id, speaker, json.dumps(payload), _now()),
            )

    def get_persona(self, dataset_id: str, speaker: str) -> dict | None:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT payload FROM personas WHERE dataset_id = ? AND speaker = ?",
                (dataset_id, speaker),
            ).fetchone()
        return json.loads(row["payload"]) if row else None

    # --- assistant session snapshots ---------------------------------------

    def snapshot_session(self, session_id: str, payload: dict) -> None:
        with self._connect() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO sessions VALUES (?, ?, ?)",
                (session_id, json.dumps(payload), _now()),
            )

    def load_sessions(self) -> dict[str, dict]:
        with self._connect() as conn:
            rows = conn.execute("SELECT session_id, payload FROM sessions").fetchall()
        return {r["session_id"]: json.loads(r["payload"]) for r in rows}

    # --- builtin benchmarks -------------------------------------------------

    def register_builtin(self, name: str, path: str | Path) -> DatasetDescriptor:
        """Register a benchmark file under a stable id; idempotent per name."""
        dataset_id = f"builtin-{name.lower()}"
        try:
            return self.get_dataset(dataset_id)
        except NotFound:
            pass
        path = Path(path)
        fmt = "jsonl" if path.suffix in (".jsonl", ".json") else "csv"
        descriptor, _ = self.ingest_dataset(
            name=name,
            raw_bytes=path.read_bytes(),
            fmt=fmt,
            origin="builtin-benchmark",
            dataset_id=dataset_id,
        )
        return descriptor
