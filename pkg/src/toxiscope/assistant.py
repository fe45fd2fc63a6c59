"""Label-aware assistant chat: prompt templates, sessions, history export.

Templates live as text files with {placeholder} slots. Sessions are held in
memory with snapshots to the store; the transcript is append-only, while LM
calls see at most the newest `context_limit` entries.
"""
from __future__ import annotations

import json
import re
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Callable

from .errors import (
    LmUnavailable,
    MissingBinding,
    NotFound,
    StreamInterrupted,
    UnknownTemplate,
)
from .gateway import ChatParams, LmGateway

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")

# Prepended once per session when a prediction context is bound.
LABEL_PREAMBLE = (
    "Based on the analysis of a classifier, the conversation below contains "
    "the following predicted labels:\n{labels}\n"
    "Use these labels when answering questions about the content."
)


@dataclass
class PromptTemplate:
    template_id: str
    body: str
    required_bindings: tuple[str, ...]

    def __post_init__(self):
        for binding in self.required_bindings:
            if self.body.count("{" + binding + "}") != 1:
                raise ValueError(
                    f"template {self.template_id}: binding {binding!r} must appear exactly once"
                )


class TemplateLibrary:
    """Prompt templates loaded from the packaged defaults plus an optional
    deployment directory (which may override by id)."""

    def __init__(self, extra_dir: str | Path | None = None):
        self._templates: dict[str, PromptTemplate] = {}
        root = importlib_resources.files("toxiscope").joinpath("templates")
        for entry in root.iterdir():
            if entry.name.endswith(".txt"):
                self._register(entry.name[:-4], entry.read_text(encoding="utf-8"))
        if extra_dir is not None:
            for path in sorted(Path(extra_dir).glob("*.txt")):
                self._register(path.stem, path.read_text(encoding="utf-8"))

    def _register(self, template_id: str, body: str) -> None:
        bindings = tuple(sorted(set(_PLACEHOLDER.findall(body))))
        self._templates[template_id] = PromptTemplate(
            template_id=template_id, body=body, required_bindings=bindings
        )

    def get(self, template_id: str) -> PromptTemplate:
        if template_id not in self._templates:
            raise UnknownTemplate(f"unknown template {template_id!r}")
        return self._templates[template_id]

    def ids(self) -> list[str]:
        return sorted(self._templates)

    def render(self, template_id: str, bindings: dict[str, str]) -> str:
        """Substitute placeholders verbatim; no escaping, no str.format."""
        template = self.get(template_id)
        for required in template.required_bindings:
            if required not in bindings:
                raise MissingBinding(required)
        text = template.body
        for key, value in bindings.items():
            text = text.replace("{" + key + "}", str(value))
        return text


@dataclass
class TranscriptEntry:
    role: str  # system | user | assistant
    text: str
    timestamp: str

    def to_json(self) -> dict:
        return {"role": self.role, "text": self.text, "timestamp": self.timestamp}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class ChatSession:
    def __init__(self, session_id: str, context: dict | None = None):
        self.session_id = session_id
        self.context = context  # e.g. {"labels": {...}} from a classification run
        self.transcript: list[TranscriptEntry] = []
        self.preamble_sent = False
        self.lock = threading.Lock()  # one in-flight LM call per session

    def append(self, role: str, text: str) -> TranscriptEntry:
        entry = TranscriptEntry(role=role, text=text, timestamp=_now())
        self.transcript.append(entry)
        return entry

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "context": self.context,
            "preamble_sent": self.preamble_sent,
            "transcript": [e.to_json() for e in self.transcript],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ChatSession":
        session = cls(payload["session_id"], payload.get("context"))
        session.preamble_sent = payload.get("preamble_sent", False)
        for entry in payload.get("transcript", []):
            session.transcript.append(
                TranscriptEntry(
                    role=entry["role"], text=entry["text"], timestamp=entry["timestamp"]
                )
            )
        return session


def _format_labels(context: dict) -> str:
    labels = context.get("labels", context)
    if isinstance(labels, dict):
        return "\n".join(f"- {key}: {value}" for key, value in labels.items())
    if isinstance(labels, list):
        return "\n".join(f"- {item}" for item in labels)
    return str(labels)


class AssistantService:
    def __init__(
        self,
        gateway: LmGateway,
        templates: TemplateLibrary,
        snapshot: Callable[[str, dict], None] | None = None,
        context_limit: int = 200,
    ):
        self.gateway = gateway
        self.templates = templates
        self.snapshot = snapshot
        self.context_limit = context_limit
        self._sessions: dict[str, ChatSession] = {}
        self._lock = threading.Lock()

    def create_session(self, context: dict | None = None) -> ChatSession:
        session = ChatSession(f"sess-{uuid.uuid4().hex[:10]}", context)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> ChatSession:
        with self._lock:
            if session_id not in self._sessions:
                raise NotFound(f"session {session_id!r}")
            return self._sessions[session_id]

    def restore_session(self, payload: dict) -> ChatSession:
        session = ChatSession.from_json(payload)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def _lm_messages(self, session: ChatSession) -> list[dict]:
        """Chat context for the LM: newest entries, preamble always first."""
        entries = session.transcript
        if len(entries) > self.context_limit:
            head = [e for e in entries[:1] if e.role == "system"]
            entries = head + entries[-(self.context_limit - len(head)):]
        return [{"role": e.role, "content": e.text} for e in entries]

    def send_message(
        self,
        session_id: str,
        text: str | None = None,
        template_id: str | None = None,
        bindings: dict | None = None,
        provider_id: str = "default",
        params: ChatParams | None = None,
        sink: Callable[[str], None] | None = None,
    ) -> str:
        """Send free text or a rendered template; returns the full reply.

        When the session has a bound prediction context, a system preamble
        embedding the labels is prepended exactly once per session.
        """
        session = self.get_session(session_id)
        if template_id is not None:
            text = self.templates.render(template_id, bindings or {})
        if not text:
            raise ValueError("message text is empty")
        with session.lock:
            if session.context and not session.preamble_sent:
                preamble = LABEL_PREAMBLE.replace("{labels}", _format_labels(session.context))
                session.append("system", preamble)
                session.preamble_sent = True
            session.append("user", text)
            try:
                spec = self.gateway.get_provider(provider_id)
                if "stream" in spec.capabilities:
                    reply = self.gateway.stream_chat(
                        provider_id, self._lm_messages(session), params, sink
                    )
                else:
                    reply = self.gateway.chat(provider_id, self._lm_messages(session), params)
                    if sink is not None and reply:
                        sink(reply)
            except StreamInterrupted as exc:
                session.append("assistant", exc.partial_text)
                session.append("system", "error: stream interrupted; partial reply kept")
                self._snapshot(session)
                raise
            except LmUnavailable as exc:
                session.append("system", f"error: {exc}")
                self._snapshot(session)
                raise
            session.append("assistant", reply)
            self._snapshot(session)
        return reply

    def _snapshot(self, session: ChatSession) -> None:
        if self.snapshot is not None:
            self.snapshot(session.session_id, session.to_json())

    def export_history(self, session_id: str, fmt: str = "json") -> str:
        """Transcript as JSON (lossless) or plain text."""
        session = self.get_session(session_id)
        if fmt == "json":
            return json.dumps(
                [e.to_json() for e in session.transcript], ensure_ascii=False, indent=2
            )
        if fmt == "txt":
            return "\n".join(
                f"[{e.timestamp}] {e.role}: {e.text}" for e in session.transcript
            )
        raise ValueError(f"unsupported export format {fmt!r}")

    def import_history(self, session_id: str, exported_json: str) -> ChatSession:
        """Rebuild a session transcript from an exported JSON document."""
        entries = json.loads(exported_json)
        session = ChatSession(session_id)
        for entry in entries:
            session.transcript.append(
                TranscriptEntry(
                    role=entry["role"], text=entry["text"], timestamp=entry["timestamp"]
                )
            )
        with self._lock:
            self._sessions[session_id] = session
        return session
