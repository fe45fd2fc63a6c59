"""Scripted OpenAI-compatible mock server for tests and offline demos.

Fixtures are keyed by a hash of the salient request content (chat messages,
completion prompt, or embedding input), so the stream and non-stream variants
of the same chat share one fixture. Unscripted requests fall back to
deterministic defaults when enabled (echo chat, hash-derived embeddings and
token scores), otherwise 404.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .gateway import ProviderSpec


def _key(kind: str, payload) -> str:
    canon = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return kind + ":" + hashlib.sha256(canon.encode("utf-8")).hexdigest()


def chat_key(messages) -> str:
    return _key("chat", [{"role": m["role"], "content": m["content"]} for m in messages])


def completion_key(prompt: str) -> str:
    return _key("completion", prompt)


def embedding_key(text: str) -> str:
    return _key("embedding", text)


@dataclass
class _ChatFixture:
    reply: str
    deltas: list[str] | None = None
    fail_times: int = 0
    disconnect_after: int | None = None  # deltas served before dropping the stream
    error_status: int | None = None
    error_body: str = ""
    delay: float = 0.0  # seconds before replying, for cancellation tests


@dataclass
class _ScoreFixture:
    tokens: list[str]
    logprobs: list[float | None]
    offsets: list[int]
    fail_times: int = 0


@dataclass
class _EmbeddingFixture:
    vector: list[float]


def _default_logprob(prompt: str, index: int, token: str) -> float:
    h = hashlib.sha256(f"{prompt}:{index}:{token}".encode("utf-8")).digest()
    frac = int.from_bytes(h[:4], "big") / 2**32
    return -0.05 - 1.5 * frac


def _default_vector(text: str, dim: int) -> list[float]:
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "big")
    rng = np.random.RandomState(seed)
    vec = rng.uniform(-1.0, 1.0, size=dim)
    if not np.any(vec):
        vec[0] = 1.0
    return vec.tolist()


def _tokenize(prompt: str) -> tuple[list[str], list[int]]:
    """Whitespace-ish split with offsets; whitespace runs become tokens too."""
    tokens, offsets = [], []
    for m in re.finditer(r"\S+\s*|\s+", prompt):
        tokens.append(m.group(0))
        offsets.append(m.start())
    return tokens, offsets


class MockLmServer:
    """In-process HTTP server replaying scripted LM fixtures.

    Also counts requests per path so tests can assert call budgets
    (e.g. leave-one-out analyses make exactly N+1 scoring calls).
    """

    def __init__(
        self,
        echo_chat: bool = False,
        default_embeddings: bool = False,
        default_scores: bool = False,
        embedding_dim: int = 8,
        echo_delay: float = 0.0,
    ):
        self.echo_chat = echo_chat
        self.default_embeddings = default_embeddings
        self.default_scores = default_scores
        self.embedding_dim = embedding_dim
        self.echo_delay = echo_delay
        self._fixtures: dict[str, object] = {}
        self._lock = threading.Lock()
        self._calls: Counter = Counter()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self.base_url = ""

    # --- scripting -----------------------------------------------------------

    def script_chat(
        self,
        messages,
        reply: str = "",
        deltas: list[str] | None = None,
        fail_times: int = 0,
        disconnect_after: int | None = None,
        error_status: int | None = None,
        error_body: str = "",
        delay: float = 0.0,
    ) -> None:
        if deltas is not None and not reply:
            reply = "".join(deltas)
        self._fixtures[chat_key(messages)] = _ChatFixture(
            reply=reply,
            deltas=deltas,
            fail_times=fail_times,
            disconnect_after=disconnect_after,
            error_status=error_status,
            error_body=error_body,
            delay=delay,
        )

    def script_scores(
        self,
        context: str,
        output: str,
        logprobs: list[float],
        fail_times: int = 0,
    ) -> None:
        """Fix the token logprobs returned for output conditioned on context.

        The output is split into len(logprobs) pieces so the gateway's offset
        filter recovers exactly these values.
        """
        if not output:
            raise ValueError("output must be non-empty")
        n = len(logprobs)
        if n < 1 or n > len(output):
            raise ValueError(f"cannot split {len(output)} chars into {n} tokens")
        tokens: list[str] = [context] if context else []
        offsets: list[int] = [0] if context else []
        lp: list[float | None] = [-1.0] if context else []
        size, extra = divmod(len(output), n)
        cursor = 0
        for i in range(n):
            width = size + (1 if i < extra else 0)
            tokens.append(output[cursor: cursor + width])
            offsets.append(len(context) + cursor)
            lp.append(float(logprobs[i]))
            cursor += width
        self._fixtures[completion_key(context + output)] = _ScoreFixture(
            tokens=tokens, logprobs=lp, offsets=offsets, fail_times=fail_times
        )

    def script_embedding(self, text: str, vector: list[float]) -> None:
        self._fixtures[embedding_key(text)] = _EmbeddingFixture(vector=list(vector))

    # --- lifecycle ------------------------------------------------------------

    def start(self, port: int = 0) -> "MockLmServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # quiet
                pass

            def _body(self) -> dict:
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length) if length else b"{}"
                return json.loads(raw or b"{}")

            def _json(self, status: int, payload: dict) -> None:
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                if self.path == "/__mock__/stats":
                    self._json(200, outer.stats())
                else:
                    self._json(404, {"error": "not found"})

            def do_POST(self):
                try:
                    body = self._body()
                except json.JSONDecodeError:
                    self._json(400, {"error": "bad json"})
                    return
                with outer._lock:
                    outer._calls[self.path] += 1
                    outer._calls["__total__"] += 1
                if self.path.endswith("/chat/completions"):
                    outer._handle_chat(self, body)
                elif self.path.endswith("/completions"):
                    outer._handle_completion(self, body)
                elif self.path.endswith("/embeddings"):
                    outer._handle_embeddings(self, body)
                elif self.path == "/__mock__/reset":
                    outer.reset_stats()
                    self._json(200, {"ok": True})
                else:
                    self._json(404, {"error": "not found"})

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        self.base_url = f"http://127.0.0.1:{self._server.server_address[1]}/v1"
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def provider(
        self,
        provider_id: str = "mock",
        capabilities: tuple[str, ...] = ("chat", "stream", "logprobs", "embeddings"),
        max_parallel: int = 8,
    ) -> ProviderSpec:
        if not self.base_url:
            raise RuntimeError("server not started")
        return ProviderSpec(
            provider_id=provider_id,
            base_url=self.base_url,
            model_name="mock-model",
            capabilities=capabilities,
            max_parallel=max_parallel,
        )

    # --- stats ------------------------------------------------------------------

    def stats(self) -> dict:
        with self._lock:
            by_path = {k: v for k, v in self._calls.items() if k != "__total__"}
            return {"total": self._calls["__total__"], "by_path": by_path}

    def calls(self, suffix: str) -> int:
        with self._lock:
            return sum(v for k, v in self._calls.items() if k.endswith(suffix))

    def reset_stats(self) -> None:
        with self._lock:
            self._calls.clear()

    # --- handlers ------------------------------------------------------------------

    def _handle_chat(self, handler, body: dict) -> None:
        messages = body.get("messages", [])
        fixture = self._fixtures.get(chat_key(messages))
        if fixture is None:
            if not self.echo_chat:
                handler._json(404, {"error": "no chat fixture"})
                return
            user_texts = [m["content"] for m in messages if m.get("role") == "user"]
            fixture = _ChatFixture(
                reply=user_texts[-1] if user_texts else "", delay=self.echo_delay
            )
        assert isinstance(fixture, _ChatFixture)
        if fixture.delay > 0:
            time.sleep(fixture.delay)
        if fixture.error_status is not None:
            handler._json(fixture.error_status, {"error": {"message": fixture.error_body}})
            return
        if fixture.fail_times > 0:
            fixture.fail_times -= 1
            handler._json(503, {"error": "scripted failure"})
            return
        if body.get("stream"):
            self._stream_chat(handler, fixture)
            return
        handler._json(
            200,
            {
                "choices": [
                    {
                        "message": {"role": "assistant", "content": fixture.reply},
                        "finish_reason": "stop",
                    }
                ]
            },
        )

    def _stream_chat(self, handler, fixture: _ChatFixture) -> None:
        deltas = fixture.deltas if fixture.deltas is not None else [fixture.reply]
        handler.send_response(200)
        handler.send_header("Content-Type", "text/event-stream")
        handler.send_header("Cache-Control", "no-cache")
        handler.end_headers()
        served = 0
        for delta in deltas:
            if fixture.disconnect_after is not None and served >= fixture.disconnect_after:
                # Abrupt drop: no [DONE]; the client sees EOF mid-stream.
                handler.wfile.flush()
                return
            chunk = {"choices": [{"delta": {"content": delta}}]}
            handler.wfile.write(f"data: {json.dumps(chunk)}\n\n".encode("utf-8"))
            handler.wfile.flush()
            served += 1
        if fixture.disconnect_after is not None and served >= fixture.disconnect_after:
            handler.wfile.flush()
            return
        handler.wfile.write(b"data: [DONE]\n\n")
        handler.wfile.flush()

    def _handle_completion(self, handler, body: dict) -> None:
        prompt = body.get("prompt", "")
        fixture = self._fixtures.get(completion_key(prompt))
        if fixture is None:
            if not self.default_scores:
                handler._json(404, {"error": "no completion fixture"})
                return
            tokens, offsets = _tokenize(prompt)
            logprobs = [
                _default_logprob(prompt, i, tok) for i, tok in enumerate(tokens)
            ]
            fixture = _ScoreFixture(tokens=tokens, logprobs=list(logprobs), offsets=offsets)
        assert isinstance(fixture, _ScoreFixture)
        if fixture.fail_times > 0:
            fixture.fail_times -= 1
            handler._json(503, {"error": "scripted failure"})
            return
        handler._json(
            200,
            {
                "choices": [
                    {
                        "text": prompt,
                        "logprobs": {
                            "tokens": fixture.tokens,
                            "token_logprobs": fixture.logprobs,
                            "text_offset": fixture.offsets,
                        },
                    }
                ]
            },
        )

    def _handle_embeddings(self, handler, body: dict) -> None:
        inputs = body.get("input", [])
        if isinstance(inputs, str):
            inputs = [inputs]
        data = []
        for i, text in enumerate(inputs):
            fixture = self._fixtures.get(embedding_key(text))
            if fixture is not None:
                assert isinstance(fixture, _EmbeddingFixture)
                vec = fixture.vector
            elif self.default_embeddings:
                vec = _default_vector(text, self.embedding_dim)
            else:
                handler._json(404, {"error": f"no embedding fixture for input {i}"})
                return
            data.append({"embedding": vec, "index": i})
        handler._json(200, {"data": data})
