"""Uniform client for OpenAI-compatible language-model providers.

Supports chat completion, incremental SSE streaming, token-logprob scoring of
a fixed output (completions echo mode), and unit-normalized text embeddings.
All perplexity math downstream assumes natural-log probabilities, which is
what OpenAI-compatible servers report.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import httpx
import numpy as np

from .errors import (
    CapabilityMissing,
    ContextTooLong,
    LmUnavailable,
    LogprobsUnsupported,
    StreamInterrupted,
)

logger = logging.getLogger(__name__)

CAPABILITIES = ("chat", "stream", "logprobs", "embeddings")


@dataclass
class ProviderSpec:
    provider_id: str
    base_url: str
    model_name: str
    auth_env_var: str = ""
    capabilities: tuple[str, ...] = ("chat",)
    max_parallel: int = 4

    def __post_init__(self):
        if not self.capabilities:
            raise ValueError(f"provider {self.provider_id}: capabilities empty")
        unknown = set(self.capabilities) - set(CAPABILITIES)
        if unknown:
            raise ValueError(f"provider {self.provider_id}: unknown capabilities {unknown}")
        if self.max_parallel < 1:
            raise ValueError(f"provider {self.provider_id}: max_parallel must be >= 1")

    def to_json(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "base_url": self.base_url,
            "model_name": self.model_name,
            "auth_env_var": self.auth_env_var,
            "capabilities": list(self.capabilities),
            "max_parallel": self.max_parallel,
        }


@dataclass
class TokenScore:
    token_text: str
    logprob: float


@dataclass
class ChatParams:
    temperature: float = 0.2
    max_tokens: int = 1024
    seed: int | None = None


def build_chat_body(
    model: str, messages: Sequence[dict], params: ChatParams, stream: bool = False
) -> dict:
    body = {
        "model": model,
        "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    }
    if params.seed is not None:
        body["seed"] = params.seed
    if stream:
        body["stream"] = True
    return body


def build_score_body(model: str, input_text: str, output_text: str) -> dict:
    # Echo mode returns logprobs for the prompt itself; max_tokens=0 means
    # nothing new is generated, we only score input+output.
    return {
        "model": model,
        "prompt": input_text + output_text,
        "max_tokens": 0,
        "echo": True,
        "logprobs": 0,
    }


def build_embed_body(model: str, texts: Sequence[str]) -> dict:
    return {"model": model, "input": list(texts)}


def content_hash(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


class LmGateway:
    """Routes requests to registered providers with bounded retries.

    Retries (default 2, exponential backoff) apply to network errors and 5xx
    responses only; total attempts never exceed retries + 1.
    """

    def __init__(
        self,
        providers: Sequence[ProviderSpec] = (),
        retries: int = 2,
        backoff_base: float = 0.5,
        timeout: float = 60.0,
    ):
        self.providers: dict[str, ProviderSpec] = {p.provider_id: p for p in providers}
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._semaphores: dict[str, threading.Semaphore] = {
            p.provider_id: threading.Semaphore(p.max_parallel) for p in providers
        }

    def add_provider(self, spec: ProviderSpec) -> None:
        self.providers[spec.provider_id] = spec
        self._semaphores[spec.provider_id] = threading.Semaphore(spec.max_parallel)

    def get_provider(self, provider_id: str) -> ProviderSpec:
        if provider_id not in self.providers:
            raise LmUnavailable(f"unknown provider {provider_id!r}")
        return self.providers[provider_id]

    def _require(self, provider_id: str, capability: str) -> ProviderSpec:
        spec = self.get_provider(provider_id)
        if capability not in spec.capabilities:
            if capability == "logprobs":
                raise LogprobsUnsupported(provider_id)
            raise CapabilityMissing(provider_id, capability)
        return spec

    def _headers(self, spec: ProviderSpec) -> dict:
        headers = {"Content-Type": "application/json"}
        if spec.auth_env_var:
            key = os.environ.get(spec.auth_env_var, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, spec: ProviderSpec, path: str, body: dict) -> dict:
        url = spec.base_url.rstrip("/") + path
        attempts = self.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._semaphores[spec.provider_id]:
                    resp = httpx.post(
                        url, json=body, headers=self._headers(spec), timeout=self.timeout
                    )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = LmUnavailable(f"{url} returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                detail = resp.text[:500]
                if "context" in detail.lower() and "length" in detail.lower():
                    raise ContextTooLong(detail)
                raise LmUnavailable(f"{url} returned {resp.status_code}: {detail}")
            logger.debug(
                "lm request %s hash=%s -> %d bytes",
                path,
                content_hash(body)[:12],
                len(resp.content),
            )
            return resp.json()
        raise LmUnavailable(f"{url} failed after {attempts} attempts: {last_error}")

    # --- chat ---------------------------------------------------------------

    def chat(
        self,
        provider_id: str,
        messages: Sequence[dict],
        params: ChatParams | None = None,
    ) -> str:
        spec = self._require(provider_id, "chat")
        params = params or ChatParams()
        body = build_chat_body(spec.model_name, messages, params)
        data = self._post(spec, "/chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise LmUnavailable(f"malformed chat response: {exc}")

    def stream_chat(
        self,
        provider_id: str,
        messages: Sequence[dict],
        params: ChatParams | None = None,
        sink: Callable[[str], None] | None = None,
    ) -> str:
        """Stream a chat reply; sink receives each delta, return value is the
        concatenation of all deltas."""
        spec = self._require(provider_id, "stream")
        params = params or ChatParams()
        body = build_chat_body(spec.model_name, messages, params, stream=True)
        url = spec.base_url.rstrip("/") + "/chat/completions"
        parts: list[str] = []
        done = False
        try:
            with self._semaphores[spec.provider_id]:
                with httpx.stream(
                    "POST", url, json=body, headers=self._headers(spec), timeout=self.timeout
                ) as resp:
                    if resp.status_code >= 400:
                        resp.read()
                        raise LmUnavailable(f"{url} returned {resp.status_code}")
                    for line in resp.iter_lines():
                        if not line.startswith("data:"):
                            continue
                        payload = line[len("data:"):].strip()
                        if payload == "[DONE]":
                            done = True
                            break
                        try:
                            chunk = json.loads(payload)
                            delta = chunk["choices"][0]["delta"].get("content", "")
                        except (json.JSONDecodeError, KeyError, IndexError):
                            continue
                        if delta:
                            parts.append(delta)
                            if sink is not None:
                                sink(delta)
        except httpx.HTTPError as exc:
            if parts:
                raise StreamInterrupted("".join(parts)) from exc
            raise LmUnavailable(f"{url} stream failed: {exc}")
        if not done:
            raise StreamInterrupted("".join(parts))
        return "".join(parts)

    # --- scoring -------------------------------------------------------------

    def score_output(self, provider_id: str, input_text: str, output_text: str) -> list[TokenScore]:
        """Token logprobs for output_text conditioned on input_text.

        Uses completions echo mode: the provider scores the full prompt, and
        tokens whose text offset falls inside the output span are returned.
        """
        spec = self._require(provider_id, "logprobs")
        if not output_text:
            raise ValueError("output_text must be non-empty")
        body = build_score_body(spec.model_name, input_text, output_text)
        data = self._post(spec, "/completions", body)
        try:
            lp = data["choices"][0]["logprobs"]
            tokens = lp["tokens"]
            logprobs = lp["token_logprobs"]
            offsets = lp["text_offset"]
        except (KeyError, IndexError, TypeError) as exc:
            raise LmUnavailable(f"provider returned no logprobs: {exc}")
        boundary = len(input_text)
        scores = [
            TokenScore(token_text=tok, logprob=float(val))
            for tok, val, off in zip(tokens, logprobs, offsets)
            if off >= boundary and val is not None
        ]
        if not scores:
            raise LmUnavailable("no scored tokens covered the output span")
        return scores

    # --- embeddings ------------------------------------------------------------

    def embed(self, provider_id: str, texts: Sequence[str]) -> list[list[float]]:
        """One unit-normalized vector per input text."""
        spec = self._require(provider_id, "embeddings")
        if not texts:
            raise ValueError("texts must be non-empty")
        body = build_embed_body(spec.model_name, texts)
        data = self._post(spec, "/embeddings", body)
        try:
            raw = [item["embedding"] for item in data["data"]]
        except (KeyError, TypeError) as exc:
            raise LmUnavailable(f"malformed embeddings response: {exc}")
        if len(raw) != len(texts):
            raise LmUnavailable(f"expected {len(texts)} embeddings, got {len(raw)}")
        out = []
        for vec in raw:
            arr = np.asarray(vec, dtype=np.float64)
            norm = float(np.linalg.norm(arr))
            if norm == 0.0 or arr.ndim != 1:
                raise LmUnavailable("provider returned a zero or malformed embedding")
            out.append((arr / norm).tolist())
        dims = {len(v) for v in out}
        if len(dims) != 1:
            raise LmUnavailable(f"inconsistent embedding dimensions {dims}")
        return out
