"""Message-level classification: backends, voting ensemble, reports, LM verification.

Backends are remote scoring endpoints (or the deterministic in-repo stub);
they return one score vector per text, aligned with the schema's label order.
Score vectors that do not already form a probability distribution are treated
as logits and softmaxed.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .errors import (
    BackendUnavailable,
    KOutOfRange,
    LengthMismatch,
    MissingMember,
    SchemaMismatch,
    UnknownLabel,
    UnparseableVerdict,
)
from .gateway import ChatParams, LmGateway
from .schemas import LabelSchema

_SUM_TOL = 1e-6


@dataclass
class Prediction:
    message_id: str
    schema_id: str
    distribution: dict[str, float]
    argmax_label: str

    def to_json(self) -> dict:
        return {
            "message_id": self.message_id,
            "schema_id": self.schema_id,
            "distribution": self.distribution,
            "argmax_label": self.argmax_label,
        }


def normalize_scores(scores: Sequence[float]) -> list[float]:
    """Return a probability distribution over the scores.

    Vectors already summing to 1 with entries in [0, 1] pass through
    (renormalized exactly); anything else is interpreted as logits.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("scores must be a non-empty vector")
    total = float(arr.sum())
    if np.all(arr >= 0.0) and np.all(arr <= 1.0) and abs(total - 1.0) <= 1e-3:
        return (arr / total).tolist()
    shifted = np.exp(arr - arr.max())
    return (shifted / shifted.sum()).tolist()


def argmax_label(distribution: dict[str, float], schema: LabelSchema) -> str:
    """Label with the highest probability; ties break by schema label order."""
    best_label, best_p = None, -math.inf
    for label in schema.labels:
        p = distribution.get(label, 0.0)
        if p > best_p:
            best_label, best_p = label, p
    assert best_label is not None
    return best_label


def make_prediction(message_id: str, schema: LabelSchema, scores: Sequence[float]) -> Prediction:
    if len(scores) != len(schema.labels):
        raise SchemaMismatch(
            f"backend returned {len(scores)} scores for {len(schema.labels)} labels"
        )
    probs = normalize_scores(scores)
    distribution = dict(zip(schema.labels, probs))
    return Prediction(
        message_id=message_id,
        schema_id=schema.schema_id,
        distribution=distribution,
        argmax_label=argmax_label(distribution, schema),
    )


# --- backends -----------------------------------------------------------------


class ClassifierBackend(Protocol):
    classifier_id: str

    def supports_schema(self, schema_id: str) -> bool: ...

    def score(self, texts: Sequence[str], schema: LabelSchema) -> list[list[float]]: ...


@dataclass
class HttpClassifierBackend:
    """Remote inference endpoint: POST {texts, schema_id} -> {scores: [[..]]}."""

    classifier_id: str
    base_url: str
    schema_ids: tuple[str, ...] = ()
    timeout: float = 60.0

    def supports_schema(self, schema_id: str) -> bool:
        return not self.schema_ids or schema_id in self.schema_ids

    def score(self, texts: Sequence[str], schema: LabelSchema) -> list[list[float]]:
        try:
            resp = httpx.post(
                self.base_url.rstrip("/") + "/score",
                json={"texts": list(texts), "schema_id": schema.schema_id},
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"classifier {self.classifier_id}: {exc}")
        if resp.status_code != 200:
            raise BackendUnavailable(
                f"classifier {self.classifier_id} returned {resp.status_code}"
            )
        scores = resp.json().get("scores")
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise BackendUnavailable(f"classifier {self.classifier_id}: malformed response")
        return scores


@dataclass
class StubClassifierBackend:
    """Deterministic test stub: logits derived from a text+label hash.

    A text containing a label's first keyword gets a strong logit for it, so
    synthetic fixtures with an obvious vocabulary classify predictably.
    """

    classifier_id: str = "stub"
    salt: str = ""

    def supports_schema(self, schema_id: str) -> bool:
        return True

    def score(self, texts: Sequence[str], schema: LabelSchema) -> list[list[float]]:
        out = []
        for text in texts:
            logits = []
            lowered = text.lower()
            for label in schema.labels:
                seed = hashlib.sha256(
                    f"{self.salt}|{self.classifier_id}|{text}|{label}".encode("utf-8")
                ).digest()
                base = int.from_bytes(seed[:4], "big") / 2**32 * 2.0
                keyword = label.split()[0].lower()
                if keyword and keyword in lowered:
                    base += 4.0
                logits.append(base)
            out.append(logits)
        return out


class ClassifierRegistry:
    def __init__(self, backends: Sequence[ClassifierBackend] = ()):
        self._backends = {b.classifier_id: b for b in backends}

    def add(self, backend: ClassifierBackend) -> None:
        self._backends[backend.classifier_id] = backend

    def get(self, classifier_id: str) -> ClassifierBackend:
        if classifier_id not in self._backends:
            raise BackendUnavailable(f"unknown classifier {classifier_id!r}")
        return self._backends[classifier_id]

    def ids(self) -> list[str]:
        return sorted(self._backends)


def classify_batch(
    messages: Sequence,
    classifier_id: str,
    schema: LabelSchema,
    registry: ClassifierRegistry,
    batch_size: int = 32,
) -> list[Prediction]:
    """Classify messages in bounded-size batches, preserving order.

    Accepts MessageRecord-like objects (``.id``/``.text``) or (id, text) pairs.
    """
    backend = registry.get(classifier_id)
    if not backend.supports_schema(schema.schema_id):
        raise SchemaMismatch(
            f"classifier {classifier_id!r} does not support schema {schema.schema_id!r}"
        )
    pairs = [
        (m.id, m.text) if hasattr(m, "id") else (m[0], m[1])
        for m in messages
    ]
    predictions: list[Prediction] = []
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start: start + batch_size]
        scores = backend.score([t for _, t in batch], schema)
        if len(scores) != len(batch):
            raise BackendUnavailable(f"classifier {classifier_id!r}: batch size mismatch")
        for (mid, _), vec in zip(batch, scores):
            predictions.append(make_prediction(mid, schema, vec))
    return predictions


# --- ensemble -----------------------------------------------------------------


@dataclass
class EnsembleConfig:
    member_ids: tuple[str, ...]
    fallback_id: str

    def __post_init__(self):
        if len(self.member_ids) < 2:
            raise ValueError("ensemble needs at least 2 members")
        if self.fallback_id not in self.member_ids:
            raise ValueError("fallback_id must be one of member_ids")


def ensemble_predict(per_member: dict[str, Prediction], config: EnsembleConfig) -> Prediction:
    """Strict-majority vote over member argmax labels, else the fallback's label.

    The output distribution is the renormalized mean of member distributions;
    the voted label wins even when it is not the argmax of that mean.
    """
    if set(per_member) != set(config.member_ids):
        raise MissingMember(
            f"expected members {sorted(config.member_ids)}, got {sorted(per_member)}"
        )
    schema_ids = {p.schema_id for p in per_member.values()}
    if len(schema_ids) != 1:
        raise SchemaMismatch(f"members disagree on schema: {sorted(schema_ids)}")

    votes: dict[str, int] = {}
    for member_id in config.member_ids:
        label = per_member[member_id].argmax_label
        votes[label] = votes.get(label, 0) + 1
    majority = [label for label, n in votes.items() if n * 2 > len(config.member_ids)]
    winner = majority[0] if majority else per_member[config.fallback_id].argmax_label

    labels = list(per_member[config.member_ids[0]].distribution)
    mean = {
        label: sum(per_member[m].distribution.get(label, 0.0) for m in config.member_ids)
        / len(config.member_ids)
        for label in labels
    }
    total = sum(mean.values())
    if total > 0:
        mean = {label: p / total for label, p in mean.items()}

    any_member = per_member[config.member_ids[0]]
    return Prediction(
        message_id=any_member.message_id,
        schema_id=any_member.schema_id,
        distribution=mean,
        argmax_label=winner,
    )


def top_k(prediction: Prediction, schema: LabelSchema, k: int) -> list[tuple[str, float]]:
    """Top-k labels by probability, ties broken by schema label order."""
    if k < 1 or k > len(schema.labels):
        raise KOutOfRange(f"k={k} outside [1, {len(schema.labels)}]")
    ranked = sorted(
        schema.labels,
        key=lambda label: (-prediction.distribution.get(label, 0.0), schema.index_of(label)),
    )
    return [(label, prediction.distribution.get(label, 0.0)) for label in ranked[:k]]


# --- evaluation ------------------------------------------------------------------


@dataclass
class ClassificationReport:
    schema_id: str
    labels: tuple[str, ...]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    macro_f1: float
    accuracy: float
    confusion_matrix: list[list[int]]  # rows = gold, cols = predicted

    def to_json(self) -> dict:
        return {
            "schema_id": self.schema_id,
            "labels": list(self.labels),
            "per_label": {
                label: {
                    "precision": self.precision[label],
                    "recall": self.recall[label],
                    "f1": self.f1[label],
                    "support": self.support[label],
                }
                for label in self.labels
            },
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "confusion_matrix": self.confusion_matrix,
        }

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        writer = csv.writer(buf)
        writer.writerow(["label", "precision", "recall", "f1", "support"])
        for label in self.labels:
            writer.writerow(
                [label, self.precision[label], self.recall[label], self.f1[label], self.support[label]]
            )
        writer.writerow(["macro_f1", self.macro_f1, "", "", ""])
        writer.writerow(["accuracy", self.accuracy, "", "", ""])
        return buf.getvalue()


def classification_report(
    gold: Sequence[str], pred: Sequence[str], schema: LabelSchema
) -> ClassificationReport:
    """Per-label precision/recall/F1 plus macro-F1 and a confusion matrix.

    Undefined metrics (zero denominator) follow the 0-convention. macro_f1
    averages F1 over schema labels that occur in gold or pred.
    """
    if len(gold) != len(pred) or not gold:
        raise LengthMismatch(f"gold has {len(gold)} items, pred has {len(pred)}")
    index = {label: i for i, label in enumerate(schema.labels)}
    for label in list(gold) + list(pred):
        if label not in index:
            raise UnknownLabel(f"label {label!r} not in schema {schema.schema_id}")

    n = len(schema.labels)
    matrix = [[0] * n for _ in range(n)]
    for g, p in zip(gold, pred):
        matrix[index[g]][index[p]] += 1

    precision, recall, f1, support = {}, {}, {}, {}
    for label, i in index.items():
        tp = matrix[i][i]
        pred_count = sum(matrix[r][i] for r in range(n))
        gold_count = sum(matrix[i][c] for c in range(n))
        p = tp / pred_count if pred_count else 0.0
        r = tp / gold_count if gold_count else 0.0
        precision[label] = p
        recall[label] = r
        f1[label] = 2 * p * r / (p + r) if (p + r) else 0.0
        support[label] = gold_count

    present = [label for label in schema.labels if label in set(gold) | set(pred)]
    macro_f1 = sum(f1[label] for label in present) / len(present)
    accuracy = sum(matrix[i][i] for i in range(n)) / len(gold)
    return ClassificationReport(
        schema_id=schema.schema_id,
        labels=schema.labels,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_f1=macro_f1,
        accuracy=accuracy,
        confusion_matrix=matrix,
    )


# --- LM verification ----------------------------------------------------------------


@dataclass
class Verdict:
    message_id: str
    verdict: str  # "agree" | "disagree"
    rationale: str

    def to_json(self) -> dict:
        return {
            "message_id": self.message_id,
            "verdict": self.verdict,
            "rationale": self.rationale,
        }


def _parse_verdict(text: str) -> str | None:
    head = text.strip().upper()
    if head.startswith("AGREE"):
        return "agree"
    if head.startswith("DISAGREE"):
        return "disagree"
    return None


def llm_verify(
    messages: Sequence,
    predictions: Sequence[Prediction],
    template_body: str,
    gateway: LmGateway,
    provider_id: str,
    params: ChatParams | None = None,
) -> list[Verdict]:
    """Ask an LM whether it agrees with each prediction.

    The template instructs the model to lead with AGREE or DISAGREE; replies
    without the token get one retry with a format reminder before failing.
    """
    if len(messages) != len(predictions):
        raise LengthMismatch("one prediction per message required")
    verdicts = []
    for message, prediction in zip(messages, predictions):
        text = message.text if hasattr(message, "text") else str(message)
        prompt = template_body.replace("{message}", text).replace(
            "{label}", prediction.argmax_label
        )
        chat = [{"role": "user", "content": prompt}]
        reply = gateway.chat(provider_id, chat, params)
        verdict = _parse_verdict(reply)
        if verdict is None:
            reminder = chat + [
                {"role": "assistant", "content": reply},
                {
                    "role": "user",
                    "content": "Reply again starting with the single word AGREE or DISAGREE.",
                },
            ]
            reply = gateway.chat(provider_id, reminder, params)
            verdict = _parse_verdict(reply)
        if verdict is None:
            raise UnparseableVerdict(
                f"no AGREE/DISAGREE token for message {prediction.message_id!r}"
            )
        verdicts.append(Verdict(message_id=prediction.message_id, verdict=verdict, rationale=reply))
    return verdicts
