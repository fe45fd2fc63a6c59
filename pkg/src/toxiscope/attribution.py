"""Leave-one-out perplexity attribution.

Given a conversation X and a fixed model output Y, each input unit s_i is
removed in turn and Y is re-scored; the increase in perplexity

    gain_i = PPL(Y | X without s_i) - PPL(Y | X)

measures how much unit i supported the output. Perplexity is the
exponentiated mean token negative log-likelihood in nats. Scores are
normalized to [0, 1] intensities for heatmap display.
"""
from __future__ import annotations

import hashlib
import math
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import EmptyConversation, EmptyScores
from .gateway import LmGateway, TokenScore
from .store import ConversationRecord

MESSAGE = "message"
SENTENCE = "sentence"

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])(\s+)")


@dataclass
class AttributionUnit:
    index: int  # 1-based position within the analysis
    unit_text: str
    granularity: str
    origin: tuple[int, int | None]  # (turn position, sentence offset within turn)
    separator: str  # original separator following this unit ("" for the last)


@dataclass
class RelevanceScore:
    unit_index: int
    gain: float
    ppl_full: float
    ppl_ablated: float

    def to_json(self) -> dict:
        return {
            "index": self.unit_index,
            "gain": self.gain,
            "ppl_full": self.ppl_full,
            "ppl_ablated": self.ppl_ablated,
        }


def turn_line(turn) -> str:
    """Render one turn the way it is shown to the model."""
    if turn.speaker:
        return f"{turn.speaker}: {turn.text}"
    return turn.text


def segment_units(conversation: ConversationRecord, granularity: str = MESSAGE) -> list[AttributionUnit]:
    """Split a conversation into attribution units.

    Message granularity yields one unit per turn. Sentence granularity splits
    turns on terminal punctuation followed by whitespace; the speaker prefix
    stays attached to the turn's first sentence. Concatenating
    unit_text + separator over all units reconstructs the model input exactly.
    """
    if not conversation.turns:
        raise EmptyConversation(f"conversation {conversation.key!r} has no turns")
    units: list[AttributionUnit] = []
    n_turns = len(conversation.turns)
    for t, turn in enumerate(conversation.turns):
        line = turn_line(turn)
        turn_sep = "\n" if t < n_turns - 1 else ""
        if granularity == MESSAGE:
            units.append(
                AttributionUnit(
                    index=len(units) + 1,
                    unit_text=line,
                    granularity=MESSAGE,
                    origin=(t, None),
                    separator=turn_sep,
                )
            )
            continue
        if granularity != SENTENCE:
            raise ValueError(f"unknown granularity {granularity!r}")
        # Split the turn text only, so punctuation inside a speaker name
        # (e.g. "Dr. Smith") never produces a break; the prefix then rides
        # along with the turn's first sentence.
        prefix = line[: len(line) - len(turn.text)]
        pieces = _SENTENCE_BREAK.split(turn.text)
        # pieces alternate [sentence, ws, sentence, ws, ..., sentence]
        sentences = pieces[0::2]
        gaps = pieces[1::2]
        for s, sentence in enumerate(sentences):
            sep = gaps[s] if s < len(gaps) else turn_sep
            units.append(
                AttributionUnit(
                    index=len(units) + 1,
                    unit_text=(prefix + sentence) if s == 0 else sentence,
                    granularity=SENTENCE,
                    origin=(t, s),
                    separator=sep,
                )
            )
    return units


def assemble_context(units: list[AttributionUnit], drop_index: int | None = None) -> str:
    """Join units into the model input, optionally dropping one unit.

    Dropping a unit removes its trailing separator too, keeping the prompt
    well-formed.
    """
    return "".join(
        u.unit_text + u.separator for u in units if drop_index is None or u.index != drop_index
    )


def perplexity(token_scores: list[TokenScore]) -> float:
    """exp(-(1/T) * sum of token logprobs)."""
    if not token_scores:
        raise EmptyScores("need at least one token score")
    total = sum(s.logprob for s in token_scores)
    return math.exp(-total / len(token_scores))


class ScoreCache:
    """Memoizes token scores per (provider, context, output)."""

    def __init__(self):
        self._entries: dict[tuple[str, str, str], list[TokenScore]] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _key(provider_id: str, context: str, output: str) -> tuple[str, str, str]:
        return (
            provider_id,
            hashlib.sha256(context.encode("utf-8")).hexdigest(),
            hashlib.sha256(output.encode("utf-8")).hexdigest(),
        )

    def get(self, provider_id: str, context: str, output: str) -> list[TokenScore] | None:
        with self._lock:
            return self._entries.get(self._key(provider_id, context, output))

    def put(self, provider_id: str, context: str, output: str, scores: list[TokenScore]) -> None:
        with self._lock:
            self._entries[self._key(provider_id, context, output)] = scores


def perplexity_gain(
    conversation: ConversationRecord,
    output_text: str,
    gateway: LmGateway,
    provider_id: str,
    granularity: str = MESSAGE,
    cache: ScoreCache | None = None,
) -> tuple[list[AttributionUnit], list[RelevanceScore]]:
    """Score every unit's contribution to output_text: N ablations + 1 full pass.

    Ablated scorings run concurrently, bounded by the provider's max_parallel;
    results come back ordered by unit index, all sharing the same ppl_full.
    """
    if not output_text:
        raise ValueError("output_text must be non-empty")
    units = segment_units(conversation, granularity)

    def scores_for(context: str) -> list[TokenScore]:
        if cache is not None:
            hit = cache.get(provider_id, context, output_text)
            if hit is not None:
                return hit
        scores = gateway.score_output(provider_id, context, output_text)
        if cache is not None:
            cache.put(provider_id, context, output_text, scores)
        return scores

    full_context = assemble_context(units)
    ppl_full = perplexity(scores_for(full_context))

    max_workers = max(1, min(gateway.get_provider(provider_id).max_parallel, len(units)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        ablated_ppls = list(
            pool.map(
                lambda u: perplexity(scores_for(assemble_context(units, drop_index=u.index))),
                units,
            )
        )

    scores = [
        RelevanceScore(
            unit_index=u.index,
            gain=ppl_ablated - ppl_full,
            ppl_full=ppl_full,
            ppl_ablated=ppl_ablated,
        )
        for u, ppl_ablated in zip(units, ablated_ppls)
    ]
    return units, scores


def heatmap_normalize(scores: list[RelevanceScore]) -> list[float]:
    """Map gains to [0, 1] intensities: negatives clamp to 0, max positive is 1."""
    if not scores:
        raise EmptyScores("need at least one relevance score")
    clamped = [max(s.gain, 0.0) for s in scores]
    peak = max(clamped)
    if peak == 0.0:
        return [0.0] * len(clamped)
    return [value / peak for value in clamped]


def analysis_to_json(units: list[AttributionUnit], scores: list[RelevanceScore]) -> dict:
    """Serialized analysis consumed by the web UI heatmap."""
    intensities = heatmap_normalize(scores)
    return {
        "units": [
            {
                "index": u.index,
                "text": u.unit_text,
                "granularity": u.granularity,
                "turn": u.origin[0],
                "sentence": u.origin[1],
            }
            for u in units
        ],
        "ppl_full": scores[0].ppl_full if scores else None,
        "scores": [
            {"index": s.unit_index, "gain": s.gain, "intensity": intensity}
            for s, intensity in zip(scores, intensities)
        ],
    }
