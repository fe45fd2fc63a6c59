"""Toxic-aware per-speaker summaries over semantic chunks.

Each chunk is summarized once per participating speaker, with the
summarization instruction conditioned on the message-level toxicity labels so
flagged content stays visible in the condensed text. Chunk results are
grouped by topic for navigation.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .chunking import Chunk, ChunkParams, chunk_conversation, regroup_topics
from .errors import LmUnavailable, MissingPlaceholder
from .gateway import ChatParams, LmGateway
from .jobs import JobContext
from .store import ConversationRecord, MessageRecord


@dataclass
class ToxicAwareSummary:
    conversation_key: str
    group_id: str
    chunk_id: str
    per_speaker: dict[str, str]
    flagged_refs: list[str]  # message ids carrying a toxic label inside the chunk
    failed_speakers: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "conversation_key": self.conversation_key,
            "group_id": self.group_id,
            "chunk_id": self.chunk_id,
            "per_speaker": self.per_speaker,
            "flagged_refs": self.flagged_refs,
            "failed_speakers": self.failed_speakers,
        }


def _is_toxic(label: str | None, negative_label: str | None) -> bool:
    return label is not None and label != negative_label


def build_summary_prompt(
    turns: list[MessageRecord],
    labels: Mapping[str, str],
    template: str,
    negative_label: str | None = None,
    speaker: str | None = None,
) -> str:
    """Fill the summarization template; byte-deterministic given inputs.

    {conversation} holds the speaker-prefixed turns; {toxic_messages} holds an
    enumerated list of turns whose label is not the schema's negative label,
    or the literal "none".
    """
    for placeholder in ("{conversation}", "{toxic_messages}"):
        if placeholder not in template:
            raise MissingPlaceholder(placeholder)
    lines = [f"{t.speaker}: {t.text}" if t.speaker else t.text for t in turns]
    flagged = []
    for t in turns:
        label = labels.get(t.id)
        if _is_toxic(label, negative_label):
            who = f"{t.speaker}: " if t.speaker else ""
            flagged.append(f"{len(flagged) + 1}. [{label}] {who}{t.text}")
    prompt = template.replace("{conversation}", "\n".join(lines))
    prompt = prompt.replace("{toxic_messages}", "\n".join(flagged) if flagged else "none")
    if speaker is not None:
        prompt = prompt.replace("{speaker}", speaker)
    return prompt


def chunk_turns(conversation: ConversationRecord, chunk: Chunk) -> list[MessageRecord]:
    return conversation.turns[chunk.start: chunk.end + 1]


def summarize_chunk(
    conversation: ConversationRecord,
    chunk: Chunk,
    labels: Mapping[str, str],
    gateway: LmGateway,
    provider_id: str,
    template: str,
    negative_label: str | None = None,
    group_id: str = "",
    params: ChatParams | None = None,
    cancelled: Callable[[], bool] | None = None,
) -> ToxicAwareSummary:
    """One LM call per speaker present in the chunk; provider failures on one
    speaker do not lose the others' summaries."""
    turns = chunk_turns(conversation, chunk)
    speakers: list[str] = []
    for t in turns:
        if t.speaker and t.speaker not in speakers:
            speakers.append(t.speaker)
    if not speakers:
        speakers = ["participant"]
    flagged = [
        t.id for t in turns if _is_toxic(labels.get(t.id), negative_label)
    ]
    per_speaker: dict[str, str] = {}
    failed: list[str] = []
    for speaker in speakers:
        if cancelled is not None and cancelled():
            failed.extend(s for s in speakers if s not in per_speaker and s not in failed)
            break
        prompt = build_summary_prompt(turns, labels, template, negative_label, speaker)
        try:
            per_speaker[speaker] = gateway.chat(
                provider_id, [{"role": "user", "content": prompt}], params
            )
        except LmUnavailable:
            failed.append(speaker)
    return ToxicAwareSummary(
        conversation_key=conversation.key,
        group_id=group_id,
        chunk_id=chunk.chunk_id,
        per_speaker=per_speaker,
        flagged_refs=flagged,
        failed_speakers=failed,
    )


def run_summarization(
    conversation: ConversationRecord,
    labels: Mapping[str, str],
    gateway: LmGateway,
    provider_id: str,
    template: str,
    chunk_params: ChunkParams | None = None,
    negative_label: str | None = None,
    chat_params: ChatParams | None = None,
    parallelism: int = 2,
    ctx: JobContext | None = None,
) -> dict:
    """Full pipeline: chunk -> regroup topics -> summarize each chunk.

    Progress advances one step per finished chunk. The result is keyed
    group -> chunk -> speaker. Fails outright only if every chunk failed.
    """
    chunk_params = chunk_params or ChunkParams()
    chunks = chunk_conversation(conversation, gateway, provider_id, chunk_params)
    groups = regroup_topics(chunks, chunk_params.merge_threshold)
    group_of = {cid: g.group_id for g in groups for cid in g.member_chunk_ids}
    if ctx is not None:
        ctx.set_total(len(chunks))
        ctx.raise_if_cancelled()

    lock = threading.Lock()
    summaries: dict[str, ToxicAwareSummary] = {}

    def work(chunk: Chunk) -> None:
        if ctx is not None and ctx.cancelled():
            return
        summary = summarize_chunk(
            conversation,
            chunk,
            labels,
            gateway,
            provider_id,
            template,
            negative_label,
            group_id=group_of[chunk.chunk_id],
            params=chat_params,
            cancelled=(ctx.cancelled if ctx is not None else None),
        )
        with lock:
            summaries[chunk.chunk_id] = summary
        if ctx is not None:
            ctx.advance()

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        list(pool.map(work, chunks))

    if ctx is not None:
        ctx.raise_if_cancelled()

    done = [s for s in summaries.values() if s.per_speaker]
    if chunks and not done:
        raise LmUnavailable("every chunk failed to summarize")

    chunk_index = {c.chunk_id: c for c in chunks}
    return {
        "conversation_key": conversation.key,
        "groups": [
            {
                "group_id": g.group_id,
                "chunks": [
                    {
                        "chunk_id": cid,
                        "start": chunk_index[cid].start,
                        "end": chunk_index[cid].end,
                        "per_speaker": summaries[cid].per_speaker if cid in summaries else {},
                        "flagged_refs": summaries[cid].flagged_refs if cid in summaries else [],
                        "failed_speakers": summaries[cid].failed_speakers
                        if cid in summaries
                        else [],
                    }
                    for cid in g.member_chunk_ids
                ],
            }
            for g in groups
        ],
    }
