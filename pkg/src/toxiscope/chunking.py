"""Semantic conversation chunking and topic regrouping.

Long conversations are cut where the embedding distance between consecutive
turns exceeds a percentile threshold; non-adjacent chunks whose centroids are
cosine-similar are regrouped so an interrupted topic rejoins its earlier
segments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyConversation
from .gateway import LmGateway
from .store import ConversationRecord


@dataclass
class ChunkParams:
    window: int = 1
    percentile: float = 95.0
    min_chunk_size: int = 2
    merge_threshold: float = 0.85

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "percentile": self.percentile,
            "min_chunk_size": self.min_chunk_size,
            "merge_threshold": self.merge_threshold,
        }


@dataclass
class Chunk:
    chunk_id: str
    start: int  # inclusive turn positions
    end: int
    centroid: list[float]


@dataclass
class TopicGroup:
    group_id: str
    member_chunk_ids: list[str]  # chronological
    group_centroid: list[float]


def turn_context_strings(conversation: ConversationRecord, window: int) -> list[str]:
    """Speaker-prefixed turn text, widened by +-window neighbouring turns."""
    lines = [
        f"{t.speaker}: {t.text}" if t.speaker else t.text for t in conversation.turns
    ]
    if window <= 0:
        return lines
    out = []
    for i in range(len(lines)):
        lo = max(0, i - window)
        hi = min(len(lines), i + window + 1)
        out.append("\n".join(lines[lo:hi]))
    return out


def embed_turns(
    conversation: ConversationRecord, gateway: LmGateway, provider_id: str, window: int
) -> np.ndarray:
    if not conversation.turns:
        raise EmptyConversation(f"conversation {conversation.key!r} has no turns")
    contexts = turn_context_strings(conversation, window)
    vectors = gateway.embed(provider_id, contexts)
    return np.asarray(vectors, dtype=np.float64)


def cosine_distances(embeddings: np.ndarray) -> list[float]:
    """d_i = 1 - cos(e_i, e_{i+1}) for consecutive turns; values in [0, 2]."""
    dots = np.sum(embeddings[:-1] * embeddings[1:], axis=1)
    return [float(1.0 - d) for d in dots]


def distance_series(
    conversation: ConversationRecord, gateway: LmGateway, provider_id: str, window: int = 1
) -> list[float]:
    if len(conversation.turns) < 2:
        raise EmptyConversation("need at least 2 turns for a distance series")
    return cosine_distances(embed_turns(conversation, gateway, provider_id, window))


def nearest_rank_percentile(values: list[float], p: float) -> float:
    """Nearest-rank percentile (no interpolation), deterministic across runs."""
    if not values:
        raise ValueError("values must be non-empty")
    if not 0 < p <= 100:
        raise ValueError(f"percentile {p} outside (0, 100]")
    ordered = sorted(values)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[rank - 1]


def detect_breakpoints(
    distances: list[float], percentile_p: float, min_chunk_size: int
) -> list[int]:
    """Boundary indices where a new chunk starts after turn i (0-based).

    A candidate boundary must strictly exceed the percentile threshold;
    candidates that would leave the chunk on either side smaller than
    min_chunk_size are dropped greedily left to right.
    """
    if not distances:
        return []
    if min_chunk_size < 1:
        raise ValueError("min_chunk_size must be >= 1")
    threshold = nearest_rank_percentile(distances, percentile_p)
    n_turns = len(distances) + 1
    kept: list[int] = []
    last_cut = -1  # boundary index of the previous kept cut
    for i, d in enumerate(distances):
        if d <= threshold:
            continue
        left_size = i - last_cut
        tail_size = n_turns - (i + 1)
        if left_size >= min_chunk_size and tail_size >= min_chunk_size:
            kept.append(i)
            last_cut = i
    return kept


def chunk_conversation(
    conversation: ConversationRecord,
    gateway: LmGateway,
    provider_id: str,
    params: ChunkParams | None = None,
) -> list[Chunk]:
    """Cut the conversation at detected breakpoints; ranges tile all turns."""
    params = params or ChunkParams()
    n = len(conversation.turns)
    if n == 0:
        raise EmptyConversation(f"conversation {conversation.key!r} has no turns")
    embeddings = embed_turns(conversation, gateway, provider_id, params.window)
    if n == 1:
        return [Chunk(chunk_id="c0", start=0, end=0, centroid=embeddings[0].tolist())]
    distances = cosine_distances(embeddings)
    cuts = detect_breakpoints(distances, params.percentile, params.min_chunk_size)
    return build_chunks(embeddings, cuts)


def build_chunks(embeddings: np.ndarray, cuts: list[int]) -> list[Chunk]:
    n = embeddings.shape[0]
    bounds = [-1] + sorted(cuts) + [n - 1]
    chunks = []
    for k in range(len(bounds) - 1):
        start, end = bounds[k] + 1, bounds[k + 1]
        centroid = embeddings[start: end + 1].mean(axis=0)
        norm = np.linalg.norm(centroid)
        if norm > 0:
            centroid = centroid / norm
        chunks.append(
            Chunk(chunk_id=f"c{k}", start=start, end=end, centroid=centroid.tolist())
        )
    return chunks


def regroup_topics(chunks: list[Chunk], merge_threshold: float) -> list[TopicGroup]:
    """Single-linkage agglomeration over chunk centroids.

    Chunks whose centroids reach cosine similarity >= merge_threshold end up
    in one group (transitively), so a topic interrupted by unrelated talk is
    rejoined. Groups are ordered by their earliest member.
    """
    if not 0 < merge_threshold <= 1:
        raise ValueError(f"merge_threshold {merge_threshold} outside (0, 1]")
    if not chunks:
        return []
    ordered = sorted(chunks, key=lambda c: c.start)
    parent = list(range(len(ordered)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    vectors = np.asarray([c.centroid for c in ordered], dtype=np.float64)
    # Small epsilon so identical centroids merge at threshold 1.0 despite
    # float rounding in the dot product.
    eps = 1e-12
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            if float(vectors[i] @ vectors[j]) >= merge_threshold - eps:
                union(i, j)

    members: dict[int, list[int]] = {}
    for i in range(len(ordered)):
        members.setdefault(find(i), []).append(i)

    groups = []
    for g, root in enumerate(sorted(members, key=lambda r: ordered[r].start)):
        ids = [ordered[i].chunk_id for i in sorted(members[root], key=lambda i: ordered[i].start)]
        centroid = vectors[members[root]].mean(axis=0)
        norm = np.linalg.norm(centroid)
        if norm > 0:
            centroid = centroid / norm
        groups.append(
            TopicGroup(group_id=f"g{g}", member_chunk_ids=ids, group_centroid=centroid.tolist())
        )
    return groups


def chunk_plan_json(chunks: list[Chunk], groups: list[TopicGroup]) -> dict:
    return {
        "chunks": [{"id": c.chunk_id, "start": c.start, "end": c.end} for c in chunks],
        "groups": [{"id": g.group_id, "chunks": g.member_chunk_ids} for g in groups],
    }
