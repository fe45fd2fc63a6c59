"""Big-Five persona profiling from concatenated toxic-aware summaries.

One LM call per speaker predicts five integer trait scores (1-10) plus
per-trait explanations; the reply format is strict, with one retry on a
malformed response. Profiles carry a research-use disclaimer.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .errors import EmptySummary, ParseFailure
from .gateway import ChatParams, LmGateway

TRAITS = ("openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism")

TRAIT_HEADINGS = {
    "openness": "Openness to Experience",
    "conscientiousness": "Conscientiousness",
    "extraversion": "Extraversion",
    "agreeableness": "Agreeableness",
    "neuroticism": "Neuroticism",
}

OVERALL_HEADING = "Overall Persona Analysis"

DISCLAIMER = (
    "Persona profiles are exploratory research output generated by automated "
    "models; they are not clinically validated and must not substitute for "
    "professional evaluation."
)

_BRACKET = re.compile(r"\[([^\[\]]*)\]")

RETRY_REMINDER = (
    "Your previous reply did not follow the required format. Respond again, "
    "starting with exactly five integers from 1 to 10 in square brackets, "
    "followed by the five bold trait sections and the overall analysis."
)


@dataclass
class PersonaProfile:
    speaker: str
    scores: dict[str, int]
    explanations: dict[str, str]
    overall: str
    source_summary_hash: str
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "speaker": self.speaker,
            "scores": self.scores,
            "explanations": self.explanations,
            "overall": self.overall,
            "source_summary_hash": self.source_summary_hash,
            "warnings": self.warnings,
            "disclaimer": DISCLAIMER,
        }


def render_persona_prompt(speaker: str, summary: str, template: str) -> str:
    """Substitute [speaker] and [summary] verbatim; everything else untouched."""
    if not summary.strip():
        raise EmptySummary(f"no summary text for speaker {speaker!r}")
    return template.replace("[speaker]", speaker).replace("[summary]", summary)


def _first_five_int_list(text: str) -> list[int] | None:
    for match in _BRACKET.finditer(text):
        parts = [p.strip() for p in match.group(1).split(",")]
        if len(parts) != 5:
            continue
        try:
            return [int(p) for p in parts]
        except ValueError:
            continue
    return None


def _extract_sections(text: str) -> dict[str, str] | None:
    headings = [TRAIT_HEADINGS[t] for t in TRAITS] + [OVERALL_HEADING]
    positions = []
    for heading in headings:
        m = re.search(r"\*\*" + re.escape(heading) + r"\*\*\s*:", text)
        if m is None:
            return None
        positions.append((m.start(), m.end(), heading))
    positions.sort()
    sections = {}
    for i, (_, body_start, heading) in enumerate(positions):
        body_end = positions[i + 1][0] if i + 1 < len(positions) else len(text)
        sections[heading] = text[body_start:body_end].strip().strip('"').strip()
    return sections


def parse_persona_response(text: str) -> tuple[dict[str, int], dict[str, str], str, list[str]]:
    """Parse scores, per-trait explanations and the overall analysis.

    Scores outside [1, 10] are clamped with a warning rather than rejected.
    Raises ParseFailure when the five-integer list or any section is missing.
    """
    raw_scores = _first_five_int_list(text)
    if raw_scores is None:
        raise ParseFailure("no bracketed list of exactly 5 integers")
    sections = _extract_sections(text)
    if sections is None:
        raise ParseFailure("missing trait or overall sections")
    warnings = []
    scores = {}
    for trait, value in zip(TRAITS, raw_scores):
        clamped = min(10, max(1, value))
        if clamped != value:
            warnings.append(f"score for {trait} clamped from {value} to {clamped}")
        scores[trait] = clamped
    explanations = {trait: sections[TRAIT_HEADINGS[trait]] for trait in TRAITS}
    return scores, explanations, sections[OVERALL_HEADING], warnings


def concatenate_summaries(summaries: list[str]) -> str:
    """Chronological concatenation, blank-line separated; deterministic."""
    return "\n\n".join(summaries)


def analyze_persona(
    speaker: str,
    summaries: list[str],
    gateway: LmGateway,
    provider_id: str,
    template: str,
    params: ChatParams | None = None,
) -> PersonaProfile:
    """Predict the speaker's profile; one retry with a format reminder."""
    combined = concatenate_summaries(summaries)
    prompt = render_persona_prompt(speaker, combined, template)
    messages = [{"role": "user", "content": prompt}]
    reply = gateway.chat(provider_id, messages, params)
    try:
        scores, explanations, overall, warnings = parse_persona_response(reply)
    except ParseFailure:
        retry = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": RETRY_REMINDER},
        ]
        reply = gateway.chat(provider_id, retry, params)
        scores, explanations, overall, warnings = parse_persona_response(reply)
    return PersonaProfile(
        speaker=speaker,
        scores=scores,
        explanations=explanations,
        overall=overall,
        source_summary_hash=hashlib.sha256(combined.encode("utf-8")).hexdigest(),
        warnings=warnings,
    )
