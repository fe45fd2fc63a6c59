from importlib import resources as importlib_resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toxiscope.errors import EmptySummary, ParseFailure
from toxiscope.persona import (
    RETRY_REMINDER,
    TRAIT_HEADINGS,
    TRAITS,
    analyze_persona,
    parse_persona_response,
    render_persona_prompt,
)

TEMPLATE = (
    importlib_resources.files("toxiscope")
    .joinpath("templates/persona_big_five.txt")
    .read_text(encoding="utf-8")
)

_HEADINGS = [TRAIT_HEADINGS[t] for t in TRAITS]


def synth_response(scores, texts=None, overall="Shows a balanced pattern."):
    texts = texts or [f"Explanation for {h}." for h in _HEADINGS]
    parts = ["[" + ", ".join(str(s) for s in scores) + "]", ""]
    for heading, text in zip(_HEADINGS, texts):
        parts.append(f"**{heading}**: {text}\n")
    parts.append(f"**Overall Persona Analysis**: {overall}")
    return "\n".join(parts)


# --- rendering -----------------------------------------------------------------


def test_render_substitutes_speaker_and_summary():
    prompt = render_persona_prompt("alice", "S", TEMPLATE)
    assert "for alice" in prompt
    assert "Chat Messages Summary:\nS" in prompt
    assert "[speaker]" not in prompt
    assert "[summary]" not in prompt


def test_render_empty_summary():
    with pytest.raises(EmptySummary):
        render_persona_prompt("alice", "   ", TEMPLATE)


def test_render_speaker_with_bracket_is_literal():
    prompt = render_persona_prompt("w]ird", "S", TEMPLATE)
    assert "for w]ird" in prompt


# --- parsing ---------------------------------------------------------------------


def test_parse_well_formed():
    response = synth_response([7, 5, 6, 3, 8])
    scores, explanations, overall, warnings = parse_persona_response(response)
    assert scores == {
        "openness": 7,
        "conscientiousness": 5,
        "extraversion": 6,
        "agreeableness": 3,
        "neuroticism": 8,
    }
    assert set(explanations) == set(TRAITS)
    assert overall == "Shows a balanced pattern."
    assert warnings == []


def test_parse_wrong_arity():
    with pytest.raises(ParseFailure):
        parse_persona_response("[7,5,6]\n" + synth_response([1, 1, 1, 1, 1]).split("\n", 1)[1])


def test_parse_three_ints_only():
    with pytest.raises(ParseFailure):
        parse_persona_response("[7,5,6]")


def test_parse_clamps_out_of_range():
    response = synth_response([12, 5, 6, 3, 0])
    scores, _, _, warnings = parse_persona_response(response)
    assert [scores[t] for t in TRAITS] == [10, 5, 6, 3, 1]
    assert len(warnings) == 2


def test_parse_missing_section():
    response = synth_response([5, 5, 5, 5, 5]).replace("**Agreeableness**", "Agreeableness")
    with pytest.raises(ParseFailure):
        parse_persona_response(response)


def test_parse_skips_non_5int_brackets():
    response = "[not, numbers] intro [1, 2]\n" + synth_response([2, 4, 6, 8, 10])
    scores, _, _, _ = parse_persona_response(response)
    assert [scores[t] for t in TRAITS] == [2, 4, 6, 8, 10]


_EXPLANATION_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="*["),
    min_size=1,
    max_size=80,
).filter(lambda s: s.strip())


@given(
    scores=st.lists(st.integers(min_value=1, max_value=10), min_size=5, max_size=5),
    texts=st.lists(_EXPLANATION_TEXT, min_size=5, max_size=5),
    overall=_EXPLANATION_TEXT,
)
@settings(max_examples=300)
def test_parse_fuzzed_well_formed(scores, texts, overall):
    parsed_scores, explanations, parsed_overall, warnings = parse_persona_response(
        synth_response(scores, texts, overall)
    )
    assert [parsed_scores[t] for t in TRAITS] == scores
    assert warnings == []
    assert all(1 <= parsed_scores[t] <= 10 for t in TRAITS)


@given(
    scores=st.lists(st.integers(min_value=-50, max_value=50), min_size=5, max_size=5)
)
@settings(max_examples=200)
def test_parsed_scores_always_in_range(scores):
    parsed_scores, _, _, _ = parse_persona_response(synth_response(scores))
    assert all(1 <= parsed_scores[t] <= 10 for t in TRAITS)


# --- analysis flow -----------------------------------------------------------------


def _first_messages(speaker, summaries):
    combined = "\n\n".join(summaries)
    prompt = render_persona_prompt(speaker, combined, TEMPLATE)
    return [{"role": "user", "content": prompt}]


def test_analyze_first_try(mock_lm, gw):
    messages = _first_messages("alice", ["alice said things."])
    mock_lm.script_chat(messages, reply=synth_response([7, 5, 6, 3, 8]))
    profile = analyze_persona("alice", ["alice said things."], gw, "mock", TEMPLATE)
    assert [profile.scores[t] for t in TRAITS] == [7, 5, 6, 3, 8]
    assert mock_lm.calls("/chat/completions") == 1
    assert profile.source_summary_hash
    assert "research" in profile.to_json()["disclaimer"]


def test_analyze_retry_recovers(mock_lm, gw):
    messages = _first_messages("bob", ["bob spoke."])
    mock_lm.script_chat(messages, reply="junk with no scores")
    retry = messages + [
        {"role": "assistant", "content": "junk with no scores"},
        {"role": "user", "content": RETRY_REMINDER},
    ]
    mock_lm.script_chat(retry, reply=synth_response([1, 2, 3, 4, 5]))
    profile = analyze_persona("bob", ["bob spoke."], gw, "mock", TEMPLATE)
    assert [profile.scores[t] for t in TRAITS] == [1, 2, 3, 4, 5]
    assert mock_lm.calls("/chat/completions") == 2


def test_analyze_fails_after_two_junk_replies(mock_lm, gw):
    messages = _first_messages("cara", ["cara wrote."])
    mock_lm.script_chat(messages, reply="junk one")
    retry = messages + [
        {"role": "assistant", "content": "junk one"},
        {"role": "user", "content": RETRY_REMINDER},
    ]
    mock_lm.script_chat(retry, reply="junk two")
    with pytest.raises(ParseFailure):
        analyze_persona("cara", ["cara wrote."], gw, "mock", TEMPLATE)
    assert mock_lm.calls("/chat/completions") == 2


def test_concatenation_order_deterministic(mock_lm, gw):
    summaries = ["first block", "second block"]
    messages = _first_messages("dee", summaries)
    mock_lm.script_chat(messages, reply=synth_response([5, 5, 5, 5, 5]))
    p1 = analyze_persona("dee", summaries, gw, "mock", TEMPLATE)
    p2 = analyze_persona("dee", list(summaries), gw, "mock", TEMPLATE)
    assert p1.source_summary_hash == p2.source_summary_hash
