import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toxiscope.classify import (
    ClassifierRegistry,
    EnsembleConfig,
    Prediction,
    StubClassifierBackend,
    classification_report,
    classify_batch,
    ensemble_predict,
    llm_verify,
    normalize_scores,
    top_k,
)
from toxiscope.errors import (
    BackendUnavailable,
    KOutOfRange,
    LengthMismatch,
    MissingMember,
    UnknownLabel,
    UnparseableVerdict,
)
from toxiscope.schemas import (
    SEXISM_4CLASS,
    SEXISM_11CLASS,
    SEXISM_BINARY,
    LabelSchema,
    compose_parent_maps,
    coarsen_distribution,
)
from toxiscope.store import MessageRecord

AB = LabelSchema(schema_id="ab", labels=("A", "B"))
ABC = LabelSchema(schema_id="abc", labels=("A", "B", "C"))
ABCD = LabelSchema(schema_id="abcd", labels=("A", "B", "C", "D"))


class FixedLogitsBackend:
    classifier_id = "fixed"

    def __init__(self, logits):
        self.logits = logits

    def supports_schema(self, schema_id):
        return True

    def score(self, texts, schema):
        return [list(self.logits) for _ in texts]


def _msg(i, text="hello"):
    return MessageRecord(id=f"m{i}", text=text)


# --- classify_batch ----------------------------------------------------------


def test_softmax_of_logits():
    registry = ClassifierRegistry([FixedLogitsBackend([2.0, 1.0])])
    preds = classify_batch([_msg(i) for i in range(3)], "fixed", AB, registry)
    assert len(preds) == 3
    expected = math.exp(2) / (math.exp(2) + math.exp(1))
    for p in preds:
        assert p.distribution["A"] == pytest.approx(expected, abs=1e-6)
        assert p.distribution["B"] == pytest.approx(1 - expected, abs=1e-6)
        assert p.argmax_label == "A"


def test_empty_message_list():
    registry = ClassifierRegistry([StubClassifierBackend()])
    assert classify_batch([], "stub", AB, registry) == []


def test_unknown_classifier():
    registry = ClassifierRegistry()
    with pytest.raises(BackendUnavailable):
        classify_batch([_msg(0)], "nope", AB, registry)


def test_probabilities_pass_through():
    assert normalize_scores([0.5, 0.3, 0.2]) == pytest.approx([0.5, 0.3, 0.2])


def test_batching_preserves_order():
    registry = ClassifierRegistry([StubClassifierBackend()])
    messages = [_msg(i, f"text {i}") for i in range(23)]
    small = classify_batch(messages, "stub", AB, registry, batch_size=4)
    big = classify_batch(messages, "stub", AB, registry, batch_size=100)
    assert [p.message_id for p in small] == [f"m{i}" for i in range(23)]
    assert [p.distribution for p in small] == [p.distribution for p in big]


# --- ensemble -----------------------------------------------------------------


def _pred(label, schema=ABCD, mid="m0", mass=0.7):
    rest = (1 - mass) / (len(schema.labels) - 1)
    dist = {l: (mass if l == label else rest) for l in schema.labels}
    return Prediction(message_id=mid, schema_id=schema.schema_id,
                      distribution=dist, argmax_label=label)


CONFIG3 = EnsembleConfig(member_ids=("x", "y", "z"), fallback_id="z")


def test_strict_majority_wins():
    out = ensemble_predict({"x": _pred("A"), "y": _pred("A"), "z": _pred("B")}, CONFIG3)
    assert out.argmax_label == "A"


def test_fallback_on_no_majority():
    out = ensemble_predict({"x": _pred("A"), "y": _pred("B"), "z": _pred("C")}, CONFIG3)
    assert out.argmax_label == "C"


def test_missing_member():
    with pytest.raises(MissingMember):
        ensemble_predict({"x": _pred("A"), "y": _pred("B")}, CONFIG3)


def oracle_vote(votes: dict, config: EnsembleConfig) -> str:
    """Independent re-statement of the rule: count argmax votes; any label
    with more than half the votes wins, otherwise the fallback's vote."""
    counts = {}
    for member in config.member_ids:
        counts[votes[member]] = counts.get(votes[member], 0) + 1
    for label, count in counts.items():
        if count > len(config.member_ids) / 2:
            return label
    return votes[config.fallback_id]


def test_exhaustive_64_vote_combinations():
    labels = ABCD.labels
    for combo in itertools.product(labels, repeat=3):
        votes = dict(zip(CONFIG3.member_ids, combo))
        out = ensemble_predict({m: _pred(votes[m]) for m in CONFIG3.member_ids}, CONFIG3)
        assert out.argmax_label == oracle_vote(votes, CONFIG3)


def test_mean_distribution_renormalized():
    out = ensemble_predict({"x": _pred("A"), "y": _pred("A"), "z": _pred("B")}, CONFIG3)
    assert sum(out.distribution.values()) == pytest.approx(1.0, abs=1e-9)


@given(
    votes=st.lists(st.sampled_from(ABCD.labels), min_size=3, max_size=3),
)
def test_majority_invariant_under_member_permutation(votes):
    base = dict(zip(CONFIG3.member_ids, votes))
    result = ensemble_predict({m: _pred(v) for m, v in base.items()}, CONFIG3)
    swapped = {"x": base["y"], "y": base["x"], "z": base["z"]}
    counts = {v: votes.count(v) for v in votes}
    if max(counts.values()) * 2 > 3:  # strict majority exists
        other = ensemble_predict({m: _pred(v) for m, v in swapped.items()}, CONFIG3)
        assert other.argmax_label == result.argmax_label


def test_unanimity_exhaustive():
    for label in ABCD.labels:
        out = ensemble_predict({m: _pred(label) for m in CONFIG3.member_ids}, CONFIG3)
        assert out.argmax_label == label


# --- top_k -------------------------------------------------------------------------


def test_top_k_basic():
    pred = Prediction("m", "abc", {"A": 0.5, "B": 0.3, "C": 0.2}, "A")
    assert top_k(pred, ABC, 2) == [("A", 0.5), ("B", 0.3)]


def test_top_k_tie_breaks_by_schema_order():
    pred = Prediction("m", "ab", {"A": 0.5, "B": 0.5}, "A")
    assert top_k(pred, AB, 1) == [("A", 0.5)]


def test_top_k_out_of_range():
    pred = Prediction("m", "abc", {"A": 1.0, "B": 0.0, "C": 0.0}, "A")
    with pytest.raises(KOutOfRange):
        top_k(pred, ABC, 5)


# --- classification_report ----------------------------------------------------------


def test_report_worked_example():
    report = classification_report(["A", "A", "B", "B"], ["A", "B", "B", "B"], AB)
    assert report.f1["A"] == pytest.approx(2 / 3, abs=1e-4)
    assert report.f1["B"] == pytest.approx(0.8, abs=1e-9)
    assert report.macro_f1 == pytest.approx(0.7333, abs=1e-4)
    assert report.accuracy == pytest.approx(0.75)


def test_report_perfect():
    report = classification_report(["A", "B", "A"], ["A", "B", "A"], AB)
    assert report.macro_f1 == 1.0
    assert report.accuracy == 1.0


def test_report_total_miss():
    report = classification_report(["A", "A"], ["B", "B"], AB)
    assert report.macro_f1 == 0.0


def test_report_errors():
    with pytest.raises(LengthMismatch):
        classification_report(["A"], ["A", "B"], AB)
    with pytest.raises(UnknownLabel):
        classification_report(["A"], ["Z"], AB)


def test_confusion_matrix_row_sums_match_gold_counts():
    gold = ["A", "A", "B", "C", "C", "C"]
    pred = ["B", "A", "B", "A", "C", "C"]
    report = classification_report(gold, pred, ABC)
    for i, label in enumerate(ABC.labels):
        assert sum(report.confusion_matrix[i]) == gold.count(label)


def brute_force_report(gold, pred, labels):
    """Oracle: recompute metrics from first principles per label."""
    per_f1 = {}
    for label in labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_f1[label] = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    present = [l for l in labels if l in set(gold) | set(pred)]
    macro = sum(per_f1[l] for l in present) / len(present)
    accuracy = sum(1 for g, p in zip(gold, pred) if g == p) / len(gold)
    return per_f1, macro, accuracy


@pytest.mark.parametrize("size", [2, 4, 11])
def test_report_matches_brute_force_oracle(size):
    schema = {2: SEXISM_BINARY, 4: SEXISM_4CLASS, 11: SEXISM_11CLASS}[size]
    rng = random.Random(size)
    for _ in range(200):
        n = rng.randint(1, 40)
        gold = [rng.choice(schema.labels) for _ in range(n)]
        pred = [rng.choice(schema.labels) for _ in range(n)]
        report = classification_report(gold, pred, schema)
        per_f1, macro, accuracy = brute_force_report(gold, pred, schema.labels)
        for label in schema.labels:
            assert abs(report.f1[label] - per_f1[label]) < 1e-9
        assert abs(report.macro_f1 - macro) < 1e-9
        assert abs(report.accuracy - accuracy) < 1e-9


@given(
    pairs=st.lists(
        st.tuples(st.sampled_from("ABC"), st.sampled_from("ABC")), min_size=1, max_size=30
    ),
    mapping=st.permutations(["A", "B", "C"]),
)
@settings(max_examples=100)
def test_macro_f1_invariant_under_label_renaming(pairs, mapping):
    gold = [g for g, _ in pairs]
    pred = [p for _, p in pairs]
    rename = dict(zip("ABC", mapping))
    renamed_schema = LabelSchema(schema_id="abc2", labels=tuple(mapping))
    base = classification_report(gold, pred, ABC).macro_f1
    renamed = classification_report(
        [rename[g] for g in gold], [rename[p] for p in pred], renamed_schema
    ).macro_f1
    assert base == pytest.approx(renamed, abs=1e-12)


# --- schema hierarchy -----------------------------------------------------------------


def test_coarsen_twice_equals_composed():
    rng = random.Random(7)
    composed = compose_parent_maps(SEXISM_11CLASS.parent_map, SEXISM_4CLASS.parent_map)
    for _ in range(50):
        raw = [rng.random() for _ in SEXISM_11CLASS.labels]
        total = sum(raw)
        dist = {l: v / total for l, v in zip(SEXISM_11CLASS.labels, raw)}
        step = coarsen_distribution(
            coarsen_distribution(dist, SEXISM_11CLASS, SEXISM_4CLASS),
            SEXISM_4CLASS,
            SEXISM_BINARY,
        )
        direct = coarsen_distribution(dist, SEXISM_11CLASS, SEXISM_BINARY, composed)
        for label in SEXISM_BINARY.labels:
            assert step[label] == pytest.approx(direct[label], abs=1e-12)


def test_hierarchy_maps_are_total_and_surjective():
    SEXISM_11CLASS.validate_hierarchy(SEXISM_4CLASS)
    SEXISM_4CLASS.validate_hierarchy(SEXISM_BINARY)


# --- llm verification ---------------------------------------------------------------


VERIFY_TEMPLATE = (
    'Label: "{label}". Message: "{message}". Reply with AGREE or DISAGREE first.'
)


def _verify_messages(text):
    return [{"role": "user", "content":
             VERIFY_TEMPLATE.replace("{message}", text).replace("{label}", "A")}]


def test_llm_verify_agree(mock_lm, gw):
    mock_lm.script_chat(_verify_messages("hello"), reply="AGREE: consistent")
    verdicts = llm_verify(
        [_msg(0)], [_pred("A", mid="m0")], VERIFY_TEMPLATE, gw, "mock"
    )
    assert verdicts[0].verdict == "agree"
    assert verdicts[0].rationale == "AGREE: consistent"


def test_llm_verify_disagree(mock_lm, gw):
    mock_lm.script_chat(_verify_messages("hello"), reply="DISAGREE: sarcasm missed")
    verdicts = llm_verify(
        [_msg(0)], [_pred("A", mid="m0")], VERIFY_TEMPLATE, gw, "mock"
    )
    assert verdicts[0].verdict == "disagree"
    assert verdicts[0].rationale == "DISAGREE: sarcasm missed"


def test_llm_verify_unparseable_after_retry(mock_lm, gw):
    base = _verify_messages("hello")
    mock_lm.script_chat(base, reply="well, maybe")
    retry = base + [
        {"role": "assistant", "content": "well, maybe"},
        {"role": "user",
         "content": "Reply again starting with the single word AGREE or DISAGREE."},
    ]
    mock_lm.script_chat(retry, reply="still rambling")
    with pytest.raises(UnparseableVerdict):
        llm_verify([_msg(0)], [_pred("A", mid="m0")], VERIFY_TEMPLATE, gw, "mock")
    assert mock_lm.calls("/chat/completions") == 2


def test_llm_verify_recovers_on_retry(mock_lm, gw):
    base = _verify_messages("hello")
    mock_lm.script_chat(base, reply="hmm")
    retry = base + [
        {"role": "assistant", "content": "hmm"},
        {"role": "user",
         "content": "Reply again starting with the single word AGREE or DISAGREE."},
    ]
    mock_lm.script_chat(retry, reply="AGREE: on reflection")
    verdicts = llm_verify([_msg(0)], [_pred("A", mid="m0")], VERIFY_TEMPLATE, gw, "mock")
    assert verdicts[0].verdict == "agree"


def test_report_exports():
    report = classification_report(["A", "A", "B", "B"], ["A", "B", "B", "B"], AB)
    as_json = report.to_json()
    assert as_json["per_label"]["A"]["f1"] == pytest.approx(2 / 3, abs=1e-9)
    assert as_json["confusion_matrix"] == [[1, 1], [0, 2]]
    as_csv = report.to_csv()
    assert as_csv.splitlines()[0] == "label,precision,recall,f1,support"
    assert "macro_f1" in as_csv and "accuracy" in as_csv
