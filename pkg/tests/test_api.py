import json
import time

import pytest
from fastapi.testclient import TestClient

from toxiscope.config import default_config
from toxiscope.mock_llm import MockLmServer
from toxiscope.server import create_app
from toxiscope.service import Platform

CONV_CSV = (
    "conversation_id,speaker,turn_index,text,label\n"
    "c1,alice,0,planning the sprint retro today,not sexist\n"
    "c1,bob,1,women cannot handle technical work,sexist\n"
    "c1,alice,2,that is out of line,not sexist\n"
    "c1,bob,3,lighten up it was a joke,not sexist\n"
    "c1,alice,4,jokes like that poison the team,not sexist\n"
    "c1,bob,5,fine let us get back to the roadmap,not sexist\n"
)


def _make_platform(tmp_path, server, **overrides):
    config = default_config(str(tmp_path / "api.db"))
    config.providers = [server.provider(provider_id="mock")]
    config.lm_backoff = 0.001
    config.summary_parallelism = 1
    for key, value in overrides.items():
        setattr(config, key, value)
    return Platform(config)


@pytest.fixture
def api(tmp_path):
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True
    ).start()
    platform = _make_platform(tmp_path, server)
    client = TestClient(create_app(platform))
    yield client, platform, server
    platform.close()
    server.stop()


def _upload(client, body=CONV_CSV, name="conv"):
    response = client.post(
        "/v1/datasets",
        files={"file": (f"{name}.csv", body.encode(), "text/csv")},
        data={"name": name},
    )
    assert response.status_code == 200, response.text
    return response.json()


# --- route inventory ---------------------------------------------------------------

REQUIRED_ROUTES = [
    ("POST", "/v1/datasets"),
    ("GET", "/v1/datasets/{dataset_id}"),
    ("DELETE", "/v1/datasets/{dataset_id}"),
    ("GET", "/v1/datasets/{dataset_id}/conversations/{key}"),
    ("POST", "/v1/classify"),
    ("POST", "/v1/classify/report"),
    ("POST", "/v1/jobs/{kind}"),
    ("GET", "/v1/jobs/{job_id}"),
    ("DELETE", "/v1/jobs/{job_id}"),
    ("POST", "/v1/ppl-gain"),
    ("POST", "/v1/persona/{speaker}"),
    ("POST", "/v1/assistant/sessions"),
    ("POST", "/v1/assistant/sessions/{session_id}/messages"),
    ("GET", "/v1/assistant/sessions/{session_id}/export"),
    ("GET", "/v1/health"),
    ("GET", "/v1/config"),
]


def test_route_inventory_complete(api):
    client, platform, _ = api
    app = client.app
    available = {
        (method, route.path)
        for route in app.routes
        if hasattr(route, "methods")
        for method in route.methods
    }
    for required in REQUIRED_ROUTES:
        assert required in available, f"missing route {required}"


# --- health / degraded start ----------------------------------------------------------


def test_health_ready_without_providers(tmp_path):
    platform = Platform(default_config(str(tmp_path / "bare.db")))
    client = TestClient(create_app(platform))
    started = time.monotonic()
    assert client.get("/v1/health").json() == {"status": "ok"}
    assert time.monotonic() - started < 5.0
    # LM-dependent features answer with explicit errors, not crashes.
    upload = _upload(client)
    response = client.post(
        "/v1/ppl-gain",
        json={
            "dataset_id": upload["dataset"]["dataset_id"],
            "conversation_key": "c1",
            "provider_id": "nope",
            "output_text": "x",
        },
    )
    assert response.status_code == 502
    assert response.json()["error"] == "LmUnavailable"
    platform.close()


def test_config_endpoint_sans_secrets(api):
    client, _, _ = api
    payload = client.get("/v1/config").json()
    assert payload["providers"][0]["provider_id"] == "mock"
    assert "auth_env_var" in payload["providers"][0]  # env var NAME only
    assert "vote-ensemble" in payload["ensembles"]


# --- datasets ---------------------------------------------------------------------------


def test_upload_and_fetch_dataset(api):
    client, _, _ = api
    upload = _upload(client)
    dataset_id = upload["dataset"]["dataset_id"]
    assert upload["dataset"]["layout"] == "conversation-level"
    assert upload["report"]["record_count"] == 6

    descriptor = client.get(f"/v1/datasets/{dataset_id}").json()
    assert descriptor["name"] == "conv"

    conv = client.get(f"/v1/datasets/{dataset_id}/conversations/c1").json()
    assert [t["turn_index"] for t in conv["turns"]] == list(range(6))
    assert conv["participants"] == ["alice", "bob"]


def test_builtin_benchmarks_registered(api):
    client, _, _ = api
    datasets = client.get("/v1/datasets").json()["datasets"]
    names = {d["name"] for d in datasets}
    assert {"EDOS", "HatEval", "AbusEval", "OffensEval"} <= names
    builtin = next(d for d in datasets if d["name"] == "EDOS")
    response = client.delete(f"/v1/datasets/{builtin['dataset_id']}")
    assert response.status_code == 403


def test_delete_dataset(api):
    client, _, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    assert client.delete(f"/v1/datasets/{dataset_id}").status_code == 200
    assert client.get(f"/v1/datasets/{dataset_id}").status_code == 404


def test_export_round_trip_via_api(api):
    client, _, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    exported = client.get(f"/v1/datasets/{dataset_id}/export?format=jsonl")
    second = client.post(
        "/v1/datasets",
        files={"file": ("again.jsonl", exported.content, "application/jsonl")},
        data={"name": "again", "format": "jsonl"},
    ).json()
    re_exported = client.get(
        f"/v1/datasets/{second['dataset']['dataset_id']}/export?format=jsonl"
    )
    assert exported.content == re_exported.content


# --- classification -------------------------------------------------------------------------


def test_classify_and_report(api):
    client, _, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    payload = client.post(
        "/v1/classify",
        json={
            "dataset_id": dataset_id,
            "classifier_id": "stub-a",
            "schema_id": "sexism-binary",
        },
    ).json()
    assert len(payload["predictions"]) == 6
    for prediction in payload["predictions"]:
        total = sum(prediction["distribution"].values())
        assert abs(total - 1.0) < 1e-6
    assert "report" in payload  # gold labels present in the upload
    assert 0.0 <= payload["report"]["macro_f1"] <= 1.0


def test_classify_with_ensemble(api):
    client, _, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    payload = client.post(
        "/v1/classify",
        json={
            "dataset_id": dataset_id,
            "classifier_id": "vote-ensemble",
            "schema_id": "sexism-binary",
        },
    ).json()
    assert payload["classifier_id"] == "vote-ensemble"
    assert len(payload["predictions"]) == 6


def test_report_endpoint_raw_labels(api):
    client, _, _ = api
    report = client.post(
        "/v1/classify/report",
        json={
            "gold": ["sexist", "sexist", "not sexist", "not sexist"],
            "pred": ["sexist", "not sexist", "not sexist", "not sexist"],
            "schema_id": "sexism-binary",
        },
    ).json()
    assert report["macro_f1"] == pytest.approx(0.7333, abs=1e-4)


def test_classify_unknown_dataset(api):
    client, _, _ = api
    response = client.post(
        "/v1/classify",
        json={"dataset_id": "nope", "classifier_id": "stub-a", "schema_id": "sexism-binary"},
    )
    assert response.status_code == 404


# --- jobs ---------------------------------------------------------------------------------------


def test_job_lifecycle(api):
    client, _, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    handle = client.post(
        "/v1/jobs/summarization",
        json={"dataset_id": dataset_id, "conversation_key": "c1", "provider_id": "mock"},
    ).json()
    assert handle["state"] in ("pending", "running")
    progress = []
    for _ in range(400):
        snapshot = client.get(f"/v1/jobs/{handle['job_id']}").json()
        progress.append(snapshot["progress"])
        if snapshot["state"] in ("done", "failed", "cancelled"):
            break
        time.sleep(0.02)
    assert snapshot["state"] == "done"
    assert snapshot["progress"] == 1.0
    assert progress == sorted(progress)
    assert "groups" in snapshot["result"]


def test_job_validation_before_enqueue(api):
    client, _, _ = api
    response = client.post(
        "/v1/jobs/summarization",
        json={"dataset_id": "ghost", "conversation_key": "c1", "provider_id": "mock"},
    )
    assert response.status_code == 400
    assert response.json()["error"] == "ValidationError"


def test_job_unknown_kind(api):
    client, _, _ = api
    assert client.post("/v1/jobs/nonsense", json={}).status_code == 400


def test_poll_unknown_job(api):
    client, _, _ = api
    assert client.get("/v1/jobs/ghost").status_code == 404


def test_cancel_pending_job_makes_no_lm_calls(tmp_path):
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True, echo_delay=0.15
    ).start()
    platform = _make_platform(tmp_path, server, max_concurrent_jobs=1)
    client = TestClient(create_app(platform))
    try:
        dataset_id = _upload(client)["dataset"]["dataset_id"]
        params = {"dataset_id": dataset_id, "conversation_key": "c1", "provider_id": "mock"}
        first = client.post("/v1/jobs/summarization", json=params).json()
        second = client.post(
            "/v1/jobs/summarization", json={**params, "chunker": {"window": 0}}
        ).json()
        cancelled = client.delete(f"/v1/jobs/{second['job_id']}").json()
        assert cancelled["state"] == "cancelled"
        platform.jobs.wait(first["job_id"], timeout=30)
        calls_after_first = server.calls("/chat/completions")
        platform.jobs.wait(second["job_id"], timeout=5)
        assert server.calls("/chat/completions") == calls_after_first
        # double cancel is rejected
        assert client.delete(f"/v1/jobs/{second['job_id']}").status_code == 409
    finally:
        platform.close()
        server.stop()


def test_cancel_running_job_stops_lm_calls(tmp_path):
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True, echo_delay=0.2
    ).start()
    platform = _make_platform(tmp_path, server)
    client = TestClient(create_app(platform))
    try:
        dataset_id = _upload(client)["dataset"]["dataset_id"]
        handle = client.post(
            "/v1/jobs/summarization",
            json={"dataset_id": dataset_id, "conversation_key": "c1", "provider_id": "mock"},
        ).json()
        for _ in range(200):
            if client.get(f"/v1/jobs/{handle['job_id']}").json()["state"] == "running":
                break
            time.sleep(0.01)
        time.sleep(0.1)  # let the first chat call get in flight
        client.delete(f"/v1/jobs/{handle['job_id']}")
        calls_at_cancel = server.calls("/chat/completions")
        platform.jobs.wait(handle["job_id"], timeout=30)
        time.sleep(0.3)
        # at most the already in-flight call lands after cancellation
        assert server.calls("/chat/completions") <= calls_at_cancel + 1
        assert client.get(f"/v1/jobs/{handle['job_id']}").json()["state"] == "cancelled"
    finally:
        platform.close()
        server.stop()


def test_queue_full(tmp_path):
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True, echo_delay=0.2
    ).start()
    platform = _make_platform(tmp_path, server, max_queue=1)
    client = TestClient(create_app(platform))
    try:
        dataset_id = _upload(client)["dataset"]["dataset_id"]
        params = {"dataset_id": dataset_id, "conversation_key": "c1", "provider_id": "mock"}
        first = client.post("/v1/jobs/summarization", json=params)
        assert first.status_code == 200
        second = client.post(
            "/v1/jobs/summarization", json={**params, "chunker": {"window": 0}}
        )
        assert second.status_code == 429
    finally:
        platform.close()
        server.stop()


def test_identical_resubmission_returns_cached_job(api):
    client, platform, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    params = {"dataset_id": dataset_id, "conversation_key": "c1", "provider_id": "mock"}
    first = client.post("/v1/jobs/summarization", json=params).json()
    platform.jobs.wait(first["job_id"], timeout=30)
    second = client.post("/v1/jobs/summarization", json=params).json()
    assert second["job_id"] == first["job_id"]
    assert second["state"] == "done"


# --- attribution ------------------------------------------------------------------------------------


def test_ppl_gain_endpoint(api):
    client, _, _ = api
    dataset_id = _upload(client)["dataset"]["dataset_id"]
    payload = client.post(
        "/v1/ppl-gain",
        json={
            "dataset_id": dataset_id,
            "conversation_key": "c1",
            "provider_id": "mock",
            "output_text": " the verdict is toxic",
        },
    ).json()
    assert len(payload["units"]) == 6
    assert len(payload["scores"]) == 6
    for score in payload["scores"]:
        assert 0.0 <= score["intensity"] <= 1.0
    assert payload["ppl_full"] > 0


# --- persona -------------------------------------------------------------------------------------------


PERSONA_REPLY = (
    "[7, 5, 6, 3, 8]\n\n"
    "**Openness to Experience**: curious.\n\n"
    "**Conscientiousness**: steady.\n\n"
    "**Extraversion**: outgoing.\n\n"
    "**Agreeableness**: blunt.\n\n"
    "**Neuroticism**: reactive.\n\n"
    "**Overall Persona Analysis**: mixed profile."
)


def test_persona_endpoint_with_explicit_summaries(tmp_path):
    server = MockLmServer(default_embeddings=True, default_scores=True).start()
    platform = _make_platform(tmp_path, server)
    client = TestClient(create_app(platform))
    try:
        from toxiscope.persona import render_persona_prompt

        dataset_id = _upload(client)["dataset"]["dataset_id"]
        template = platform.templates.get("persona_big_five").body
        prompt = render_persona_prompt("alice", "alice was dismissive.", template)
        server.script_chat([{"role": "user", "content": prompt}], reply=PERSONA_REPLY)
        payload = client.post(
            "/v1/persona/alice",
            json={
                "dataset_id": dataset_id,
                "provider_id": "mock",
                "summaries": ["alice was dismissive."],
            },
        ).json()
        assert payload["scores"] == {
            "openness": 7,
            "conscientiousness": 5,
            "extraversion": 6,
            "agreeableness": 3,
            "neuroticism": 8,
        }
        assert "disclaimer" in payload
        stored = client.get(f"/v1/persona/alice?dataset_id={dataset_id}").json()
        assert stored["scores"] == payload["scores"]
    finally:
        platform.close()
        server.stop()


# --- assistant SSE -----------------------------------------------------------------------------------------


def test_assistant_sse_stream(api):
    client, _, server = api
    session_id = client.post("/v1/assistant/sessions", json={}).json()["session_id"]
    server.script_chat([{"role": "user", "content": "hi"}], deltas=["he", "llo"])
    events = []
    with client.stream(
        "POST",
        f"/v1/assistant/sessions/{session_id}/messages",
        json={"text": "hi", "provider_id": "mock"},
    ) as response:
        assert response.status_code == 200
        for line in response.iter_lines():
            if line.startswith("data:"):
                events.append(json.loads(line[len("data:"):]))
    assert events[0] == {"delta": "he"}
    assert events[1] == {"delta": "llo"}
    assert events[-1] == {"done": True, "text": "hello"}


def test_assistant_export_round_trip_via_api(api):
    client, _, server = api
    session_id = client.post("/v1/assistant/sessions", json={}).json()["session_id"]
    server.script_chat([{"role": "user", "content": "q"}], reply="a")
    with client.stream(
        "POST",
        f"/v1/assistant/sessions/{session_id}/messages",
        json={"text": "q", "provider_id": "mock"},
    ) as response:
        for _ in response.iter_lines():
            pass
    exported = client.get(f"/v1/assistant/sessions/{session_id}/export?format=json")
    transcript = json.loads(exported.content)
    assert [(e["role"], e["text"]) for e in transcript] == [("user", "q"), ("assistant", "a")]
    text_export = client.get(f"/v1/assistant/sessions/{session_id}/export?format=txt")
    assert "user: q" in text_export.text


def test_assistant_unknown_session(api):
    client, _, _ = api
    response = client.post("/v1/assistant/sessions/ghost/messages", json={"text": "x"})
    assert response.status_code == 404


def test_report_csv_format(api):
    client, _, _ = api
    response = client.post(
        "/v1/classify/report?format=csv",
        json={
            "gold": ["sexist", "not sexist"],
            "pred": ["sexist", "not sexist"],
            "schema_id": "sexism-binary",
        },
    )
    assert response.headers["content-type"].startswith("text/csv")
    assert response.text.splitlines()[0] == "label,precision,recall,f1,support"
