#!/usr/bin/env python3
"""Record real API payloads into frontend/fixtures/ for the UI contract tests.

Runs the platform in-process against the mock LM, drives the same flow the UI
performs, and freezes the JSON bodies the frontend must render verbatim.
"""
import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from toxiscope.config import default_config
from toxiscope.mock_llm import MockLmServer
from toxiscope.persona import render_persona_prompt
from toxiscope.server import create_app
from toxiscope.service import Platform

FIXTURES = Path(__file__).resolve().parents[1] / "frontend" / "fixtures"

CONV_CSV = (
    "conversation_id,speaker,turn_index,text,label\n"
    "c1,alice,0,planning the sprint retro today,not sexist\n"
    "c1,bob,1,women cannot handle technical work,sexist\n"
    "c1,alice,2,that is out of line,not sexist\n"
    "c1,bob,3,lighten up it was a joke,not sexist\n"
    "c1,alice,4,jokes like that poison the team,not sexist\n"
    "c1,bob,5,fine let us get back to the roadmap,not sexist\n"
)

PERSONA_REPLY = (
    "[7, 5, 6, 3, 8]\n\n"
    "**Openness to Experience**: engaged with new plans.\n\n"
    "**Conscientiousness**: keeps the team on track.\n\n"
    "**Extraversion**: speaks up readily.\n\n"
    "**Agreeableness**: pushes back on hostility.\n\n"
    "**Neuroticism**: visibly frustrated by toxicity.\n\n"
    "**Overall Persona Analysis**: assertive, standards-driven participant."
)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True
    ).start()
    config = default_config("data/fixtures.db")
    config.providers = [server.provider(provider_id="mock")]
    platform = Platform(config)
    client = TestClient(create_app(platform))

    def save(name: str, payload) -> None:
        (FIXTURES / name).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        print(f"wrote fixtures/{name}")

    try:
        upload = client.post(
            "/v1/datasets",
            files={"file": ("team.csv", CONV_CSV.encode(), "text/csv")},
            data={"name": "team-chat"},
        ).json()
        dataset_id = upload["dataset"]["dataset_id"]
        save("upload.json", upload)
        save("datasets.json", client.get("/v1/datasets").json())
        save(
            "conversation.json",
            client.get(f"/v1/datasets/{dataset_id}/conversations/c1").json(),
        )

        classified = client.post(
            "/v1/classify",
            json={
                "dataset_id": dataset_id,
                "classifier_id": "vote-ensemble",
                "schema_id": "sexism-binary",
            },
        ).json()
        save("classification.json", classified)

        # The worked metrics example; macro F1 must render as 0.7333.
        report = client.post(
            "/v1/classify/report",
            json={
                "gold": ["sexist", "sexist", "not sexist", "not sexist"],
                "pred": ["sexist", "not sexist", "not sexist", "not sexist"],
                "schema_id": "sexism-binary",
            },
        ).json()
        save("report.json", report)

        analysis = client.post(
            "/v1/ppl-gain",
            json={
                "dataset_id": dataset_id,
                "conversation_key": "c1",
                "provider_id": "mock",
                "output_text": " overall verdict: toxic",
            },
        ).json()
        save("ppl_gain.json", analysis)

        handle = client.post(
            "/v1/jobs/summarization",
            json={
                "dataset_id": dataset_id,
                "conversation_key": "c1",
                "provider_id": "mock",
            },
        ).json()
        polls = []
        for _ in range(600):
            snapshot = client.get(f"/v1/jobs/{handle['job_id']}").json()
            polls.append(
                {k: snapshot[k] for k in ("job_id", "kind", "state", "progress", "total", "completed")}
            )
            if snapshot["state"] in ("done", "failed", "cancelled"):
                break
            time.sleep(0.02)
        save("job_polls.json", polls)
        save("summaries.json", snapshot.get("result", {}))

        summaries = platform._stored_summaries_for(dataset_id, "alice")
        prompt = render_persona_prompt(
            "alice",
            "\n\n".join(summaries),
            platform.templates.get("persona_big_five").body,
        )
        server.script_chat([{"role": "user", "content": prompt}], reply=PERSONA_REPLY)
        persona = client.post(
            "/v1/persona/alice",
            json={"dataset_id": dataset_id, "provider_id": "mock"},
        ).json()
        save("persona.json", persona)

        save("config.json", client.get("/v1/config").json())
    finally:
        platform.close()
        server.stop()


if __name__ == "__main__":
    main()
