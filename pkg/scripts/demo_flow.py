#!/usr/bin/env python3
"""End-to-end demo against an in-process platform and mock LM.

Walks the full analyst flow (upload -> classify -> report -> perplexity gain
-> summarize -> persona) and prints each payload. Useful as a living example
of the Python API; the same flow over HTTP lives in tests/test_acceptance.py.
"""
import json
import time

from toxiscope.config import default_config
from toxiscope.mock_llm import MockLmServer
from toxiscope.persona import render_persona_prompt
from toxiscope.service import Platform

CONVERSATION = (
    "conversation_id,speaker,turn_index,text,label\n"
    "c1,alice,0,did you finish the report,not sexist\n"
    "c1,bob,1,women should not be project leads anyway,sexist\n"
    "c1,alice,2,that comment is unacceptable,not sexist\n"
    "c1,bob,3,fine forget it,not sexist\n"
)

PERSONA_REPLY = (
    "[6, 7, 5, 4, 6]\n\n"
    "**Openness to Experience**: open to discussion.\n\n"
    "**Conscientiousness**: follows through on work.\n\n"
    "**Extraversion**: speaks when needed.\n\n"
    "**Agreeableness**: firm against hostility.\n\n"
    "**Neuroticism**: somewhat stressed by conflict.\n\n"
    "**Overall Persona Analysis**: composed and direct."
)


def show(title, payload):
    print(f"\n=== {title} ===")
    print(json.dumps(payload, indent=2, ensure_ascii=False)[:1200])


def main() -> None:
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True
    ).start()
    config = default_config("data/demo.db")
    config.providers = [server.provider(provider_id="mock")]
    platform = Platform(config)
    try:
        descriptor, report = platform.store.ingest_dataset(
            "demo", CONVERSATION.encode(), "csv"
        )
        show("ingest", {"dataset": descriptor.to_json(), "report": report.to_json()})

        classified = platform.classify_dataset(
            descriptor.dataset_id, "vote-ensemble", "sexism-binary"
        )
        show("classification report", classified.get("report", {}))

        analysis = platform.run_ppl_gain(
            descriptor.dataset_id, "c1", "mock", output_text=" verdict: contains sexism"
        )
        show("perplexity gain", analysis)

        handle = platform.submit_job(
            "summarization",
            {
                "dataset_id": descriptor.dataset_id,
                "conversation_key": "c1",
                "provider_id": "mock",
            },
        )
        while platform.jobs.poll(handle.job_id).state not in ("done", "failed"):
            time.sleep(0.05)
        show("summaries", platform.jobs.result(handle.job_id))

        summaries = platform._stored_summaries_for(descriptor.dataset_id, "alice")
        prompt = render_persona_prompt(
            "alice", "\n\n".join(summaries), platform.templates.get("persona_big_five").body
        )
        server.script_chat([{"role": "user", "content": prompt}], reply=PERSONA_REPLY)
        profile = platform.run_persona(descriptor.dataset_id, "alice", "mock")
        show("persona", profile)
    finally:
        platform.close()
        server.stop()


if __name__ == "__main__":
    main()
