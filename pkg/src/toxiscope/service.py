"""Platform facade: wires store, gateway, classifiers, jobs and assistant.

Both the HTTP server and the CLI drive this object, so every capability works
headless and the route handlers stay thin.
"""
from __future__ import annotations

import logging

from . import attribution, summarize
from .assistant import AssistantService, TemplateLibrary
from .chunking import ChunkParams
from .classify import (
    ClassifierRegistry,
    HttpClassifierBackend,
    Prediction,
    StubClassifierBackend,
    classification_report,
    classify_batch,
    ensemble_predict,
    llm_verify,
)
from .config import ServiceConfig, default_config
from .errors import LmUnavailable, NotFound, ValidationError
from .gateway import LmGateway, content_hash
from .jobs import JobContext, JobHandle, JobManager
from .persona import analyze_persona
from .schemas import SchemaRegistry
from .store import DataStore

logger = logging.getLogger(__name__)


class Platform:
    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or default_config()
        self.store = DataStore(self.config.db_path)
        self.gateway = LmGateway(
            self.config.providers,
            retries=self.config.lm_retries,
            backoff_base=self.config.lm_backoff,
            timeout=self.config.lm_timeout,
        )
        self.schemas = SchemaRegistry({s.schema_id: s for s in self.config.extra_schemas})
        self.classifiers = ClassifierRegistry()
        for spec in self.config.classifiers:
            if spec.type == "stub":
                self.classifiers.add(StubClassifierBackend(classifier_id=spec.classifier_id))
            else:
                self.classifiers.add(
                    HttpClassifierBackend(
                        classifier_id=spec.classifier_id,
                        base_url=spec.base_url,
                        schema_ids=spec.schema_ids,
                    )
                )
        self.templates = TemplateLibrary(self.config.templates_dir)
        self.assistant = AssistantService(
            self.gateway, self.templates, snapshot=self.store.snapshot_session
        )
        self.jobs = JobManager(
            max_workers=self.config.max_concurrent_jobs, max_queue=self.config.max_queue
        )
        self.ppl_cache = attribution.ScoreCache()
        for benchmark in self.config.builtin_benchmarks:
            try:
                self.store.register_builtin(benchmark.name, benchmark.path)
            except Exception as exc:
                logger.warning("could not register benchmark %s: %s", benchmark.name, exc)

    # --- classification ------------------------------------------------------

    def _records_for(self, dataset_id: str, message_ids: list[str] | None):
        records = self.store.get_records(dataset_id)
        if message_ids is None:
            return records
        by_id = {r.id: r for r in records}
        missing = [m for m in message_ids if m not in by_id]
        if missing:
            raise ValidationError(f"unknown message ids {missing[:5]}")
        return [by_id[m] for m in message_ids]

    def classify_dataset(
        self,
        dataset_id: str,
        classifier_id: str,
        schema_id: str,
        message_ids: list[str] | None = None,
        ctx: JobContext | None = None,
    ) -> dict:
        """Run a classifier or a configured ensemble over dataset messages.

        Stores the payload under a content hash; attaches a gold-label report
        when every selected message carries a schema label.
        """
        schema = self.schemas.get(schema_id)
        records = self._records_for(dataset_id, message_ids)
        if not records:
            raise ValidationError(f"dataset {dataset_id!r} has no messages")
        if ctx is not None:
            ctx.set_total(len(records))

        if classifier_id in self.config.ensembles:
            ensemble = self.config.ensembles[classifier_id]
            per_member: dict[str, list[Prediction]] = {}
            for member in ensemble.member_ids:
                if ctx is not None:
                    ctx.raise_if_cancelled()
                per_member[member] = classify_batch(
                    records, member, schema, self.classifiers, self.config.batch_size
                )
            predictions = [
                ensemble_predict(
                    {member: per_member[member][i] for member in ensemble.member_ids},
                    ensemble,
                )
                for i in range(len(records))
            ]
            if ctx is not None:
                ctx.advance(len(records))
        else:
            predictions = []
            for start in range(0, len(records), self.config.batch_size):
                if ctx is not None:
                    ctx.raise_if_cancelled()
                batch = records[start: start + self.config.batch_size]
                predictions.extend(
                    classify_batch(
                        batch, classifier_id, schema, self.classifiers, self.config.batch_size
                    )
                )
                if ctx is not None:
                    ctx.advance(len(batch))

        payload: dict = {
            "dataset_id": dataset_id,
            "classifier_id": classifier_id,
            "schema_id": schema_id,
            "predictions": [p.to_json() for p in predictions],
        }
        gold = [r.gold_label for r in records]
        if all(g is not None and g in schema.labels for g in gold):
            report = classification_report(
                gold, [p.argmax_label for p in predictions], schema
            )
            payload["report"] = report.to_json()
        key = content_hash(
            {"dataset": dataset_id, "classifier": classifier_id, "schema": schema_id,
             "messages": message_ids}
        )
        self.store.put_result(dataset_id, "classification", key, payload)
        return payload

    def report_from_labels(self, gold: list[str], pred: list[str], schema_id: str) -> dict:
        schema = self.schemas.get(schema_id)
        return classification_report(gold, pred, schema).to_json()

    def report_csv(self, gold: list[str], pred: list[str], schema_id: str) -> str:
        schema = self.schemas.get(schema_id)
        return classification_report(gold, pred, schema).to_csv()

    def verify_predictions(
        self,
        dataset_id: str,
        predictions: list[dict],
        provider_id: str,
        template_id: str = "verify_prediction",
    ) -> list[dict]:
        records = {r.id: r for r in self.store.get_records(dataset_id)}
        missing = [p["message_id"] for p in predictions if p["message_id"] not in records]
        if missing:
            raise ValidationError(f"unknown message ids {missing[:5]}")
        messages = [records[p["message_id"]] for p in predictions]
        preds = [
            Prediction(
                message_id=p["message_id"],
                schema_id=p.get("schema_id", ""),
                distribution=p.get("distribution", {}),
                argmax_label=p["argmax_label"],
            )
            for p in predictions
        ]
        template = self.templates.get(template_id)
        verdicts = llm_verify(messages, preds, template.body, self.gateway, provider_id)
        return [v.to_json() for v in verdicts]

    # --- perplexity attribution --------------------------------------------------

    def run_ppl_gain(
        self,
        dataset_id: str,
        conversation_key: str,
        provider_id: str,
        granularity: str = "message",
        output_text: str | None = None,
        detect_template: str = "vawg_detect",
    ) -> dict:
        """Leave-one-out attribution of an output over one conversation.

        Without an explicit output_text the detection template is sent first
        and the model's verdict text becomes the attributed output.
        """
        conversation = self.store.get_conversation(dataset_id, conversation_key)
        if output_text is None:
            units = attribution.segment_units(conversation, attribution.MESSAGE)
            rendered = attribution.assemble_context(units)
            prompt = self.templates.render(detect_template, {"conversation": rendered})
            output_text = self.gateway.chat(provider_id, [{"role": "user", "content": prompt}])
            if not output_text:
                raise ValidationError("provider returned an empty output to attribute")
        units, scores = attribution.perplexity_gain(
            conversation,
            output_text,
            self.gateway,
            provider_id,
            granularity,
            cache=self.ppl_cache,
        )
        payload = attribution.analysis_to_json(units, scores)
        payload["conversation_key"] = conversation_key
        payload["output_text"] = output_text
        key = content_hash(
            {"conversation": conversation_key, "output": output_text,
             "granularity": granularity, "provider": provider_id}
        )
        self.store.put_result(dataset_id, "ppl_gain", key, payload)
        return payload

    # --- summarization ------------------------------------------------------------

    def _labels_for(self, dataset_id: str, labels: dict | None, schema_id: str | None):
        """Resolve the message-id -> label map used to condition summaries."""
        negative = None
        if schema_id is not None:
            negative = self.schemas.get(schema_id).negative_label
        if labels is not None:
            return labels, negative
        stored = self.store.latest_result(dataset_id, "classification")
        if stored is None:
            return {}, negative
        if negative is None:
            negative = self.schemas.get(stored["schema_id"]).negative_label
        return (
            {p["message_id"]: p["argmax_label"] for p in stored["predictions"]},
            negative,
        )

    def summarization_runner(self, params: dict):
        dataset_id = params["dataset_id"]
        conversation_key = params["conversation_key"]
        provider_id = params["provider_id"]
        conversation = self.store.get_conversation(dataset_id, conversation_key)
        labels, negative = self._labels_for(
            dataset_id, params.get("labels"), params.get("schema_id")
        )
        template = self.templates.get(params.get("template_id", "summarize_speaker")).body
        chunk_params = self.config.chunker
        if "chunker" in params:
            c = params["chunker"]
            chunk_params = ChunkParams(
                window=int(c.get("window", chunk_params.window)),
                percentile=float(c.get("percentile", chunk_params.percentile)),
                min_chunk_size=int(c.get("min_chunk_size", chunk_params.min_chunk_size)),
                merge_threshold=float(c.get("merge_threshold", chunk_params.merge_threshold)),
            )

        def run(ctx: JobContext):
            result = summarize.run_summarization(
                conversation,
                labels,
                self.gateway,
                provider_id,
                template,
                chunk_params=chunk_params,
                negative_label=negative,
                parallelism=self.config.summary_parallelism,
                ctx=ctx,
            )
            key = content_hash({"conversation": conversation_key, "provider": provider_id})
            self.store.put_result(dataset_id, "summarization", key, result)
            return result

        return run

    # --- persona ---------------------------------------------------------------------

    def _stored_summaries_for(self, dataset_id: str, speaker: str) -> list[str]:
        stored = self.store.latest_result(dataset_id, "summarization")
        if stored is None:
            raise ValidationError(
                f"no stored summaries for dataset {dataset_id!r}; run summarization first"
            )
        texts = []
        for group in stored.get("groups", []):
            for chunk in group.get("chunks", []):
                if speaker in chunk.get("per_speaker", {}):
                    texts.append(chunk["per_speaker"][speaker])
        if not texts:
            raise ValidationError(f"no summaries mention speaker {speaker!r}")
        return texts

    def run_persona(
        self,
        dataset_id: str,
        speaker: str,
        provider_id: str,
        summaries: list[str] | None = None,
    ) -> dict:
        self.store.get_dataset(dataset_id)
        if summaries is None:
            summaries = self._stored_summaries_for(dataset_id, speaker)
        if not summaries:
            raise ValidationError("summaries must be non-empty")
        template = self.templates.get("persona_big_five").body
        profile = analyze_persona(
            speaker, summaries, self.gateway, provider_id, template
        )
        payload = profile.to_json()
        self.store.put_persona(dataset_id, speaker, payload)
        return payload

    # --- jobs ------------------------------------------------------------------------

    @staticmethod
    def _require_params(params: dict, *keys: str) -> None:
        missing = [k for k in keys if k not in params]
        if missing:
            raise ValidationError(f"missing job params {missing}")

    def submit_job(self, kind: str, params: dict) -> JobHandle:
        """Validate params eagerly, then enqueue; identical submissions reuse
        the finished job when caching is on."""
        key = content_hash({"kind": kind, "params": params})
        try:
            return self._submit_validated(kind, params, key)
        except (NotFound, LmUnavailable) as exc:
            raise ValidationError(str(exc))

    def _submit_validated(self, kind: str, params: dict, key: str) -> JobHandle:
        if kind == "classification":
            self._require_params(params, "dataset_id", "schema_id", "classifier_id")
            self.store.get_dataset(params["dataset_id"])
            self.schemas.get(params["schema_id"])
            classifier_id = params["classifier_id"]
            if classifier_id not in self.config.ensembles:
                self.classifiers.get(classifier_id)

            def run(ctx: JobContext):
                return self.classify_dataset(
                    params["dataset_id"],
                    params["classifier_id"],
                    params["schema_id"],
                    params.get("message_ids"),
                    ctx=ctx,
                )

            return self.jobs.submit(kind, run, content_hash=key)
        if kind == "summarization":
            self._require_params(params, "dataset_id", "conversation_key", "provider_id")
            self.store.get_conversation(params["dataset_id"], params["conversation_key"])
            self.gateway.get_provider(params["provider_id"])
            return self.jobs.submit(kind, self.summarization_runner(params), content_hash=key)
        if kind == "ppl_gain":
            self._require_params(params, "dataset_id", "conversation_key", "provider_id")
            self.store.get_conversation(params["dataset_id"], params["conversation_key"])
            self.gateway.get_provider(params["provider_id"])

            def run(ctx: JobContext):
                return self.run_ppl_gain(
                    params["dataset_id"],
                    params["conversation_key"],
                    params["provider_id"],
                    params.get("granularity", "message"),
                    params.get("output_text"),
                )

            return self.jobs.submit(kind, run, content_hash=key)
        if kind == "persona":
            self._require_params(params, "dataset_id", "speaker", "provider_id")
            self.store.get_dataset(params["dataset_id"])
            self.gateway.get_provider(params["provider_id"])

            def run(ctx: JobContext):
                return self.run_persona(
                    params["dataset_id"],
                    params["speaker"],
                    params["provider_id"],
                    params.get("summaries"),
                )

            return self.jobs.submit(kind, run, content_hash=key)
        raise ValidationError(f"unknown job kind {kind!r}")

    def close(self) -> None:
        self.jobs.shutdown()
