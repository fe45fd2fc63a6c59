"""Deployment configuration: dataclasses loaded from a YAML file.

Secrets never live in the file; providers name the environment variable that
holds their API key.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path

import yaml

from .chunking import ChunkParams
from .classify import EnsembleConfig
from .gateway import ProviderSpec
from .schemas import LabelSchema


@dataclass
class ClassifierSpec:
    classifier_id: str
    type: str  # "stub" | "http"
    base_url: str = ""
    schema_ids: tuple[str, ...] = ()


@dataclass
class BenchmarkSpec:
    name: str
    path: str


@dataclass
class ServiceConfig:
    db_path: str = "data/toxiscope.db"
    providers: list[ProviderSpec] = field(default_factory=list)
    classifiers: list[ClassifierSpec] = field(default_factory=list)
    ensembles: dict[str, EnsembleConfig] = field(default_factory=dict)
    extra_schemas: list[LabelSchema] = field(default_factory=list)
    chunker: ChunkParams = field(default_factory=ChunkParams)
    builtin_benchmarks: list[BenchmarkSpec] = field(default_factory=list)
    max_concurrent_jobs: int = 4
    max_queue: int = 16
    batch_size: int = 32
    summary_parallelism: int = 2
    templates_dir: str | None = None
    lm_retries: int = 2
    lm_backoff: float = 0.5
    lm_timeout: float = 60.0
    # UI policy: heatmaps on negative (non-toxic) predictions are less
    # informative; deployments may hide them.
    heatmap_on_negative: bool = True

    def public_json(self) -> dict:
        """Config view safe to expose over the API (no secrets are stored)."""
        return {
            "providers": [p.to_json() for p in self.providers],
            "classifiers": [
                {
                    "classifier_id": c.classifier_id,
                    "type": c.type,
                    "schema_ids": list(c.schema_ids),
                }
                for c in self.classifiers
            ],
            "ensembles": {
                name: {"member_ids": list(e.member_ids), "fallback_id": e.fallback_id}
                for name, e in self.ensembles.items()
            },
            "chunker": self.chunker.to_json(),
            "heatmap_on_negative": self.heatmap_on_negative,
            "max_concurrent_jobs": self.max_concurrent_jobs,
        }


def _provider_from_dict(raw: dict) -> ProviderSpec:
    return ProviderSpec(
        provider_id=raw["provider_id"],
        base_url=raw["base_url"],
        model_name=raw.get("model_name", ""),
        auth_env_var=raw.get("auth_env_var", ""),
        capabilities=tuple(raw.get("capabilities", ["chat"])),
        max_parallel=int(raw.get("max_parallel", 4)),
    )


def _schema_from_dict(raw: dict) -> LabelSchema:
    return LabelSchema(
        schema_id=raw["schema_id"],
        labels=tuple(raw["labels"]),
        parent_schema_id=raw.get("parent_schema_id"),
        parent_map=raw.get("parent_map"),
        negative_label=raw.get("negative_label"),
    )


def config_from_dict(raw: dict) -> ServiceConfig:
    config = ServiceConfig()
    if "db_path" in raw:
        config.db_path = raw["db_path"]
    config.providers = [_provider_from_dict(p) for p in raw.get("providers", [])]
    config.classifiers = [
        ClassifierSpec(
            classifier_id=c["classifier_id"],
            type=c.get("type", "http"),
            base_url=c.get("base_url", ""),
            schema_ids=tuple(c.get("schema_ids", [])),
        )
        for c in raw.get("classifiers", [])
    ]
    config.ensembles = {
        e["ensemble_id"]: EnsembleConfig(
            member_ids=tuple(e["member_ids"]), fallback_id=e["fallback_id"]
        )
        for e in raw.get("ensembles", [])
    }
    config.extra_schemas = [_schema_from_dict(s) for s in raw.get("schemas", [])]
    if "chunker" in raw:
        c = raw["chunker"]
        config.chunker = ChunkParams(
            window=int(c.get("window", 1)),
            percentile=float(c.get("percentile", 95.0)),
            min_chunk_size=int(c.get("min_chunk_size", 2)),
            merge_threshold=float(c.get("merge_threshold", 0.85)),
        )
    if "builtin_benchmarks" in raw:
        config.builtin_benchmarks = [
            BenchmarkSpec(name=b["name"], path=b["path"])
            for b in raw["builtin_benchmarks"]
        ]
    else:
        config.builtin_benchmarks = builtin_benchmark_specs()
    for key in (
        "max_concurrent_jobs",
        "max_queue",
        "batch_size",
        "summary_parallelism",
        "lm_retries",
    ):
        if key in raw:
            setattr(config, key, int(raw[key]))
    for key in ("lm_backoff", "lm_timeout"):
        if key in raw:
            setattr(config, key, float(raw[key]))
    if "templates_dir" in raw:
        config.templates_dir = raw["templates_dir"]
    if "heatmap_on_negative" in raw:
        config.heatmap_on_negative = bool(raw["heatmap_on_negative"])
    return config


def load_config(path: str | Path) -> ServiceConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    return config_from_dict(raw)


def builtin_benchmark_specs() -> list[BenchmarkSpec]:
    """The shipped synthetic stand-ins for the public benchmark datasets."""
    root = importlib_resources.files("toxiscope").joinpath("resources/benchmarks")
    names = {
        "edos_standin.csv": "EDOS",
        "hateval_standin.csv": "HatEval",
        "abuseval_standin.csv": "AbusEval",
        "offenseval_standin.csv": "OffensEval",
    }
    specs = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name in names:
            specs.append(BenchmarkSpec(name=names[entry.name], path=str(entry)))
    return specs


def default_config(db_path: str = "data/toxiscope.db") -> ServiceConfig:
    """Offline-friendly defaults: stub classifiers, a voting ensemble, the
    synthetic benchmark stand-ins, and no LM providers."""
    config = ServiceConfig(db_path=db_path)
    config.classifiers = [
        ClassifierSpec(classifier_id="stub-a", type="stub"),
        ClassifierSpec(classifier_id="stub-b", type="stub"),
        ClassifierSpec(classifier_id="stub-c", type="stub"),
    ]
    config.ensembles = {
        "vote-ensemble": EnsembleConfig(
            member_ids=("stub-a", "stub-b", "stub-c"), fallback_id="stub-c"
        )
    }
    config.builtin_benchmarks = builtin_benchmark_specs()
    return config
