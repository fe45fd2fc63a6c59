"""Label schemas: hierarchical toxicity taxonomies.

A schema is an ordered list of label ids, optionally linked to a coarser
schema through ``parent_map``. The default registry ships the sexism
taxonomy at three granularities (2 / 4 / 11 classes); deployments may add
their own through the service config.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemaMismatch, UnknownLabel


@dataclass(frozen=True)
class LabelSchema:
    schema_id: str
    labels: tuple[str, ...]
    # Maps each label of this schema onto a label of the parent (coarser) schema.
    parent_schema_id: str | None = None
    parent_map: dict[str, str] | None = None
    # The "nothing toxic here" label, used by toxic-aware summarization.
    negative_label: str | None = None

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"schema {self.schema_id}: duplicate labels")
        if self.negative_label is not None and self.negative_label not in self.labels:
            raise ValueError(f"schema {self.schema_id}: negative label not in labels")

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"label {label!r} not in schema {self.schema_id}")

    def validate_hierarchy(self, parent: "LabelSchema") -> None:
        """Check parent_map is total over our labels and surjective onto parent's.

        The parent's negative label is exempt from surjectivity: a "nothing
        toxic" class has no fine-grained subcategories to map from.
        """
        if self.parent_map is None:
            raise SchemaMismatch(f"schema {self.schema_id} has no parent_map")
        missing = set(self.labels) - set(self.parent_map)
        if missing:
            raise SchemaMismatch(f"parent_map not total, missing {sorted(missing)}")
        targets = set(self.parent_map.values())
        required = set(parent.labels) - {parent.negative_label}
        if not required <= targets or not targets <= set(parent.labels):
            raise SchemaMismatch(
                f"parent_map of {self.schema_id} not surjective onto {parent.schema_id}"
            )


def coarsen_distribution(
    distribution: dict[str, float],
    schema: LabelSchema,
    parent: LabelSchema,
    parent_map: dict[str, str] | None = None,
) -> dict[str, float]:
    """Fold a fine-grained distribution onto a coarser schema.

    Probability mass of each fine label is added to its parent label.
    """
    mapping = parent_map if parent_map is not None else schema.parent_map
    if mapping is None:
        raise SchemaMismatch(f"no mapping from {schema.schema_id} to {parent.schema_id}")
    out = {label: 0.0 for label in parent.labels}
    for label, p in distribution.items():
        if label not in mapping:
            raise UnknownLabel(f"label {label!r} has no parent mapping")
        out[mapping[label]] += p
    return out


def compose_parent_maps(first: dict[str, str], second: dict[str, str]) -> dict[str, str]:
    """Compose two hierarchy levels (e.g. 11->4 then 4->2) into one map."""
    return {label: second[parent] for label, parent in first.items()}


# Sexism taxonomy, three granularities. The 11 fine-grained categories fold
# into the 4 coarse ones in listing order (2 + 3 + 4 + 2).

SEXISM_BINARY = LabelSchema(
    schema_id="sexism-binary",
    labels=("sexist", "not sexist"),
    negative_label="not sexist",
)

_FOUR = ("threats", "derogation", "animosity", "prejudiced discussion")

SEXISM_4CLASS = LabelSchema(
    schema_id="sexism-4class",
    labels=_FOUR,
    parent_schema_id="sexism-binary",
    parent_map={label: "sexist" for label in _FOUR},
)

_ELEVEN = (
    "Threats of harm",
    "Incitement and encouragement of harm",
    "Descriptive attacks",
    "Aggressive and emotive attacks",
    "Dehumanising attacks and overt sexual objectification",
    "Causal use of gendered slurs, profanities and insults",
    "Immutable gender differences and gender stereotypes",
    "Backhanded gendered compliments",
    "Condescending explanations or unwelcome advice",
    "Supporting mistreatment of individual women",
    "Supporting systemic discrimination against women as a group",
)

_ELEVEN_TO_FOUR = {
    _ELEVEN[0]: "threats",
    _ELEVEN[1]: "threats",
    _ELEVEN[2]: "derogation",
    _ELEVEN[3]: "derogation",
    _ELEVEN[4]: "derogation",
    _ELEVEN[5]: "animosity",
    _ELEVEN[6]: "animosity",
    _ELEVEN[7]: "animosity",
    _ELEVEN[8]: "animosity",
    _ELEVEN[9]: "prejudiced discussion",
    _ELEVEN[10]: "prejudiced discussion",
}

SEXISM_11CLASS = LabelSchema(
    schema_id="sexism-11class",
    labels=_ELEVEN,
    parent_schema_id="sexism-4class",
    parent_map=_ELEVEN_TO_FOUR,
)

DEFAULT_SCHEMAS: dict[str, LabelSchema] = {
    s.schema_id: s for s in (SEXISM_BINARY, SEXISM_4CLASS, SEXISM_11CLASS)
}


class SchemaRegistry:
    """Lookup table of label schemas known to a deployment."""

    def __init__(self, schemas: dict[str, LabelSchema] | None = None):
        self._schemas = dict(DEFAULT_SCHEMAS)
        if schemas:
            self._schemas.update(schemas)

    def get(self, schema_id: str) -> LabelSchema:
        if schema_id not in self._schemas:
            raise UnknownLabel(f"unknown schema {schema_id!r}")
        return self._schemas[schema_id]

    def add(self, schema: LabelSchema) -> None:
        self._schemas[schema.schema_id] = schema

    def ids(self) -> list[str]:
        return sorted(self._schemas)
