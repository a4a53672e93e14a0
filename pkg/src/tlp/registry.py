"""Catalog of ticket-level features: family, availability stage and kind."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Stage(str, Enum):
    OPEN = "Open"
    ASSIGNED = "Assigned"
    CLOSED = "Closed"


FAMILIES = ("C", "D", "E_T", "I_T", "I", "T2T", "JIT")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    family: str
    stage: Stage
    kind: str = "numeric"  # or "categorical"


def _specs(family: str, stage: Stage, names: list[str]) -> list[FeatureSpec]:
    return [FeatureSpec(n, family, stage) for n in names]


_O, _A, _C = Stage.OPEN, Stage.ASSIGNED, Stage.CLOSED

_CODE = _specs("C", _O, [
    "code_quality-smells_count",
    "code_size-number_of_languages",
    "code_size-number_of_files",
    "code_size-total_LOCs",
])

_DEVELOPER = _specs("D", _A, ["assignee-ANFIC", "assignee-familiarity"])

_EXTERNAL = _specs("E_T", _O, ["temporal_locality", "temporal_locality-weighted"]) + _specs("E_T", _A, [
    "commits_while_in_progress-count",
    "commits_while_in_progress-churn",
    "latest_commit-churn",
    "latest_commit-number_of_files",
])

_INTERNAL = _specs("I_T", _O, [
    "issue_participants-count",
    "activities-count",
    "activities-comments_count",
    "activities-work_items_count",
    "activities-histories_count",
    "nlp4re_sentiment-IT_POL",
    "nlp4re_sentiment-IT_SUB",
    "nlp4re_sentiment-CM_NNS",
    "nlp4re_sentiment-CM_PNS",
    "nlp4re_sentiment-CM_ONS",
])

DA_COUNTERS = ("DA_ACT", "DA_CND", "DA_CNT", "DA_IMP", "DA_INC", "DA_OPT", "DA_SRC", "DA_WKP")

_INTRINSIC = (
    [FeatureSpec("priority", "I", _O, "categorical")]
    + _specs("I", _O, ["components-count", "components-max_bugginess"])
    + [FeatureSpec("type", "I", _O, "categorical")]
    + _specs("I", _O, [f"nlp4re_description-{c}" for c in DA_COUNTERS])
    + _specs("I", _O, [
        "nlp4re_description-DA_RKL",
        "nlp4re_description-EX_SBJ",
        "nlp4re_description-EX_CNS",
        "nlp4re_description-EX_VRB",
        "nlp4re_description-EX_AMG",
        "nlp4re_description-EX_DIR",
        "nlp4re_description-EX_RDS",
        "nlp4re_description-EX_ICP",
        "nlp4re_description-EX_ACD",
        "nlp4re_description-EX_ENT",
    ])
)

T2T_METRICS = ("jaccard", "tfidf_cosine", "euclidean_distance")
T2T_FIELDS = ("title", "text")

_T2T = _specs("T2T", _O, [
    f"buggy_similarity-{agg}_similarity_{metric}_{fld}"
    for agg in ("max", "avg")
    for metric in T2T_METRICS
    for fld in T2T_FIELDS
])

# (code-name, raw commit attribute, aggregation)
JIT_AGGREGATES = (
    ("jit-ndev-MAX", "ndev", "MAX"),
    ("jit-arexp-MIN", "arexp", "MIN"),
    ("jit-aexp-MIN", "aexp", "MIN"),
    ("jit-asexp-MIN", "asexp", "MIN"),
    ("jit-ns-MAX", "ns", "MAX"),
    ("jit-age-MIN", "age", "MIN"),
    ("jit-author_date-DURATION", "authored_at", "DURATION"),
    ("jit-la-SUM", "la", "SUM"),
    ("jit-ld-SUM", "ld", "SUM"),
    ("jit-fix-COUNT_TRUE", "fix", "COUNT_TRUE"),
    ("jit-nd-MAX", "nd", "MAX"),
    ("jit-nuc-MAX", "nuc", "MAX"),
    ("jit-ent-MAX", "entropy", "MAX"),
    ("jit-nf-MAX", "nf", "MAX"),
    ("num_commits", None, "COUNT"),
)

_JIT = _specs("JIT", _C, [name for name, _, _ in JIT_AGGREGATES])


class FeatureRegistry:
    """Ordered, immutable collection of :class:`FeatureSpec`."""

    def __init__(self, specs):
        self._specs = tuple(specs)
        self._by_name = {s.name: s for s in self._specs}
        if len(self._by_name) != len(self._specs):
            raise ValueError("feature code-names must be unique")

    def __len__(self):
        return len(self._specs)

    def __iter__(self):
        return iter(self._specs)

    def __contains__(self, name):
        return name in self._by_name

    def __getitem__(self, name) -> FeatureSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}") from None

    @property
    def names(self) -> list[str]:
        return [s.name for s in self._specs]

    def family(self, name: str) -> str:
        return self[name].family

    def by_family(self, family: str) -> list[str]:
        return [s.name for s in self._specs if s.family == family]

    def family_counts(self) -> dict[str, int]:
        return {f: len(self.by_family(f)) for f in FAMILIES}

    def categorical(self) -> list[str]:
        return [s.name for s in self._specs if s.kind == "categorical"]


REGISTRY = FeatureRegistry(_CODE + _DEVELOPER + _EXTERNAL + _INTERNAL + _INTRINSIC + _T2T + _JIT)
