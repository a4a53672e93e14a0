"""Run configuration: a JSON file whose values command-line flags may override."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .corpus import FILTER_ORDER

CONFIG_ENV = "TLP_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    tickets: str = "data/tickets.jsonl"
    commits: str = "data/commits.csv"
    repo_metrics: str | None = "data/repo_metrics.csv"
    project: str | None = None
    out_dir: str = "out"
    points: list[str] = field(default_factory=lambda: ["open", "inprogress", "closed"])
    classifiers: list[str] = field(default_factory=lambda: ["RF", "LR", "NN"])
    balancing: list[str] = field(default_factory=lambda: ["none", "smote"])
    selection: list[str] = field(default_factory=lambda: ["none", "filter"])
    seed: int = 0
    window_init: int = 1000
    window_step: int = 200
    train_fraction: float = 0.8
    baseline_trials: int = 1000
    lexicons: str | None = None
    temporal_window_days: float = 90.0
    igr_bins: int = 10
    top_k: int = 10
    filters: list[str] = field(default_factory=lambda: list(FILTER_ORDER))
    opening_date_polarity: str = "sanity"
    snoring_fraction: float = 0.2
    clear_repository: dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> None:
        from .learners import KINDS
        from .proximity import ProximityPoint

        for p in self.points:
            try:
                ProximityPoint.parse(p)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        bad = [c for c in self.classifiers if c not in KINDS]
        if bad:
            raise ConfigError(f"unknown classifiers {bad}; expected a subset of {list(KINDS)}")
        if not set(self.balancing) <= {"none", "smote"}:
            raise ConfigError("balancing must be a subset of none, smote")
        if not set(self.selection) <= {"none", "filter"}:
            raise ConfigError("selection must be a subset of none, filter")
        if not set(self.filters) <= set(FILTER_ORDER):
            raise ConfigError(f"filters must be a subset of {list(FILTER_ORDER)}")
        if self.window_init <= 0 or self.window_step <= 0 or not 0 < self.train_fraction < 1:
            raise ConfigError("invalid window parameters")
        if self.baseline_trials < 1 or self.igr_bins < 2 or self.top_k < 1:
            raise ConfigError("baseline_trials, igr_bins and top_k must be positive (bins >= 2)")
        if self.temporal_window_days <= 0:
            raise ConfigError("temporal_window_days must be positive")
        if self.opening_date_polarity not in ("sanity", "literal"):
            raise ConfigError("opening_date_polarity must be sanity or literal")


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read ``path``, else the file named by $TLP_CONFIG, else the defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return RunConfig.from_json(text)
