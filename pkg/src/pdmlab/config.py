"""Run configuration: defaults, JSON loading and dotted overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Optional

from .evaluator import NAMED_WEIGHTS, EvaluatorConfig
from .pseudo_expert import FamilyConfig
from .scene import DEFAULT_DT, DEFAULT_HORIZON
from .selection import AnchorConfig, Stage1Weights, Stage2Weights

CONFIG_ENV = "PDMLAB_CONFIG"


def _build(cls, data: Mapping, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in {section}: {sorted(unknown)}")
    if hasattr(cls, "from_dict"):
        return cls.from_dict(data)
    return cls(**data)


_SECTIONS = {
    "evaluator": EvaluatorConfig,
    "families": FamilyConfig,
    "stage1": Stage1Weights,
    "stage2": Stage2Weights,
    "anchor": AnchorConfig,
}


@dataclass(frozen=True)
class RunConfig:
    horizon_steps: int = DEFAULT_HORIZON
    dt: float = DEFAULT_DT
    seed: int = 0
    score_weights: str = "deployment"
    topk: int = 8
    pareto_max: int = 8
    pareto_min: int = 2
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)
    families: FamilyConfig = field(default_factory=FamilyConfig)
    stage1: Stage1Weights = field(default_factory=Stage1Weights)
    stage2: Stage2Weights = field(default_factory=Stage2Weights)
    anchor: AnchorConfig = field(default_factory=AnchorConfig)
    paths: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.score_weights not in NAMED_WEIGHTS:
            raise ValueError(f"score_weights must be one of {sorted(NAMED_WEIGHTS)}")
        if self.horizon_steps < 1 or self.dt <= 0:
            raise ValueError("horizon_steps must be >= 1 and dt > 0")
        if not 1 <= self.pareto_min <= self.pareto_max or self.topk < 1:
            raise ValueError("need topk >= 1 and 1 <= pareto_min <= pareto_max")

    @property
    def weights(self):
        return NAMED_WEIGHTS[self.score_weights]

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for name, section in _SECTIONS.items():
            if name in data and isinstance(data[name], Mapping):
                data[name] = _build(section, data[name], name)
        return cls(**data)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "families":
                v = v.to_dict()
            elif f.name in _SECTIONS:
                v = asdict(v)
            elif f.name == "paths":
                v = dict(v)
            out[f.name] = v
        return json.loads(json.dumps(out))

    def override(self, dotted: Mapping) -> "RunConfig":
        """Apply ``{"section.key": value}`` overrides."""
        data = self.to_dict()
        for key, value in dotted.items():
            parts = key.split(".")
            node = data
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ValueError(f"unknown config section {key!r}")
                node = node[p]
            if parts[-1] not in node and parts[0] != "paths":
                raise ValueError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(data)


def load_config(path: Optional[str] = None) -> RunConfig:
    """Defaults, overlaid with ``path`` or the file named by ``$PDMLAB_CONFIG``."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(data)
