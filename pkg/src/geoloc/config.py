"""Declarative experiment configs (YAML or JSON) with flag overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

import yaml

from .evaluate import ExperimentSpec, ModelConfig


def load_mapping(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data


def _build(cls, d: dict, where: str):
    names = {f.name for f in fields(cls)}
    extra = set(d) - names
    if extra:
        raise ValueError(f"{where}: unknown key(s) {sorted(extra)}")
    kw = {}
    for k, v in d.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    return cls(**kw)


@dataclass
class CrossvalConfig:
    """One cross-validation experiment over a featurized, labeled corpus."""

    features: str
    labels: str
    stopwords: str | None = None  # bundled list when unset
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    model: ModelConfig = field(default_factory=ModelConfig)

    @classmethod
    def from_mapping(cls, d: dict, base: str = ".") -> "CrossvalConfig":
        d = dict(d)
        missing = [k for k in ("features", "labels") if k not in d]
        if missing:
            raise ValueError(f"config lacks required key(s): {', '.join(missing)}")
        exp = _build(ExperimentSpec, d.pop("experiment", {}) or {}, "experiment")
        model = _build(ModelConfig, d.pop("model", {}) or {}, "model")
        rel = lambda p: p if p is None or os.path.isabs(p) else os.path.join(base, p)
        out = _build(cls, {k: v for k, v in d.items()}, "config")
        out.features, out.labels, out.stopwords = rel(out.features), rel(out.labels), rel(out.stopwords)
        out.experiment, out.model = exp, model
        return out


def load_crossval_config(path: str, folds: int | None = None, seed: int | None = None) -> CrossvalConfig:
    cfg = CrossvalConfig.from_mapping(load_mapping(path), os.path.dirname(os.path.abspath(path)))
    if folds is not None:
        cfg.experiment.folds = folds
    if seed is not None:
        cfg.experiment.seed = seed
    cfg.experiment.__post_init__()
    return cfg
