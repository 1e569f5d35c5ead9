"""Synthetic experiment drivers shared by scripts/ and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import parse_record
from .evaluate import ExperimentResult, ExperimentSpec, ModelConfig, error_miles, run_cv
from .model.estimator import predict, train_model
from .pipeline import labeled_pairs
from .synth import FeatureCorpusSpec, SyntheticSpec, generate, generate_feature_corpus

WITH_TEMPORAL = ("words", "subreddits", "temporal")
WITHOUT_TEMPORAL = ("words", "subreddits")

# eastern and western city groups eight hours apart, sharing most local vocabulary
TWO_CONTINENT = SyntheticSpec(
    pool="two-continent", n_cities=10, users_per_city=60, vocab_overlap=0.8, local_rate=0.04,
    group_predictiveness=0.02, tau_shift_hours=8, seed=5, comments_per_user=(6, 12))
# one timezone: posting hours carry no location signal
SINGLE_TIMEZONE = SyntheticSpec(
    pool="us", n_cities=5, users_per_city=100, tau_shift_hours=0, seed=5, comments_per_user=(10, 20))
ABLATION_CONFIG = ModelConfig(k_words=300, k_subreddits=30)


@dataclass
class DensityTrial:
    seed: int
    aed_dpmm: float
    aed_gmm: float


def density_trial(seed: int, n_users: int = 300, n_features: int = 40, train_share: float = 0.75,
                  n_components: int = 5) -> DensityTrial:
    """Held-out AED with DPMM vs GMM feature densities on one feature-level corpus."""
    pairs, _ = generate_feature_corpus(FeatureCorpusSpec(seed=seed, n_users=n_users, n_features=n_features))
    cut = int(round(train_share * len(pairs)))
    train, test = pairs[:cut], pairs[cut:]
    vocab = sorted({f"w:{k}" for f, _ in train for k in f.w})
    aed = {}
    for kind in ("dpmm", "gmm"):
        m = train_model(train, vocab, modalities=("words",), kind=kind, n_components=n_components, seed=seed)
        pts = [predict(m, f).point for f, _ in test]
        aed[kind] = float(error_miles(pts, [lab.coords for _, lab in test]).mean())
    return DensityTrial(seed, aed["dpmm"], aed["gmm"])


def synthetic_pairs(spec: SyntheticSpec, g, a, bias: bool = False):
    """Label and featurize a generated corpus in memory."""
    c = generate(spec)
    return labeled_pairs([parse_record(r) for r in c.comments], c.seeds, g, a,
                         dict(c.region_bias) if bias else None)


def temporal_ablation(pairs, stopwords, cfg: ModelConfig = ABLATION_CONFIG, folds: int = 5,
                      seed: int = 0) -> dict[str, ExperimentResult]:
    """Cross-validated results with and without the temporal modality."""
    out = {}
    for name, mods in (("without", WITHOUT_TEMPORAL), ("with", WITH_TEMPORAL)):
        out[name] = run_cv(ExperimentSpec(modalities=mods, folds=folds, seed=seed), pairs, stopwords, cfg)
    return out


def summarize_density_trials(trials) -> dict:
    d = np.array([t.aed_dpmm for t in trials])
    g = np.array([t.aed_gmm for t in trials])
    return {"trials": len(trials), "dpmm_wins": int((d <= g).sum()), "win_rate": float((d <= g).mean()),
            "aggregate_ratio": float(d.sum() / g.sum())}
