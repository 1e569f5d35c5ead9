"""Generative location estimator.

    score(c) = P(c | tau) * sum_u ||u|| P(c | u) P(u)

over a discrete candidate set C, with P(c|u) a mixture density per selected
feature, P(u) the feature's relative frequency over the selected vocabulary
and P(c|tau) the probability of c's longitude bin under the posting-hour
model. Feature keys are namespaced: ``w:<token>`` and ``s:<subreddit>``.
"""

from __future__ import annotations

import logging
import math
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ..features import UserFeatures
from ..geo import GeoPoint
from ..label import UserLabel
from .density import MixtureDensity, fit_density, fit_dpmm, log_density_points
from .temporal import DEFAULT_BIN_GRID, DEFAULT_L2_GRID, TemporalModel, fit_temporal

log = logging.getLogger(__name__)

MODALITIES = ("words", "subreddits", "temporal")
GRID_DEGREES = 0.1
MIN_SUPPORT = 3


def feature_key(modality: str, name: str) -> str:
    return f"{'w' if modality in ('w', 'words') else 's'}:{name}"


def user_feature_counts(f: UserFeatures, modalities: Sequence[str] = ("words", "subreddits")) -> Counter:
    out = Counter()
    if "words" in modalities:
        out.update({f"w:{k}": v for k, v in f.w.items() if v > 0})
    if "subreddits" in modalities:
        out.update({f"s:{k}": v for k, v in f.s.items() if v > 0})
    return out


# ---------------------------------------------------------------- candidates

@dataclass
class CandidateSet:
    points: list[GeoPoint]
    weights: np.ndarray
    bins: np.ndarray | None = None

    def __post_init__(self):
        if not self.points:
            raise ValueError("candidate set is empty")
        self.weights = np.asarray(self.weights, dtype=float)
        self.lat = np.array([p.lat for p in self.points])
        self.lon = np.array([p.lon for p in self.points])
        if self.bins is None:
            self.bins = np.zeros(len(self.points), dtype=int)
        self.bins = np.asarray(self.bins, dtype=int)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def coords(self) -> np.ndarray:
        return np.column_stack([self.lat, self.lon])


def grid_key(p: GeoPoint, step: float = GRID_DEGREES) -> tuple[int, int]:
    return (int(math.floor(p.lat / step + 0.5)), int(math.floor(p.lon / step + 0.5)))


def build_candidates(labels: Sequence[UserLabel], step: float = GRID_DEGREES) -> CandidateSet:
    """Training coordinates deduplicated on a ``step``-degree grid.

    A cell is represented by its most common exact coordinate (ties: the
    smallest) and weighted by its number of users.
    """
    if not labels:
        raise ValueError("need at least one label")
    cells: dict[tuple[int, int], Counter] = {}
    for lab in labels:
        cells.setdefault(grid_key(lab.coords, step), Counter())[lab.coords.to_tuple()] += 1
    points, weights = [], []
    for key in sorted(cells):
        counter = cells[key]
        rep = min(counter, key=lambda c: (-counter[c], c))
        points.append(GeoPoint(*rep))
        weights.append(sum(counter.values()))
    return CandidateSet(points, np.array(weights, dtype=float))


# ---------------------------------------------------------------- densities

@dataclass
class FeatureDensities:
    densities: dict[str, MixtureDensity | None]  # None marks a fallback feature
    prior: dict[str, float]
    support: dict[str, int] = field(default_factory=dict)

    @property
    def vocab(self) -> list[str]:
        return sorted(self.prior)


def _feature_seed(seed: int, key: str) -> int:
    return (zlib.crc32(key.encode("utf-8")) ^ (seed * 2654435761)) & 0xFFFFFFFF


def fit_feature_densities(train: Sequence[tuple[UserFeatures, UserLabel]], vocab: Sequence[str],
                          kind: str = "dpmm", n_components: int = 5, covariance_kind: str = "diagonal",
                          seed: int = 0, min_support: int = MIN_SUPPORT, threads: int = 1) -> FeatureDensities:
    """One mixture per vocabulary feature over the coordinates of users who use it.

    Each user contributes one point per feature regardless of count. P(u) is
    the feature's share of all vocabulary occurrences in training. Features
    with fewer than ``min_support`` users get no density.
    """
    if not vocab:
        raise ValueError("empty vocabulary")
    vocab_set = set(vocab)
    points: dict[str, list[tuple[float, float]]] = {k: [] for k in vocab}
    totals = Counter()
    for feats, lab in train:
        for k, c in user_feature_counts(feats).items():
            if k in vocab_set:
                points[k].append(lab.coords.to_tuple())
                totals[k] += c
    grand = sum(totals.values())
    if grand == 0:
        prior = {k: 1.0 / len(vocab_set) for k in vocab_set}
    else:
        prior = {k: totals[k] / grand for k in vocab_set}

    def fit(k):
        pts = points[k]
        if len(pts) < min_support:
            return k, None
        return k, fit_density(np.array(pts), kind, n_components, covariance_kind, _feature_seed(seed, k))

    keys = sorted(vocab_set)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            fitted = dict(ex.map(fit, keys))
    else:
        fitted = dict(map(fit, keys))
    return FeatureDensities(densities=fitted, prior=prior, support={k: len(points[k]) for k in keys})


# ---------------------------------------------------------------- model

@dataclass
class GeoModel:
    densities: FeatureDensities
    candidates: CandidateSet
    fallback: GeoPoint
    temporal: TemporalModel | None = None
    modalities: tuple[str, ...] = ("words", "subreddits")
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        if self.temporal is not None:
            self.candidates.bins = self.temporal.bin_of(self.candidates.lon)

    def log_density_row(self, key: str) -> np.ndarray:
        """log P(c|u) over all candidates for one feature (cached)."""
        row = self._cache.get(key)
        if row is None:
            row = log_density_points(self.densities.densities[key], self.candidates.coords)
            self._cache[key] = row
        return row

    def usable_features(self, user: UserFeatures) -> dict[str, int]:
        dens = self.densities.densities
        return {k: c for k, c in sorted(user_feature_counts(user, self.modalities).items())
                if dens.get(k) is not None}


@dataclass(frozen=True)
class Prediction:
    point: GeoPoint
    log_score: float
    fallback: bool = False
    index: int = -1


def log_scores(model: GeoModel, user: UserFeatures, use_temporal: bool = True) -> np.ndarray | None:
    """log of the unnormalized posterior at every candidate; None without usable features."""
    feats = model.usable_features(user)
    if not feats:
        return None
    keys = list(feats)
    # log(||u|| P(c|u) P(u)) per feature and candidate, summed in log space per candidate
    terms = np.vstack([model.log_density_row(k) for k in keys])
    terms += np.log([feats[k] * model.densities.prior[k] for k in keys])[:, None]
    out = logsumexp(terms, axis=0)
    if use_temporal and model.temporal is not None and "temporal" in model.modalities:
        out = out + model.temporal.log_proba(user.tau)[0][model.candidates.bins]
    return out


def argmax_candidate(scores: np.ndarray, weights: np.ndarray) -> int:
    """Highest score; ties to the higher candidate weight, then the lower index."""
    best = np.flatnonzero(scores == scores.max())
    if len(best) == 1:
        return int(best[0])
    return int(min(best, key=lambda i: (-weights[i], i)))


def predict(model: GeoModel, user: UserFeatures, use_temporal: bool = True) -> Prediction:
    s = log_scores(model, user, use_temporal)
    if s is None:
        return Prediction(model.fallback, float("nan"), fallback=True)
    i = argmax_candidate(s, model.candidates.weights)
    return Prediction(model.candidates.points[i], float(s[i]), index=i)


def baseline_map(labels: Sequence[UserLabel], seed: int = 0, candidates: CandidateSet | None = None,
                 n_components: int = 5) -> GeoPoint:
    """Candidate with the highest density under a DPMM fit to all training locations."""
    cands = candidates or build_candidates(labels)
    m = fit_dpmm(np.array([lab.coords.to_tuple() for lab in labels]), n_components, seed=seed)
    dens = log_density_points(m, cands.coords)
    return cands.points[argmax_candidate(dens, cands.weights)]


def train_model(train: Sequence[tuple[UserFeatures, UserLabel]], vocab: Sequence[str],
                modalities: Sequence[str] = ("words", "subreddits"), kind: str = "dpmm",
                n_components: int = 5, covariance_kind: str = "diagonal", seed: int = 0,
                n_bins_grid=DEFAULT_BIN_GRID, l2_grid=DEFAULT_L2_GRID, cv_folds: int = 5,
                threads: int = 1) -> GeoModel:
    """Fit densities (and the temporal model when requested) on training pairs.

    ``vocab`` holds namespaced keys; keys of disabled modalities are ignored.
    """
    unknown = set(modalities) - set(MODALITIES)
    if unknown or not modalities:
        raise ValueError(f"bad modalities {sorted(modalities)}")
    prefixes = tuple(p for m, p in (("words", "w:"), ("subreddits", "s:")) if m in modalities)
    vocab = [k for k in vocab if k.startswith(prefixes)] if prefixes else []
    labels = [lab for _, lab in train]
    candidates = build_candidates(labels)
    if vocab:
        densities = fit_feature_densities(train, vocab, kind, n_components, covariance_kind, seed,
                                          threads=threads)
    else:
        densities = FeatureDensities({}, {})
    temporal = None
    if "temporal" in modalities:
        temporal = fit_temporal(
            [f.tau for f, _ in train], [lab.coords.to_tuple() for lab in labels],
            candidates.coords, candidates.weights, n_bins_grid, l2_grid, cv_folds, seed)
    fallback = baseline_map(labels, seed, candidates, n_components)
    return GeoModel(densities=densities, candidates=candidates, fallback=fallback, temporal=temporal,
                    modalities=tuple(modalities))
