"""Per-user feature vectors and non-localness feature selection."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .extract import Comment
from .label import UserLabel
from .text import tokenize

log = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
KL_EPSILON = 1e-9
MIN_CELL_USERS = 50


@dataclass
class UserFeatures:
    user: str
    w: Counter = field(default_factory=Counter)
    s: Counter = field(default_factory=Counter)
    tau: list[int] = field(default_factory=lambda: [0] * 24)

    def __post_init__(self):
        if len(self.tau) != 24:
            raise ValueError("tau must have 24 hourly bins")
        if any(v < 0 for v in self.tau) or any(v < 0 for v in self.w.values()) \
                or any(v < 0 for v in self.s.values()):
            raise ValueError("feature counts must be non-negative")

    @property
    def n_comments(self) -> int:
        return sum(self.tau)

    @property
    def empty(self) -> bool:
        return self.n_comments == 0

    def to_json(self) -> dict:
        return {"user": self.user, "w": dict(sorted(self.w.items())), "s": dict(sorted(self.s.items())),
                "tau": list(self.tau)}

    @classmethod
    def from_json(cls, d: dict) -> "UserFeatures":
        return cls(user=d["user"], w=Counter(d.get("w", {})), s=Counter(d.get("s", {})),
                   tau=list(d.get("tau", [0] * 24)))


def featurize_user(comments: Sequence[Comment], label_time: int | None = None, max_comments: int = 1000,
                   cutoff_days: float = 31, exclude: Iterable[str] = ()) -> UserFeatures:
    """Count words, subreddits and UTC posting hours over a user's history.

    Comments in ``exclude`` (labeling evidence) are dropped, as are comments
    posted more than ``cutoff_days`` after ``label_time``. The earliest
    ``max_comments`` remaining comments are used.
    """
    if not comments:
        raise ValueError("no comments")
    users = {c.user for c in comments}
    if len(users) != 1:
        raise ValueError(f"comments from {len(users)} users")
    excluded = set(exclude)
    kept = [c for c in comments if not (c.id and c.id in excluded)]
    if label_time is not None:
        limit = label_time + cutoff_days * SECONDS_PER_DAY
        kept = [c for c in kept if c.created_utc <= limit]
    kept.sort(key=lambda c: (c.created_utc, c.id))
    kept = kept[:max_comments]

    f = UserFeatures(user=comments[0].user)
    for c in kept:
        f.w.update(tokenize(c.body, keep_commas=False))
        f.s[c.subreddit.lower()] += 1
        f.tau[(int(c.created_utc) // 3600) % 24] += 1
    if f.empty:
        log.debug("user %s has no comments after filtering", f.user)
    return f


# ---------------------------------------------------------------- partition

def _cell_levels(lab: UserLabel) -> list[str]:
    """Cell names for a label from finest (state) to coarsest (continent)."""
    h = lab.hierarchy
    out = []
    if h.state:
        out.append(f"{h.state}|{h.country}|{h.continent}")
    out.append(f"|{h.country}|{h.continent}")
    out.append(f"||{h.continent}")
    return out


@dataclass
class LocationPartition:
    """State/country/continent cells; cells under ``min_users`` roll up a level."""

    cells: list[str]
    assignment: dict[str, int]

    def cell_of(self, user: str) -> int:
        return self.assignment[user]


def build_partition(labels: Sequence[UserLabel], min_users: int = MIN_CELL_USERS) -> LocationPartition:
    chains = {lab.user: _cell_levels(lab) for lab in labels}
    depth = {u: 0 for u in chains}
    changed = True
    while changed:
        changed = False
        sizes = Counter(chains[u][depth[u]] for u in chains)
        for u, chain in chains.items():
            cell = chain[depth[u]]
            if sizes[cell] < min_users and depth[u] < len(chain) - 1:
                depth[u] += 1
                changed = True
    names = sorted({chains[u][depth[u]] for u in chains})
    index = {n: i for i, n in enumerate(names)}
    return LocationPartition(cells=names, assignment={u: index[chains[u][depth[u]]] for u in chains})


# ---------------------------------------------------------------- non-localness

def _smooth(p: np.ndarray, eps: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    total = p.sum(axis=-1, keepdims=True)
    p = np.where(total > 0, p / np.where(total > 0, total, 1.0), 1.0 / p.shape[-1])
    p = p + eps
    return p / p.sum(axis=-1, keepdims=True)


def symmetric_kl(p, q, epsilon: float = KL_EPSILON) -> float:
    """KL(p||q) + KL(q||p) after epsilon smoothing and renormalization."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    p, q = _smooth(p, epsilon), _smooth(q, epsilon)
    return float(np.sum((p - q) * (np.log(p) - np.log(q))))


def non_localness(feature_counts, stopword_counts, stopword_weights=None, epsilon: float = KL_EPSILON) -> float:
    """Count-weighted mean symmetric KL between a feature and the stopword set.

    ``feature_counts`` is a per-cell count vector; ``stopword_counts`` holds one
    such row per stopword. Weights default to each stopword's total count.
    """
    S = np.atleast_2d(np.asarray(stopword_counts, dtype=float))
    if S.size == 0 or S.shape[0] == 0:
        raise ValueError("empty stopword set")
    w = S.sum(axis=1) if stopword_weights is None else np.asarray(stopword_weights, dtype=float)
    if w.sum() <= 0:
        raise ValueError("stopword weights sum to zero")
    return float(_nl_matrix(np.atleast_2d(np.asarray(feature_counts, dtype=float)), S, w, epsilon)[0])


def _nl_matrix(F: np.ndarray, S: np.ndarray, w: np.ndarray, epsilon: float) -> np.ndarray:
    P = _smooth(F, epsilon)
    Q = _smooth(S, epsilon)
    logP, logQ = np.log(P), np.log(Q)
    w = w / w.sum()
    out = np.zeros(P.shape[0])
    for j in np.flatnonzero(w > 0):
        out += w[j] * np.sum((P - Q[j]) * (logP - logQ[j]), axis=1)
    return np.maximum(out, 0.0)


@dataclass
class NLRanking:
    ranked: list[tuple[str, float]]
    stopwords: list[str]

    def top(self, k: int) -> list[str]:
        return [f for f, _ in self.ranked[:k]]


def rank_non_localness(counts: Mapping[str, np.ndarray], stopwords: Sequence[str],
                       epsilon: float = KL_EPSILON) -> NLRanking:
    """NL for every feature; ties go to the higher global count, then the name."""
    feats = sorted(counts)
    stops = [s for s in stopwords if s in counts and counts[s].sum() > 0]
    if not stops:
        raise ValueError("none of the stopword-like features occur in the training data")
    F = np.array([counts[f] for f in feats], dtype=float)
    S = np.array([counts[s] for s in stops], dtype=float)
    scores = np.zeros(len(feats))
    for lo in range(0, len(feats), 4096):
        scores[lo:lo + 4096] = _nl_matrix(F[lo:lo + 4096], S, S.sum(axis=1), epsilon)
    totals = F.sum(axis=1)
    order = sorted(range(len(feats)), key=lambda i: (-scores[i], -totals[i], feats[i]))
    return NLRanking(ranked=[(feats[i], float(scores[i])) for i in order], stopwords=stops)


def cell_counts(pairs: Sequence[tuple[UserFeatures, UserLabel]], partition: LocationPartition,
                modality: str) -> dict[str, np.ndarray]:
    """Per-cell occurrence counts for every feature of one modality ("w" or "s")."""
    n = len(partition.cells)
    out: dict[str, np.ndarray] = {}
    for feats, lab in pairs:
        cell = partition.cell_of(lab.user)
        for f, c in getattr(feats, modality).items():
            vec = out.get(f)
            if vec is None:
                vec = out[f] = np.zeros(n)
            vec[cell] += c
    return out


@dataclass
class FeatureSelection:
    words: list[str]
    subreddits: list[str]
    word_ranking: NLRanking
    subreddit_ranking: NLRanking


def top_subreddits(pairs: Sequence[tuple[UserFeatures, UserLabel]], n: int = 30) -> list[str]:
    total = Counter()
    for feats, _ in pairs:
        total.update(feats.s)
    return [s for s, _ in sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))[:n]]


def select_features(train: Sequence[tuple[UserFeatures, UserLabel]], stop_words: Sequence[str],
                    k_w: int, k_s: int, stop_subs: Sequence[str] | None = None,
                    min_cell_users: int = MIN_CELL_USERS) -> FeatureSelection:
    """Top ``k_w`` words and ``k_s`` subreddits by non-localness, ranked separately."""
    if k_w < 1 or k_s < 1:
        raise ValueError("k_w and k_s must be >= 1")
    partition = build_partition([lab for _, lab in train], min_cell_users)
    if stop_subs is None:
        stop_subs = top_subreddits(train)
    selections = []
    for modality, stops, k in (("w", stop_words, k_w), ("s", stop_subs, k_s)):
        counts = cell_counts(train, partition, modality)
        ranking = rank_non_localness(counts, stops)
        if k > len(ranking.ranked):
            log.warning("k=%d exceeds %d available %s features; keeping all", k, len(ranking.ranked), modality)
        selections.append((ranking.top(k), ranking))
    (words, wr), (subs, sr) = selections
    return FeatureSelection(words=words, subreddits=subs, word_ranking=wr, subreddit_ranking=sr)


# ---------------------------------------------------------------- files

def write_features(feats: Iterable[UserFeatures], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in feats:
            fh.write(json.dumps(f.to_json(), sort_keys=True) + "\n")


def read_features(path: str) -> list[UserFeatures]:
    with open(path, encoding="utf-8") as fh:
        return [UserFeatures.from_json(json.loads(ln)) for ln in fh if ln.strip()]


def write_vocab(sel: FeatureSelection, path: str) -> None:
    """One ``<modality>:<feature>\\t<score>`` line per selected feature, in rank order."""
    wscore = dict(sel.word_ranking.ranked)
    sscore = dict(sel.subreddit_ranking.ranked)
    with open(path, "w", encoding="utf-8") as fh:
        for f in sel.words:
            fh.write(f"w:{f}\t{wscore[f]!r}\n")
        for f in sel.subreddits:
            fh.write(f"s:{f}\t{sscore[f]!r}\n")


def read_vocab(path: str) -> tuple[list[str], list[str]]:
    words, subs = [], []
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if not ln.strip():
                continue
            key = ln.rstrip("\n").split("\t")[0]
            kind, _, name = key.partition(":")
            (words if kind == "w" else subs).append(name)
    return words, subs
