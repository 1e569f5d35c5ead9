"""Stage glue shared by the CLI and the experiment scripts."""

from __future__ import annotations

import json
import logging
import os
from typing import Sequence

from .corpus import group_by_user
from .extract import Comment
from .features import UserFeatures, featurize_user, read_features
from .geo import GeoPoint
from .label import UserLabel, read_labels
from .model.estimator import GeoModel, Prediction, predict

log = logging.getLogger(__name__)


def featurize_corpus(comments: Sequence[Comment], labels: Sequence[UserLabel], max_comments: int = 1000,
                     cutoff_days: float = 31, exclude_seed_comments: bool = True) -> list[UserFeatures]:
    """Features for every labeled user with history, in user order."""
    by_user = group_by_user(comments)
    out = []
    for lab in sorted(labels, key=lambda x: x.user):
        history = by_user.get(lab.user)
        if not history:
            log.debug("labeled user %s has no comments", lab.user)
            continue
        exclude = {cid for cid, _ in lab.evidence} if exclude_seed_comments else ()
        out.append(featurize_user(history, label_time=lab.label_time or None, max_comments=max_comments,
                                  cutoff_days=cutoff_days, exclude=exclude))
    return out


def join(features: Sequence[UserFeatures], labels: Sequence[UserLabel]) -> list[tuple[UserFeatures, UserLabel]]:
    """(features, label) pairs for users present in both, sorted by user; empty users dropped."""
    lab = {x.user: x for x in labels}
    pairs = [(f, lab[f.user]) for f in features if f.user in lab and not f.empty]
    return sorted(pairs, key=lambda p: p[0].user)


def load_pairs(features_path: str, labels_path: str) -> list[tuple[UserFeatures, UserLabel]]:
    return join(read_features(features_path), read_labels(labels_path))


def load_corpus_ref(ref: str) -> list[tuple[UserFeatures, UserLabel]]:
    """A featurized corpus given as a directory (features.jsonl + labels.jsonl) or a manifest file."""
    if os.path.isdir(ref):
        return load_pairs(os.path.join(ref, "features.jsonl"), os.path.join(ref, "labels.jsonl"))
    from .config import load_mapping

    m = load_mapping(ref)
    base = os.path.dirname(os.path.abspath(ref))
    missing = [k for k in ("features", "labels") if k not in m]
    if missing:
        raise ValueError(f"{ref}: corpus manifest lacks {', '.join(missing)}")
    return load_pairs(os.path.join(base, m["features"]), os.path.join(base, m["labels"]))


def predict_all(model: GeoModel, features: Sequence[UserFeatures]) -> list[tuple[str, Prediction]]:
    return [(f.user, predict(model, f)) for f in features]


def write_predictions(preds: Sequence[tuple[str, Prediction]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user, p in preds:
            score = None if p.fallback else p.log_score
            fh.write(json.dumps({"user": user, "lat": p.point.lat, "lon": p.point.lon,
                                 "fallback": p.fallback, "log_score": score}, sort_keys=True) + "\n")


def read_points(path: str) -> dict[str, tuple[GeoPoint, bool]]:
    """user -> (point, fallback flag) from a predictions or labels/truth JSONL file."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if ln.strip():
                d = json.loads(ln)
                out[d["user"]] = (GeoPoint(d["lat"], d["lon"]), bool(d.get("fallback", False)))
    return out


def labeled_pairs(comments: Sequence[Comment], seeds, g, a, bias=None, max_comments: int = 1000,
                  cutoff_days: float = 31) -> list[tuple[UserFeatures, UserLabel]]:
    """Label, featurize and join in one pass (in-memory version of the CLI chain)."""
    from .label import label_corpus

    labels = label_corpus(comments, set(seeds), g, a, bias)
    return join(featurize_corpus(comments, labels, max_comments, cutoff_days), labels)
