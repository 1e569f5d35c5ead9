"""Error metrics, cross-validation, transfer evaluation and labeling audits."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .extract import Comment
from .features import UserFeatures, select_features
from .geo import GeoPoint, haversine_array
from .label import UserLabel
from .model.estimator import MODALITIES, GeoModel, predict, train_model, user_feature_counts

log = logging.getLogger(__name__)

ACC_RADIUS_MILES = 100.0
CONTIGUOUS_US = (24.0, 50.0, -125.0, -66.0)  # lat min/max, lon min/max


@dataclass
class MetricReport:
    aed: float
    med: float
    acc_at_100: float
    n_users: int
    n_fallback: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def error_miles(pred: Sequence[GeoPoint], truth: Sequence[GeoPoint]) -> np.ndarray:
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(truth)} truths")
    if not pred:
        return np.zeros(0)
    p = np.array([x.to_tuple() for x in pred])
    t = np.array([x.to_tuple() for x in truth])
    return haversine_array(p[:, 0], p[:, 1], t[:, 0], t[:, 1])


def report_from_errors(errors, n_fallback: int = 0) -> MetricReport:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("need at least one user")
    s = np.sort(e)
    mid = len(s) // 2
    med = float(s[mid]) if len(s) % 2 else float((s[mid - 1] + s[mid]) / 2)
    return MetricReport(aed=float(e.mean()), med=med, acc_at_100=float((e < ACC_RADIUS_MILES).mean()),
                        n_users=int(e.size), n_fallback=int(n_fallback))


def metrics(pred: Sequence[GeoPoint], truth: Sequence[GeoPoint], n_fallback: int = 0) -> MetricReport:
    """AED, MED (even count: mean of the middle two) and strict ``< 100`` mile accuracy."""
    return report_from_errors(error_miles(pred, truth), n_fallback)


def kfold(users: Sequence, k: int = 5, seed: int = 0) -> list[list]:
    """Seeded shuffle, then contiguous folds whose sizes differ by at most one."""
    n = len(users)
    if k < 1 or k > n:
        raise ValueError(f"cannot split {n} users into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    bounds = np.linspace(0, n, k + 1).round().astype(int)
    return [[users[i] for i in order[bounds[j]:bounds[j + 1]]] for j in range(k)]


# ---------------------------------------------------------------- experiments

@dataclass
class ModelConfig:
    k_words: int = 2000
    k_subreddits: int = 100
    density: str = "dpmm"
    n_components: int = 5
    covariance_kind: str = "diagonal"
    n_bins_grid: tuple[int, ...] = (1, 2, 4, 6, 8)
    l2_grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0)
    temporal_folds: int = 5
    min_cell_users: int = 50
    stop_subreddits: int = 30


@dataclass
class ExperimentSpec:
    train: str = ""
    test: str = ""
    modalities: tuple[str, ...] = ("words", "subreddits")
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        if not self.modalities or set(self.modalities) - set(MODALITIES):
            raise ValueError(f"modalities must be a non-empty subset of {MODALITIES}")
        if self.folds < 2 and not self.test:
            raise ValueError("cross-validation needs folds >= 2")


@dataclass
class UserPrediction:
    user: str
    point: GeoPoint
    truth: GeoPoint
    fallback: bool
    error: float
    fold: int = -1

    def to_json(self) -> dict:
        return {"user": self.user, "lat": self.point.lat, "lon": self.point.lon, "fallback": self.fallback,
                "true_lat": self.truth.lat, "true_lon": self.truth.lon, "error_miles": self.error,
                "fold": self.fold}


@dataclass
class ExperimentResult:
    aggregate: MetricReport
    folds: list[MetricReport] = field(default_factory=list)
    predictions: list[UserPrediction] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"aggregate": self.aggregate.to_json(), "folds": [f.to_json() for f in self.folds]}
        out.update(self.extra)
        return out


def fit_fold(train: Sequence[tuple[UserFeatures, UserLabel]], stopwords: Sequence[str], modalities,
             cfg: ModelConfig, seed: int, threads: int = 1) -> GeoModel:
    """Feature selection and model fitting on one training split."""
    vocab: list[str] = []
    if "words" in modalities or "subreddits" in modalities:
        from .features import top_subreddits

        sel = select_features(train, stopwords, cfg.k_words, cfg.k_subreddits,
                              stop_subs=top_subreddits(train, cfg.stop_subreddits),
                              min_cell_users=cfg.min_cell_users)
        vocab = [f"w:{w}" for w in sel.words] + [f"s:{s}" for s in sel.subreddits]
    return train_model(train, vocab, modalities=modalities, kind=cfg.density, n_components=cfg.n_components,
                       covariance_kind=cfg.covariance_kind, seed=seed, n_bins_grid=cfg.n_bins_grid,
                       l2_grid=cfg.l2_grid, cv_folds=cfg.temporal_folds, threads=threads)


def _score(model: GeoModel, test, fold: int) -> list[UserPrediction]:
    out = []
    for feats, lab in test:
        p = predict(model, feats)
        err = float(error_miles([p.point], [lab.coords])[0])
        out.append(UserPrediction(lab.user, p.point, lab.coords, p.fallback, err, fold))
    return out


def run_cv(spec: ExperimentSpec, corpus: Sequence[tuple[UserFeatures, UserLabel]], stopwords: Sequence[str],
           cfg: ModelConfig | None = None, threads: int = 1) -> ExperimentResult:
    """k-fold evaluation; the aggregate pools user errors across folds."""
    cfg = cfg or ModelConfig()
    pairs = sorted(corpus, key=lambda p: p[1].user)
    folds = kfold(pairs, spec.folds, spec.seed)

    def one(i):
        test = folds[i]
        train = [p for j, f in enumerate(folds) if j != i for p in f]
        try:
            model = fit_fold(train, stopwords, spec.modalities, cfg, spec.seed)
        except Exception as e:
            raise RuntimeError(f"fold {i}: {e}") from e
        return _score(model, test, i)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            per_fold = list(ex.map(one, range(len(folds))))
    else:
        per_fold = [one(i) for i in range(len(folds))]
    preds = [p for fp in per_fold for p in fp]
    fold_reports = [report_from_errors([p.error for p in fp], sum(p.fallback for p in fp)) for fp in per_fold]
    agg = report_from_errors([p.error for p in preds], sum(p.fallback for p in preds))
    return ExperimentResult(aggregate=agg, folds=fold_reports, predictions=preds,
                            extra={"spec": {**asdict(spec), "modalities": list(spec.modalities)}})


def in_contiguous_us(lab: UserLabel) -> bool:
    la0, la1, lo0, lo1 = CONTIGUOUS_US
    return lab.hierarchy.country == "United States" and la0 <= lab.coords.lat <= la1 \
        and lo0 <= lab.coords.lon <= lo1


def feature_overlap(model: GeoModel, target: Sequence[UserFeatures]) -> float:
    """Share of the source vocabulary that occurs anywhere in the target corpus."""
    vocab = set(model.densities.vocab)
    if not vocab:
        return 0.0
    seen = set()
    for f in target:
        seen.update(user_feature_counts(f, model.modalities))
    return len(vocab & seen) / len(vocab)


def run_transfer(source: Sequence[tuple[UserFeatures, UserLabel]], target: Sequence[tuple[UserFeatures, UserLabel]],
                 stopwords: Sequence[str], modalities=("words", "subreddits"), scope: str = "global",
                 cfg: ModelConfig | None = None, seed: int = 0, threads: int = 1,
                 model: GeoModel | None = None) -> ExperimentResult:
    """Train on all of ``source`` and score every ``target`` user.

    Users sharing no usable feature with the source model fall back to its
    MAP point. ``scope="us"`` restricts the source to contiguous US users.
    """
    cfg = cfg or ModelConfig()
    if scope not in ("us", "global"):
        raise ValueError(f"scope must be 'us' or 'global', not {scope!r}")
    src = sorted(source, key=lambda p: p[1].user)
    if scope == "us":
        src = [p for p in src if in_contiguous_us(p[1])]
        if not src:
            raise ValueError("no contiguous-US users in the source corpus")
    if model is None:
        model = fit_fold(src, stopwords, tuple(modalities), cfg, seed, threads)
    tgt = sorted(target, key=lambda p: p[1].user)
    preds = _score(model, tgt, -1)
    agg = report_from_errors([p.error for p in preds], sum(p.fallback for p in preds))
    return ExperimentResult(aggregate=agg, predictions=preds, extra={
        "overlap_fraction": feature_overlap(model, [f for f, _ in tgt]),
        "source_users": len(src), "target_users": len(tgt), "scope": scope,
        "modalities": list(modalities), "map_point": model.fallback.to_tuple()})


# ---------------------------------------------------------------- audit

AUDIT_FIELDS = ("user", "comment_id", "comment", "extracted", "resolution", "correct", "correct_resolution")


def audit_sample(labels: Sequence[UserLabel], comments: Sequence[Comment], n: int = 500, seed: int = 0) -> list[dict]:
    """Seeded sample of labeled users with their evidence text and blank verdicts."""
    ordered = sorted(labels, key=lambda lab: lab.user)
    if n >= len(ordered):
        picked = ordered
    else:
        idx = np.sort(np.random.default_rng(seed).choice(len(ordered), n, replace=False))
        picked = [ordered[i] for i in idx]
    text = {c.id: c.body for c in comments}
    rows = []
    for lab in picked:
        cid = lab.evidence[0][0]
        rows.append({"user": lab.user, "comment_id": cid, "comment": text.get(cid, ""),
                     "extracted": lab.hierarchy.label(), "resolution": lab.resolution,
                     "correct": "", "correct_resolution": ""})
    return rows


def write_audit(rows: Sequence[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AUDIT_FIELDS)
        w.writeheader()
        w.writerows(rows)


def _verdict(v: str) -> bool | None:
    v = (v or "").strip().lower()
    if v in ("1", "y", "yes", "true", "t"):
        return True
    if v in ("0", "n", "no", "false", "f"):
        return False
    return None


def score_audit(path: str) -> dict:
    """Precision over reviewed rows; resolution accuracy over the correct ones."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    judged = [(r, _verdict(r.get("correct", ""))) for r in rows]
    judged = [(r, v) for r, v in judged if v is not None]
    if not judged:
        raise ValueError(f"{path}: no rows carry a verdict")
    correct = [r for r, v in judged if v]
    right_res = [r for r in correct if _verdict(r.get("correct_resolution", "")) is True]
    return {"n_reviewed": len(judged), "n_correct": len(correct),
            "precision": len(correct) / len(judged),
            "resolution_accuracy": (len(right_res) / len(correct)) if correct else math.nan}


# ---------------------------------------------------------------- reports

def format_table(rows: Sequence[tuple[str, MetricReport]]) -> str:
    head = ("name", "AED", "MED", "Acc@100", "users", "fallback")
    body = [(name, f"{r.aed:.1f}", f"{r.med:.1f}", f"{r.acc_at_100:.3f}", str(r.n_users), str(r.n_fallback))
            for name, r in rows]
    widths = [max(len(x[i]) for x in [head, *body]) for i in range(len(head))]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
    return "\n".join([fmt(head), *map(fmt, body)])


def write_report(result: ExperimentResult | MetricReport, path: str, errors_csv: str | None = None) -> None:
    """JSON report at ``path``, an aligned table at ``path + '.txt'``, optional per-user CSV."""
    if isinstance(result, MetricReport):
        payload, rows, preds = {"aggregate": result.to_json()}, [("all", result)], []
    else:
        payload = result.to_json()
        rows = [(f"fold{i}", r) for i, r in enumerate(result.folds)] + [("all", result.aggregate)]
        preds = result.predictions
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(path + ".txt", "w", encoding="utf-8") as fh:
        fh.write(format_table(rows) + "\n")
    if errors_csv and preds:
        with open(errors_csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user", "fold", "lat", "lon", "true_lat", "true_lon", "error_miles", "fallback"])
            for p in preds:
                w.writerow([p.user, p.fold, p.point.lat, p.point.lon, p.truth.lat, p.truth.lon,
                            repr(p.error), int(p.fallback)])
