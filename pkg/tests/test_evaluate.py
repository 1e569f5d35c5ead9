import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geoloc.evaluate import (AUDIT_FIELDS, ExperimentSpec, ModelConfig, audit_sample, error_miles,
                             feature_overlap, format_table, in_contiguous_us, kfold, metrics, report_from_errors,
                             run_cv, run_transfer, score_audit, write_audit, write_report)
from geoloc.extract import Comment
from geoloc.geo import GeoPoint, haversine_miles
from geoloc.model.density import MixtureDensity
from geoloc.model.estimator import CandidateSet, FeatureDensities, GeoModel
from tests.test_estimator import corpus, lab, uf

SMALL = ModelConfig(k_words=5, k_subreddits=3, min_cell_users=5, stop_subreddits=2, n_components=3)
STOP = ["pizza"]


def test_metrics_worked_example():
    r = report_from_errors([0, 50, 150, 400])
    assert (r.aed, r.med, r.acc_at_100, r.n_users) == (150.0, 100.0, 0.5, 4)
    assert report_from_errors([100.0]).acc_at_100 == 0.0  # strict
    with pytest.raises(ValueError):
        report_from_errors([])


def test_metrics_from_points():
    p = [GeoPoint(40, -75), GeoPoint(42, -71)]
    t = [GeoPoint(40, -75), GeoPoint(34, -118)]
    r = metrics(p, t)
    assert r.aed == pytest.approx(haversine_miles(p[1], t[1]) / 2)
    with pytest.raises(ValueError):
        error_miles(p, t[:1])


@given(st.lists(st.floats(0, 12000), min_size=1, max_size=50))
def test_metric_bounds(errs):
    r = report_from_errors(errs)
    assert min(errs) <= r.med <= max(errs)
    assert 0 <= r.acc_at_100 <= 1
    assert r.aed == pytest.approx(np.mean(errs))


@given(st.integers(1, 60), st.integers(1, 10), st.integers(0, 99))
def test_kfold_partition(n, k, seed):
    if k > n:
        with pytest.raises(ValueError):
            kfold(list(range(n)), k, seed)
        return
    folds = kfold(list(range(n)), k, seed)
    assert sorted(x for f in folds for x in f) == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert folds == kfold(list(range(n)), k, seed)


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(modalities=("pixels",))
    with pytest.raises(ValueError):
        ExperimentSpec(folds=1)
    assert ExperimentSpec(folds=1, test="x").folds == 1


def test_run_cv_pools_errors():
    spec = ExperimentSpec(modalities=("words", "subreddits"), folds=3, seed=1)
    res = run_cv(spec, corpus(60), STOP, SMALL)
    errs = [p.error for p in res.predictions]
    assert len(errs) == 60 and len({p.user for p in res.predictions}) == 60
    assert res.aggregate.aed == pytest.approx(np.mean(errs))
    assert res.aggregate.aed == pytest.approx(sum(f.aed * f.n_users for f in res.folds) / 60)
    assert res.aggregate.acc_at_100 > 0.9
    again = run_cv(spec, corpus(60), STOP, SMALL)
    assert [p.error for p in again.predictions] == errs


def test_transfer_overlap_half():
    dens = {k: MixtureDensity([1.0], [[40, -75]], [[1, 1]]) for k in ("w:a", "w:b", "w:c", "w:d")}
    model = GeoModel(FeatureDensities(dens, {k: 0.25 for k in dens}), CandidateSet([GeoPoint(40, -75)],
                     np.array([1.0])), GeoPoint(40, -75))
    target = [uf("x", {"a": 1, "zz": 2}), uf("y", {"b": 5})]
    assert feature_overlap(model, target) == 0.5
    pairs = [(f, lab(f.user, (40, -75))) for f in target + [uf("z", {"nothing": 1})]]
    res = run_transfer([], pairs, STOP, model=model)
    assert res.extra["overlap_fraction"] == 0.5
    assert res.aggregate.n_fallback == 1 and res.aggregate.aed == pytest.approx(0.0)


def test_transfer_scope():
    src = corpus(40)
    assert all(in_contiguous_us(l) for _, l in src)
    res = run_transfer(src, corpus(10, seed=1), STOP, scope="us", cfg=SMALL)
    assert res.extra["source_users"] == 40
    with pytest.raises(ValueError):
        run_transfer(src, src, STOP, scope="mars", cfg=SMALL)


def test_audit_round_trip(tmp_path):
    labels = [lab(f"u{i:03d}", (40, -75)) for i in range(600)]
    comments = [Comment(user="u000", body="philly here", subreddit="x", created_utc=5, id="c")]
    rows = audit_sample(labels, comments, n=500, seed=3)
    assert len(rows) == 500 and rows == audit_sample(labels, comments, n=500, seed=3)
    for i, r in enumerate(rows):
        r["correct"] = "y" if i < 483 else "n"
        r["correct_resolution"] = "y" if i < 450 else "n"
    path = str(tmp_path / "a.csv")
    write_audit(rows, path)
    s = score_audit(path)
    assert s["precision"] == pytest.approx(0.966)
    assert s["resolution_accuracy"] == pytest.approx(450 / 483)
    with open(path, newline="") as fh:
        assert tuple(next(csv.reader(fh))) == AUDIT_FIELDS


def test_score_audit_requires_verdicts(tmp_path):
    path = str(tmp_path / "a.csv")
    write_audit([{k: "" for k in AUDIT_FIELDS}], path)
    with pytest.raises(ValueError):
        score_audit(path)


def test_write_report(tmp_path):
    spec = ExperimentSpec(folds=2)
    res = run_cv(spec, corpus(20), STOP, SMALL)
    out = str(tmp_path / "r.json")
    write_report(res, out, str(tmp_path / "e.csv"))
    data = json.load(open(out))
    assert data["aggregate"]["n_users"] == 20 and len(data["folds"]) == 2
    assert "Acc@100" in open(out + ".txt").read()
    assert len(open(tmp_path / "e.csv").read().splitlines()) == 21
    assert "AED" in format_table([("x", res.aggregate)])
