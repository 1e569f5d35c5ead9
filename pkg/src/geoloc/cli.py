"""Command line entry point: ``geoloc <command> ...``.

Exit codes: 0 success, 2 invalid input or arguments, 1 other failures.
Set ``GEOLOC_LOG`` (DEBUG, INFO, WARNING, ERROR) for log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import evaluate as ev
from .config import load_crossval_config, load_mapping
from .corpus import IngestReport, load_comments
from .features import read_features, select_features, top_subreddits, write_features, write_vocab
from .gazetteer import (AbbreviationTable, Gazetteer, LoadReport, data_path, default_abbreviations,
                        default_gazetteer, filter_common_words, gazetteer_from_dict, gazetteer_to_dict,
                        load_abbreviations, load_gazetteer, load_word_list)
from .label import LabelStats, label_corpus, load_region_bias, load_seeds, read_labels, write_labels
from .model.estimator import MODALITIES, train_model
from .persist import ModelFileError, load_model, save_model
from .pipeline import featurize_corpus, join, load_corpus_ref, predict_all, read_points, write_predictions
from .synth import SyntheticSpec, generate_synthetic

log = logging.getLogger("geoloc")


class UsageError(ValueError):
    pass


def _setup_logging() -> None:
    level = os.environ.get("GEOLOC_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _modalities(text: str) -> tuple[str, ...]:
    mods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in mods if m not in MODALITIES]
    if not mods or bad:
        raise argparse.ArgumentTypeError(f"modalities must be a comma list from {','.join(MODALITIES)}")
    return mods


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _stopwords(path: str | None) -> list[str]:
    return load_word_list(path or data_path("stopwords.txt"))


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_gazetteer_arg(path: str | None) -> tuple[Gazetteer, AbbreviationTable]:
    if not path:
        return default_gazetteer(), default_abbreviations()
    with open(path, encoding="utf-8") as fh:
        g, a = gazetteer_from_dict(json.load(fh))
    return g, (a if a else default_abbreviations())


# ---------------------------------------------------------------- commands

def cmd_gazetteer_build(args) -> None:
    rep = LoadReport()
    g = load_gazetteer(args.geonames, min_population=args.min_pop, report=rep)
    removed = []
    if args.common_words:
        g, removed = filter_common_words(g, load_word_list(args.common_words))
    a = load_abbreviations(args.abbrevs) if args.abbrevs else default_abbreviations()
    _write_json(gazetteer_to_dict(g, a), args.out)
    print(f"rows={rep.rows} kept={rep.kept} below_population={rep.below_population} "
          f"malformed={len(rep.malformed)} removed_common={len(removed)} entries={len(g.entries)}")


def cmd_label(args) -> None:
    g, a = _load_gazetteer_arg(args.gazetteer)
    bias = load_region_bias(args.region_bias) if args.region_bias else {}
    ingest = IngestReport()
    comments = load_comments(args.comments, ingest, sidecar=args.comments + ".skipped" if args.skip_log else None)
    stats = LabelStats()
    labels = label_corpus(comments, load_seeds(args.seeds), g, a, bias, stats=stats)
    write_labels(labels, args.out)
    summary = {**stats.to_json(), "lines_skipped": ingest.skipped}
    _write_json(summary, args.out + ".stats.json")
    if args.audit_sample:
        rows = ev.audit_sample(labels, comments, args.audit_sample, args.seed)
        ev.write_audit(rows, args.out + ".audit.csv")
    print(json.dumps(summary, sort_keys=True))


def cmd_featurize(args) -> None:
    comments = load_comments(args.comments)
    labels = read_labels(args.labels)
    feats = featurize_corpus(comments, labels, args.max_comments, args.cutoff_days, args.exclude_seed_comments)
    write_features(feats, args.out)
    print(f"users={len(feats)} empty={sum(f.empty for f in feats)}")


def cmd_select_features(args) -> None:
    pairs = join(read_features(args.features), read_labels(args.labels))
    if not pairs:
        raise UsageError("no users carry both features and labels")
    stop_subs = load_word_list(args.stop_subreddits) if args.stop_subreddits else top_subreddits(pairs)
    sel = select_features(pairs, _stopwords(args.stopwords), args.k_words, args.k_subreddits,
                          stop_subs=stop_subs, min_cell_users=args.min_cell_users)
    write_vocab(sel, args.out)
    print(f"words={len(sel.words)} subreddits={len(sel.subreddits)}")


def _read_vocab_keys(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.split("\t")[0] for ln in fh.read().splitlines() if ln.strip()]


def cmd_train(args) -> None:
    pairs = join(read_features(args.features), read_labels(args.labels))
    if not pairs:
        raise UsageError("no users carry both features and labels")
    t = time.time()
    model = train_model(pairs, _read_vocab_keys(args.vocab), modalities=args.modalities, kind=args.density,
                        n_components=args.components, covariance_kind=args.covariance, seed=args.seed,
                        threads=args.threads)
    save_model(model, args.out)
    n_fb = sum(v is None for v in model.densities.densities.values())
    print(f"users={len(pairs)} features={len(model.densities.prior)} low_support={n_fb} "
          f"candidates={len(model.candidates)} seconds={time.time() - t:.1f}")


def cmd_predict(args) -> None:
    model = load_model(args.model)
    preds = predict_all(model, read_features(args.features))
    write_predictions(preds, args.out)
    print(f"users={len(preds)} fallback={sum(p.fallback for _, p in preds)}")


def cmd_evaluate(args) -> None:
    pred, truth = read_points(args.pred), read_points(args.truth)
    users = sorted(set(pred) & set(truth))
    if not users:
        raise UsageError("predictions and truth share no users")
    if len(users) < len(pred):
        log.warning("%d predicted users have no truth and are ignored", len(pred) - len(users))
    rep = ev.metrics([pred[u][0] for u in users], [truth[u][0] for u in users],
                     n_fallback=sum(pred[u][1] for u in users))
    ev.write_report(rep, args.out)
    print(ev.format_table([("all", rep)]))


def cmd_crossval(args) -> None:
    cfg = load_crossval_config(args.config, args.folds, args.seed)
    pairs = join(read_features(cfg.features), read_labels(cfg.labels))
    res = ev.run_cv(cfg.experiment, pairs, _stopwords(cfg.stopwords), cfg.model, threads=args.threads)
    ev.write_report(res, args.out, args.errors_csv)
    print(ev.format_table([(f"fold{i}", r) for i, r in enumerate(res.folds)] + [("all", res.aggregate)]))


def cmd_transfer(args) -> None:
    cfg = ev.ModelConfig()
    if args.config:
        from .config import _build

        cfg = _build(ev.ModelConfig, load_mapping(args.config).get("model", {}) or {}, "model")
    res = ev.run_transfer(load_corpus_ref(args.train_corpus), load_corpus_ref(args.test_corpus),
                          _stopwords(args.stopwords), args.modalities, args.scope, cfg, args.seed, args.threads)
    ev.write_report(res, args.out, args.errors_csv)
    print(ev.format_table([("transfer", res.aggregate)]))
    print(f"overlap_fraction={res.extra['overlap_fraction']:.4f}")


def cmd_synth(args) -> None:
    d = load_mapping(args.spec) if args.spec else {}
    if args.seed is not None:
        d["seed"] = args.seed
    paths = generate_synthetic(SyntheticSpec.from_dict(d), args.out_dir)
    print(json.dumps(paths, sort_keys=True))


def cmd_score_audit(args) -> None:
    print(json.dumps(ev.score_audit(args.audit), sort_keys=True))


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoloc", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1,
                   help="worker threads for per-feature fits and folds (results do not depend on it)")
    sub = p.add_subparsers(dest="command", required=True)

    gz = sub.add_parser("gazetteer", help="gazetteer utilities")
    gzs = gz.add_subparsers(dest="gazetteer_command", required=True)
    b = gzs.add_parser("build", help="filter a GeoNames extract into a gazetteer snapshot")
    b.add_argument("--geonames", required=True)
    b.add_argument("--common-words")
    b.add_argument("--abbrevs")
    b.add_argument("--min-pop", type=int, default=15000)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_gazetteer_build)

    s = sub.add_parser("label", help="label users from seed-submission comments")
    s.add_argument("--comments", required=True)
    s.add_argument("--seeds", required=True)
    s.add_argument("--gazetteer", help="snapshot from 'gazetteer build' (bundled data when omitted)")
    s.add_argument("--region-bias")
    s.add_argument("--out", required=True)
    s.add_argument("--audit-sample", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--skip-log", action="store_true", help="write skipped input lines next to the corpus")
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("featurize", help="per-user word, subreddit and posting-hour counts")
    s.add_argument("--comments", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--max-comments", type=_positive, default=1000)
    s.add_argument("--cutoff-days", type=float, default=31)
    s.add_argument("--exclude-seed-comments", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("select-features", help="rank features by non-localness")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--k-words", type=_positive, required=True)
    s.add_argument("--k-subreddits", type=_positive, required=True)
    s.add_argument("--stopwords")
    s.add_argument("--stop-subreddits", help="file of reference subreddits (top 30 by activity when omitted)")
    s.add_argument("--min-cell-users", type=_positive, default=50)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select_features)

    s = sub.add_parser("train", help="fit feature densities and the temporal model")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--vocab", required=True)
    s.add_argument("--modalities", type=_modalities, default=("words", "subreddits"))
    s.add_argument("--density", choices=("dpmm", "gmm"), default="dpmm")
    s.add_argument("--components", type=_positive, default=5)
    s.add_argument("--covariance", choices=("diagonal", "spherical"), default="diagonal")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="most probable location per user")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="AED, MED and Acc@100 of predictions against truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("crossval", help="k-fold experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--folds", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--errors-csv")
    s.set_defaults(func=cmd_crossval)

    s = sub.add_parser("transfer", help="train on one corpus, evaluate on another")
    s.add_argument("--train-corpus", required=True)
    s.add_argument("--test-corpus", required=True)
    s.add_argument("--modalities", type=_modalities, default=("words", "subreddits"))
    s.add_argument("--scope", choices=("us", "global"), default="global")
    s.add_argument("--stopwords")
    s.add_argument("--config", help="config file whose 'model' section sets model options")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--errors-csv")
    s.set_defaults(func=cmd_transfer)

    s = sub.add_parser("synth", help="write a seeded synthetic corpus")
    s.add_argument("--spec", help="YAML/JSON file of generator settings (defaults when omitted)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("score-audit", help="precision and resolution accuracy from a reviewed audit file")
    s.add_argument("--audit", required=True)
    s.set_defaults(func=cmd_score_audit)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, KeyError, TypeError, FileNotFoundError, ModelFileError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
