"""Cross-validated AED/MED/Acc@100 with and without posting-hour features."""

import argparse

from geoloc.evaluate import format_table
from geoloc.experiments import SINGLE_TIMEZONE, TWO_CONTINENT, synthetic_pairs, temporal_ablation
from geoloc.gazetteer import data_path, default_abbreviations, default_gazetteer, load_word_list


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--folds", type=int, default=5)
    args = p.parse_args()
    g, a = default_gazetteer(), default_abbreviations()
    stop = load_word_list(data_path("stopwords.txt"))
    rows = []
    for name, spec in (("two-continent", TWO_CONTINENT), ("single-timezone", SINGLE_TIMEZONE)):
        res = temporal_ablation(synthetic_pairs(spec, g, a), stop, folds=args.folds)
        rows += [(f"{name} {k} temporal", r.aggregate) for k, r in res.items()]
    print(format_table(rows))


if __name__ == "__main__":
    main()
