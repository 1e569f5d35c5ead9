"""Regenerate the bundled 200-comment labeling fixture under src/geoloc/data/label_fixture."""

import os

from geoloc.synth import generate, write_corpus
from geoloc.synth import SyntheticSpec

FIXTURE_SPEC = SyntheticSpec(
    n_cities=20, pool="global", users_per_city=8, comments_per_user=(0, 0), seed=95,
    noise_rate=0.15, small_town_rate=0.05, second_mention_rate=0.05,
    state_only_rate=0.08, country_only_rate=0.07,
)


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "src", "geoloc", "data", "label_fixture")
    corpus = generate(FIXTURE_SPEC)
    assert len(corpus.comments) == 200, len(corpus.comments)
    paths = write_corpus(corpus, out)
    print("wrote", ", ".join(sorted(paths.values())))


if __name__ == "__main__":
    main()
