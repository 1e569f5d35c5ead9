"""Seeded synthetic corpora for desk-scale checks.

A corpus has seed-submission comments in which users name their home (the
labeling substrate) and history comments carrying city-specific words,
city-correlated subreddits and a posting-hour profile shifted by longitude
group. ``generate_feature_corpus`` skips text entirely and emits feature and
label pairs whose feature geographies have a chosen number of components.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import UserFeatures
from .gazetteer import LocationHierarchy
from .geo import GeoPoint
from .label import UserLabel

BASE_TIME = 1_500_000_000
DAY = 86400

# name, state, state abbreviation, country, continent, lat, lon (bundled gazetteer coordinates)
CITIES = {
    "boston": ("Massachusetts", "ma", "United States", "North America", 42.35843, -71.05977),
    "chicago": ("Illinois", "il", "United States", "North America", 41.85003, -87.65005),
    "denver": ("Colorado", "co", "United States", "North America", 39.73915, -104.9847),
    "seattle": ("Washington", "wa", "United States", "North America", 47.60621, -122.33207),
    "atlanta": ("Georgia", "ga", "United States", "North America", 33.749, -84.38798),
    "houston": ("Texas", "tx", "United States", "North America", 29.76328, -95.36327),
    "phoenix": ("Arizona", "az", "United States", "North America", 33.44838, -112.07404),
    "miami": ("Florida", "fl", "United States", "North America", 25.77427, -80.19366),
    "minneapolis": ("Minnesota", "mn", "United States", "North America", 44.97997, -93.26384),
    "philadelphia": ("Pennsylvania", "pa", "United States", "North America", 39.95238, -75.16362),
    "san francisco": ("California", "ca", "United States", "North America", 37.77493, -122.41942),
    "nashville": ("Tennessee", "tn", "United States", "North America", 36.16589, -86.78444),
    "salt lake city": ("Utah", "ut", "United States", "North America", 40.76078, -111.89105),
    "cleveland": ("Ohio", "oh", "United States", "North America", 41.4995, -81.69541),
    "toronto": ("Ontario", "ot", "Canada", "North America", 43.70643, -79.39864),
    "vancouver": ("British Columbia", "bc", "Canada", "North America", 49.24966, -123.11934),
    "london": ("England", None, "United Kingdom", "Europe", 51.50853, -0.12574),
    "glasgow": ("Scotland", None, "United Kingdom", "Europe", 55.86515, -4.25763),
    "paris": (None, None, "France", "Europe", 48.85341, 2.3488),
    "berlin": (None, None, "Germany", "Europe", 52.52437, 13.41053),
    "madrid": (None, None, "Spain", "Europe", 40.4165, -3.70256),
    "rome": (None, None, "Italy", "Europe", 41.89193, 12.51133),
    "vienna": (None, None, "Austria", "Europe", 48.20849, 16.37208),
    "stockholm": (None, None, "Sweden", "Europe", 59.32938, 18.06871),
    "warsaw": (None, None, "Poland", "Europe", 52.22977, 21.01178),
    "dublin": (None, None, "Ireland", "Europe", 53.33306, -6.24889),
}

POOLS = {
    "us": ["boston", "chicago", "denver", "seattle", "atlanta", "houston", "phoenix", "miami",
           "minneapolis", "philadelphia", "san francisco", "nashville", "salt lake city", "cleveland"],
    "global": ["boston", "london", "chicago", "paris", "seattle", "berlin", "toronto", "madrid",
               "denver", "rome", "atlanta", "vienna", "vancouver", "stockholm", "houston", "warsaw",
               "miami", "dublin", "glasgow", "phoenix"],
    "two-continent": ["boston", "chicago", "denver", "seattle", "atlanta",
                      "london", "paris", "berlin", "madrid", "rome"],
}

COUNTRY_SURFACE = {"United States": ["usa", "us"], "United Kingdom": ["uk", "england"],
                   "Canada": ["canada"]}

STOPWORDS = ("i", "the", "and", "to", "a", "of", "it", "is", "that", "you", "in", "was", "for", "on",
             "with", "my", "this", "but", "have", "be", "they", "not", "are", "at", "so", "just")
GENERIC_SUBS = ("askreddit", "pics", "funny", "gaming", "worldnews", "todayilearned", "movies",
                "music", "news", "videos", "aww", "science", "books", "sports", "food",
                "television", "technology", "history", "space", "art", "fitness", "diy",
                "gadgets", "photography", "travel", "programming", "cooking", "nature",
                "writing", "jokes", "games", "cars")
SEED_SUBS = ("askreddit", "casualconversation", "travel")
SYLLABLES = ("ba", "ko", "ri", "mu", "te", "sa", "lo", "vi", "na", "pe", "du", "fo", "gi", "ha",
             "ju", "ze", "qua", "rin", "tol", "mek")


@dataclass
class SyntheticSpec:
    n_cities: int = 5
    users_per_city: int = 200
    vocab_size: int = 300
    toponym_rate: float = 1.0  # share of users who answer a seed submission with their home
    tau_shift_hours: int = 8  # posting-peak offset of the eastern longitude group
    group_predictiveness: float = 0.3  # chance a history comment lands in the home subreddit
    seed: int = 0
    pool: str = "us"
    local_words: int = 12  # city-specific vocabulary size
    local_rate: float = 0.15  # share of history tokens drawn from the local vocabulary
    vocab_overlap: float = 0.0  # share of local draws taken from a pool shared with a partner city
    comments_per_user: tuple[int, int] = (20, 40)
    words_per_comment: tuple[int, int] = (8, 20)
    # labeling shape: share of users giving state- or country-only answers, a coarser
    # second answer, a small-town pattern answer, plus filtered noise comments
    state_only_rate: float = 0.05
    country_only_rate: float = 0.05
    second_mention_rate: float = 0.05
    small_town_rate: float = 0.0
    noise_rate: float = 0.1
    n_seeds: int = 3

    def __post_init__(self):
        if isinstance(self.comments_per_user, list):
            self.comments_per_user = tuple(self.comments_per_user)
        if isinstance(self.words_per_comment, list):
            self.words_per_comment = tuple(self.words_per_comment)
        if self.pool not in POOLS:
            raise ValueError(f"unknown city pool {self.pool!r}; choose from {sorted(POOLS)}")
        if not 1 <= self.n_cities <= len(POOLS[self.pool]):
            raise ValueError(f"n_cities must be in [1, {len(POOLS[self.pool])}] for pool {self.pool!r}")
        for name in ("users_per_city", "vocab_size", "local_words", "n_seeds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("toponym_rate", "group_predictiveness", "local_rate", "vocab_overlap",
                     "state_only_rate", "country_only_rate", "second_mention_rate",
                     "small_town_rate", "noise_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.comments_per_user[0] < 0 or self.comments_per_user[1] < self.comments_per_user[0]:
            raise ValueError("comments_per_user must be a non-negative (lo, hi) range")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec field(s): {sorted(extra)}")
        return cls(**d)


def pseudo_word(i: int) -> str:
    """Deterministic pronounceable token for vocabulary index ``i``."""
    n = len(SYLLABLES)
    parts = [SYLLABLES[i % n], SYLLABLES[(i // n) % n], SYLLABLES[(i // (n * n)) % n]]
    return "".join(parts) + "x"


def city_hierarchy(name: str) -> LocationHierarchy:
    state, _, country, continent, _, _ = CITIES[name]
    return LocationHierarchy(country=country, continent=continent, state=state, city=name.title())


def city_point(name: str) -> GeoPoint:
    return GeoPoint(CITIES[name][4], CITIES[name][5])


def _home_answer(rng, city: str, kind: str) -> tuple[str, str]:
    """(comment body, revealed resolution) for a user's seed answer."""
    state, abbr, country, _, _, _ = CITIES[city]
    name = city.title()
    if kind == "state" and state:
        return rng.choice([f"{state} here", f"I live in {state}", f"{state}, {country}"]), "state"
    if kind in ("state", "country"):
        return rng.choice([f"{country}!", f"I am in {country}", f"Greetings from {country}"]), "country"
    forms = [f"{name}", f"I live in {name}", f"{name} here"]
    if abbr and country == "United States":
        forms += [f"{name}, {abbr.upper()}", f"{name}, {state}", f"{name}, {abbr.upper()}, USA"]
    elif state:
        forms += [f"{name}, {state}", f"{name}, {COUNTRY_SURFACE.get(country, [country])[0]}"]
    else:
        forms += [f"{name}, {country}"]
    return rng.choice(forms), "city"


def _coarser_answer(city: str) -> str:
    state, _, country, _, _, _ = CITIES[city]
    return f"{state or country} is home"


def _small_town(rng, city: str) -> tuple[str, str] | None:
    state, abbr, country, _, _, _ = CITIES[city]
    if not abbr or country != "United States":
        return None
    town = "".join(rng.choice(SYLLABLES, 3)) + "ville"
    return f"{town.title()}, {abbr.upper()}, USA", town.title()


@dataclass
class SyntheticCorpus:
    comments: list[dict]
    seeds: list[str]
    truth: list[dict]
    region_bias: list[tuple[str, str]]
    spec: SyntheticSpec = field(default_factory=SyntheticSpec)


def generate(spec: SyntheticSpec) -> SyntheticCorpus:
    rng = np.random.default_rng(spec.seed)
    cities = POOLS[spec.pool][:spec.n_cities]
    lons = np.array([CITIES[c][5] for c in cities])
    split = (lons.min() + lons.max()) / 2
    eastern = {c: CITIES[c][5] > split and len(cities) > 1 for c in cities}
    half = max(1, len(cities) // 2)
    partner = {c: cities[(i + half) % len(cities)] for i, c in enumerate(cities)}

    generic = [pseudo_word(i) for i in range(spec.vocab_size)]
    zipf = 1.0 / np.arange(1, spec.vocab_size + 1)
    zipf /= zipf.sum()
    local = {c: [c.replace(" ", "")] + [pseudo_word(10_000 + 100 * i + j) for j in range(spec.local_words - 1)]
             for i, c in enumerate(cities)}
    shared = {}
    for i, c in enumerate(cities):
        key = tuple(sorted((c, partner[c])))
        if key not in shared:
            shared[key] = [pseudo_word(50_000 + 100 * i + j) for j in range(spec.local_words)]
    sub_w = 1.0 / np.arange(1, len(GENERIC_SUBS) + 1) ** 0.8
    sub_w /= sub_w.sum()

    seeds = [f"seed{k}" for k in range(spec.n_seeds)]
    comments: list[dict] = []
    truth: list[dict] = []
    cid = 0

    def emit(user, body, sub, t, sid, reply=False):
        nonlocal cid
        comments.append({"id": f"c{cid:07d}", "user": user, "body": str(body), "subreddit": sub,
                         "created_utc": int(t), "parent_kind": "comment" if reply else "submission",
                         "submission_id": sid})
        cid += 1

    uid = 0
    for city in cities:
        state, abbr, country, continent, lat, lon = CITIES[city]
        peak = (2 - (spec.tau_shift_hours if eastern[city] else 0)) % 24
        for _ in range(spec.users_per_city):
            user = f"u{uid:05d}"
            uid += 1
            start = BASE_TIME + int(rng.integers(0, 30)) * DAY
            label_t = start + 20 * DAY + int(rng.integers(0, DAY))
            rec = {"user": user, "city": city.title(), "state": state, "country": country,
                   "continent": continent, "lat": lat, "lon": lon, "resolution": None}
            if rng.random() < spec.toponym_rate:
                r = rng.random()
                seed_sub = str(rng.choice(SEED_SUBS))
                town = _small_town(rng, city) if rng.random() < spec.small_town_rate else None
                if town is not None:
                    body, res = town[0], "city"
                    rec["city"] = town[1]
                elif r < spec.state_only_rate:
                    body, res = _home_answer(rng, city, "state")
                elif r < spec.state_only_rate + spec.country_only_rate:
                    body, res = _home_answer(rng, city, "country")
                else:
                    body, res = _home_answer(rng, city, "city")
                if res != "city":
                    rec["city"] = None
                    if res == "country":
                        rec["state"] = None
                rec["resolution"] = res
                emit(user, body, seed_sub, label_t, str(rng.choice(seeds)))
                if res == "city" and rng.random() < spec.second_mention_rate:
                    emit(user, _coarser_answer(city), seed_sub, label_t + 60, str(rng.choice(seeds)))
                if rng.random() < spec.noise_rate:
                    other = cities[int(rng.integers(len(cities)))].title()
                    noise = [(f"I was born in {other}", False), (f"Thinking of moving to {other}", False),
                             (f"{other} is great", True)]
                    body, reply = noise[int(rng.integers(len(noise)))]
                    emit(user, body, seed_sub, label_t + 120, str(rng.choice(seeds)), reply)
            truth.append(rec)

            lo, hi = spec.comments_per_user
            for k in range(int(rng.integers(lo, hi + 1))):
                n_words = int(rng.integers(spec.words_per_comment[0], spec.words_per_comment[1] + 1))
                words = []
                for _w in range(n_words):
                    u = rng.random()
                    if u < spec.local_rate:
                        pool = shared[tuple(sorted((city, partner[city])))] \
                            if rng.random() < spec.vocab_overlap else local[city]
                        words.append(pool[int(rng.integers(len(pool)))])
                    elif u < spec.local_rate + 0.35:
                        words.append(STOPWORDS[int(rng.integers(len(STOPWORDS)))])
                    else:
                        words.append(generic[int(rng.choice(spec.vocab_size, p=zipf))])
                sub = city.replace(" ", "") if rng.random() < spec.group_predictiveness \
                    else GENERIC_SUBS[int(rng.choice(len(GENERIC_SUBS), p=sub_w))]
                hour = int(np.round(rng.normal(peak, 2.0))) % 24
                t = start + int(rng.integers(0, 50)) * DAY + hour * 3600 + int(rng.integers(0, 3600))
                emit(user, " ".join(words), sub, t, f"h{int(rng.integers(1, 10 ** 6)):06d}")

    bias = sorted({(c.replace(" ", ""), CITIES[c][0] or CITIES[c][2]) for c in cities})
    return SyntheticCorpus(comments=comments, seeds=seeds, truth=truth, region_bias=bias, spec=spec)


def write_corpus(corpus: SyntheticCorpus, out_dir: str) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f) for k, f in (
        ("comments", "comments.jsonl"), ("seeds", "seeds.txt"), ("truth", "truth.jsonl"),
        ("region_bias", "region_bias.csv"), ("spec", "spec.json"))}
    with open(paths["comments"], "w", encoding="utf-8", newline="\n") as fh:
        for c in corpus.comments:
            fh.write(json.dumps(c, sort_keys=True) + "\n")
    with open(paths["seeds"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(s + "\n" for s in corpus.seeds))
    with open(paths["truth"], "w", encoding="utf-8", newline="\n") as fh:
        for t in corpus.truth:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    with open(paths["region_bias"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(f"{s},{scope}\n" for s, scope in corpus.region_bias))
    with open(paths["spec"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(asdict(corpus.spec), sort_keys=True, indent=1) + "\n")
    return paths


def generate_synthetic(spec: SyntheticSpec, out_dir: str) -> dict[str, str]:
    return write_corpus(generate(spec), out_dir)


def read_truth(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]


# ---------------------------------------------------------------- feature-level corpora

@dataclass
class FeatureCorpusSpec:
    n_sites: int = 20  # population centers users live at
    n_users: int = 400
    n_features: int = 60
    components: tuple[int, int] = (1, 4)  # per-feature number of sites in its support
    features_per_user: tuple[int, int] = (3, 8)
    noise_features: int = 1  # features drawn uniformly from the whole vocabulary
    spread: float = 0.3  # user scatter around a site (degrees)
    bbox: tuple[float, float, float, float] = (30.0, 48.0, -120.0, -72.0)
    seed: int = 0


def generate_feature_corpus(spec: FeatureCorpusSpec) -> tuple[list[tuple[UserFeatures, UserLabel]], np.ndarray]:
    """Users at scattered sites; each feature is used only at 1-4 sites.

    Returns (feature, label) pairs and the (n_sites, 2) site array.
    """
    rng = np.random.default_rng(spec.seed)
    la0, la1, lo0, lo1 = spec.bbox
    sites = np.column_stack([rng.uniform(la0, la1, spec.n_sites), rng.uniform(lo0, lo1, spec.n_sites)])
    support = []
    for _ in range(spec.n_features):
        k = int(rng.integers(spec.components[0], spec.components[1] + 1))
        support.append(set(rng.choice(spec.n_sites, size=min(k, spec.n_sites), replace=False).tolist()))
    by_site = {s: [f for f, sup in enumerate(support) if s in sup] for s in range(spec.n_sites)}
    pairs = []
    for i in range(spec.n_users):
        s = int(rng.integers(spec.n_sites))
        lat, lon = sites[s] + rng.normal(0, spec.spread, 2)
        lat = float(np.clip(lat, -89.9, 89.9))
        w = Counter()
        n = int(rng.integers(spec.features_per_user[0], spec.features_per_user[1] + 1))
        if by_site[s]:
            for f in rng.choice(by_site[s], size=n):
                w[f"f{int(f):03d}"] += int(rng.integers(1, 4))
        for f in rng.integers(0, spec.n_features, spec.noise_features):
            w[f"f{int(f):03d}"] += 1
        user = f"u{i:05d}"
        lab = UserLabel(user=user, hierarchy=LocationHierarchy(country="Synthetica", continent="Synth",
                                                               state=f"site{s:02d}", city=f"site{s:02d}"),
                        coords=GeoPoint(round(lat, 5), round(lon, 5)), evidence=[("", "synthetic")])
        pairs.append((UserFeatures(user=user, w=w), lab))
    return pairs, sites
