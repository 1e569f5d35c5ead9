"""Regenerate the bundled reference data under src/geoloc/data/.

Sources (fetched through pip, not needed at runtime):
  geonamescache  -- GeoNames cities15000 extract, countries, US states
  wordfreq       -- English word frequency ranks

    pip download geonamescache --no-deps -d /tmp/gnc && unzip -o /tmp/gnc/*.whl -d /tmp/gnc/x
    pip install wordfreq
    python scripts/build_data.py --geonamescache /tmp/gnc/x/geonamescache/data
"""

import argparse
import gzip
import json
import os
import re

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "geoloc", "data")

COUNTRY_ALTS = {
    "US": "united states of america,america,usa,us",
    "GB": "great britain,britain,uk",
    "AE": "uae",
}

# well-known city nicknames missing from the packaged alternate names
CITY_ALIASES = {
    5128581: ["NYC"],  # New York City
    4560349: ["Philly"],  # Philadelphia
    4335045: ["NOLA"],  # New Orleans
}

# GeoNames admin1 codes for countries whose codes are not self-describing
ADMIN1_EXTRA = {
    "CA": {"01": "Alberta", "02": "British Columbia", "03": "Manitoba", "04": "New Brunswick",
           "05": "Newfoundland and Labrador", "07": "Nova Scotia", "08": "Ontario",
           "09": "Prince Edward Island", "10": "Quebec", "11": "Saskatchewan", "12": "Yukon",
           "13": "Northwest Territories", "14": "Nunavut"},
    "GB": {"ENG": "England", "SCT": "Scotland", "WLS": "Wales", "NIR": "Northern Ireland"},
    "AU": {"01": "Australian Capital Territory", "02": "New South Wales", "03": "Northern Territory",
           "04": "Queensland", "05": "South Australia", "06": "Tasmania", "07": "Victoria",
           "08": "Western Australia"},
}

# dictionary words that are also large-city names; they stay in the common list
KEEP_AS_COMMON = {
    "nice", "mobile", "split", "reading", "bath", "orange", "mission", "university", "union",
    "independence", "commerce", "victoria", "march", "may", "deal", "hope", "temple", "ocean",
    "surprise", "paradise", "enterprise", "liberty", "columbus", "gap", "sale", "bay",
}

_ASCII = re.compile(r"^[A-Za-z][A-Za-z .'\-]{3,}$")


def build_countries(src):
    countries = json.load(open(os.path.join(src, "countries.json")))
    continents = json.load(open(os.path.join(src, "continents.json")))
    names = {k: v["name"] for k, v in continents.items()}
    rows = []
    for iso, c in sorted(countries.items()):
        rows.append((iso, c["name"], names[c["continentcode"]], COUNTRY_ALTS.get(iso, "")))
    with open(os.path.join(DATA, "countries.tsv"), "w") as fh:
        fh.write("# iso2\tname\tcontinent\talternate names (lowercase, comma-joined)\n")
        for r in rows:
            fh.write("\t".join(r) + "\n")
    return {r[0]: r[1] for r in rows}


def build_admin1(src):
    rows = {}
    for s in json.load(open(os.path.join(src, "us_states.json"))).values():
        rows[f"US.{s['code']}"] = s["name"]
    for cc, table in ADMIN1_EXTRA.items():
        for code, name in table.items():
            rows[f"{cc}.{code}"] = name
    with open(os.path.join(DATA, "admin1.tsv"), "w") as fh:
        fh.write("# country.admin1code\tname\n")
        for k in sorted(rows):
            fh.write(f"{k}\t{rows[k]}\n")
    return rows


def build_cities(src):
    cities = json.load(open(os.path.join(src, "cities15000.json")))
    n = 0
    with gzip.open(os.path.join(DATA, "cities15000.tsv.gz"), "wt", encoding="utf-8") as fh:
        for gid in sorted(cities, key=int):
            c = cities[gid]
            alts = {a for a in c.get("alternatenames", []) if _ASCII.match(a) and a != c["name"]}
            alts = sorted(alts | set(CITY_ALIASES.get(int(gid), [])))
            fh.write("\t".join([
                str(c["geonameid"]), c["name"], ",".join(alts), str(c["latitude"]),
                str(c["longitude"]), c["countrycode"], c.get("admin1code", ""),
                str(c["population"]), c.get("timezone", ""),
            ]) + "\n")
            n += 1
    return cities, n


def build_common_words(cities, country_names, admin1):
    from wordfreq import top_n_list

    big_places = {c["name"].lower() for c in cities.values() if c["population"] >= 100000}
    big_places |= {n.lower() for n in country_names.values()} | {n.lower() for n in admin1.values()}
    big_places |= {a for alts in COUNTRY_ALTS.values() for a in alts.split(",") if a != "us"}
    words = []
    for w in top_n_list("en", 6000):
        if not w.isalpha() or len(words) >= 5000:
            continue
        if w in big_places and w not in KEEP_AS_COMMON:
            continue
        words.append(w)
    with open(os.path.join(DATA, "common_words.txt"), "w") as fh:
        fh.write("# 5000 frequent English words (wordfreq ranks, large-place names excluded)\n")
        fh.write("\n".join(words) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--geonamescache", required=True, help="geonamescache/data directory")
    args = ap.parse_args()
    country_names = build_countries(args.geonamescache)
    admin1 = build_admin1(args.geonamescache)
    cities, n = build_cities(args.geonamescache)
    build_common_words(cities, country_names, admin1)
    print(f"wrote {n} cities")


if __name__ == "__main__":
    main()
