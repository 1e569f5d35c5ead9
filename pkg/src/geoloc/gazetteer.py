"""Place-name knowledge base: loading, filtering, indexing, abbreviations.

The gazetteer file is a tab-separated subset of the GeoNames dump layout::

    geonameid  name  alternatenames  latitude  longitude  country  admin1  population  timezone  [admin2]

``country`` may be an ISO-3166 alpha-2 code or a country name; ``admin1`` may
be a GeoNames admin1 code (resolved through the bundled admin1 table) or a
plain region name. Besides the city rows, the loader derives one entry per
state and per country from the surviving cities so that region names can be
matched and geocoded too.
"""

from __future__ import annotations

import csv
import gzip
import io
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .geo import GeoPoint, from_unit_vector, to_unit_vectors
from .text import normalize_name

log = logging.getLogger(__name__)

DEFAULT_MIN_POPULATION = 15000
LEVELS = ("city", "county", "state", "country", "continent")  # fine -> coarse


def data_path(name: str) -> str:
    return str(resources.files("geoloc") / "data" / name)


def _open_text(path: str):
    if str(path).endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


@dataclass(frozen=True)
class LocationHierarchy:
    country: str
    continent: str
    state: str | None = None
    county: str | None = None
    city: str | None = None

    def __post_init__(self):
        if not self.country or not self.continent:
            raise ValueError("country and continent are required")

    def resolution(self) -> str:
        for level in LEVELS:
            if getattr(self, level):
                return level
        raise AssertionError("unreachable")

    def levels(self) -> tuple:
        """Values coarse -> fine: (continent, country, state, county, city)."""
        return (self.continent, self.country, self.state, self.county, self.city)

    def key(self) -> tuple:
        """Lowercased ``levels()``, used for equality across sources."""
        return tuple(v.lower() if v else None for v in self.levels())

    def truncate(self, level: str) -> "LocationHierarchy":
        """Drop every level finer than ``level``."""
        keep = LEVELS[LEVELS.index(level):]
        return LocationHierarchy(**{lv: getattr(self, lv) if lv in keep else None for lv in LEVELS})

    def is_within(self, other: "LocationHierarchy") -> bool:
        """True when every level set in ``other`` matches this hierarchy."""
        for mine, theirs in zip(self.key(), other.key()):
            if theirs is not None and mine != theirs:
                return False
        return True

    def label(self) -> str:
        return ", ".join(v for v in (self.city, self.county, self.state, self.country) if v)


def level_rank(level: str) -> int:
    """0 for city, 4 for continent."""
    return LEVELS.index(level)


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    hierarchy: LocationHierarchy
    population: int
    coords: GeoPoint
    alt_names: tuple[str, ...] = ()
    geonameid: int | None = None

    @property
    def level(self) -> str:
        return self.hierarchy.resolution()


@dataclass
class LoadReport:
    rows: int = 0
    kept: int = 0
    below_population: int = 0
    malformed: list[tuple[int, str]] = field(default_factory=list)


class Gazetteer:
    """Immutable place index.

    ``name_index`` maps a normalized name to entry ids ordered by descending
    population (then country, then id). ``hierarchy_index`` maps a parent
    name to the names of its direct children.
    """

    def __init__(self, entries: Sequence[GazetteerEntry], use_alt_names: bool = True,
                 removed_names: Iterable[str] = ()):
        self.entries: tuple[GazetteerEntry, ...] = tuple(entries)
        self.use_alt_names = use_alt_names
        self.removed_names: tuple[str, ...] = tuple(sorted(set(removed_names)))
        removed = set(self.removed_names)

        index: dict[str, list[int]] = {}
        for i, e in enumerate(self.entries):
            names = {e.name, *e.alt_names} if use_alt_names else {e.name}
            for n in names:
                if n and n not in removed:
                    index.setdefault(n, []).append(i)
        self.name_index: dict[str, tuple[int, ...]] = {
            n: tuple(sorted(set(ids), key=self._rank_key)) for n, ids in index.items()
        }

        self.hierarchy_index: dict[str, set[str]] = {}
        self._nodes: dict[tuple, int] = {}
        for i, e in enumerate(self.entries):
            h = e.hierarchy
            if e.level in ("state", "country"):
                self._nodes[h.key()] = i
            chain = [v for v in (h.country, h.state, h.county, h.city) if v]
            for parent, child in zip(chain, chain[1:]):
                self.hierarchy_index.setdefault(parent.lower(), set()).add(child.lower())

    def _rank_key(self, i: int):
        e = self.entries[i]
        return (-e.population, e.hierarchy.country, e.geonameid or 0, e.name, i)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, tokens: Sequence[str] | str) -> list[GazetteerEntry]:
        key = tokens if isinstance(tokens, str) else " ".join(tokens)
        return [self.entries[i] for i in self.name_index.get(key, ())]

    def node(self, hierarchy: LocationHierarchy) -> GazetteerEntry | None:
        """Region entry (state or country) for a hierarchy fragment."""
        i = self._nodes.get(hierarchy.key())
        return None if i is None else self.entries[i]

    def cities(self) -> list[GazetteerEntry]:
        return [e for e in self.entries if e.level == "city"]


# ---------------------------------------------------------------- reference tables

def load_countries(path: str | None = None) -> dict[str, tuple[str, str, tuple[str, ...]]]:
    """ISO2 code -> (country name, continent name, alternate names)."""
    out = {}
    with _open_text(path or data_path("countries.tsv")) as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row or row[0].startswith("#"):
                continue
            alts = tuple(a for a in row[3].split(",") if a) if len(row) > 3 else ()
            out[row[0]] = (row[1], row[2], alts)
    return out


def load_admin1(path: str | None = None) -> dict[str, str]:
    """``"CC.code"`` -> admin1 name."""
    out = {}
    with _open_text(path or data_path("admin1.tsv")) as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if row and not row[0].startswith("#"):
                out[row[0]] = row[1]
    return out


def _resolve_country(value: str, countries) -> tuple[str, str] | None:
    value = value.strip()
    if value in countries:
        name, continent, _ = countries[value]
        return name, continent
    for name, continent, alts in countries.values():
        if value.lower() == name.lower() or value.lower() in alts:
            return name, continent
    return None


def _resolve_admin1(country_code: str, value: str, admin1) -> str | None:
    value = value.strip()
    if not value:
        return None
    name = admin1.get(f"{country_code}.{value}")
    if name:
        return name
    # a short or numeric code we cannot name is dropped rather than shown raw
    if value.isdigit() or len(value) <= 3:
        return None
    return value


# ---------------------------------------------------------------- loading

def load_gazetteer(path: str, min_population: int = DEFAULT_MIN_POPULATION,
                   use_alt_names: bool = True, countries_path: str | None = None,
                   admin1_path: str | None = None,
                   report: LoadReport | None = None) -> Gazetteer:
    """Read a GeoNames-layout TSV, drop small cities, derive region entries."""
    countries = load_countries(countries_path)
    admin1 = load_admin1(admin1_path)
    report = report if report is not None else LoadReport()
    cities: list[GazetteerEntry] = []

    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            report.rows += 1
            try:
                entry = _parse_row(line, countries, admin1)
            except ValueError as exc:
                report.malformed.append((lineno, str(exc)))
                log.warning("gazetteer line %d skipped: %s", lineno, exc)
                continue
            if entry.population < min_population:
                report.below_population += 1
                continue
            cities.append(entry)
    report.kept = len(cities)
    return Gazetteer(cities + derive_regions(cities), use_alt_names=use_alt_names)


def _parse_row(line: str, countries, admin1) -> GazetteerEntry:
    cols = line.split("\t")
    if len(cols) < 9:
        raise ValueError(f"expected at least 9 columns, got {len(cols)}")
    gid, name, alts, lat, lon, country, adm1, pop = cols[:8]
    name_key = normalize_name(name)
    if not name_key:
        raise ValueError("empty name")
    try:
        coords = GeoPoint(float(lat), float(lon))
        population = int(float(pop)) if pop.strip() else 0
        geonameid = int(gid) if gid.strip() else None
    except ValueError as exc:
        raise ValueError(f"bad numeric field: {exc}") from None
    if population < 0:
        raise ValueError("negative population")
    resolved = _resolve_country(country, countries)
    if resolved is None:
        if len(country.strip()) <= 3:
            raise ValueError(f"unknown country code {country!r}")
        resolved = (country.strip(), "Unknown")
    country_name, continent = resolved
    code = country.strip() if country.strip() in countries else ""
    state = _resolve_admin1(code, adm1, admin1)
    county = cols[9].strip() or None if len(cols) > 9 else None
    alt_keys = []
    for a in alts.split(","):
        k = normalize_name(a) if a.strip() else ""
        if k and k != name_key and k not in alt_keys:
            alt_keys.append(k)
    hierarchy = LocationHierarchy(country=country_name, continent=continent, state=state,
                                  county=county, city=name.strip())
    return GazetteerEntry(name=name_key, alt_names=tuple(alt_keys), hierarchy=hierarchy,
                          population=population, coords=coords, geonameid=geonameid)


def _weighted_center(members: list[GazetteerEntry]) -> GeoPoint:
    w = np.array([max(m.population, 1) for m in members], dtype=float)
    v = to_unit_vectors([m.coords.lat for m in members], [m.coords.lon for m in members])
    c = w @ v
    if np.linalg.norm(c) < 1e-12:
        return members[0].coords
    return from_unit_vector(c)


def derive_regions(cities: Sequence[GazetteerEntry], countries_path: str | None = None) -> list[GazetteerEntry]:
    """One entry per (country, state) and per country, at the population-weighted center."""
    alt_by_country = {name.lower(): alts for name, _, alts in load_countries(countries_path).values()}
    by_state: dict[tuple, list[GazetteerEntry]] = {}
    by_country: dict[tuple, list[GazetteerEntry]] = {}
    for c in cities:
        h = c.hierarchy
        by_country.setdefault((h.country, h.continent), []).append(c)
        if h.state:
            by_state.setdefault((h.country, h.continent, h.state), []).append(c)
    out = []
    for (country, continent), members in sorted(by_country.items()):
        alts = tuple(normalize_name(a) for a in alt_by_country.get(country.lower(), ()))
        out.append(GazetteerEntry(
            name=normalize_name(country), alt_names=tuple(a for a in alts if a),
            hierarchy=LocationHierarchy(country=country, continent=continent),
            population=sum(m.population for m in members), coords=_weighted_center(members)))
    for (country, continent, state), members in sorted(by_state.items()):
        out.append(GazetteerEntry(
            name=normalize_name(state),
            hierarchy=LocationHierarchy(country=country, continent=continent, state=state),
            population=sum(m.population for m in members), coords=_weighted_center(members)))
    return [e for e in out if e.name]


def filter_common_words(g: Gazetteer, common_words: Iterable[str]) -> tuple[Gazetteer, list[str]]:
    """Remove every indexed name that is exactly a common word.

    Entries whose primary name is removed are dropped from the index but kept
    as region parents. Returns the new gazetteer and the removed names.
    """
    common = {w.strip().lower() for w in common_words if w.strip()}
    removed = sorted(n for n in g.name_index if n in common)
    new = Gazetteer(g.entries, use_alt_names=g.use_alt_names,
                    removed_names=set(g.removed_names) | set(removed))
    return new, removed


def load_word_list(path: str) -> list[str]:
    with _open_text(path) as fh:
        return [ln.strip().lower() for ln in fh if ln.strip() and not ln.startswith("#")]


# ---------------------------------------------------------------- abbreviations

class AbbreviationTable(dict):
    """Lowercase abbreviation -> LocationHierarchy fragment."""

    def lookup(self, abbrev: str) -> LocationHierarchy | None:
        return self.get(abbrev.lower())


def parse_expansion(expansion: str, countries=None) -> LocationHierarchy:
    """``"city/state/country"`` with leading levels optional, e.g. ``"Massachusetts/United States"``."""
    parts = [p.strip() for p in expansion.split("/")]
    if not parts or not parts[-1]:
        raise ValueError(f"expansion needs a country: {expansion!r}")
    countries = countries if countries is not None else load_countries()
    resolved = _resolve_country(parts[-1], countries)
    country, continent = resolved if resolved else (parts[-1], "Unknown")
    parts = [None] * (3 - len(parts)) + parts if len(parts) <= 3 else None
    if parts is None:
        raise ValueError(f"too many levels: {expansion!r}")
    city, state, _ = (p or None for p in parts)
    return LocationHierarchy(country=country, continent=continent, state=state, city=city)


def load_abbreviations(path: str) -> AbbreviationTable:
    countries = load_countries()
    table = AbbreviationTable()
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            abbrev, sep, expansion = line.partition(",")
            abbrev = abbrev.strip().lower()
            if not sep or not (2 <= len(abbrev) <= 4):
                raise ValueError(f"{path}:{lineno}: malformed abbreviation row {line!r}")
            frag = parse_expansion(expansion, countries)
            if abbrev in table:
                log.warning("%s:%d: duplicate abbreviation %r, last wins", path, lineno, abbrev)
            table[abbrev] = frag
    return table


def default_gazetteer(min_population: int = DEFAULT_MIN_POPULATION) -> Gazetteer:
    """Bundled GeoNames extract with the bundled common-word filter applied."""
    g = load_gazetteer(data_path("cities15000.tsv.gz"), min_population=min_population)
    g, _ = filter_common_words(g, load_word_list(data_path("common_words.txt")))
    return g


def default_abbreviations() -> AbbreviationTable:
    return load_abbreviations(data_path("abbreviations.csv"))


# ---------------------------------------------------------------- snapshot

SNAPSHOT_VERSION = 1


def gazetteer_to_dict(g: Gazetteer, abbreviations: AbbreviationTable | None = None) -> dict:
    def h(x: LocationHierarchy):
        return {lv: getattr(x, lv) for lv in LEVELS}

    return {
        "format": "geoloc-gazetteer",
        "version": SNAPSHOT_VERSION,
        "use_alt_names": g.use_alt_names,
        "removed_names": list(g.removed_names),
        "entries": [
            {"name": e.name, "alt_names": list(e.alt_names), "hierarchy": h(e.hierarchy),
             "population": e.population, "lat": e.coords.lat, "lon": e.coords.lon,
             "geonameid": e.geonameid}
            for e in g.entries
        ],
        "abbreviations": {k: h(v) for k, v in sorted((abbreviations or {}).items())},
    }


def gazetteer_from_dict(d: dict) -> tuple[Gazetteer, AbbreviationTable]:
    if d.get("format") != "geoloc-gazetteer":
        raise ValueError("not a gazetteer snapshot")
    if d.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported gazetteer version {d.get('version')}")
    entries = [
        GazetteerEntry(name=e["name"], alt_names=tuple(e["alt_names"]),
                       hierarchy=LocationHierarchy(**e["hierarchy"]), population=e["population"],
                       coords=GeoPoint(e["lat"], e["lon"]), geonameid=e["geonameid"])
        for e in d["entries"]
    ]
    abbrevs = AbbreviationTable({k: LocationHierarchy(**v) for k, v in d["abbreviations"].items()})
    return Gazetteer(entries, use_alt_names=d["use_alt_names"], removed_names=d["removed_names"]), abbrevs
