"""Ground-truth labeling: geocode mentions, aggregate per user, place labels."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .extract import Comment, LocationMention, filter_comment, find_mentions
from .gazetteer import LEVELS, AbbreviationTable, Gazetteer, GazetteerEntry, LocationHierarchy
from .geo import GeoPoint, geodesic_median
from .text import tokenize

log = logging.getLogger(__name__)

RESOLUTIONS = ("city", "county", "state", "country")

RegionBias = Mapping[str, str]  # subreddit (lowercase) -> country or state name


class UnresolvableMention(ValueError):
    pass


@dataclass(frozen=True)
class ResolvedLocation:
    hierarchy: LocationHierarchy
    coords: GeoPoint
    confidence_rank: int = 1
    verified: bool = True


@dataclass
class UserLabel:
    user: str
    hierarchy: LocationHierarchy
    coords: GeoPoint
    evidence: list[tuple[str, str]]
    verified: bool = True
    label_time: int = 0

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("a label needs at least one evidence item")
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"label resolution {self.resolution!r} is coarser than country")

    @property
    def resolution(self) -> str:
        return self.hierarchy.resolution()

    def to_json(self) -> dict:
        h = self.hierarchy
        return {
            "user": self.user, "city": h.city, "county": h.county, "state": h.state,
            "country": h.country, "continent": h.continent, "resolution": self.resolution,
            "lat": self.coords.lat, "lon": self.coords.lon, "verified": self.verified,
            "label_time": self.label_time, "evidence": [list(e) for e in self.evidence],
        }

    @classmethod
    def from_json(cls, d: dict) -> "UserLabel":
        h = LocationHierarchy(country=d["country"], continent=d["continent"], state=d.get("state"),
                              county=d.get("county"), city=d.get("city"))
        return cls(user=d["user"], hierarchy=h, coords=GeoPoint(d["lat"], d["lon"]),
                   evidence=[tuple(e) for e in d.get("evidence") or [("", "")]],
                   verified=d.get("verified", True), label_time=d.get("label_time", 0))


class Geocoder(Protocol):
    """Anything that turns a mention into a ResolvedLocation."""

    def __call__(self, m: LocationMention, bias: str | None) -> ResolvedLocation: ...


def _in_scope(e: GazetteerEntry, scope: str) -> bool:
    s = scope.lower()
    h = e.hierarchy
    return any(v and v.lower() == s for v in (h.country, h.state))


def resolve(m: LocationMention, bias: str | None, g: Gazetteer) -> ResolvedLocation:
    """Pick the most probable gazetteer reading of a mention.

    Candidates are narrowed to the bias scope when at least one survives, then
    ranked by population (descending) and country name.
    """
    cands = list(m.candidates)
    if not cands:
        raise UnresolvableMention(f"unresolvable mention: {m.text!r}")
    if bias:
        scoped = [e for e in cands if _in_scope(e, bias)]
        if scoped:
            cands = scoped
    cands.sort(key=lambda e: (-e.population, e.hierarchy.country, e.geonameid or 0, e.name))
    best = cands[0]

    if m.unverified_city is None:
        return ResolvedLocation(best.hierarchy, best.coords, confidence_rank=1)

    city_hits = [e for e in g.lookup(tokenize(m.unverified_city, keep_commas=False))
                 if e.level == "city" and e.hierarchy.is_within(best.hierarchy)]
    if city_hits:
        c = city_hits[0]
        return ResolvedLocation(c.hierarchy, c.coords, confidence_rank=1)
    h = best.hierarchy
    hierarchy = LocationHierarchy(country=h.country, continent=h.continent, state=h.state,
                                  county=h.county, city=m.unverified_city)
    return ResolvedLocation(hierarchy, best.coords, confidence_rank=1, verified=False)


def shared_prefix(hierarchies: Sequence[LocationHierarchy]) -> LocationHierarchy | None:
    """Deepest coarse-to-fine prefix common to every hierarchy; None below country."""
    keys = [h.key() for h in hierarchies]
    depth = 0
    for level in range(len(LEVELS)):
        vals = {k[level] for k in keys}
        if len(vals) != 1:
            break
        depth += 1
    if depth < 2:  # continent + country at minimum
        return None
    first = hierarchies[0]
    coarse_to_fine = ("continent", "country", "state", "county", "city")
    kept = {lv: getattr(first, lv) if i < depth else None for i, lv in enumerate(coarse_to_fine)}
    return LocationHierarchy(**kept)


def aggregate_user(extractions: Sequence[tuple[Comment, ResolvedLocation]]) -> UserLabel | None:
    """Maximum hierarchy overlap across a user's extractions; None if they disagree on country."""
    if not extractions:
        raise ValueError("no extractions to aggregate")
    user = extractions[0][0].user
    hierarchy = shared_prefix([r.hierarchy for _, r in extractions])
    if hierarchy is None:
        return None
    same = [r for _, r in extractions if r.hierarchy.key() == hierarchy.key()]
    if same:
        coords = same[0].coords
        verified = all(r.verified for r in same)
    else:
        coords = geodesic_median([r.coords for _, r in extractions])
        verified = True
    evidence = [(c.id, r.hierarchy.label()) for c, r in extractions]
    return UserLabel(user=user, hierarchy=hierarchy, coords=coords, evidence=evidence,
                     verified=verified, label_time=max(c.created_utc for c, _ in extractions))


def _node_key(h: LocationHierarchy) -> tuple:
    return h.key()


def assign_coordinates(labels: Sequence[UserLabel], g: Gazetteer | None = None) -> list[UserLabel]:
    """Place every label above city resolution at the geodesic median of its city users.

    Verified city labels keep their gazetteer coordinates. Unverified city
    labels and coarser labels take the median of verified city users under
    their node; a node without such users falls back to the gazetteer region
    point, or to the label's current coordinates when no gazetteer is given.
    """
    city_points = [(lab.hierarchy, lab.coords) for lab in labels
                   if lab.resolution == "city" and lab.verified]
    cache: dict[tuple, GeoPoint | None] = {}

    def node_point(h: LocationHierarchy) -> GeoPoint | None:
        k = _node_key(h)
        if k not in cache:
            members = [p for ch, p in city_points if ch.is_within(h)]
            cache[k] = geodesic_median(members) if members else None
        return cache[k]

    out = []
    for lab in labels:
        if lab.resolution == "city" and lab.verified:
            out.append(lab)
            continue
        h = lab.hierarchy
        if lab.resolution == "city":
            h = h.truncate("county" if h.county else "state" if h.state else "country")
        p = node_point(h)
        if p is None:
            node = g.node(h) if g is not None else None
            p = node.coords if node is not None else lab.coords
        out.append(UserLabel(user=lab.user, hierarchy=lab.hierarchy, coords=p, evidence=lab.evidence,
                             verified=lab.verified, label_time=lab.label_time))
    return out


@dataclass
class LabelStats:
    comments_seen: int = 0
    comments_in_seeds: int = 0
    comments_kept: int = 0
    mentions_found: int = 0
    mentions_unresolvable: int = 0
    users_with_mentions: int = 0
    users_labeled: int = 0
    dropped: Counter = field(default_factory=Counter)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["dropped"] = dict(self.dropped)
        return d


def label_corpus(comments: Iterable[Comment], seeds: set[str], g: Gazetteer, a: AbbreviationTable,
                 bias: RegionBias | None = None, geocoder: Geocoder | None = None,
                 stats: LabelStats | None = None) -> list[UserLabel]:
    """Seed filtering, extraction, geocoding, per-user aggregation and placement.

    ``geocoder`` replaces the offline resolver when given. Labels are returned
    sorted by user.
    """
    bias = {k.lower(): v for k, v in (bias or {}).items()}
    stats = stats if stats is not None else LabelStats()
    resolver = geocoder or (lambda m, b: resolve(m, b, g))
    per_user: dict[str, list[tuple[Comment, ResolvedLocation]]] = {}
    seen_users: set[str] = set()

    for offset, c in enumerate(comments):
        stats.comments_seen += 1
        if c.submission_id not in seeds:
            continue
        stats.comments_in_seeds += 1
        if not filter_comment(c):
            continue
        stats.comments_kept += 1
        seen_users.add(c.user)
        scope = bias.get(c.subreddit.lower())
        for m in find_mentions(tokenize(c.body), g, a):
            stats.mentions_found += 1
            try:
                r = resolver(m, scope)
            except UnresolvableMention:
                stats.mentions_unresolvable += 1
                continue
            per_user.setdefault(c.user, []).append((c, r))

    stats.users_with_mentions = len(per_user)
    stats.dropped["no mention"] = len(seen_users) - len(per_user)
    labels = []
    for user in sorted(per_user):
        lab = aggregate_user(per_user[user])
        if lab is None:
            stats.dropped["inconsistent evidence"] += 1
            continue
        labels.append(lab)
    labels = assign_coordinates(labels, g)
    stats.users_labeled = len(labels)
    return labels


def load_region_bias(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: expected 'subreddit,scope', got {row!r}")
            out[row[0].strip().lower().removeprefix("r/")] = row[1].strip()
    return out


def load_seeds(path: str) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")}


def write_labels(labels: Iterable[UserLabel], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(json.dumps(lab.to_json(), sort_keys=True) + "\n")


def read_labels(path: str) -> list[UserLabel]:
    with open(path, encoding="utf-8") as fh:
        return [UserLabel.from_json(json.loads(ln)) for ln in fh if ln.strip()]
