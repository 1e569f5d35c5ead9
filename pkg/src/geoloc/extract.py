"""Location mention extraction from comment text.

Matching order:

1. every 1-4 gram with an exact gazetteer match is a candidate;
2. a chain is grown from each candidate by appending the match that directly
   follows it (one comma token may sit in between) when that match is a
   strictly coarser, hierarchy-consistent place. Abbreviations may only be
   appended, never start a chain;
3. chains spanning more than one match become ``abbreviation-merge`` mentions;
4. matches whose span lies inside another surviving match are dropped.

``pattern_rule`` then covers ``X , Y`` and ``X , Y , Z`` shapes whose city
part is missing from the gazetteer. Only the fine -> coarse order is
recognized ("Boston, MA", not "MA, Boston").
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .gazetteer import AbbreviationTable, Gazetteer, GazetteerEntry, LocationHierarchy, level_rank
from .text import COMMA, tokenize

GAZETTEER = "gazetteer"
MERGE = "abbreviation-merge"
PATTERN = "pattern"

FILTER_TERMS = frozenset({"move", "moving", "born", "raised"})

# abbreviations that are also everyday English words
WORDLIKE_ABBREVIATIONS = frozenset({
    "in", "or", "me", "hi", "ok", "oh", "de", "la", "pa", "co", "al", "id", "ma", "ga", "mo",
    "ms", "ne", "va", "us", "ut", "md", "mt", "nd", "sc", "wa",
})

# tokens that never belong to the city part of a pattern match
FUNCTION_WORDS = frozenset("""
a an the i am is are was were be been im from in at of near outside live living lived
currently now here there just and or but so me my we our you your he she they it
""".split())

MAX_RUN = 3


@dataclass(frozen=True)
class Comment:
    user: str
    body: str
    subreddit: str
    created_utc: int
    is_reply: bool = False
    submission_id: str = ""
    id: str = ""

    def __post_init__(self):
        if not self.user:
            raise ValueError("comment user must be non-empty")
        if int(self.created_utc) <= 0:
            raise ValueError("created_utc must be positive")


@dataclass(frozen=True)
class LocationMention:
    tokens: tuple[str, ...]
    span: tuple[int, int]
    hierarchy: LocationHierarchy
    source_rule: str
    candidates: tuple[GazetteerEntry, ...] = ()
    unverified_city: str | None = None

    def __post_init__(self):
        if self.span[1] <= self.span[0]:
            raise ValueError("mention span must be non-empty")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def candidate_ngrams(tokens: Sequence[str], max_n: int = 4) -> list[tuple[tuple[int, int], tuple[str, ...]]]:
    """All contiguous n-grams, n in [1, max_n], left to right, small to large."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    out = []
    for start in range(len(tokens)):
        for n in range(1, max_n + 1):
            if start + n > len(tokens):
                break
            out.append(((start, start + n), tuple(tokens[start:start + n])))
    return out


@dataclass
class _Match:
    span: tuple[int, int]
    candidates: list[GazetteerEntry]
    abbreviation: bool = False


def _abbreviation_candidates(frag: LocationHierarchy, g: Gazetteer) -> list[GazetteerEntry]:
    """Gazetteer entries denoted by an abbreviation fragment."""
    if frag.city:
        return [e for e in g.lookup(tokenize(frag.city, keep_commas=False)) if e.hierarchy.is_within(frag)]
    node = g.node(frag)
    return [node] if node is not None else []


def _gazetteer_matches(tokens: Sequence[str], g: Gazetteer, max_n: int) -> list[_Match]:
    out = []
    for span, gram in candidate_ngrams(tokens, max_n):
        if COMMA in gram:
            continue
        hits = g.lookup(gram)
        if hits:
            out.append(_Match(span, hits))
    return out


def _next_start(tokens: Sequence[str], end: int) -> list[int]:
    starts = [end]
    if end < len(tokens) and tokens[end] == COMMA:
        starts.append(end + 1)
    return starts


def _coarser_parent(child: GazetteerEntry, parent: GazetteerEntry) -> bool:
    return (level_rank(parent.level) > level_rank(child.level)
            and child.hierarchy.is_within(parent.hierarchy))


def _extend(chain: list[list[GazetteerEntry]], nxt: list[GazetteerEntry]) -> list[list[GazetteerEntry]] | None:
    """Append ``nxt`` to a chain if some interpretation stays consistent."""
    last = chain[-1]
    kept_next = [b for b in nxt if any(_coarser_parent(a, b) for a in last)]
    if not kept_next:
        return None
    new = [list(c) for c in chain] + [kept_next]
    for i in range(len(new) - 2, -1, -1):
        new[i] = [a for a in new[i] if any(_coarser_parent(a, b) for b in new[i + 1])]
        if not new[i]:
            return None
    return new


def extract_mentions(tokens: Sequence[str], g: Gazetteer, a: AbbreviationTable,
                     max_n: int = 4) -> list[LocationMention]:
    tokens = list(tokens)
    gaz = _gazetteer_matches(tokens, g, max_n)
    abbr_at: dict[int, _Match] = {}
    for i, tok in enumerate(tokens):
        frag = a.lookup(tok) if tok != COMMA else None
        if frag is not None:
            cands = _abbreviation_candidates(frag, g)
            if cands:
                abbr_at[i] = _Match((i, i + 1), cands, abbreviation=True)
    gaz_at: dict[int, list[_Match]] = {}
    for m in gaz:
        gaz_at.setdefault(m.span[0], []).append(m)

    def grow(chain, end):
        """Longest consistent continuation; returns (chain, end)."""
        best = (chain, end)
        for s in _next_start(tokens, end):
            options = sorted(gaz_at.get(s, []), key=lambda m: -(m.span[1] - m.span[0]))
            if s in abbr_at:
                options.append(abbr_at[s])
            for m in options:
                extended = _extend(chain, m.candidates)
                if extended is None:
                    continue
                got = grow(extended, m.span[1])
                if got[1] > best[1]:
                    best = got
        return best

    found = []
    for m in gaz:
        chain, end = grow([list(m.candidates)], m.span[1])
        head = chain[0]
        rule = MERGE if len(chain) > 1 else GAZETTEER
        found.append(((m.span[0], end), head, rule))

    return _to_mentions(tokens, _prune(found))


def _prune(found):
    """Keep longest spans first; drop anything contained in or overlapping a kept span."""
    kept = []
    for span, head, rule in sorted(found, key=lambda f: (-(f[0][1] - f[0][0]), f[0][0])):
        if any(span[0] < k[0][1] and k[0][0] < span[1] for k in kept):
            continue
        kept.append((span, head, rule))
    return sorted(kept, key=lambda f: f[0])


def _to_mentions(tokens, found) -> list[LocationMention]:
    out = []
    for span, head, rule in found:
        out.append(LocationMention(tokens=tuple(tokens[span[0]:span[1]]), span=span,
                                   hierarchy=head[0].hierarchy, source_rule=rule,
                                   candidates=tuple(head)))
    return out


def _resolve_component(run: Sequence[str], g: Gazetteer, a: AbbreviationTable) -> tuple[list[GazetteerEntry], bool]:
    """Entries for a pattern component and whether it was a word-like abbreviation."""
    hits = [e for e in g.lookup(run) if e.level != "city"]
    if hits:
        return hits, False
    if len(run) == 1:
        frag = a.lookup(run[0])
        if frag is not None:
            return _abbreviation_candidates(frag, g), run[0] in WORDLIKE_ABBREVIATIONS
    return [], False


def pattern_rule(tokens: Sequence[str], g: Gazetteer, a: AbbreviationTable) -> list[LocationMention]:
    """``City , Region [, Region]`` mentions whose city part is not in the gazetteer.

    Emits a mention when at least one region component resolves. The city part
    is kept as an unverified name. If the city itself resolves consistently
    with the regions, the shape is left to ``extract_mentions``.
    """
    tokens = list(tokens)
    commas = [i for i, t in enumerate(tokens) if t == COMMA]
    out = []
    for ci in commas:
        # city run: up to MAX_RUN non-function tokens ending right before the comma
        x_start = ci
        while x_start > 0 and ci - x_start < MAX_RUN and tokens[x_start - 1] not in FUNCTION_WORDS \
                and tokens[x_start - 1] != COMMA:
            x_start -= 1
        if x_start == ci:
            continue
        city_run = tokens[x_start:ci]
        if _resolve_component(city_run, g, a)[0]:
            continue  # a region, not a city name
        best = None
        for components, end in _region_runs(tokens, ci + 1):
            resolved = [_resolve_component(run, g, a) for run in components]
            chain = None
            wordlike_only = True
            ok = True
            for (hits, wordlike), run in zip(resolved, components):
                if not hits:
                    continue
                wordlike_only &= wordlike
                chain = [hits] if chain is None else _extend(chain, hits)
                if chain is None:
                    ok = False
                    break
            if not ok or chain is None:
                continue
            n_resolved = sum(1 for hits, _ in resolved if hits)
            if wordlike_only and n_resolved < 2:
                continue
            if best is None or end > best[1]:
                best = (chain, end)
        if best is None:
            continue
        chain, end = best
        parent = chain[0][0]
        if any(e.hierarchy.is_within(parent.hierarchy) for e in g.lookup(city_run) if e.level == "city"):
            continue  # the gazetteer merge handles it
        city = " ".join(city_run)
        h = parent.hierarchy
        hierarchy = LocationHierarchy(country=h.country, continent=h.continent, state=h.state,
                                      county=h.county, city=city)
        out.append(LocationMention(tokens=tuple(tokens[x_start:end]), span=(x_start, end),
                                   hierarchy=hierarchy, source_rule=PATTERN,
                                   candidates=tuple(chain[0]), unverified_city=city))
    return out


def _region_runs(tokens, start):
    """Candidate component splits after the first comma: (Y,) or (Y, Z)."""
    def runs_from(s):
        out = []
        for n in range(1, MAX_RUN + 1):
            run = tokens[s:s + n]
            if len(run) < n or COMMA in run:
                break
            out.append(run)
        return out

    for y in runs_from(start):
        y_end = start + len(y)
        yield (y,), y_end
        if y_end < len(tokens) and tokens[y_end] == COMMA:
            for z in runs_from(y_end + 1):
                yield (y, z), y_end + 1 + len(z)


def find_mentions(tokens: Sequence[str], g: Gazetteer, a: AbbreviationTable) -> list[LocationMention]:
    """Gazetteer/merge mentions first; pattern mentions only where they extend or fill gaps."""
    base = extract_mentions(tokens, g, a)
    out = list(base)
    for pm in pattern_rule(tokens, g, a):
        s, e = pm.span
        overlapping = [m for m in out if m.span[0] < e and s < m.span[1]]
        if all(s <= m.span[0] and m.span[1] <= e and m.source_rule != PATTERN for m in overlapping):
            if overlapping and any(m.span == pm.span for m in overlapping):
                continue
            out = [m for m in out if m not in overlapping] + [pm]
    return sorted(out, key=lambda m: m.span)


_WORD = re.compile(r"[a-z]+")


def filter_comment(c: Comment, title_terms=None) -> bool:
    """False for replies and for bodies mentioning relocation/birth terms."""
    if c.is_reply:
        return False
    words = set(_WORD.findall(c.body.lower()))
    return not (words & FILTER_TERMS)
