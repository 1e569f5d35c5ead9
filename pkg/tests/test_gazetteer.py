import gzip
import re

import pytest
from hypothesis import given, settings, strategies as st

from geoloc.gazetteer import (Gazetteer, LoadReport, data_path, filter_common_words, gazetteer_from_dict,
                              gazetteer_to_dict, load_abbreviations, load_gazetteer, load_word_list)

ROW = "{id}\t{name}\t{alts}\t{lat}\t{lon}\t{cc}\t{a1}\t{pop}\tAmerica/New_York\n"


def write_rows(path, rows):
    path.write_text("".join(ROW.format(**r) for r in rows), encoding="utf-8")
    return str(path)


def row(i, name, pop, alts="", cc="US", a1="MA", lat=42.0, lon=-71.0):
    return dict(id=i, name=name, alts=alts, lat=lat, lon=lon, cc=cc, a1=a1, pop=pop)


def test_population_threshold(tmp_path):
    p = write_rows(tmp_path / "g.tsv", [row(1, "Smallton", 10000), row(2, "Bigton", 20000)])
    g = load_gazetteer(p)
    assert [e.name for e in g.cities()] == ["bigton"]
    assert all(e.population >= 15000 for e in g.cities())


def test_empty_file(tmp_path):
    (tmp_path / "e.tsv").write_text("")
    g = load_gazetteer(str(tmp_path / "e.tsv"))
    assert len(g) == 0


def test_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        load_gazetteer(str(tmp_path / "missing.tsv"))


def test_malformed_rows_counted(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text(ROW.format(**row(1, "Goodton", 50000)) + "2\tBadton\tx\n"
                 + ROW.format(**row(3, "Latlessville", 50000, lat="north")), encoding="utf-8")
    rep = LoadReport()
    g = load_gazetteer(str(p), report=rep)
    assert [e.name for e in g.cities()] == ["goodton"]
    assert [ln for ln, _ in rep.malformed] == [2, 3]


def test_full_extract_count_matches_line_count():
    path = data_path("cities15000.tsv.gz")
    # oracle: raw line count and population column, read without the loader
    lines = below = 0
    with gzip.open(path, "rt", encoding="utf-8") as fh:
        for ln in fh:
            if ln.strip() and not ln.startswith("#"):
                lines += 1
                below += int(ln.split("\t")[7]) < 15000
    rep = LoadReport()
    g = load_gazetteer(path, report=rep)
    assert lines == 34006
    assert len(g.cities()) == lines - len(rep.malformed) - below
    assert rep.rows == lines


def test_alt_names_flag(tmp_path):
    p = write_rows(tmp_path / "g.tsv", [row(1, "New York City", 8000000, alts="NYC,Big Apple", a1="NY")])
    assert load_gazetteer(p).lookup(["nyc"])
    assert load_gazetteer(p, use_alt_names=False).lookup(["nyc"]) == []


def test_lookup_multiword_and_missing(gaz):
    hits = gaz.lookup(["new", "york"])
    assert hits and all(e.name == "new york" or "new york" in e.alt_names for e in hits)
    assert {e.level for e in hits} == {"state", "city"}
    assert gaz.lookup(["zzzz"]) == []


def test_ambiguous_lookup_ordered_by_population(gaz):
    hits = gaz.lookup(["springfield"])
    # oracle: linear scan of all entries
    scan = [e for e in gaz.entries if e.name == "springfield" or "springfield" in e.alt_names]
    assert len(hits) == len(scan) > 1
    assert sorted(e.geonameid or 0 for e in hits) == sorted(e.geonameid or 0 for e in scan)
    pops = [e.population for e in hits]
    assert pops == sorted(pops, reverse=True)


def test_lookup_independent_of_load_order(tiny_gaz):
    rev = Gazetteer(list(reversed(tiny_gaz.entries)))
    for name in ("springfield", "scarborough", "paris"):
        assert rev.lookup(name) == tiny_gaz.lookup(name)


@settings(max_examples=25, deadline=None)
@given(st.permutations(range(21)))
def test_lookup_order_invariance_property(tiny_gaz, perm):
    g2 = Gazetteer([tiny_gaz.entries[i] for i in perm])
    for name in tiny_gaz.name_index:
        assert g2.lookup(name) == tiny_gaz.lookup(name)


def test_filter_common_words(tiny_gaz):
    g2, removed = filter_common_words(tiny_gaz, ["paris"])
    assert removed == ["paris"] and g2.lookup("paris") == [] and g2.lookup("boston")
    g3, removed = filter_common_words(tiny_gaz, [])
    assert removed == [] and set(g3.name_index) == set(tiny_gaz.name_index)


def _norm(name):
    # independent normalization: lowercase word runs, pure numbers dropped
    return " ".join(t for t in re.findall(r"[^\s,]+", name.lower().replace(",", " ")) if not t.isdigit())


def test_bundled_common_word_intersection():
    common = set(load_word_list(data_path("common_words.txt")))
    assert len(common) == 5000
    names = set()
    with gzip.open(data_path("cities15000.tsv.gz"), "rt", encoding="utf-8") as fh:
        for ln in fh:
            c = ln.rstrip("\n").split("\t")
            if int(c[7]) >= 15000:
                names.add(_norm(c[1]))
                names.update(_norm(a) for a in c[2].split(",") if a.strip())
    for fname, col in (("countries.tsv", 1), ("admin1.tsv", 1)):
        for ln in open(data_path(fname), encoding="utf-8"):
            if ln.startswith("#"):
                continue
            c = ln.rstrip("\n").split("\t")
            names.add(_norm(c[col]))
            if fname == "countries.tsv" and len(c) > 3:
                names.update(_norm(a) for a in c[3].split(",") if a)
    oracle = names & common
    from geoloc.gazetteer import default_gazetteer

    g = default_gazetteer()
    assert set(g.removed_names) == oracle
    assert len(oracle) == 226
    for w in common:
        assert g.lookup(w) == []


def test_abbreviation_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("ma, Massachusetts/United States\nuk, United Kingdom\n", encoding="utf-8")
    a = load_abbreviations(str(p))
    ma = a.lookup("MA")
    assert ma.state == "Massachusetts" and ma.country == "United States" and ma.resolution() == "state"
    uk = a.lookup("uk")
    assert uk.country == "United Kingdom" and uk.resolution() == "country"


def test_abbreviation_empty_and_duplicates(tmp_path, caplog):
    (tmp_path / "e.csv").write_text("")
    assert load_abbreviations(str(tmp_path / "e.csv")) == {}
    (tmp_path / "d.csv").write_text("tx,Texas/United States\ntx,Tennessee/United States\n")
    assert load_abbreviations(str(tmp_path / "d.csv")).lookup("tx").state == "Tennessee"
    assert "duplicate" in caplog.text


def test_abbreviation_key_length(tmp_path):
    (tmp_path / "b.csv").write_text("toolong,Texas/United States\n")
    with pytest.raises(ValueError):
        load_abbreviations(str(tmp_path / "b.csv"))


def test_bundled_abbreviations(abbrevs):
    assert len(abbrevs) == 57
    for k in ("usa", "uk", "bc", "ot", "ma", "dc", "pr"):
        assert k in abbrevs
    assert all(2 <= len(k) <= 4 for k in abbrevs)


def test_snapshot_round_trip(tiny_gaz, tiny_abbrevs):
    g, a = gazetteer_from_dict(gazetteer_to_dict(tiny_gaz, tiny_abbrevs))
    assert g.entries == tiny_gaz.entries and dict(a) == dict(tiny_abbrevs)
