import pytest

from geoloc.gazetteer import (AbbreviationTable, Gazetteer, GazetteerEntry, LocationHierarchy,
                              default_abbreviations, default_gazetteer, load_word_list, data_path)
from geoloc.geo import GeoPoint

FIXTURE_DIR = data_path("label_fixture")


@pytest.fixture(scope="session")
def gaz():
    return default_gazetteer()


@pytest.fixture(scope="session")
def abbrevs():
    return default_abbreviations()


@pytest.fixture(scope="session")
def stopwords():
    return load_word_list(data_path("stopwords.txt"))


def city(name, state, country, continent, lat, lon, pop, gid=None):
    return GazetteerEntry(name=name, hierarchy=LocationHierarchy(country=country, continent=continent,
                                                                 state=state, city=name.title()),
                          population=pop, coords=GeoPoint(lat, lon), geonameid=gid)


def region(name, country, continent, lat, lon, pop, state=None):
    return GazetteerEntry(name=name, hierarchy=LocationHierarchy(country=country, continent=continent,
                                                                 state=state),
                          population=pop, coords=GeoPoint(lat, lon))


@pytest.fixture(scope="session")
def tiny_gaz():
    """Hand-built gazetteer with the ambiguous names the labeling rules care about."""
    entries = [
        city("scarborough", "Ontario", "Canada", "North America", 43.77, -79.26, 600000, 1),
        city("scarborough", "England", "United Kingdom", "Europe", 54.28, -0.40, 61000, 2),
        city("springfield", "Illinois", "United States", "North America", 39.80, -89.64, 116000, 3),
        city("springfield", "Massachusetts", "United States", "North America", 42.10, -72.59, 155000, 4),
        city("springfield", "Missouri", "United States", "North America", 37.22, -93.30, 166000, 5),
        city("boston", "Massachusetts", "United States", "North America", 42.36, -71.06, 617000, 6),
        city("kansas city", "Missouri", "United States", "North America", 39.10, -94.58, 475000, 7),
        city("paris", "Texas", "United States", "North America", 33.66, -95.56, 25000, 8),
        city("paris", None, "France", "Europe", 48.85, 2.35, 2100000, 9),
        city("austin", "Texas", "United States", "North America", 30.27, -97.74, 900000, 10),
        city("dallas", "Texas", "United States", "North America", 32.78, -96.80, 1300000, 11),
        region("kansas", "United States", "North America", 38.5, -98.0, 2900000, state="Kansas"),
        region("texas", "United States", "North America", 31.0, -99.0, 29000000, state="Texas"),
        region("massachusetts", "United States", "North America", 42.3, -71.8, 6900000, state="Massachusetts"),
        region("missouri", "United States", "North America", 38.5, -92.5, 6100000, state="Missouri"),
        region("ontario", "Canada", "North America", 44.0, -79.0, 14000000, state="Ontario"),
        region("united states", "United States", "North America", 39.8, -98.6, 330000000),
        region("canada", "Canada", "North America", 45.0, -80.0, 38000000),
        region("france", "France", "Europe", 47.0, 2.0, 67000000),
        region("united kingdom", "United Kingdom", "Europe", 53.0, -2.0, 67000000),
        region("japan", "Japan", "Asia", 36.0, 138.0, 125000000),
    ]
    return Gazetteer(entries)


@pytest.fixture(scope="session")
def tiny_abbrevs():
    us = lambda st: LocationHierarchy(country="United States", continent="North America", state=st)
    return AbbreviationTable({
        "ma": us("Massachusetts"), "ks": us("Kansas"), "tx": us("Texas"), "mo": us("Missouri"),
        "usa": LocationHierarchy(country="United States", continent="North America"),
        "uk": LocationHierarchy(country="United Kingdom", continent="Europe"),
    })


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
