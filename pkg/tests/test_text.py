from hypothesis import given, strategies as st

from geoloc.text import CONTRACTIONS, tokenize


def test_empty():
    assert tokenize("") == []


def test_contraction_comma_and_case():
    assert tokenize("I'm from Boston, MA!") == ["i", "am", "from", "boston", ",", "ma"]


def test_url_and_number_removal():
    assert tokenize("see https://x.co in 2019") == ["see", "in"]
    assert tokenize("www.example.com rocks") == ["rocks"]


def test_commas_dropped_for_features():
    assert tokenize("Boston, MA", keep_commas=False) == ["boston", "ma"]


def test_numeric_commas_are_not_split():
    assert tokenize("population 15,000 people") == ["population", "people"]


def test_contraction_table_size():
    assert len(CONTRACTIONS) == 40
    assert all(k == k.lower() for k in CONTRACTIONS)


@given(st.text(max_size=200))
def test_idempotent(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


@given(st.text(max_size=200))
def test_tokens_are_lowercase_and_nonempty(text):
    for tok in tokenize(text):
        assert tok and tok == tok.lower()
