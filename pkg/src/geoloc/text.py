"""Comment tokenization shared by mention extraction and feature construction."""

from __future__ import annotations

import re

# fixed expansion table; applied after lowercasing and quote normalization
CONTRACTIONS = {
    "i'm": "i am",
    "you're": "you are",
    "he's": "he is",
    "she's": "she is",
    "it's": "it is",
    "we're": "we are",
    "they're": "they are",
    "i've": "i have",
    "you've": "you have",
    "we've": "we have",
    "they've": "they have",
    "i'd": "i would",
    "you'd": "you would",
    "he'd": "he would",
    "she'd": "she would",
    "we'd": "we would",
    "they'd": "they would",
    "i'll": "i will",
    "you'll": "you will",
    "he'll": "he will",
    "she'll": "she will",
    "we'll": "we will",
    "they'll": "they will",
    "isn't": "is not",
    "aren't": "are not",
    "wasn't": "was not",
    "weren't": "were not",
    "don't": "do not",
    "doesn't": "does not",
    "didn't": "did not",
    "can't": "can not",
    "couldn't": "could not",
    "won't": "will not",
    "wouldn't": "would not",
    "shouldn't": "should not",
    "haven't": "have not",
    "hasn't": "has not",
    "that's": "that is",
    "there's": "there is",
    "let's": "let us",
}

COMMA = ","

_URL = re.compile(r"(?:[a-z][a-z0-9+.\-]*://|www\.)\S*")
# commas not inside a number become standalone tokens
_COMMA_SPLIT = re.compile(r"(?<!\d),|,(?!\d)")
_NUMBER = re.compile(r"^[+\-]?[\d.,:/%]*\d[\d.,:/%]*$")
_EDGE_PUNCT = "!\"#$%&'()*+-./:;<=>?@[\\]^_`{|}~‘’“”…"


def tokenize(text: str, keep_commas: bool = True) -> list[str]:
    """Lowercase, expand contractions, drop URLs and numbers, split on whitespace.

    Leading and trailing punctuation is stripped from each token. Commas are
    kept as standalone ``","`` tokens unless ``keep_commas`` is false.
    """
    if not text:
        return []
    text = text.lower().replace("’", "'").replace("‘", "'")
    text = _URL.sub(" ", text)
    text = _COMMA_SPLIT.sub(" , ", text)
    out: list[str] = []
    for raw in text.split():
        if raw == COMMA:
            if keep_commas:
                out.append(COMMA)
            continue
        tok = raw.strip(_EDGE_PUNCT)
        if not tok or _NUMBER.match(tok):
            continue
        expanded = CONTRACTIONS.get(tok)
        if expanded is not None:
            out.extend(expanded.split())
        else:
            out.append(tok)
    return out


def normalize_name(name: str) -> str:
    """Canonical lookup key for a place name: tokenized, comma-free, space-joined."""
    return " ".join(tokenize(name, keep_commas=False))
