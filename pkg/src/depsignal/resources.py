"""Access to the data files shipped with the package."""

from functools import lru_cache
from importlib import resources
from pathlib import Path


def data_path(name):
    return Path(str(resources.files("depsignal") / "data" / name))


def read_tagged(name):
    out = {}
    with open(data_path(name), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            word, tag = line.split("\t")
            out[word] = tag
    return out


@lru_cache(maxsize=None)
def vocabulary():
    """Filler vocabulary as an ordered word -> POS tag mapping."""
    return read_tagged("vocab.tsv")


@lru_cache(maxsize=None)
def signal_vocabulary():
    """The 50 planted signal tokens, word -> POS tag."""
    return read_tagged("signal_vocab.txt")


@lru_cache(maxsize=None)
def known_words():
    """Words used to pick a canonical spelling when collapsing elongations."""
    import json

    words = set(vocabulary()) | set(signal_vocabulary())
    with open(data_path("lexicon.json"), encoding="utf-8") as fh:
        lex = json.load(fh)
    words.update(lex["valence"])
    words.update(lex["boosters"])
    words.update(lex["negators"])
    for entries in lex["categories"].values():
        words.update(e for e in entries if not e.endswith("*"))
    return frozenset(words)
