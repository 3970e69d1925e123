"""Extract noun synonym groups from a WordNet "data.noun" database file
into the pipe-joined SYN format the alignment engine's lexicon reads.

Database line layout (space-separated fields):

    offset lex_filenum ss_type w_cnt word lex_id [word lex_id ...] ...

w_cnt is a two-digit hexadecimal count; the words sit at fields
4, 6, 8, ... with one-digit hex lex_ids between them. License header
lines start with whitespace and are skipped. Multiword lemmas keep
their underscores; the downstream parser maps them to spaces.
"""
from __future__ import annotations

from pathlib import Path

from .errors import EmptyDatabase, MissingDatabase
from .formats import write_syn


def _database_file(wordnet_path) -> Path:
    path = Path(wordnet_path)
    if path.is_dir():
        path = path / "data.noun"
    if not path.is_file():
        raise MissingDatabase(f"noun database not found: {path}")
    return path


def parse_noun_synsets(wordnet_path) -> list[list[str]]:
    """Word groups of every noun synset, in file order."""
    path = _database_file(wordnet_path)
    synsets: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line or line[0].isspace():
                continue
            fields = line.split(" ")
            if len(fields) < 6 or fields[2] != "n":
                continue
            count = int(fields[3], 16)
            words = [fields[4 + 2 * i] for i in range(count)]
            synsets.append(words)
    if not synsets:
        raise EmptyDatabase(f"{path}: no noun synsets")
    return synsets


def extract_synonyms(wordnet_path, out_path) -> Path:
    """Write one SYN line per noun synset; returns the output path."""
    synsets = parse_noun_synsets(wordnet_path)
    write_syn(synsets, out_path)
    return Path(out_path)
