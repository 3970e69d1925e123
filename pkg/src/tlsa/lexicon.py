"""Synonym database and Step 1 alignment: drop discovered labels that are
lexical synonyms of a source label.

The SYN text format is one synonym group per line, lemmas separated by '|',
underscores standing for spaces, '#' starting a comment.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import LabelSet, normalize_label
from .errors import EmptyDatabase, MalformedLine


@dataclass
class SynonymDb:
    """Synonym groups with a lemma -> group-indices index."""

    groups: list[frozenset[str]]
    index: dict[str, set[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            for gi, group in enumerate(self.groups):
                for lemma in group:
                    self.index.setdefault(lemma, set()).add(gi)

    def groups_of(self, label: str) -> set[int]:
        return self.index.get(label, set())


def _parse_lemma(raw: str) -> str:
    return normalize_label(raw.replace("_", " "))


def parse_synonym_db(path) -> SynonymDb:
    """Load a SYN file. Raises MalformedLine on a group with no lemma, EmptyDatabase when nothing parses."""
    groups: list[frozenset[str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            lemmas = {_parse_lemma(p) for p in body.split("|")}
            lemmas.discard("")
            if not lemmas:
                raise MalformedLine(f"{path}:{lineno}: no lemma on line")
            groups.append(frozenset(lemmas))
    if not groups:
        raise EmptyDatabase(f"{path}: no synonym groups")
    return SynonymDb(groups)


def are_synonyms(db: SynonymDb, a: str, b: str) -> bool:
    """True iff the two normalized labels share a synonym group, or are equal."""
    if a == b:
        return True
    return bool(db.groups_of(a) & db.groups_of(b))


def synonym_align(
    db: SynonymDb, discovered: LabelSet, source: LabelSet
) -> tuple[LabelSet, dict[str, str]]:
    """Remove from `discovered` every label synonymous with any source label.

    Returns the filtered set plus an audit map {removed label: matched source label}.
    """
    removed: dict[str, str] = {}
    kept = []
    for lab in discovered.labels:
        match = next((src for src in source.labels if are_synonyms(db, lab, src)), None)
        if match is None:
            kept.append(lab)
        else:
            removed[lab] = match
    return LabelSet(kept, discovered.kind), removed
