"""Step 3 frequency-based noisy-candidate filtering: derive the predicted
target-private label set from the frequency bank."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .align import FrequencyBank
from .corpus import LabelSet
from .errors import ConfigError, EmptyBank
from .lexicon import SynonymDb, are_synonyms

log = logging.getLogger(__name__)


@dataclass
class RefineConfig:
    epsilon: float = 0.01

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")


def frequency_filter(
    bank: FrequencyBank,
    source: LabelSet,
    cfg: RefineConfig,
    synonyms: Optional[SynonymDb] = None,
) -> LabelSet:
    """Labels with count strictly above epsilon * max(bank) that are not source labels.

    The max is taken over the whole bank, source counts included. When a
    synonym database is given, labels synonymous with a source label are
    pruned as well (defensive re-application of Step 1; removals are logged
    and visible in the report as not-kept rows).
    """
    if not bank.counts:
        raise EmptyBank("frequency bank is empty")
    tau_freq = cfg.epsilon * max(bank.counts.values())
    src = set(source.labels)
    kept = []
    for lab in sorted(bank.counts):
        if bank.counts[lab] <= tau_freq or lab in src:
            continue
        if synonyms is not None:
            match = next((s for s in source.labels if are_synonyms(synonyms, lab, s)), None)
            if match is not None:
                log.warning("pruned %r from candidates: synonym of source %r", lab, match)
                continue
        kept.append(lab)
    return LabelSet(kept, "private-predicted")


def report_candidates(bank: FrequencyBank, c_p: LabelSet) -> list[tuple[str, int, bool]]:
    """(label, count, kept) rows sorted by descending count, then label."""
    in_cp = set(c_p.labels)
    return [
        (lab, bank.counts[lab], lab in in_cp)
        for lab in sorted(bank.counts, key=lambda l: (-bank.counts[l], l))
    ]


def write_report(rows: list[tuple[str, int, bool]], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for lab, count, kept in rows:
            f.write(f"{lab}\t{count}\t{'true' if kept else 'false'}\n")
