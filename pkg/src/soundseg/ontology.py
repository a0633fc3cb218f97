"""Category resolution across heterogeneous source datasets.

Labels are matched exactly after normalization, against a human-curated
alias table.  No fuzzy matching: a label either resolves or it doesn't.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DuplicateAlias, ParseError

#: Sentinel returned by resolve() for unregistered labels.
NO_MATCH = None

_WS = re.compile(r"\s+")


def normalize_label(raw: str) -> str:
    """Lowercase, map underscores/hyphens to spaces, collapse whitespace."""
    s = raw.lower().replace("_", " ").replace("-", " ")
    return _WS.sub(" ", s).strip()


@dataclass(frozen=True)
class CategoryAlias:
    canonical: str
    source_dataset: str
    source_label: str


@dataclass
class AliasTable:
    """Immutable-after-load lookup from (dataset, label) to canonical class."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {}
        for e in self.entries:
            key = (e.source_dataset, normalize_label(e.source_label))
            if key in self._index:
                raise DuplicateAlias(f"duplicate alias {key!r}")
            self._index[key] = e.canonical

    @property
    def canonical_set(self) -> set:
        return {e.canonical for e in self.entries}

    def resolve(self, dataset: str, raw_label: str):
        """Return the canonical class, or NO_MATCH if unregistered."""
        return self._index.get((dataset, normalize_label(raw_label)), NO_MATCH)


def resolve(table: AliasTable, dataset: str, raw_label: str):
    return table.resolve(dataset, raw_label)


def load_alias_table(path) -> AliasTable:
    """Load a tab-separated alias file: canonical <TAB> dataset <TAB> label.

    Lines starting with '#' and blank lines are ignored.
    """
    entries = []
    seen = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", line=lineno)
        canonical, dataset, label = (p.strip() for p in parts)
        if not canonical:
            raise ParseError("empty canonical class", line=lineno)
        key = (dataset, normalize_label(label))
        if key in seen:
            raise DuplicateAlias(f"duplicate alias {key!r} at line {lineno}")
        seen.add(key)
        entries.append(CategoryAlias(canonical=canonical, source_dataset=dataset, source_label=label))
    return AliasTable(entries=entries)


def default_alias_path() -> Path:
    """Path of the alias file shipped with the package."""
    return Path(resources.files("soundseg").joinpath("data/aliases.tsv"))
