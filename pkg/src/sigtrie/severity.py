"""Offline CVE severity store fed from a local CSV export.

Feed format, one record per line::

    cve_id,base_score,published_year
    CVE-2004-0001,7.5,2004

``#`` comments are ignored and a header row whose first cell starts with
``cve`` (case-insensitive, not itself an id) is skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

CVE_ID_RE = re.compile(r"^CVE-(\d{4})-(\d+)$")


class MalformedCveId(ValueError):
    pass


@dataclass(frozen=True)
class CveRecord:
    cve_id: str
    base_score: float
    published_year: int

    @property
    def id_year(self) -> int:
        return cve_year(self.cve_id)


@dataclass(frozen=True)
class FeedError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class SeverityStore:
    records: dict[str, CveRecord] = field(default_factory=dict)
    source_path: str = ""

    @property
    def ingested_count(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, cve_id: str) -> bool:
        return cve_id in self.records

    def lookup(self, cve_id: str) -> Optional[CveRecord]:
        return lookup(self, cve_id)


def cve_year(cve_id: str) -> int:
    m = CVE_ID_RE.match(cve_id)
    if not m:
        raise MalformedCveId(f"malformed CVE id: {cve_id!r}")
    return int(m.group(1))


def _parse_row(cells: list[str]) -> CveRecord:
    if len(cells) != 3:
        raise ValueError(f"expected 3 columns, got {len(cells)}")
    cve_id, score_text, year_text = (c.strip() for c in cells)
    id_year = cve_year(cve_id)
    try:
        score = float(score_text)
    except ValueError:
        raise ValueError(f"non-numeric score {score_text!r}") from None
    if not 0.0 <= score <= 10.0:
        raise ValueError(f"score {score} out of range [0, 10]")
    if not year_text.isdigit():
        raise ValueError(f"non-numeric year {year_text!r}")
    year = int(year_text)
    if year < 1999:
        raise ValueError(f"published year {year} before 1999")
    if year < id_year - 1:
        raise ValueError(f"published year {year} precedes id year {id_year} by more than one")
    return CveRecord(cve_id, score, year)


def ingest_feed(feed_text: str, source_path: str = "",
                store: SeverityStore | None = None) -> tuple[SeverityStore, list[FeedError]]:
    """Load feed rows into a store.

    Later rows for the same id overwrite earlier ones.  Passing an existing
    ``store`` updates a copy of it; the original is left untouched.
    """
    records = dict(store.records) if store is not None else {}
    errors: list[FeedError] = []
    first_row = True
    for lineno, line in enumerate(feed_text.splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        cells = text.split(",")
        first = cells[0].strip().lower()
        if first_row:
            first_row = False
            if first.startswith("cve") and not any(ch.isdigit() for ch in first):
                continue
        try:
            record = _parse_row(cells)
        except ValueError as exc:
            errors.append(FeedError(lineno, str(exc)))
            continue
        records[record.cve_id] = record
    return SeverityStore(records, source_path or (store.source_path if store else "")), errors


def load_feed(path: Union[str, Path]) -> tuple[SeverityStore, list[FeedError]]:
    path = Path(path)
    return ingest_feed(path.read_text(encoding="utf-8"), source_path=str(path))


def lookup(store: SeverityStore, cve_id: str) -> Optional[CveRecord]:
    """Return the stored record, or ``None`` when the id is unknown.

    Raises :class:`MalformedCveId` for ids that are not ``CVE-yyyy-nnnn``.
    """
    cve_year(cve_id)
    return store.records.get(cve_id)
