"""Core record model: datasets, field grouping, normalization, deduplication.

A record is a flat mapping of named text fields. Fields are organized into
groups (e.g. all address-related columns form one group); each group is
shingled and weighted as a unit downstream. Normalization is deliberately
aggressive so that cosmetic differences (case, punctuation, runs of spaces)
never distinguish two records.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping


@dataclass(frozen=True)
class Record:
    """One party's row: an opaque local id plus named text fields.

    The id is never transmitted; it only keys results on the owning side.
    """

    id: str
    fields: Mapping[str, str]

    def get(self, name: str) -> str:
        return self.fields.get(name, "")


@dataclass(frozen=True)
class FieldGroupSpec:
    """How one group of fields is turned into shingles.

    members lists field names whose normalized values are concatenated in
    order; shingle_len is the k for k-shingling; weight scales the group's
    influence on the minima (weight 1 keeps integer-exact hashing).
    """

    name: str
    members: tuple[str, ...]
    shingle_len: int
    weight: int = 1

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError(f"group {self.name!r} has no member fields")
        if self.shingle_len < 1:
            raise ValueError(f"group {self.name!r}: shingle_len must be >= 1")
        if self.weight < 1:
            raise ValueError(f"group {self.name!r}: weight must be >= 1")


@dataclass
class Dataset:
    """An ordered collection of records with unique ids."""

    records: list[Record] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __getitem__(self, i: int) -> Record:
        return self.records[i]

    def by_id(self) -> dict[str, Record]:
        return {rec.id: rec for rec in self.records}


def normalize_text(value: str) -> str:
    """Lowercase, strip everything but alphanumerics, collapse whitespace.

    Any run of whitespace becomes a single space; other non-alphanumeric
    characters are removed outright. Idempotent.
    """
    out: list[str] = []
    pending_space = False
    for ch in value.lower():
        if ch.isspace():
            pending_space = bool(out)
            continue
        if not ch.isalnum():
            continue
        if pending_space:
            out.append(" ")
            pending_space = False
        out.append(ch)
    return "".join(out)


def preprocess(record: Record, specs: Iterable[FieldGroupSpec]) -> Record:
    """Normalize every field used by some group; drop unused fields.

    Missing fields are materialized as empty strings so later stages see a
    uniform shape.
    """
    wanted: list[str] = []
    seen: set[str] = set()
    for spec in specs:
        for name in spec.members:
            if name not in seen:
                seen.add(name)
                wanted.append(name)
    return Record(
        id=record.id,
        fields={name: normalize_text(record.get(name)) for name in wanted},
    )


def preprocess_dataset(dataset: Dataset, specs: Iterable[FieldGroupSpec]) -> Dataset:
    specs = tuple(specs)
    return Dataset([preprocess(rec, specs) for rec in dataset])


def dedup_key(record: Record, specs: Iterable[FieldGroupSpec]) -> str:
    """Concatenated normalized group members, in spec order, no separators.

    Two records with the same key produce identical shingle sets for every
    group, hence identical signatures.
    """
    parts: list[str] = []
    for spec in specs:
        for name in spec.members:
            parts.append(normalize_text(record.get(name)))
    return "".join(parts)


def deduplicate(dataset: Dataset, specs: Iterable[FieldGroupSpec]) -> Dataset:
    """Keep the first record of each normalized-concatenation class."""
    specs = tuple(specs)
    kept: list[Record] = []
    seen: set[str] = set()
    for rec in dataset:
        key = dedup_key(rec, specs)
        if key in seen:
            continue
        seen.add(key)
        kept.append(rec)
    return Dataset(kept)


def load_csv(path: str) -> Dataset:
    """Read a dataset from CSV. A column named 'id' supplies record ids;
    otherwise the 0-based row index is used."""
    records: list[Record] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader):
            rid = row.pop("id", None)
            if rid is None:
                rid = str(i)
            records.append(Record(id=rid, fields=row))
    return Dataset(records)


def save_csv(dataset: Dataset, path: str) -> None:
    names: list[str] = []
    seen: set[str] = set()
    for rec in dataset:
        for name in rec.fields:
            if name not in seen:
                seen.add(name)
                names.append(name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id"] + names)
        writer.writeheader()
        for rec in dataset:
            row = {"id": rec.id}
            row.update(rec.fields)
            writer.writerow(row)
