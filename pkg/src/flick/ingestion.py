"""Embedding/label file IO and dataset views.

Embeddings travel in the FLKE binary format (little-endian):
magic b"FLKE", u32 version=1, u64 n, u32 d, then n length-prefixed
UTF-8 ids (u32 byte length + bytes), then n*d float32 values row-major.
Labels travel as JSONL, one ``{"id": ..., "label": ...}`` object per line.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataError, FormatError

FLKE_MAGIC = b"FLKE"
FLKE_VERSION = 1

TOTAL_COUNT = "total-count"
PER_CLASS_SHOTS = "per-class-shots"


@dataclass(frozen=True)
class EmbeddingSet:
    """An n x d float32 matrix with one unique string id per row."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise DataError(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] == 0:
            raise DataError("empty embedding set rejected (n must be >= 1)")
        if len(self.ids) != vectors.shape[0]:
            raise DataError(
                f"id count {len(self.ids)} != row count {vectors.shape[0]}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise DataError("duplicate ids in embedding set")
        if not np.isfinite(vectors).all():
            raise DataError("non-finite value in embedding matrix")
        vectors.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "vectors", vectors)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row_index(self) -> dict[str, int]:
        return {rid: i for i, rid in enumerate(self.ids)}


@dataclass(frozen=True)
class LabelTable:
    """Maps record ids to class indices over a sorted list of class names.

    A table with a single class is accepted here; operations that need
    Z >= 2 (training) reject it at their own boundary.
    """

    entries: dict[str, int]
    class_names: tuple[str, ...]

    def __post_init__(self):
        if not self.entries:
            raise DataError("label table is empty")
        z = len(self.class_names)
        if any(not (0 <= idx < z) for idx in self.entries.values()):
            raise DataError("label index out of range of class_names")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class FewLabelSample:
    """Ids drawn from a LabelTable, either `count` in total or per-class shots."""

    ids: tuple[str, ...]
    mode: str
    count: int

    def __post_init__(self):
        if self.mode not in (TOTAL_COUNT, PER_CLASS_SHOTS):
            raise ArgumentError(f"unknown few-label mode {self.mode!r}")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("duplicate ids in few-label sample")


def write_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    """Write an EmbeddingSet to `path` in FLKE format (bit-exact roundtrip)."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(FLKE_MAGIC)
        fh.write(struct.pack("<IQI", FLKE_VERSION, embeddings.n, embeddings.dim))
        for rid in embeddings.ids:
            raw = rid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(embeddings.vectors, dtype="<f4").tobytes())


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an FLKE file, preserving row order. Raises FormatError/DataError."""
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != FLKE_MAGIC:
        raise FormatError(f"{path}: missing FLKE magic header")
    if len(data) < 20:
        raise FormatError(f"{path}: truncated header")
    version, n, dim = struct.unpack_from("<IQI", data, 4)
    if version != FLKE_VERSION:
        raise FormatError(f"{path}: unsupported FLKE version {version}")
    if n == 0:
        raise DataError(f"{path}: empty embedding set rejected")
    offset = 20
    ids = []
    for _ in range(n):
        if offset + 4 > len(data):
            raise FormatError(f"{path}: truncated id block")
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + length > len(data):
            raise FormatError(f"{path}: truncated id block")
        try:
            ids.append(data[offset : offset + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: id is not valid UTF-8") from exc
        offset += length
    expected = n * dim * 4
    if len(data) - offset != expected:
        raise FormatError(
            f"{path}: value block is {len(data) - offset} bytes, expected {expected}"
        )
    vectors = np.frombuffer(data, dtype="<f4", count=n * dim, offset=offset)
    vectors = vectors.reshape(n, dim).copy()
    if not np.isfinite(vectors).all():
        raise DataError(f"{path}: non-finite value in embedding matrix")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate id")
    return EmbeddingSet(ids=tuple(ids), vectors=vectors)


def load_labels(path: str | Path) -> LabelTable:
    """Read a JSONL label file. Class names are the sorted distinct labels."""
    path = Path(path)
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON") from exc
            if not isinstance(record, dict) or "id" not in record or "label" not in record:
                raise FormatError(f"{path}:{lineno}: record needs 'id' and 'label'")
            rid, label = str(record["id"]), str(record["label"])
            if rid in raw:
                raise DataError(f"{path}:{lineno}: duplicate id {rid!r}")
            raw[rid] = label
    if not raw:
        raise DataError(f"{path}: no label records")
    class_names = tuple(sorted(set(raw.values())))
    index = {name: i for i, name in enumerate(class_names)}
    entries = {rid: index[label] for rid, label in raw.items()}
    return LabelTable(entries=entries, class_names=class_names)


def write_labels(table: LabelTable, path: str | Path) -> None:
    """Write a LabelTable back to JSONL (inverse of load_labels)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rid, idx in table.entries.items():
            fh.write(json.dumps({"id": rid, "label": table.class_names[idx]}) + "\n")


def _proportional_allocation(sizes: list[int], count: int) -> list[int]:
    """Largest-remainder allocation of `count` draws over class sizes.

    Each class then gets at least 1 when count >= number of classes; the
    deficit is taken from the classes with the largest surplus over their
    exact proportional share, which keeps every untouched class within 1
    of its share.
    """
    total = sum(sizes)
    shares = [count * s / total for s in sizes]
    alloc = [int(np.floor(q)) for q in shares]
    remainder = count - sum(alloc)
    by_fraction = sorted(
        range(len(sizes)), key=lambda i: (-(shares[i] - alloc[i]), i)
    )
    for i in by_fraction[:remainder]:
        alloc[i] += 1
    if count >= len(sizes):
        bumped = [i for i, a in enumerate(alloc) if a == 0]
        for i in bumped:
            alloc[i] = 1
        for _ in bumped:
            donors = [
                i for i, a in enumerate(alloc) if a > 1 and i not in bumped
            ]
            donor = max(donors, key=lambda i: (alloc[i] - shares[i], -i))
            alloc[donor] -= 1
    # never draw more than a class holds
    for i, s in enumerate(sizes):
        if alloc[i] > s:
            excess = alloc[i] - s
            alloc[i] = s
            for j in sorted(range(len(sizes)), key=lambda j: shares[j] - alloc[j], reverse=True):
                while excess and alloc[j] < sizes[j]:
                    alloc[j] += 1
                    excess -= 1
    return alloc


def subsample_few_labels(
    labels: LabelTable, mode: str, count: int, seed: int
) -> FewLabelSample:
    """Draw a deterministic few-label subset of the table.

    total-count mode: `count` ids via stratified-proportional sampling
    (each class keeps at least one draw when count >= Z).
    per-class-shots mode: min(count, class size) ids from every class.
    """
    if count < 1:
        raise ArgumentError("count must be >= 1")
    if mode not in (TOTAL_COUNT, PER_CLASS_SHOTS):
        raise ArgumentError(f"unknown few-label mode {mode!r}")
    by_class: dict[int, list[str]] = {c: [] for c in range(labels.num_classes)}
    for rid, cls in labels.entries.items():
        by_class[cls].append(rid)
    classes = [c for c in sorted(by_class) if by_class[c]]
    rng = np.random.default_rng(seed)
    chosen: list[str] = []
    if mode == TOTAL_COUNT:
        if count > len(labels.entries):
            raise ArgumentError(
                f"requested {count} ids but only {len(labels.entries)} are labeled"
            )
        sizes = [len(by_class[c]) for c in classes]
        alloc = _proportional_allocation(sizes, count)
        for cls, take in zip(classes, alloc):
            members = by_class[cls]
            picked = rng.choice(len(members), size=take, replace=False)
            chosen.extend(members[i] for i in sorted(picked))
    else:
        for cls in classes:
            members = by_class[cls]
            take = min(count, len(members))
            picked = rng.choice(len(members), size=take, replace=False)
            chosen.extend(members[i] for i in sorted(picked))
    return FewLabelSample(ids=tuple(chosen), mode=mode, count=count)


def subset_view(embeddings: EmbeddingSet, ids: tuple[str, ...]) -> np.ndarray:
    """Rows of `embeddings` for the given ids, in id order."""
    index = embeddings.row_index()
    missing = [rid for rid in ids if rid not in index]
    if missing:
        raise ArgumentError(f"{len(missing)} ids not present in embedding set "
                            f"(first: {missing[0]!r})")
    return embeddings.vectors[[index[rid] for rid in ids]]


def labeled_view(
    embeddings: EmbeddingSet, labels: LabelTable, ids: tuple[str, ...] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (X, y) arrays for the labeled ids (all table ids by default)."""
    if ids is None:
        ids = tuple(labels.entries)
    missing = [rid for rid in ids if rid not in labels.entries]
    if missing:
        raise ArgumentError(f"id {missing[0]!r} has no label")
    X = subset_view(embeddings, ids)
    y = np.array([labels.entries[rid] for rid in ids], dtype=np.int64)
    return X, y
