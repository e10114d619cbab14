"""Corpus-to-FLKE export: parse JSONL text records, preprocess, encode,
write the FLKE embedding file and the JSONL label passthrough.

The FLKE writer here is self-contained so the exporter only couples to
the published file format: magic "FLKE", u32 version=1, u64 n, u32 d,
n length-prefixed UTF-8 ids, then n*d little-endian float32 row-major.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encode import DEFAULT_MODEL, HASH_DIM_DEFAULT, make_encoder
from .errors import CorpusDataError, CorpusFormatError, ExportError
from .preprocess import preprocess

log = logging.getLogger("flick_exporter")

FLKE_MAGIC = b"FLKE"
FLKE_VERSION = 1


@dataclass(frozen=True)
class ExportSpec:
    input_path: str
    embeddings_out: str
    labels_out: str | None = None
    backend: str = "sentence-transformers"
    model_name: str = DEFAULT_MODEL
    hash_dim: int = HASH_DIM_DEFAULT
    lang: str = "en"
    remove_punctuation: bool = False
    remove_stopwords: bool = False
    apply_stemming: bool = False
    batch_size: int = 256


@dataclass(frozen=True)
class ExportReport:
    count: int
    dim: int
    labeled_count: int
    # ids whose text became empty after preprocessing and fell back to raw
    fallback_ids: tuple[str, ...] = field(default=())


def read_corpus(path: str | Path) -> list[dict]:
    """Records of {"id", "text", optional "label"}, order preserved."""
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON") from exc
            if not isinstance(record, dict) or "id" not in record or "text" not in record:
                raise CorpusFormatError(f"{path}:{lineno}: record needs 'id' and 'text'")
            rid = str(record["id"])
            if rid in seen:
                raise CorpusDataError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            entry = {"id": rid, "text": str(record["text"])}
            if "label" in record and record["label"] is not None:
                entry["label"] = str(record["label"])
            records.append(entry)
    if not records:
        raise CorpusDataError(f"{path}: corpus is empty")
    return records


def write_flke(ids: list[str], vectors: np.ndarray, path: str | Path) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    n, dim = vectors.shape
    if len(ids) != n:
        raise ExportError("one id per vector required")
    with open(path, "wb") as fh:
        fh.write(FLKE_MAGIC)
        fh.write(struct.pack("<IQI", FLKE_VERSION, n, dim))
        for rid in ids:
            raw = rid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(vectors.tobytes())


def export(spec: ExportSpec) -> ExportReport:
    """Encode the corpus and write the FLKE + labels files.

    Records whose text preprocesses to nothing are embedded from their raw
    text instead, so every input id stays present and aligned.
    """
    records = read_corpus(spec.input_path)
    encoder = make_encoder(spec.backend, model_name=spec.model_name, dim=spec.hash_dim)

    texts = []
    fallback_ids = []
    for record in records:
        processed = preprocess(
            record["text"],
            lang=spec.lang,
            remove_punct=spec.remove_punctuation,
            remove_stops=spec.remove_stopwords,
            apply_stemming=spec.apply_stemming,
        )
        if not processed.strip():
            fallback_ids.append(record["id"])
            processed = record["text"]
        texts.append(processed)
    if fallback_ids:
        log.warning(
            "%d record(s) were empty after preprocessing; embedded raw text "
            "(first id: %s)", len(fallback_ids), fallback_ids[0],
        )

    chunks = []
    for start in range(0, len(texts), spec.batch_size):
        chunks.append(encoder.encode(texts[start : start + spec.batch_size]))
    vectors = np.vstack(chunks)
    if not np.isfinite(vectors).all():
        raise ExportError("encoder produced non-finite values")

    ids = [record["id"] for record in records]
    write_flke(ids, vectors, spec.embeddings_out)

    labeled = [r for r in records if "label" in r]
    if spec.labels_out is not None:
        with open(spec.labels_out, "w", encoding="utf-8") as fh:
            for record in labeled:
                fh.write(json.dumps({"id": record["id"], "label": record["label"]}) + "\n")

    return ExportReport(
        count=len(records),
        dim=int(vectors.shape[1]),
        labeled_count=len(labeled),
        fallback_ids=tuple(fallback_ids),
    )
