"""Synthetic Gaussian-blob fixtures for tests and end-to-end runs.

Each class is a blob around an axis-aligned center. A configurable
fraction of the unlabeled points is re-drawn from a wrong class's blob,
which is the noise the refinement stage is meant to survive.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .ingestion import EmbeddingSet, LabelTable, write_embeddings, write_labels


@dataclass(frozen=True)
class SynthSpec:
    n_unlabeled: int = 2000
    n_labeled: int = 100
    n_heldout: int = 600
    classes: int = 3
    dim: int = 32
    cluster_std: float = 0.5
    center_separation: float = 10.0
    noise_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ArgumentError("need at least 2 classes")
        if self.classes > self.dim:
            raise ArgumentError("axis-aligned centers need classes <= dim")
        if not (0.0 <= self.noise_fraction <= 1.0):
            raise ArgumentError("noise_fraction must lie in [0, 1]")
        if self.cluster_std <= 0:
            raise ArgumentError("cluster_std must be positive")
        if min(self.n_unlabeled, self.n_labeled, self.n_heldout) < 1:
            raise ArgumentError("all split sizes must be >= 1")


@dataclass(frozen=True)
class SynthData:
    unlabeled: EmbeddingSet
    # blob that generated each unlabeled vector (post noise) and which were swapped
    unlabeled_blobs: np.ndarray
    noisy_mask: np.ndarray
    labeled: EmbeddingSet
    labeled_table: LabelTable
    heldout: EmbeddingSet
    heldout_table: LabelTable
    class_names: tuple[str, ...]


def _centers(spec: SynthSpec) -> np.ndarray:
    centers = np.zeros((spec.classes, spec.dim))
    for c in range(spec.classes):
        centers[c, c] = spec.center_separation
    return centers


def _blob_split(rng, centers, sigma, n, prefix):
    classes = centers.shape[0]
    blob_of = np.arange(n) % classes
    vectors = centers[blob_of] + rng.normal(0.0, sigma, size=(n, centers.shape[1]))
    ids = tuple(f"{prefix}{i:06d}" for i in range(n))
    return ids, vectors, blob_of


def make_dataset(spec: SynthSpec) -> SynthData:
    """Deterministic blobs: unlabeled (optionally noised), labeled, heldout."""
    rng = np.random.default_rng(spec.seed)
    centers = _centers(spec)
    names = tuple(f"class_{c}" for c in range(spec.classes))

    u_ids, u_vec, u_blob = _blob_split(rng, centers, spec.cluster_std,
                                       spec.n_unlabeled, "u")
    n_noisy = int(np.floor(spec.noise_fraction * spec.n_unlabeled + 0.5))
    noisy_mask = np.zeros(spec.n_unlabeled, dtype=bool)
    if n_noisy:
        swapped = rng.choice(spec.n_unlabeled, size=n_noisy, replace=False)
        noisy_mask[swapped] = True
        u_blob = u_blob.copy()
        for i in swapped:
            wrong = (u_blob[i] + 1 + rng.integers(spec.classes - 1)) % spec.classes
            u_vec[i] = centers[wrong] + rng.normal(0.0, spec.cluster_std, spec.dim)
            u_blob[i] = wrong

    l_ids, l_vec, l_blob = _blob_split(rng, centers, spec.cluster_std,
                                       spec.n_labeled, "l")
    h_ids, h_vec, h_blob = _blob_split(rng, centers, spec.cluster_std,
                                       spec.n_heldout, "h")

    return SynthData(
        unlabeled=EmbeddingSet(ids=u_ids, vectors=u_vec.astype(np.float32)),
        unlabeled_blobs=u_blob,
        noisy_mask=noisy_mask,
        labeled=EmbeddingSet(ids=l_ids, vectors=l_vec.astype(np.float32)),
        labeled_table=LabelTable(
            entries={rid: int(b) for rid, b in zip(l_ids, l_blob)},
            class_names=names,
        ),
        heldout=EmbeddingSet(ids=h_ids, vectors=h_vec.astype(np.float32)),
        heldout_table=LabelTable(
            entries={rid: int(b) for rid, b in zip(h_ids, h_blob)},
            class_names=names,
        ),
        class_names=names,
    )


def write_dataset(data: SynthData, spec: SynthSpec, out_dir: str | Path) -> dict:
    """Write the fixture files; returns the path map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "unlabeled": out / "unlabeled.flke",
        "labeled": out / "labeled.flke",
        "labeled_labels": out / "labeled.jsonl",
        "heldout": out / "heldout.flke",
        "heldout_labels": out / "heldout.jsonl",
        "unlabeled_truth": out / "unlabeled_truth.jsonl",
        "meta": out / "synth_meta.json",
    }
    write_embeddings(data.unlabeled, paths["unlabeled"])
    write_embeddings(data.labeled, paths["labeled"])
    write_labels(data.labeled_table, paths["labeled_labels"])
    write_embeddings(data.heldout, paths["heldout"])
    write_labels(data.heldout_table, paths["heldout_labels"])
    with open(paths["unlabeled_truth"], "w", encoding="utf-8") as fh:
        for rid, blob, noisy in zip(
            data.unlabeled.ids, data.unlabeled_blobs, data.noisy_mask
        ):
            fh.write(json.dumps({"id": rid, "blob": int(blob), "noisy": bool(noisy)}) + "\n")
    paths["meta"].write_text(json.dumps(asdict(spec), sort_keys=True))
    return {k: str(v) for k, v in paths.items()}
