"""K-means over embedding vectors; cluster indices become pseudo-labels.

Lloyd iterations with k-means++ seeding by default. The per-iteration
objective (sum of squared distances to assigned centroids) is recorded so
monotonicity is testable, and empty clusters are repaired by re-seeding
them to the point farthest from their previous centroid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .ingestion import EmbeddingSet

KMEANS_PP = "k-means++"
UNIFORM = "uniform"

_ASSIGN_CHUNK = 2048  # rows per distance block, keeps n*k*d temporaries bounded


@dataclass(frozen=True)
class ClusterModel:
    """Fitted centroids plus the bookkeeping needed by the audit trail."""

    centroids: np.ndarray  # k x d float64
    inertia: float
    iterations_run: int
    seed: int
    inertia_trace: tuple[float, ...]
    repairs: int

    def __post_init__(self):
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ArgumentError("centroids must be a nonempty k x d matrix")
        if not np.isfinite(self.centroids).all():
            raise ArgumentError("non-finite centroid")
        if self.inertia < 0:
            raise ArgumentError("negative inertia")
        self.centroids.setflags(write=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "dim": self.dim,
            "centroids": self.centroids.ravel().tolist(),
            "inertia": self.inertia,
            "iterations_run": self.iterations_run,
            "seed": self.seed,
            "inertia_trace": list(self.inertia_trace),
            "repairs": self.repairs,
        }

    @staticmethod
    def from_dict(data: dict) -> "ClusterModel":
        centroids = np.array(data["centroids"], dtype=np.float64).reshape(
            data["k"], data["dim"]
        )
        return ClusterModel(
            centroids=centroids,
            inertia=data["inertia"],
            iterations_run=data["iterations_run"],
            seed=data["seed"],
            inertia_trace=tuple(data.get("inertia_trace", ())),
            repairs=data.get("repairs", 0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @staticmethod
    def load(path: str | Path) -> "ClusterModel":
        return ClusterModel.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PseudoLabeledSet:
    """Record ids paired with their cluster index, kept next to the source set."""

    ids: tuple[str, ...]
    pseudo_labels: np.ndarray  # int64, values in [0, k)
    k: int
    source: EmbeddingSet

    def __post_init__(self):
        labels = np.asarray(self.pseudo_labels, dtype=np.int64)
        if labels.shape != (len(self.ids),):
            raise ArgumentError("one pseudo-label per id required")
        if self.ids != self.source.ids:
            raise ArgumentError("ids must match the source embedding set")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ArgumentError("pseudo-label out of range")
        labels.setflags(write=False)
        object.__setattr__(self, "pseudo_labels", labels)

    @property
    def n(self) -> int:
        return len(self.ids)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.pseudo_labels, minlength=self.k)


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact n x k squared Euclidean distances, chunked over rows."""
    n = X.shape[0]
    out = np.empty((n, centroids.shape[0]), dtype=np.float64)
    for start in range(0, n, _ASSIGN_CHUNK):
        block = X[start : start + _ASSIGN_CHUNK]
        diff = block[:, None, :] - centroids[None, :, :]
        out[start : start + _ASSIGN_CHUNK] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def _assign_to_centroids(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, per-point squared distance to the chosen centroid)."""
    distances = _squared_distances(X, centroids)
    labels = np.argmin(distances, axis=1)  # lowest index wins ties
    return labels, distances[np.arange(X.shape[0]), labels]


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding: each next centroid is drawn proportionally to the
    squared distance from the nearest centroid chosen so far."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining mass at distance zero: duplicate points; pick uniformly
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[j] = X[idx]
        np.minimum(closest, np.sum((X - centroids[j]) ** 2, axis=1), out=closest)
    return centroids


def _uniform_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(X.shape[0], size=k, replace=False)
    return X[idx].astype(np.float64)


def kmeans_fit(
    X: EmbeddingSet,
    k: int,
    max_iter: int = 300,
    tol: float = 1e-4,
    seed: int = 0,
    init: str = KMEANS_PP,
) -> ClusterModel:
    """Fit k centroids with Lloyd iterations.

    Stops when the relative inertia improvement drops below `tol` or after
    `max_iter` iterations. Deterministic for a fixed seed. Empty clusters
    are re-seeded to the point farthest from their previous centroid (at
    most once per cluster per iteration; count reported on the model).
    """
    if k <= 0:
        raise ArgumentError(f"k must be positive, got {k}")
    if k > X.n:
        raise ArgumentError(f"k={k} exceeds number of points n={X.n}")
    if max_iter <= 0:
        raise ArgumentError("max_iter must be positive")
    if tol < 0:
        raise ArgumentError("tol must be nonnegative")
    data = X.vectors.astype(np.float64)
    rng = np.random.default_rng(seed)
    if init == KMEANS_PP:
        centroids = _kmeans_pp_init(data, k, rng)
    elif init == UNIFORM:
        centroids = _uniform_init(data, k, rng)
    else:
        raise ArgumentError(f"unknown init {init!r}")

    trace: list[float] = []
    repairs = 0
    iterations = 0
    previous = None
    for _ in range(max_iter):
        iterations += 1
        labels, _ = _assign_to_centroids(data, centroids)
        updated = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                updated[j] = data[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        used: set[int] = set()
        for j in empty:
            # farthest point from the stale centroid, skipping points already
            # spent on another repair this iteration
            away = np.sum((data - centroids[j]) ** 2, axis=1)
            order = np.argsort(-away, kind="stable")
            pick = next((int(i) for i in order if int(i) not in used), int(order[0]))
            used.add(pick)
            updated[j] = data[pick]
            repairs += 1
        centroids = updated
        inertia = float(
            np.sum((data - centroids[labels]) ** 2)
        )
        trace.append(inertia)
        if previous is not None:
            if previous == 0.0 or (previous - inertia) / previous < tol:
                break
        previous = inertia

    final_labels, final_sq = _assign_to_centroids(data, centroids)
    final_inertia = float(final_sq.sum())
    trace.append(final_inertia)
    return ClusterModel(
        centroids=centroids,
        inertia=final_inertia,
        iterations_run=iterations,
        seed=seed,
        inertia_trace=tuple(trace),
        repairs=repairs,
    )


def assign(model: ClusterModel, X: EmbeddingSet) -> np.ndarray:
    """Nearest-centroid index for every row; ties go to the lowest index."""
    if X.dim != model.dim:
        raise ArgumentError(
            f"embedding dim {X.dim} != centroid dim {model.dim}"
        )
    labels, _ = _assign_to_centroids(X.vectors.astype(np.float64), model.centroids)
    return labels


def pseudo_label(X: EmbeddingSet, model: ClusterModel) -> PseudoLabeledSet:
    """Wrap assignments as pseudo-labels tied to their source records."""
    return PseudoLabeledSet(
        ids=X.ids, pseudo_labels=assign(model, X), k=model.k, source=X
    )
