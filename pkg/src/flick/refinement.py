"""Pseudo-label refinement: stratified split, probe training, per-cluster
accuracy ranking and top-k selection.

The probe classifier is trained on the small split of the pseudo-labeled
data and evaluated on the large split; clusters whose membership the probe
can reproduce are kept, the rest are dropped before intermediate training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import (
    ClassifierModel,
    TrainConfig,
    forward,
    init_classifier,
    train,
)
from .clustering import PseudoLabeledSet
from .errors import ArgumentError, SelectionError
from .ingestion import EmbeddingSet, subset_view


@dataclass(frozen=True)
class SplitPair:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    train_frac: float

    def __post_init__(self):
        if set(self.train_ids) & set(self.test_ids):
            raise ArgumentError("train and test ids overlap")


@dataclass(frozen=True)
class ClusterRow:
    cluster_id: int
    test_support: int
    correct: int
    accuracy: float | None  # None when test_support == 0

    def __post_init__(self):
        if self.correct > self.test_support:
            raise ArgumentError("correct exceeds support")


@dataclass(frozen=True)
class ClusterReport:
    rows: tuple[ClusterRow, ...]
    probe_overall_accuracy: float

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "cluster_id": r.cluster_id,
                    "test_support": r.test_support,
                    "correct": r.correct,
                    "accuracy": r.accuracy,
                }
                for r in self.rows
            ],
            "probe_overall_accuracy": self.probe_overall_accuracy,
        }

    @staticmethod
    def from_dict(data: dict) -> "ClusterReport":
        return ClusterReport(
            rows=tuple(
                ClusterRow(
                    cluster_id=r["cluster_id"],
                    test_support=r["test_support"],
                    correct=r["correct"],
                    accuracy=r["accuracy"],
                )
                for r in data["rows"]
            ),
            probe_overall_accuracy=data["probe_overall_accuracy"],
        )


@dataclass(frozen=True)
class TopKSelection:
    clusters: tuple[int, ...]  # original cluster ids in rank order
    clamped: bool  # True when fewer rankable clusters existed than requested

    def to_dict(self) -> dict:
        return {"clusters": list(self.clusters), "clamped": self.clamped}


@dataclass(frozen=True)
class RefinedSet:
    """All records from the selected clusters, relabeled contiguously in
    rank order."""

    selected_clusters: tuple[int, ...]
    label_map: dict[int, int]  # original cluster id -> contiguous index
    ids: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (len(self.ids),):
            raise ArgumentError("one label per id required")
        expected = set(range(len(self.selected_clusters)))
        if set(self.label_map.values()) != expected:
            raise ArgumentError("label_map must be a bijection onto 0..k_top-1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def num_classes(self) -> int:
        return len(self.selected_clusters)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(
    pseudo: PseudoLabeledSet, train_frac: float, seed: int
) -> SplitPair:
    """Per-cluster proportional split, deterministic for a fixed seed.

    Each cluster contributes round(train_frac * size) members to train,
    capped at size-1 so every non-empty cluster keeps at least one test
    member (a cluster of size 1 goes entirely to test).
    """
    if not (0.0 < train_frac < 1.0):
        raise ArgumentError("train_frac must lie strictly between 0 and 1")
    if pseudo.n == 0:
        raise ArgumentError("cannot split an empty pseudo-labeled set")
    rng = np.random.default_rng(seed)
    labels = pseudo.pseudo_labels
    in_train = np.zeros(pseudo.n, dtype=bool)
    for cluster in range(pseudo.k):
        members = np.flatnonzero(labels == cluster)
        size = members.size
        if size == 0:
            continue
        take = min(_round_half_up(train_frac * size), size - 1)
        if take > 0:
            picked = rng.choice(size, size=take, replace=False)
            in_train[members[picked]] = True
    train_ids = tuple(rid for rid, t in zip(pseudo.ids, in_train) if t)
    test_ids = tuple(rid for rid, t in zip(pseudo.ids, in_train) if not t)
    return SplitPair(train_ids=train_ids, test_ids=test_ids, train_frac=train_frac)


def probe_and_report(
    pseudo: PseudoLabeledSet,
    split: SplitPair,
    X: EmbeddingSet,
    cfg: TrainConfig,
    seed: int,
    hidden_size: int = 256,
) -> tuple[ClassifierModel, ClusterReport]:
    """Train a fresh probe on the train split and score every cluster on the
    test split. Clusters without test members get accuracy None."""
    if not split.train_ids:
        raise ArgumentError("empty train split")
    label_of = dict(zip(pseudo.ids, pseudo.pseudo_labels.tolist()))
    unknown = [rid for rid in split.train_ids + split.test_ids if rid not in label_of]
    if unknown:
        raise ArgumentError(f"split id {unknown[0]!r} not in the pseudo-labeled set")

    # a softmax head needs >= 2 outputs; the k = 1 degenerate case pads the
    # label space so the trivial single cluster can still be ranked
    out_classes = max(pseudo.k, 2)
    probe = init_classifier(X.dim, hidden_size, out_classes, seed=seed)
    X_train = subset_view(X, split.train_ids)
    y_train = np.array([label_of[rid] for rid in split.train_ids], dtype=np.int64)
    probe, _ = train(probe, X_train, y_train, cfg)

    support = np.zeros(pseudo.k, dtype=np.int64)
    correct = np.zeros(pseudo.k, dtype=np.int64)
    if split.test_ids:
        X_test = subset_view(X, split.test_ids)
        y_test = np.array([label_of[rid] for rid in split.test_ids], dtype=np.int64)
        # argmax over real cluster ids only; the padding class (k = 1 case)
        # is never a valid prediction
        y_hat = np.argmax(forward(probe, X_test)[:, : pseudo.k], axis=1)
        for truth, guess in zip(y_test, y_hat):
            support[truth] += 1
            if truth == guess:
                correct[truth] += 1
    rows = tuple(
        ClusterRow(
            cluster_id=c,
            test_support=int(support[c]),
            correct=int(correct[c]),
            accuracy=float(correct[c] / support[c]) if support[c] else None,
        )
        for c in range(pseudo.k)
    )
    total = int(support.sum())
    overall = float(correct.sum() / total) if total else 0.0
    return probe, ClusterReport(rows=rows, probe_overall_accuracy=overall)


def select_top_k(report: ClusterReport, k_top: int) -> TopKSelection:
    """Rank clusters by accuracy desc, then test support desc, then cluster
    id asc, and keep the first min(k_top, rankable). Zero-support clusters
    are never selected; clamping to fewer clusters is flagged."""
    if k_top < 1:
        raise ArgumentError("k_top must be >= 1")
    rankable = [r for r in report.rows if r.test_support > 0]
    if not rankable:
        raise SelectionError("no cluster has test support; nothing to rank")
    ordered = sorted(
        rankable, key=lambda r: (-r.accuracy, -r.test_support, r.cluster_id)
    )
    taken = ordered[: min(k_top, len(ordered))]
    return TopKSelection(
        clusters=tuple(r.cluster_id for r in taken),
        clamped=len(taken) < k_top,
    )


def build_refined(
    pseudo: PseudoLabeledSet, selection: TopKSelection
) -> RefinedSet:
    """Keep every record whose pseudo-label was selected; relabel contiguously
    in rank order (best cluster becomes class 0)."""
    if not selection.clusters:
        raise ArgumentError("selection is empty")
    label_map = {cid: i for i, cid in enumerate(selection.clusters)}
    keep_ids = []
    keep_labels = []
    for rid, lab in zip(pseudo.ids, pseudo.pseudo_labels.tolist()):
        if lab in label_map:
            keep_ids.append(rid)
            keep_labels.append(label_map[lab])
    return RefinedSet(
        selected_clusters=selection.clusters,
        label_map=label_map,
        ids=tuple(keep_ids),
        labels=np.array(keep_labels, dtype=np.int64),
    )
