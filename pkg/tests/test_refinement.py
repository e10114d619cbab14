import numpy as np
import pytest

from flick.classifier import TrainConfig
from flick.clustering import PseudoLabeledSet
from flick.errors import ArgumentError, SelectionError
from flick.ingestion import EmbeddingSet
from flick.refinement import (
    ClusterReport,
    ClusterRow,
    SplitPair,
    TopKSelection,
    build_refined,
    probe_and_report,
    select_top_k,
    stratified_split,
)

from oracles import rank_clusters


def pseudo_set(labels, k, vectors=None, d=3):
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if vectors is None:
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((n, d)).astype(np.float32)
    ids = tuple(f"p{i}" for i in range(n))
    source = EmbeddingSet(ids=ids, vectors=vectors)
    return PseudoLabeledSet(ids=ids, pseudo_labels=labels, k=k, source=source)


def blob_pseudo_set(n_per=60, k=4, sigma=0.1, separation=10.0, d=6, seed=1):
    """Pseudo-labels that exactly match well-separated blob membership."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for c in range(k):
        center = np.zeros(d)
        center[c % d] = separation * (1 + c // d)
        rows.append(rng.normal(center, sigma, size=(n_per, d)))
        labels.extend([c] * n_per)
    vectors = np.vstack(rows).astype(np.float32)
    return pseudo_set(labels, k, vectors=vectors)


class TestStratifiedSplit:
    def test_quarter_of_four_hundred(self):
        labels = np.repeat(np.arange(4), 100)
        pseudo = pseudo_set(labels, 4)
        split = stratified_split(pseudo, 0.25, seed=5)
        assert len(split.train_ids) == 100
        label_of = dict(zip(pseudo.ids, labels))
        from collections import Counter

        train_counts = Counter(label_of[rid] for rid in split.train_ids)
        assert all(train_counts[c] == 25 for c in range(4))

    def test_singleton_cluster_goes_to_test(self):
        labels = np.array([0] * 10 + [1])
        pseudo = pseudo_set(labels, 2)
        split = stratified_split(pseudo, 0.5, seed=1)
        assert "p10" in split.test_ids

    def test_disjoint_and_covering(self):
        pseudo = pseudo_set(np.random.default_rng(2).integers(0, 5, 200), 5)
        split = stratified_split(pseudo, 0.3, seed=3)
        assert not (set(split.train_ids) & set(split.test_ids))
        assert set(split.train_ids) | set(split.test_ids) == set(pseudo.ids)

    def test_per_cluster_deviation_at_most_one(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 20, size=1000)
        pseudo = pseudo_set(labels, 20)
        split = stratified_split(pseudo, 0.25, seed=6)
        label_of = dict(zip(pseudo.ids, labels.tolist()))
        from collections import Counter

        train_counts = Counter(label_of[rid] for rid in split.train_ids)
        sizes = Counter(labels.tolist())
        for c in range(20):
            expected = int(np.floor(0.25 * sizes[c] + 0.5))
            assert abs(train_counts.get(c, 0) - expected) <= 1

    def test_every_cluster_keeps_a_test_member(self):
        labels = np.repeat(np.arange(3), 2)  # clusters of size 2
        pseudo = pseudo_set(labels, 3)
        split = stratified_split(pseudo, 0.9, seed=7)
        label_of = dict(zip(pseudo.ids, labels.tolist()))
        test_clusters = {label_of[rid] for rid in split.test_ids}
        assert test_clusters == {0, 1, 2}

    def test_deterministic(self):
        pseudo = pseudo_set(np.random.default_rng(8).integers(0, 4, 120), 4)
        s1 = stratified_split(pseudo, 0.25, seed=11)
        s2 = stratified_split(pseudo, 0.25, seed=11)
        assert s1 == s2
        s3 = stratified_split(pseudo, 0.25, seed=12)
        assert s1.train_ids != s3.train_ids

    def test_bad_frac(self):
        pseudo = pseudo_set([0, 1], 2)
        for frac in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ArgumentError):
                stratified_split(pseudo, frac, seed=0)


def probe_cfg(epochs=150):
    return TrainConfig(
        learning_rate=1e-2, epsilon=1e-8, batch_size=64, epochs=epochs, shuffle_seed=2
    )


class TestProbeAndReport:
    def test_separable_clusters_all_accuracy_one(self):
        pseudo = blob_pseudo_set()
        split = stratified_split(pseudo, 0.25, seed=9)
        probe, report = probe_and_report(
            pseudo, split, pseudo.source, probe_cfg(), seed=13, hidden_size=32
        )
        assert all(row.accuracy == 1.0 for row in report.rows)
        assert report.probe_overall_accuracy == 1.0

    def test_zero_support_cluster_flagged(self):
        labels = np.array([0] * 8 + [1] * 8 + [2] * 2)
        pseudo = pseudo_set(labels, 3)
        # put both cluster-2 members in train by hand
        train = tuple(f"p{i}" for i in [0, 1, 8, 9, 16, 17])
        test = tuple(rid for rid in pseudo.ids if rid not in train)
        split = SplitPair(train_ids=train, test_ids=test, train_frac=0.3)
        _, report = probe_and_report(
            pseudo, split, pseudo.source, probe_cfg(epochs=2), seed=1, hidden_size=8
        )
        assert report.rows[2].test_support == 0
        assert report.rows[2].accuracy is None

    def test_support_conservation(self):
        pseudo = blob_pseudo_set(n_per=30)
        split = stratified_split(pseudo, 0.25, seed=10)
        _, report = probe_and_report(
            pseudo, split, pseudo.source, probe_cfg(epochs=3), seed=2, hidden_size=8
        )
        assert sum(r.test_support for r in report.rows) == len(split.test_ids)

    def test_empty_train_split_rejected(self):
        pseudo = pseudo_set([0, 1], 2)
        split = SplitPair(train_ids=(), test_ids=pseudo.ids, train_frac=0.25)
        with pytest.raises(ArgumentError):
            probe_and_report(pseudo, split, pseudo.source, probe_cfg(1), seed=0)

    def test_single_cluster_degenerate_still_ranked(self):
        labels = np.zeros(12, dtype=np.int64)
        pseudo = pseudo_set(labels, 1)
        split = stratified_split(pseudo, 0.25, seed=3)
        _, report = probe_and_report(
            pseudo, split, pseudo.source, probe_cfg(epochs=5), seed=3, hidden_size=4
        )
        assert len(report.rows) == 1
        assert report.rows[0].accuracy == 1.0


def report_from(rows):
    total = sum(r[1] for r in rows)
    correct = sum(r[2] for r in rows)
    return ClusterReport(
        rows=tuple(
            ClusterRow(
                cluster_id=c,
                test_support=s,
                correct=k,
                accuracy=(k / s) if s else None,
            )
            for c, s, k in rows
        ),
        probe_overall_accuracy=(correct / total) if total else 0.0,
    )


class TestSelectTopK:
    def test_fifteen_of_twenty(self):
        rng = np.random.default_rng(14)
        rows = []
        for c in range(20):
            support = int(rng.integers(5, 40))
            rows.append((c, support, int(rng.integers(0, support + 1))))
        selection = select_top_k(report_from(rows), 15)
        assert len(selection.clusters) == 15
        assert not selection.clamped

    def test_tie_broken_by_support(self):
        rows = [(0, 50, 40), (1, 10, 8), (2, 30, 12)]
        selection = select_top_k(report_from(rows), 2)
        # clusters 0 and 1 tie at accuracy 0.8; larger support ranks first
        assert selection.clusters == (0, 1)

    def test_undefined_accuracy_never_selected(self):
        rows = [(0, 0, 0), (1, 10, 5)]
        selection = select_top_k(report_from(rows), 5)
        assert selection.clusters == (1,)
        assert selection.clamped

    def test_no_rankable_clusters(self):
        rows = [(0, 0, 0), (1, 0, 0)]
        with pytest.raises(SelectionError):
            select_top_k(report_from(rows), 3)

    def test_invalid_k_top(self):
        with pytest.raises(ArgumentError):
            select_top_k(report_from([(0, 5, 3)]), 0)

    def test_200_random_reports_match_sort_oracle(self):
        rng = np.random.default_rng(15)
        for trial in range(200):
            k = int(rng.integers(1, 25))
            rows = []
            for c in range(k):
                support = int(rng.integers(0, 12))
                rows.append((c, support, int(rng.integers(0, support + 1))))
            k_top = int(rng.integers(1, 30))
            expected_full = rank_clusters(rows)
            if not expected_full:
                with pytest.raises(SelectionError):
                    select_top_k(report_from(rows), k_top)
                continue
            selection = select_top_k(report_from(rows), k_top)
            assert list(selection.clusters) == expected_full[:k_top]
            assert selection.clamped == (len(expected_full) < k_top)


class TestBuildRefined:
    def test_selecting_everything_keeps_every_record(self):
        labels = np.random.default_rng(16).integers(0, 4, 50)
        pseudo = pseudo_set(labels, 4)
        selection = TopKSelection(clusters=(2, 0, 3, 1), clamped=False)
        refined = build_refined(pseudo, selection)
        assert len(refined.ids) == 50
        assert refined.num_classes == 4

    def test_rank_order_remap(self):
        labels = np.array([7, 2, 7, 5], dtype=np.int64)
        pseudo = pseudo_set(labels, 8)
        selection = TopKSelection(clusters=(7, 2), clamped=False)
        refined = build_refined(pseudo, selection)
        assert refined.label_map == {7: 0, 2: 1}
        assert refined.ids == ("p0", "p1", "p2")
        assert refined.labels.tolist() == [0, 1, 0]

    def test_record_count_matches_cluster_sizes(self):
        rng = np.random.default_rng(17)
        labels = rng.integers(0, 6, 300)
        pseudo = pseudo_set(labels, 6)
        selection = TopKSelection(clusters=(4, 1, 5), clamped=False)
        refined = build_refined(pseudo, selection)
        expected = sum(int((labels == c).sum()) for c in (4, 1, 5))
        assert len(refined.ids) == expected
        # nothing from unselected clusters survives
        label_of = dict(zip(pseudo.ids, labels.tolist()))
        assert all(label_of[rid] in (4, 1, 5) for rid in refined.ids)

    def test_empty_selection_rejected(self):
        pseudo = pseudo_set([0, 1], 2)
        with pytest.raises(ArgumentError):
            build_refined(pseudo, TopKSelection(clusters=(), clamped=True))


class TestEndToEndDeterminism:
    def test_split_probe_select_refine_deterministic(self):
        pseudo = blob_pseudo_set(n_per=40, k=5)

        def run():
            split = stratified_split(pseudo, 0.25, seed=21)
            _, report = probe_and_report(
                pseudo, split, pseudo.source, probe_cfg(epochs=4), seed=22,
                hidden_size=16,
            )
            selection = select_top_k(report, 3)
            refined = build_refined(pseudo, selection)
            return selection, refined.ids, refined.labels.tolist()

        assert run() == run()
