"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line. Run with `pytest tests/test_acceptance.py -s`.
"""

import hashlib
import json
import statistics
import time
from contextlib import contextmanager

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from flick.classifier import init_classifier
from flick.clustering import assign, kmeans_fit, pseudo_label
from flick.errors import SelectionError
from flick.ingestion import EmbeddingSet, subsample_few_labels
from flick.pipeline import make_config, run_baseline, run_flick, run_no_refinement
from flick.refinement import stratified_split, select_top_k
from flick.synth import SynthSpec, make_dataset

from oracles import rank_clusters, scalar_metrics
from test_refinement import report_from
from test_classifier import analytic_grads, finite_difference_grads, gradcheck_model, max_relative_error


@contextmanager
def criterion(name, budget_seconds):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.monotonic() - start
    if elapsed > budget_seconds:
        print(f"[FAIL] {name} (over budget: {elapsed:.1f}s > {budget_seconds}s)")
        raise AssertionError(f"{name} exceeded its {budget_seconds}s budget")
    print(f"[PASS] {name} ({elapsed:.1f}s)")


def test_refinement_selection_matches_sort_oracle():
    with criterion("refinement oracle (250 random reports, exact)", 5):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 250:
            k = int(rng.integers(1, 30))
            rows = []
            for c in range(k):
                support = int(rng.integers(0, 15))
                rows.append((c, support, int(rng.integers(0, support + 1))))
            k_top = int(rng.integers(1, 35))
            expected = rank_clusters(rows)
            if not expected:
                with pytest.raises(SelectionError):
                    select_top_k(report_from(rows), k_top)
                continue
            selection = select_top_k(report_from(rows), k_top)
            assert list(selection.clusters) == expected[:k_top]
            assert selection.clamped == (len(expected) < k_top)
            checked += 1


def test_kmeans_invariants():
    with criterion("k-means invariants (50 random instances + blob recovery)", 30):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(30, 2001))
            d = int(rng.integers(2, 65))
            k = int(rng.integers(1, 21))
            k = min(k, n)
            X = EmbeddingSet(
                ids=tuple(f"r{i}" for i in range(n)),
                vectors=rng.standard_normal((n, d)).astype(np.float32),
            )
            model = kmeans_fit(X, k=k, max_iter=50, tol=1e-4,
                               seed=int(rng.integers(2**31)))
            trace = model.inertia_trace
            for a, b in zip(trace, trace[1:]):
                assert b <= a * (1 + 1e-12) + 1e-12
            # independent nearest-centroid recompute
            data = X.vectors.astype(np.float64)
            d2 = ((data[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
            optimal = np.argmin(d2, axis=1)
            assert np.array_equal(assign(model, X), optimal)

        # three tight blobs, centers >= 10 apart, must be recovered exactly
        blob_rng = np.random.default_rng(99)
        centers = np.zeros((3, 8))
        for i in range(3):
            centers[i, i] = 10.0
        rows, truth = [], []
        for c in range(3):
            rows.append(blob_rng.normal(centers[c], 0.1, size=(80, 8)))
            truth.extend([c] * 80)
        X = EmbeddingSet(
            ids=tuple(f"b{i}" for i in range(240)),
            vectors=np.vstack(rows).astype(np.float32),
        )
        model = kmeans_fit(X, k=3, seed=5)
        assert adjusted_rand_score(truth, assign(model, X)) == 1.0


def test_gradient_check():
    with criterion("gradient check (20 random models, rel err < 1e-4)", 10):
        for trial in range(20):
            model, X, y = gradcheck_model(seed=5000 + trial)
            numeric = finite_difference_grads(model, X, y, step=1e-4)
            analytic = analytic_grads(model, X, y)
            for name in ("W1", "b1", "W2", "b2"):
                err = max_relative_error(analytic[name], numeric[name])
                assert err < 1e-4, f"{name} error {err} on trial {trial}"


def test_split_invariants():
    with criterion("split invariants (100 random pseudo-labeled sets)", 5):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(2, 500))
            k = int(rng.integers(1, 21))
            labels = rng.integers(0, k, size=n)
            ids = tuple(f"p{i}" for i in range(n))
            source = EmbeddingSet(
                ids=ids, vectors=rng.standard_normal((n, 2)).astype(np.float32)
            )
            from flick.clustering import PseudoLabeledSet

            pseudo = PseudoLabeledSet(ids=ids, pseudo_labels=labels, k=k, source=source)
            frac = float(rng.uniform(0.05, 0.95))
            split = stratified_split(pseudo, frac, seed=int(rng.integers(2**31)))
            train, test = set(split.train_ids), set(split.test_ids)
            assert not (train & test)
            assert train | test == set(ids)
            label_of = dict(zip(ids, labels.tolist()))
            for c in range(k):
                size = int((labels == c).sum())
                if size == 0:
                    continue
                got = sum(1 for rid in split.train_ids if label_of[rid] == c)
                expected = int(np.floor(frac * size + 0.5))
                assert abs(got - expected) <= 1


def test_metrics_oracle():
    with criterion("metrics oracle (100 random confusions, 1e-12)", 5):
        from flick.evaluation import compute_metrics

        rng = np.random.default_rng(47)
        for _ in range(100):
            z = int(rng.integers(2, 8))
            counts = rng.integers(0, 40, size=(z, z))
            if counts.sum() == 0:
                counts[0, 0] = 1
            report = compute_metrics(counts)
            per_class, acc, macro = scalar_metrics(counts.tolist())
            assert abs(report.accuracy - acc) <= 1e-12
            for m, (p, s, sp, f1) in zip(report.per_class, per_class):
                assert abs(m.precision - p) <= 1e-12
                assert abs(m.sensitivity - s) <= 1e-12
                assert abs(m.specificity - sp) <= 1e-12
                assert abs(m.f1 - f1) <= 1e-12
            assert abs(report.macro_precision - macro[0]) <= 1e-12
            assert abs(report.macro_sensitivity - macro[1]) <= 1e-12
            assert abs(report.macro_specificity - macro[2]) <= 1e-12
            assert abs(report.macro_f1 - macro[3]) <= 1e-12
        # binary symmetry is exact
        for _ in range(50):
            counts = rng.integers(0, 50, size=(2, 2))
            if counts.sum() == 0:
                continue
            report = compute_metrics(counts)
            assert report.per_class[1].sensitivity == report.per_class[0].specificity


def acceptance_fixture(seed):
    return make_dataset(SynthSpec(
        n_unlabeled=2000, n_labeled=100, n_heldout=600, classes=3, dim=32,
        cluster_std=0.5, center_separation=10.0, noise_fraction=0.3,
        seed=1000 + seed,
    ))


def run_all_modes(seed):
    data = acceptance_fixture(seed)
    cfg = make_config(seed=seed, profile="proxy")
    few = subsample_few_labels(
        data.labeled_table, cfg.few_label.mode, cfg.few_label.count,
        cfg.seeds.subsample,
    )
    labeled = (data.labeled, data.labeled_table)
    heldout = (data.heldout, data.heldout_table)
    flick = run_flick(cfg, data.unlabeled, labeled, few, heldout)
    base = run_baseline(cfg, labeled, few, heldout)
    noref = run_no_refinement(cfg, data.unlabeled, labeled, few, heldout)
    return flick, base, noref


def test_end_to_end_improvement():
    with criterion("end-to-end improvement (5 seeds, median macro-F1)", 120):
        flick_f1, base_f1, noref_f1 = [], [], []
        for seed in range(5):
            flick, base, noref = run_all_modes(seed)
            flick_f1.append(flick.evaluation.macro_f1)
            base_f1.append(base.evaluation.macro_f1)
            noref_f1.append(noref.evaluation.macro_f1)
        med_flick = statistics.median(flick_f1)
        med_base = statistics.median(base_f1)
        med_noref = statistics.median(noref_f1)
        print(f"    median macro-F1: flick={med_flick:.4f} "
              f"baseline={med_base:.4f} no_refinement={med_noref:.4f}")
        assert med_flick >= med_base
        assert med_flick >= med_noref
        assert med_flick >= 0.85


def test_cmd_run_determinism():
    with criterion("cmd_run determinism (byte-identical reports)", 60):
        from flick.cli import main
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            fixture = tmp / "fixture"
            assert main([
                "synth", "--out", str(fixture), "--n-unlabeled", "2000",
                "--n-labeled", "100", "--n-heldout", "600", "--classes", "3",
                "--dim", "32", "--noise", "0.3", "--seed", "1000",
            ]) == 0
            reports = []
            for name in ("first", "second"):
                out = tmp / name
                assert main([
                    "run", "--mode", "flick",
                    "--unlabeled", str(fixture / "unlabeled.flke"),
                    "--labeled", str(fixture / "labeled.flke"),
                    "--labels", str(fixture / "labeled.jsonl"),
                    "--heldout", str(fixture / "heldout.flke"),
                    "--heldout-labels", str(fixture / "heldout.jsonl"),
                    "--out", str(out), "--seed", "0", "--profile", "proxy",
                ]) == 0
                reports.append(out)
            names_a = sorted(p.name for p in reports[0].iterdir())
            names_b = sorted(p.name for p in reports[1].iterdir())
            assert names_a == names_b
            for name in names_a:
                a, b = reports[0] / name, reports[1] / name
                if name == "result.json":
                    da, db = json.loads(a.read_text()), json.loads(b.read_text())
                    da.pop("timestamp"), db.pop("timestamp")
                    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)
                else:
                    assert a.read_bytes() == b.read_bytes(), name


def test_weight_transfer_provenance():
    with criterion("weight-transfer provenance (bit-exact hidden layer)", 60):
        flick, _, _ = run_all_modes(0)
        w1 = hashlib.sha256(flick.plft_model.W1.tobytes()).hexdigest()
        b1 = hashlib.sha256(flick.plft_model.b1.tobytes()).hexdigest()
        assert flick.transfer_snapshot == {"w1_sha256": w1, "b1_sha256": b1}
        # the trained final model moved away from the snapshot, proving the
        # snapshot was taken at initialization rather than after training
        final_w1 = hashlib.sha256(flick.final_model.W1.tobytes()).hexdigest()
        assert final_w1 != w1
