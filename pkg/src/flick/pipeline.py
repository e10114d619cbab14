"""End-to-end orchestration: clustering, refinement, intermediate training
on pseudo-labels (PL-FT) and few-label fine-tuning with transferred
weights (Cls-FT), plus the baseline and no-refinement reference modes.
"""

from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import (
    ClassifierModel,
    TrainConfig,
    TrainHistory,
    init_classifier,
    predict,
    train,
    transfer_init,
)
from .clustering import ClusterModel, kmeans_fit, pseudo_label
from .errors import ArgumentError, FlickError, StageError
from .evaluation import EvaluationReport, evaluate
from .ingestion import (
    EmbeddingSet,
    FewLabelSample,
    LabelTable,
    labeled_view,
    subset_view,
)
from .refinement import (
    ClusterReport,
    TopKSelection,
    build_refined,
    probe_and_report,
    select_top_k,
    stratified_split,
)

MODE_FLICK = "flick"
MODE_NO_REFINEMENT = "no_refinement"
MODE_BASELINE = "baseline"

PROFILES = {
    "replication": {"learning_rate": 3e-5, "epsilon": 1e-6},
    "proxy": {"learning_rate": 1e-3, "epsilon": 1e-8},
}


@dataclass(frozen=True)
class SeedBundle:
    cluster: int = 0
    split: int = 1
    probe: int = 2
    plft: int = 3
    clsft: int = 4
    subsample: int = 5

    @staticmethod
    def expand(seed: int) -> "SeedBundle":
        """One master seed fans out to the six per-stage seeds."""
        return SeedBundle(*(seed + i for i in range(6)))


@dataclass(frozen=True)
class FewLabelSpec:
    mode: str = "total-count"
    count: int = 100


@dataclass(frozen=True)
class PipelineConfig:
    k_clusters: int = 20
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-4
    kmeans_init: str = "k-means++"
    split_train_frac: float = 0.25
    k_top: int = 15
    hidden_size: int = 256
    profile: str = "replication"
    probe_train_cfg: TrainConfig = field(default_factory=TrainConfig)
    plft_train_cfg: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=1))
    clsft_train_cfg: TrainConfig = field(default_factory=TrainConfig)
    seeds: SeedBundle = field(default_factory=SeedBundle)
    few_label: FewLabelSpec = field(default_factory=FewLabelSpec)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ArgumentError(f"unknown profile {self.profile!r}")
        if self.k_top < 1:
            raise ArgumentError("k_top must be >= 1")
        if not (0.0 < self.split_train_frac < 1.0):
            raise ArgumentError("split_train_frac must lie in (0, 1)")

    def to_dict(self) -> dict:
        def cfg_dict(cfg: TrainConfig) -> dict:
            return {
                "learning_rate": cfg.learning_rate,
                "epsilon": cfg.epsilon,
                "batch_size": cfg.batch_size,
                "epochs": cfg.epochs,
                "beta1": cfg.beta1,
                "beta2": cfg.beta2,
                "shuffle_seed": cfg.shuffle_seed,
            }

        return {
            "k_clusters": self.k_clusters,
            "kmeans_max_iter": self.kmeans_max_iter,
            "kmeans_tol": self.kmeans_tol,
            "kmeans_init": self.kmeans_init,
            "split_train_frac": self.split_train_frac,
            "k_top": self.k_top,
            "hidden_size": self.hidden_size,
            "profile": self.profile,
            "probe": cfg_dict(self.probe_train_cfg),
            "plft": cfg_dict(self.plft_train_cfg),
            "clsft": cfg_dict(self.clsft_train_cfg),
            "seeds": {
                "cluster": self.seeds.cluster,
                "split": self.seeds.split,
                "probe": self.seeds.probe,
                "plft": self.seeds.plft,
                "clsft": self.seeds.clsft,
                "subsample": self.seeds.subsample,
            },
            "few_label": {"mode": self.few_label.mode, "count": self.few_label.count},
        }


def make_config(
    seed: int = 0, profile: str = "replication", **overrides
) -> PipelineConfig:
    """Build a config from a master seed and profile.

    The profile fixes learning rate and epsilon for the probe, PL-FT and
    Cls-FT trainers; `overrides` may replace any PipelineConfig field,
    with train configs given as dicts of TrainConfig fields.
    """
    if profile not in PROFILES:
        raise ArgumentError(f"unknown profile {profile!r}")
    rates = PROFILES[profile]
    seeds_override = overrides.pop("seeds", None)
    if isinstance(seeds_override, SeedBundle):
        seeds = seeds_override
    elif seeds_override is not None:
        seeds = SeedBundle(**seeds_override)
    else:
        seeds = SeedBundle.expand(seed)
    cfg_defaults = {
        "probe_train_cfg": {"epochs": 10, "shuffle_seed": seeds.probe},
        "plft_train_cfg": {"epochs": 1, "shuffle_seed": seeds.plft},
        "clsft_train_cfg": {"epochs": 10, "shuffle_seed": seeds.clsft},
    }
    kwargs = {"profile": profile, "seeds": seeds}
    for name, defaults in cfg_defaults.items():
        merged = dict(rates)
        merged.update(defaults)
        override = overrides.pop(name, {})
        if isinstance(override, TrainConfig):
            kwargs[name] = override
            continue
        merged.update(override)
        kwargs[name] = TrainConfig(**merged)
    if "few_label" in overrides:
        few = overrides.pop("few_label")
        kwargs["few_label"] = few if isinstance(few, FewLabelSpec) else FewLabelSpec(**few)
    kwargs.update(overrides)
    return PipelineConfig(**kwargs)


def config_from_dict(data: dict) -> PipelineConfig:
    """Config from a parsed JSON document (the CLI's --config file)."""
    data = dict(data)
    seed = data.pop("seed", 0)
    profile = data.pop("profile", "replication")
    renames = {"probe": "probe_train_cfg", "plft": "plft_train_cfg",
               "clsft": "clsft_train_cfg"}
    for short, full in renames.items():
        if short in data:
            data[full] = data.pop(short)
    return make_config(seed=seed, profile=profile, **data)


@dataclass(frozen=True)
class PipelineResult:
    mode: str
    evaluation: EvaluationReport
    final_model: ClassifierModel
    clsft_history: TrainHistory | None
    cluster_model: ClusterModel | None = None
    cluster_report: ClusterReport | None = None
    selection: TopKSelection | None = None
    plft_model: ClassifierModel | None = None
    plft_history: TrainHistory | None = None
    transfer_snapshot: dict | None = None  # sha256 of W1/b1 at Cls-FT start

    def __post_init__(self):
        if self.mode == MODE_BASELINE:
            if self.cluster_model is not None or self.cluster_report is not None:
                raise ArgumentError("baseline results carry no cluster artifacts")
        if self.mode == MODE_FLICK:
            required = (self.cluster_model, self.cluster_report, self.selection,
                        self.plft_model, self.transfer_snapshot)
            if any(ref is None for ref in required):
                raise ArgumentError("flick results need every stage artifact")

    def to_dict(self) -> dict:
        def history_dict(h):
            if h is None:
                return None
            return {"epoch_losses": list(h.epoch_losses),
                    "final_loss": h.final_loss, "steps": h.steps}

        return {
            "mode": self.mode,
            "evaluation": self.evaluation.to_dict(),
            "final_model": self.final_model.to_dict(),
            "clsft_history": history_dict(self.clsft_history),
            "cluster_model": None if self.cluster_model is None else self.cluster_model.to_dict(),
            "cluster_report": None if self.cluster_report is None else self.cluster_report.to_dict(),
            "selection": None if self.selection is None else self.selection.to_dict(),
            "plft_model": None if self.plft_model is None else self.plft_model.to_dict(),
            "plft_history": history_dict(self.plft_history),
            "transfer_snapshot": self.transfer_snapshot,
        }

    @staticmethod
    def from_dict(data: dict) -> "PipelineResult":
        def history_from(d):
            if d is None:
                return None
            return TrainHistory(
                epoch_losses=tuple(d["epoch_losses"]),
                final_loss=d["final_loss"],
                steps=d["steps"],
            )

        return PipelineResult(
            mode=data["mode"],
            evaluation=EvaluationReport.from_dict(data["evaluation"]),
            final_model=ClassifierModel.from_dict(data["final_model"]),
            clsft_history=history_from(data["clsft_history"]),
            cluster_model=None if data["cluster_model"] is None
            else ClusterModel.from_dict(data["cluster_model"]),
            cluster_report=None if data["cluster_report"] is None
            else ClusterReport.from_dict(data["cluster_report"]),
            selection=None if data["selection"] is None
            else TopKSelection(
                clusters=tuple(data["selection"]["clusters"]),
                clamped=data["selection"]["clamped"],
            ),
            plft_model=None if data["plft_model"] is None
            else ClassifierModel.from_dict(data["plft_model"]),
            plft_history=history_from(data["plft_history"]),
            transfer_snapshot=data["transfer_snapshot"],
        )


@contextmanager
def _stage(tag: str):
    try:
        yield
    except StageError:
        raise
    except FlickError as exc:
        raise StageError(tag, exc) from exc


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def _check_few(labeled: tuple[EmbeddingSet, LabelTable], few: FewLabelSample):
    emb, table = labeled
    outside = [rid for rid in few.ids if rid not in table.entries]
    if outside:
        raise ArgumentError(f"few-label id {outside[0]!r} is not labeled")
    emb_ids = set(emb.ids)
    missing = [rid for rid in few.ids if rid not in emb_ids]
    if missing:
        raise ArgumentError(f"few-label id {missing[0]!r} has no embedding")


def _heldout_targets(
    heldout: tuple[EmbeddingSet, LabelTable], class_names: tuple[str, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) for the held-out records with y indexed by the training label
    space; unknown class names are an error."""
    emb, table = heldout
    index = {name: i for i, name in enumerate(class_names)}
    ids = tuple(table.entries)
    y = np.empty(len(ids), dtype=np.int64)
    for i, rid in enumerate(ids):
        name = table.class_names[table.entries[rid]]
        if name not in index:
            raise ArgumentError(f"held-out class {name!r} unseen in training labels")
        y[i] = index[name]
    return subset_view(emb, ids), y


def _train_few(
    cfg: PipelineConfig,
    start_model: ClassifierModel,
    labeled: tuple[EmbeddingSet, LabelTable],
    few: FewLabelSample,
) -> tuple[ClassifierModel, TrainHistory]:
    X_few, y_few = labeled_view(labeled[0], labeled[1], few.ids)
    return train(start_model, X_few, y_few, cfg.clsft_train_cfg)


def run_flick(
    cfg: PipelineConfig,
    unlabeled: EmbeddingSet,
    labeled: tuple[EmbeddingSet, LabelTable],
    few: FewLabelSample,
    heldout: tuple[EmbeddingSet, LabelTable],
) -> PipelineResult:
    """The full pipeline: cluster, refine, PL-FT, Cls-FT, evaluate."""
    with _stage("clsft"):
        _check_few(labeled, few)
    with _stage("eval"):
        overlap = set(few.ids) & set(heldout[0].ids)
        if overlap:
            raise ArgumentError(
                f"held-out set overlaps the few-label sample ({sorted(overlap)[0]!r})"
            )

    with _stage("stage1"):
        cluster_model = kmeans_fit(
            unlabeled,
            k=cfg.k_clusters,
            max_iter=cfg.kmeans_max_iter,
            tol=cfg.kmeans_tol,
            seed=cfg.seeds.cluster,
            init=cfg.kmeans_init,
        )
        pseudo = pseudo_label(unlabeled, cluster_model)

    with _stage("stage2"):
        split = stratified_split(pseudo, cfg.split_train_frac, cfg.seeds.split)
        _, report = probe_and_report(
            pseudo, split, unlabeled, cfg.probe_train_cfg, cfg.seeds.probe,
            hidden_size=cfg.hidden_size,
        )
        selection = select_top_k(report, cfg.k_top)
        refined = build_refined(pseudo, selection)

    with _stage("plft"):
        plft_init = init_classifier(
            unlabeled.dim, cfg.hidden_size, refined.num_classes, cfg.seeds.plft
        )
        plft_init = replace(plft_init, profile_name=cfg.profile)
        X_refined = subset_view(unlabeled, refined.ids)
        plft_model, plft_history = train(
            plft_init, X_refined, refined.labels, cfg.plft_train_cfg
        )

    with _stage("clsft"):
        num_classes = labeled[1].num_classes
        transferred = transfer_init(plft_model, num_classes, cfg.seeds.clsft)
        snapshot = {"w1_sha256": _digest(transferred.W1),
                    "b1_sha256": _digest(transferred.b1)}
        final_model, clsft_history = _train_few(cfg, transferred, labeled, few)

    with _stage("eval"):
        X_held, y_held = _heldout_targets(heldout, labeled[1].class_names)
        report_eval = evaluate(y_held, predict(final_model, X_held), num_classes)

    return PipelineResult(
        mode=MODE_FLICK,
        evaluation=report_eval,
        final_model=final_model,
        clsft_history=clsft_history,
        cluster_model=cluster_model,
        cluster_report=report,
        selection=selection,
        plft_model=plft_model,
        plft_history=plft_history,
        transfer_snapshot=snapshot,
    )


def run_no_refinement(
    cfg: PipelineConfig,
    unlabeled: EmbeddingSet,
    labeled: tuple[EmbeddingSet, LabelTable],
    few: FewLabelSample,
    heldout: tuple[EmbeddingSet, LabelTable],
) -> PipelineResult:
    """Ablation: PL-FT trains on all clusters' pseudo-labels, skipping
    refinement; Stage 1 matches run_flick when the cluster seed matches."""
    with _stage("clsft"):
        _check_few(labeled, few)
    with _stage("stage1"):
        cluster_model = kmeans_fit(
            unlabeled,
            k=cfg.k_clusters,
            max_iter=cfg.kmeans_max_iter,
            tol=cfg.kmeans_tol,
            seed=cfg.seeds.cluster,
            init=cfg.kmeans_init,
        )
        pseudo = pseudo_label(unlabeled, cluster_model)

    with _stage("plft"):
        plft_init = init_classifier(
            unlabeled.dim, cfg.hidden_size, cfg.k_clusters, cfg.seeds.plft
        )
        plft_init = replace(plft_init, profile_name=cfg.profile)
        plft_model, plft_history = train(
            plft_init, unlabeled.vectors, pseudo.pseudo_labels, cfg.plft_train_cfg
        )

    with _stage("clsft"):
        num_classes = labeled[1].num_classes
        transferred = transfer_init(plft_model, num_classes, cfg.seeds.clsft)
        snapshot = {"w1_sha256": _digest(transferred.W1),
                    "b1_sha256": _digest(transferred.b1)}
        final_model, clsft_history = _train_few(cfg, transferred, labeled, few)

    with _stage("eval"):
        X_held, y_held = _heldout_targets(heldout, labeled[1].class_names)
        report_eval = evaluate(y_held, predict(final_model, X_held), num_classes)

    return PipelineResult(
        mode=MODE_NO_REFINEMENT,
        evaluation=report_eval,
        final_model=final_model,
        clsft_history=clsft_history,
        cluster_model=cluster_model,
        cluster_report=None,
        selection=None,
        plft_model=plft_model,
        plft_history=plft_history,
        transfer_snapshot=snapshot,
    )


def run_baseline(
    cfg: PipelineConfig,
    labeled: tuple[EmbeddingSet, LabelTable],
    few: FewLabelSample,
    heldout: tuple[EmbeddingSet, LabelTable],
) -> PipelineResult:
    """A fresh classifier trained only on the few labels."""
    with _stage("clsft"):
        _check_few(labeled, few)
        num_classes = labeled[1].num_classes
        model = init_classifier(
            labeled[0].dim, cfg.hidden_size, num_classes, cfg.seeds.clsft
        )
        model = replace(model, profile_name=cfg.profile)
        final_model, clsft_history = _train_few(cfg, model, labeled, few)

    with _stage("eval"):
        X_held, y_held = _heldout_targets(heldout, labeled[1].class_names)
        report_eval = evaluate(y_held, predict(final_model, X_held), num_classes)

    return PipelineResult(
        mode=MODE_BASELINE,
        evaluation=report_eval,
        final_model=final_model,
        clsft_history=clsft_history,
    )


def write_report(result: PipelineResult, cfg: PipelineConfig, out_dir: str | Path) -> None:
    """Write the report directory: config echo, per-stage artifacts, metrics.

    Every file is deterministic for a fixed config; the wall-clock stamp
    lives only in result.json's "timestamp" field.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2))
    (out / "metrics.json").write_text(
        json.dumps(result.evaluation.to_dict(), sort_keys=True, indent=2)
    )
    result.final_model.save(out / "final_model.json")
    if result.cluster_model is not None:
        result.cluster_model.save(out / "cluster_model.json")
    if result.cluster_report is not None:
        payload = result.cluster_report.to_dict()
        if result.selection is not None:
            payload["selection"] = result.selection.to_dict()
            payload["warnings"] = (
                ["fewer rankable clusters than k_top; selection clamped"]
                if result.selection.clamped
                else []
            )
        (out / "cluster_report.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2)
        )
    if result.plft_model is not None:
        result.plft_model.save(out / "plft_model.json")

    summary = result.to_dict()
    for heavy in ("final_model", "cluster_model", "cluster_report", "plft_model"):
        summary.pop(heavy)
    summary["timestamp"] = time.time()
    (out / "result.json").write_text(json.dumps(summary, sort_keys=True, indent=2))


def load_report(out_dir: str | Path) -> PipelineResult:
    """Rebuild a PipelineResult from a report directory."""
    out = Path(out_dir)
    summary = json.loads((out / "result.json").read_text())
    summary.pop("timestamp", None)
    summary["final_model"] = json.loads((out / "final_model.json").read_text())
    for name, path in (
        ("cluster_model", out / "cluster_model.json"),
        ("plft_model", out / "plft_model.json"),
    ):
        summary[name] = json.loads(path.read_text()) if path.exists() else None
    report_path = out / "cluster_report.json"
    if report_path.exists():
        payload = json.loads(report_path.read_text())
        payload.pop("selection", None)
        payload.pop("warnings", None)
        summary["cluster_report"] = payload
    else:
        summary["cluster_report"] = None
    return PipelineResult.from_dict(summary)
