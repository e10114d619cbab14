"""Command-line interface: synth, cluster, refine, train, eval, run.

Exit codes: 0 success, 2 bad arguments, 3 data/format/io error,
4 numeric error. FLICK_LOG={error,info,debug} controls verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .classifier import ClassifierModel, init_classifier, predict, train, transfer_init
from .clustering import ClusterModel, PseudoLabeledSet, kmeans_fit, pseudo_label
from .errors import (
    ArgumentError,
    DataError,
    FlickError,
    FormatError,
    NumericError,
    SelectionError,
    StageError,
)
from .evaluation import evaluate, render_table
from .ingestion import (
    labeled_view,
    load_embeddings,
    load_labels,
    subsample_few_labels,
)
from .pipeline import (
    MODE_BASELINE,
    MODE_FLICK,
    MODE_NO_REFINEMENT,
    config_from_dict,
    run_baseline,
    run_flick,
    run_no_refinement,
    write_report,
)
from .refinement import build_refined, probe_and_report, select_top_k, stratified_split
from .synth import SynthSpec, make_dataset, write_dataset

log = logging.getLogger("flick")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("FLICK_LOG", "info").lower(), logging.INFO
    )
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2))


def _load_config(args):
    doc = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        if not isinstance(doc, dict):
            raise FormatError(f"{args.config}: config must be a JSON object")
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
        doc.pop("seeds", None)  # a CLI seed re-expands the whole bundle
    if getattr(args, "profile", None):
        doc["profile"] = args.profile
    scalar_flags = {
        "k_clusters": "k_clusters",
        "kmeans_max_iter": "kmeans_max_iter",
        "kmeans_tol": "kmeans_tol",
        "split_train_frac": "split_train_frac",
        "k_top": "k_top",
        "hidden_size": "hidden_size",
    }
    for attr, key in scalar_flags.items():
        value = getattr(args, attr, None)
        if value is not None:
            doc[key] = value
    few = doc.get("few_label", {})
    if getattr(args, "few_mode", None):
        few["mode"] = args.few_mode
    if getattr(args, "few_count", None) is not None:
        few["count"] = args.few_count
    if few:
        doc["few_label"] = few
    stage_cfgs = {"probe": "probe_epochs", "plft": "plft_epochs", "clsft": "clsft_epochs"}
    for key, attr in stage_cfgs.items():
        value = getattr(args, attr, None)
        if value is not None:
            doc.setdefault(key, {})["epochs"] = value
    for field, attr in (("learning_rate", "learning_rate"), ("epsilon", "epsilon"),
                        ("batch_size", "batch_size"), ("beta1", "beta1"),
                        ("beta2", "beta2")):
        value = getattr(args, attr, None)
        if value is not None:
            for key in ("probe", "plft", "clsft"):
                doc.setdefault(key, {})[field] = value
    return config_from_dict(doc)


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_unlabeled=args.n_unlabeled,
        n_labeled=args.n_labeled,
        n_heldout=args.n_heldout,
        classes=args.classes,
        dim=args.dim,
        cluster_std=args.cluster_std,
        center_separation=args.separation,
        noise_fraction=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    data = make_dataset(spec)
    paths = write_dataset(data, spec, args.out)
    log.info("wrote synthetic fixture to %s", args.out)
    for name, path in sorted(paths.items()):
        log.debug("  %s -> %s", name, path)
    return EXIT_OK


def cmd_cluster(args) -> int:
    X = load_embeddings(args.embeddings)
    seed = args.seed if args.seed is not None else 0
    model = kmeans_fit(
        X, k=args.k, max_iter=args.max_iter, tol=args.tol, seed=seed, init=args.init
    )
    labels = pseudo_label(X, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "cluster_model.json")
    with open(out / "pseudo_labels.jsonl", "w", encoding="utf-8") as fh:
        for rid, cluster in zip(labels.ids, labels.pseudo_labels.tolist()):
            fh.write(json.dumps({"id": rid, "cluster": cluster}) + "\n")
    log.info(
        "k-means: k=%d inertia=%.4f iterations=%d", model.k, model.inertia,
        model.iterations_run,
    )
    return EXIT_OK


def _load_pseudo(path, X, k) -> PseudoLabeledSet:
    by_id = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                by_id[str(record["id"])] = int(record["cluster"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad pseudo-label record") from exc
    missing = [rid for rid in X.ids if rid not in by_id]
    if missing:
        raise DataError(f"{path}: no pseudo-label for id {missing[0]!r}")
    labels = np.array([by_id[rid] for rid in X.ids], dtype=np.int64)
    return PseudoLabeledSet(ids=X.ids, pseudo_labels=labels, k=k, source=X)


def cmd_refine(args) -> int:
    X = load_embeddings(args.embeddings)
    cluster_model = ClusterModel.load(args.cluster_model)
    pseudo = _load_pseudo(args.pseudo_labels, X, cluster_model.k)
    cfg = _load_config(args)
    split = stratified_split(pseudo, cfg.split_train_frac, cfg.seeds.split)
    probe, report = probe_and_report(
        pseudo, split, X, cfg.probe_train_cfg, cfg.seeds.probe,
        hidden_size=cfg.hidden_size,
    )
    selection = select_top_k(report, cfg.k_top)
    refined = build_refined(pseudo, selection)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict()
    payload["selection"] = selection.to_dict()
    payload["warnings"] = (
        ["fewer rankable clusters than k_top; selection clamped"]
        if selection.clamped else []
    )
    _write_json(out / "cluster_report.json", payload)
    probe.save(out / "probe_model.json")
    with open(out / "refined_labels.jsonl", "w", encoding="utf-8") as fh:
        for rid, label in zip(refined.ids, refined.labels.tolist()):
            fh.write(json.dumps({"id": rid, "label": int(label)}) + "\n")
    log.info(
        "selected %d/%d clusters (probe accuracy %.4f)",
        len(selection.clusters), cluster_model.k, report.probe_overall_accuracy,
    )
    return EXIT_OK


def cmd_train(args) -> int:
    X = load_embeddings(args.embeddings)
    table = load_labels(args.labels)
    if table.num_classes < 2:
        raise DataError("training needs at least two classes")
    cfg = _load_config(args)
    X_train, y_train = labeled_view(X, table)
    if args.transfer_from:
        source = ClassifierModel.load(args.transfer_from)
        model = transfer_init(source, table.num_classes, cfg.seeds.clsft)
        train_cfg = cfg.clsft_train_cfg
    else:
        model = init_classifier(
            X.dim, cfg.hidden_size, table.num_classes, cfg.seeds.plft
        )
        train_cfg = cfg.plft_train_cfg if args.stage == "plft" else cfg.clsft_train_cfg
    trained, history = train(model, X_train, y_train, train_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trained.save(out / "model.json")
    _write_json(out / "history.json", {
        "epoch_losses": list(history.epoch_losses),
        "final_loss": history.final_loss,
        "steps": history.steps,
    })
    log.info("trained %d epochs, final loss %.6f", train_cfg.epochs, history.final_loss)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = ClassifierModel.load(args.model)
    X = load_embeddings(args.embeddings)
    table = load_labels(args.labels)
    if table.num_classes != model.c:
        raise DataError(
            f"label file has {table.num_classes} classes but the model "
            f"predicts {model.c}; class indices would misalign"
        )
    X_eval, y_true = labeled_view(X, table)
    report = evaluate(y_true, predict(model, X_eval), model.c)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "metrics.json", report.to_dict())
    print(render_table(report, class_names=list(table.class_names)))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    labeled = (load_embeddings(args.labeled), load_labels(args.labels))
    heldout = (load_embeddings(args.heldout), load_labels(args.heldout_labels))
    few = subsample_few_labels(
        labeled[1], cfg.few_label.mode, cfg.few_label.count, cfg.seeds.subsample
    )
    log.info("mode=%s profile=%s few=%d", args.mode, cfg.profile, len(few.ids))
    if args.mode == MODE_BASELINE:
        result = run_baseline(cfg, labeled, few, heldout)
    else:
        if not args.unlabeled:
            raise ArgumentError(f"--unlabeled is required for mode {args.mode}")
        unlabeled = load_embeddings(args.unlabeled)
        runner = run_flick if args.mode == MODE_FLICK else run_no_refinement
        result = runner(cfg, unlabeled, labeled, few, heldout)
    write_report(result, cfg, args.out)
    log.info(
        "done: accuracy=%.4f macro_f1=%.4f -> %s",
        result.evaluation.accuracy, result.evaluation.macro_f1, args.out,
    )
    return EXIT_OK


def _add_config_flags(parser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed (expands to the seed bundle)")
    parser.add_argument("--profile", choices=["replication", "proxy"])
    parser.add_argument("--k-clusters", dest="k_clusters", type=int)
    parser.add_argument("--kmeans-max-iter", dest="kmeans_max_iter", type=int)
    parser.add_argument("--kmeans-tol", dest="kmeans_tol", type=float)
    parser.add_argument("--split-train-frac", dest="split_train_frac", type=float)
    parser.add_argument("--k-top", dest="k_top", type=int)
    parser.add_argument("--hidden-size", dest="hidden_size", type=int)
    parser.add_argument("--few-mode", dest="few_mode",
                        choices=["total-count", "per-class-shots"])
    parser.add_argument("--few-count", dest="few_count", type=int)
    parser.add_argument("--probe-epochs", dest="probe_epochs", type=int)
    parser.add_argument("--plft-epochs", dest="plft_epochs", type=int)
    parser.add_argument("--clsft-epochs", dest="clsft_epochs", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--epsilon", dest="epsilon", type=float)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--beta1", dest="beta1", type=float)
    parser.add_argument("--beta2", dest="beta2", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flick",
        description="Few-label text classification over frozen embeddings: "
        "cluster, refine pseudo-labels, inter-train, fine-tune.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blob fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--n-unlabeled", type=int, default=2000)
    p.add_argument("--n-labeled", type=int, default=100)
    p.add_argument("--n-heldout", type=int, default=600)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--cluster-std", type=float, default=0.5)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="k-means pseudo-labeling of an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--init", choices=["k-means++", "uniform"], default="k-means++")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("refine", help="rank clusters with a probe and select the top k")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pseudo-labels", dest="pseudo_labels", required=True)
    p.add_argument("--cluster-model", dest="cluster_model", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("train", help="train a classifier head on labeled embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--transfer-from", dest="transfer_from",
                   help="carry the hidden layer from this model file")
    p.add_argument("--stage", choices=["plft", "clsft"], default="clsft",
                   help="which stage's training settings to use")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model file on labeled embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="end-to-end pipeline run")
    p.add_argument("--unlabeled")
    p.add_argument("--labeled", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--heldout", required=True)
    p.add_argument("--heldout-labels", dest="heldout_labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=[MODE_FLICK, MODE_NO_REFINEMENT, MODE_BASELINE],
                   default=MODE_FLICK)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        log.error("%s", exc)
        cause = exc.cause
        if isinstance(cause, NumericError):
            return EXIT_NUMERIC
        if isinstance(cause, ArgumentError):
            return EXIT_USAGE
        return EXIT_DATA
    except ArgumentError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (FormatError, DataError, SelectionError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except FlickError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
