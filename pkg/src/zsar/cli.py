"""Command-line entrypoint.

Subcommands: split (build | verify), ed (crawl | serve | export), train,
eval, baseline, fewshot, report. Every invocation that writes artifacts also
writes a machine-readable run_summary.json into the output directory, and
every artifact embeds the hash of the resolved configuration so `report`
can refuse to aggregate results produced under different settings.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import TrainConfig, config_hash, load_config
from .data import FeatureDataset
from .errors import DependencyError, ZsarError
from .evaluation import (EvalReport, ProbeConfig, SplitMetrics,
                         aggregate_splits, evaluate_rankings, few_shot_probe,
                         format_mean_std, rank_classes)
from .model import JointModel
from .splits import ClassCatalog, SplitSpec, build_splits, derive_new_classes
from .text_embed import HashedTokenEncoder, load_descriptions
from .trainer import (build_eval_arrays, build_training_arrays, train,
                      zero_shot_scores)
from .video_embed import ConceptVocabulary


def _require(path: str | Path, kind: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"missing {kind}: {path}")
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _resolve_config(args) -> TrainConfig:
    path = getattr(args, "config", None)
    if path is not None:
        _require(path, "config file")
    cfg = load_config(path, overrides=getattr(args, "set", None) or [])
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _load_world(args, cfg: TrainConfig):
    """Dataset, class descriptions, vocabulary, and split shared by the
    training-side commands."""
    dataset = FeatureDataset(_require(args.manifest, "feature manifest"))
    descriptions = load_descriptions(_require(args.descriptions,
                                              "class description file"))
    concepts = load_descriptions(_require(args.concepts,
                                          "concept description file"))
    vocab = ConceptVocabulary(tuple(concepts))
    split = SplitSpec.load(_require(args.split, "split file"))
    encoder = HashedTokenEncoder(cfg.hidden_dim)
    by_id = {d.subject_id: d for d in descriptions}
    missing = [c for c in split.seen + split.val + split.test if c not in by_id]
    if missing:
        raise DependencyError(
            f"split references classes without descriptions: {missing[:5]}")
    return dataset, by_id, vocab, split, encoder


class _RunSummary:
    def __init__(self, args):
        self.started = time.time()
        self.command = args.command
        self.argv = sys.argv[1:]
        self.artifacts: list[str] = []
        self.out = Path(args.out) if getattr(args, "out", None) else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def add(self, path: Path) -> Path:
        self.artifacts.append(str(path))
        return path

    def write(self, **extra) -> None:
        if not self.out:
            return
        payload = {"tool": "zsar", "version": __version__,
                   "command": self.command, "argv": self.argv,
                   "artifacts": self.artifacts,
                   "elapsed_s": round(time.time() - self.started, 3)}
        payload.update(extra)
        _write_json(self.out / "run_summary.json", payload)


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------

def cmd_split_build(args) -> int:
    summary = _RunSummary(args)
    catalog = ClassCatalog.from_json(_require(args.catalog, "class catalog"))
    new_classes = derive_new_classes(catalog, args.overlap_threshold)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    specs = build_splits(new_classes, catalog.old_classes,
                         n_splits=args.n_splits, n_val=args.n_val,
                         n_test=args.n_test, seeds=seeds)
    for spec in specs:
        path = summary.add(summary.out / f"split{spec.split_index}.json")
        spec.save(path)
    print(f"{len(new_classes)} new classes -> {len(specs)} splits "
          f"({args.n_val} val / {args.n_test} test each)")
    summary.write(new_classes=len(new_classes))
    return 0


def cmd_split_verify(args) -> int:
    for path in args.files:
        spec = SplitSpec.load(_require(path, "split file"))
        print(f"{path}: ok (seed {spec.seed}, {len(spec.seen)} seen, "
              f"{len(spec.val)} val, {len(spec.test)} test)")
    return 0


# ---------------------------------------------------------------------------
# ed
# ---------------------------------------------------------------------------

def _store_path(args) -> Path:
    path = args.store or os.environ.get("ZSAR_ED_STORE")
    if not path:
        raise DependencyError(
            "no store path: pass --store or set ZSAR_ED_STORE")
    return Path(path)


def cmd_ed_crawl(args) -> int:
    from .crawl import (FixtureDictionary, FixtureEncyclopedia,
                        LiveDictionary, LiveEncyclopedia, crawl_candidates)
    from .edstore import AnnotationStore

    classes = json.loads(_require(args.classes, "class list").read_text(
        encoding="utf-8"))
    if args.encyclopedia_fixture or args.dictionary_fixture:
        enc = FixtureEncyclopedia(_require(args.encyclopedia_fixture,
                                           "encyclopedia fixture"))
        dic = FixtureDictionary(_require(args.dictionary_fixture,
                                         "dictionary fixture"))
    else:
        enc, dic = LiveEncyclopedia(), LiveDictionary()
    store = AnnotationStore(_store_path(args))
    warned = 0
    try:
        for record in classes:
            out = crawl_candidates(record["class_id"], record["name"], enc, dic)
            store.put_candidates(out, exemplar_url=record.get("exemplar_url"))
            warned += out.empty_warning
            print(f"{record['class_id']}: {len(out.candidates)} candidates"
                  + (" (none found)" if out.empty_warning else ""))
    finally:
        store.close()
    if warned:
        print(f"warning: {warned} classes with no candidates", file=sys.stderr)
    return 0


def cmd_ed_serve(args) -> int:
    from .edserver import serve_annotation_api
    from .edstore import AnnotationStore

    store = AnnotationStore(_require(_store_path(args), "annotation store"))
    try:
        serve_annotation_api(store, host=args.host, port=args.port,
                             ui_dir=args.ui)
    finally:
        store.close()
    return 0


def cmd_ed_export(args) -> int:
    from .edstore import AnnotationStore, export_descriptions

    store = AnnotationStore(_require(_store_path(args), "annotation store"))
    try:
        n = export_descriptions(store, args.out_file, partial=args.partial)
    finally:
        store.close()
    print(f"wrote {n} description records to {args.out_file}")
    return 0


# ---------------------------------------------------------------------------
# train / eval / baseline / fewshot
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    summary = _RunSummary(args)
    cfg = _resolve_config(args)
    dataset, by_id, vocab, split, encoder = _load_world(args, cfg)

    train_records = dataset.records(labels=set(split.seen))
    if not train_records:
        raise DependencyError("manifest holds no videos of seen classes")
    seen_descs = [by_id[c] for c in split.seen]
    arrays = build_training_arrays(train_records, seen_descs, vocab,
                                   cfg.n_objects, encoder)
    val = None
    val_records = dataset.records(labels=set(split.val))
    if val_records:
        val = build_eval_arrays(val_records, [by_id[c] for c in split.val],
                                vocab, cfg.n_objects, encoder)
    result = train(arrays, cfg, val=val, encoder=encoder)

    ckpt = summary.add(summary.out / "checkpoint.npz")
    result.model.save(ckpt, meta={
        "config": cfg.to_dict(), "config_hash": config_hash(cfg),
        "seed": cfg.seed, "best_epoch": result.best_epoch,
        "best_val_top1": result.best_val_top1,
        "split_file": str(args.split)})
    summary.add(summary.out / "checkpoint.json")
    log_path = summary.add(summary.out / "train_log.jsonl")
    with log_path.open("w", encoding="utf-8") as fh:
        for rec in result.log:
            fh.write(json.dumps(rec) + "\n")
    print(f"best epoch {result.best_epoch} "
          f"(val top-1 {result.best_val_top1:.1f}); checkpoint at {ckpt}")
    summary.write(config_hash=config_hash(cfg), best_epoch=result.best_epoch)
    return 0


def _eval_metrics(model, records, class_descs, vocab, cfg, encoder,
                  class_names) -> SplitMetrics:
    arrays = build_eval_arrays(records, class_descs, vocab, cfg.n_objects,
                               encoder)
    scores = zero_shot_scores(model, arrays)
    return evaluate_rankings(rank_classes(scores), arrays.labels, class_names)


def cmd_eval(args) -> int:
    summary = _RunSummary(args)
    cfg = _resolve_config(args)
    ckpt_path = _require(args.checkpoint, "checkpoint")
    dataset, by_id, vocab, split, encoder = _load_world(args, cfg)
    model = JointModel.load(ckpt_path, encoder=encoder)
    meta = JointModel.load_meta(ckpt_path)

    classes = split.test if args.classes == "test" else split.val
    records = dataset.records(labels=set(classes))
    if not records:
        raise DependencyError(f"manifest holds no videos of {args.classes} classes")
    metrics = _eval_metrics(model, records, [by_id[c] for c in classes],
                            vocab, cfg, encoder, list(classes))
    payload = {"config_hash": meta.get("config_hash", config_hash(cfg)),
               "split_file": str(args.split), "classes": args.classes,
               "metrics": metrics.to_dict()}
    _write_json(summary.add(summary.out / "report.json"), payload)
    text = (f"videos: {metrics.n_videos}\n"
            f"top-1: {metrics.top1:.1f}\ntop-5: {metrics.top5:.1f}\n")
    (summary.out / "report.txt").write_text(text, encoding="utf-8")
    summary.add(summary.out / "report.txt")
    print(text.strip())
    summary.write(config_hash=payload["config_hash"])
    return 0


def cmd_baseline(args) -> int:
    from .baselines import (BaselineTrainConfig, class_features,
                            evaluate_baseline, train_baseline)

    summary = _RunSummary(args)
    cfg = _resolve_config(args)
    dataset, by_id, vocab, split, encoder = _load_world(args, cfg)

    train_records = dataset.records(labels=set(split.seen))
    test_records = dataset.records(labels=set(split.test))
    if not train_records or not test_records:
        raise DependencyError("manifest lacks seen or test videos")
    seen_feats = class_features([by_id[c] for c in split.seen], encoder,
                                use_body=args.use_body)
    test_feats = class_features([by_id[c] for c in split.test], encoder,
                                use_body=args.use_body)
    seen_index = {c: i for i, c in enumerate(split.seen)}
    test_index = {c: i for i, c in enumerate(split.test)}
    x_train = np.stack([r.st_feature for r in train_records])
    y_train = np.array([seen_index[r.label] for r in train_records])
    x_test = np.stack([r.st_feature for r in test_records])
    y_test = np.array([test_index[r.label] for r in test_records])

    bl_cfg = BaselineTrainConfig(epochs=args.epochs, seed=cfg.seed)
    score_fn, _ = train_baseline(args.method, x_train, y_train, seen_feats,
                                 bl_cfg)
    metrics = evaluate_baseline(score_fn, x_test, y_test, test_feats,
                                list(split.test))
    payload = {"config_hash": config_hash(cfg), "method": args.method,
               "split_file": str(args.split), "metrics": metrics.to_dict()}
    _write_json(summary.add(summary.out / "report.json"), payload)
    print(f"{args.method}: top-1 {metrics.top1:.1f}  top-5 {metrics.top5:.1f}")
    summary.write(config_hash=config_hash(cfg), method=args.method)
    return 0


def cmd_fewshot(args) -> int:
    from .synth import take_shots

    summary = _RunSummary(args)
    cfg = _resolve_config(args)
    dataset, by_id, vocab, split, encoder = _load_world(args, cfg)
    records = dataset.records(labels=set(split.test))
    if not records:
        raise DependencyError("manifest holds no videos of test classes")
    index = {c: i for i, c in enumerate(split.test)}
    feats = np.stack([r.st_feature for r in records])
    labels = np.array([index[r.label] for r in records])

    shot_list = [int(s) for s in args.shots.split(",")]
    results = {}
    rng = np.random.default_rng(cfg.seed)
    holdout = rng.permutation(len(records))
    n_eval = max(1, len(records) // 3)
    eval_rows, pool_rows = holdout[:n_eval], holdout[n_eval:]
    for shots in shot_list:
        sx, sy = take_shots(feats[pool_rows], labels[pool_rows], shots,
                            len(split.test), seed=cfg.seed)
        metrics = few_shot_probe(sx, sy, feats[eval_rows], labels[eval_rows],
                                 len(split.test),
                                 ProbeConfig(seed=cfg.seed))
        results[shots] = metrics.to_dict()
        print(f"{shots}-shot: top-1 {metrics.top1:.1f}  top-5 {metrics.top5:.1f}")
    payload = {"config_hash": config_hash(cfg), "shots": results,
               "split_file": str(args.split)}
    _write_json(summary.add(summary.out / "fewshot.json"), payload)
    summary.write(config_hash=config_hash(cfg))
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    summary = _RunSummary(args)
    payloads = [json.loads(_require(p, "report").read_text(encoding="utf-8"))
                for p in args.reports]
    hashes = {p.get("config_hash") for p in payloads}
    if len(hashes) > 1 and not args.force:
        raise DependencyError(
            f"refusing to aggregate reports with mixed config hashes {sorted(map(str, hashes))}; "
            "rerun with --force to override")
    metrics = [SplitMetrics(
        top1=p["metrics"]["top1"], top5=p["metrics"]["top5"],
        n_videos=p["metrics"]["n_videos"]) for p in payloads]
    report = EvalReport(metrics)
    line1 = format_mean_std(report.mean_top1, report.std_top1)
    line5 = format_mean_std(report.mean_top5, report.std_top5)
    print(f"top-1: {line1}\ntop-5: {line5}  ({len(metrics)} splits)")
    if summary.out:
        payload = report.to_dict()
        payload["config_hash"] = sorted(map(str, hashes))[0]
        payload["sources"] = [str(p) for p in args.reports]
        _write_json(summary.add(summary.out / "aggregate.json"), payload)
        summary.write()
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_config_args(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--seed", type=int, help="override the config seed")


def _add_world_args(p):
    p.add_argument("--manifest", required=True, help="feature manifest JSON")
    p.add_argument("--descriptions", required=True,
                   help="class description JSONL")
    p.add_argument("--concepts", required=True,
                   help="concept description JSONL")
    p.add_argument("--split", required=True, help="split spec JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsar",
        description="Zero-shot action recognition toolkit over precomputed "
                    "video features.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", help="benchmark split construction")
    split_sub = p_split.add_subparsers(dest="subcommand", required=True)
    p_build = split_sub.add_parser("build", help="derive new classes and cut splits")
    p_build.add_argument("--catalog", required=True)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--n-splits", type=int, default=3)
    p_build.add_argument("--n-val", type=int, default=60)
    p_build.add_argument("--n-test", type=int, default=160)
    p_build.add_argument("--seeds", help="comma-separated, one per split")
    p_build.add_argument("--overlap-threshold", type=float, default=0.5)
    p_build.set_defaults(func=cmd_split_build)
    p_verify = split_sub.add_parser("verify", help="validate split files")
    p_verify.add_argument("files", nargs="+")
    p_verify.set_defaults(func=cmd_split_verify)

    p_ed = sub.add_parser("ed", help="class description workflow")
    ed_sub = p_ed.add_subparsers(dest="subcommand", required=True)
    p_crawl = ed_sub.add_parser("crawl", help="fetch candidate sentences")
    p_crawl.add_argument("--classes", required=True,
                         help="JSON list of {class_id, name}")
    p_crawl.add_argument("--store", help="sqlite store path (or ZSAR_ED_STORE)")
    p_crawl.add_argument("--encyclopedia-fixture")
    p_crawl.add_argument("--dictionary-fixture")
    p_crawl.set_defaults(func=cmd_ed_crawl)
    p_serve = ed_sub.add_parser("serve", help="run the annotation service")
    p_serve.add_argument("--store", help="sqlite store path (or ZSAR_ED_STORE)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--ui", help="static UI directory to serve at /")
    p_serve.set_defaults(func=cmd_ed_serve)
    p_export = ed_sub.add_parser("export", help="write the description file")
    p_export.add_argument("--store", help="sqlite store path (or ZSAR_ED_STORE)")
    p_export.add_argument("--out-file", required=True)
    p_export.add_argument("--partial", action="store_true")
    p_export.set_defaults(func=cmd_ed_export)

    p_train = sub.add_parser("train", help="fit the joint embedding model")
    _add_world_args(p_train)
    _add_config_args(p_train)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="zero-shot evaluation")
    _add_world_args(p_eval)
    _add_config_args(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--classes", choices=["test", "val"], default="test")
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_base = sub.add_parser("baseline", help="classic zero-shot baselines")
    _add_world_args(p_base)
    _add_config_args(p_base)
    p_base.add_argument("--method", required=True,
                        choices=["devise", "ale", "sje", "dem", "eszsl"])
    p_base.add_argument("--epochs", type=int, default=200)
    p_base.add_argument("--use-body", action="store_true",
                        help="class features from description bodies, not names")
    p_base.add_argument("--out", required=True)
    p_base.set_defaults(func=cmd_baseline)

    p_few = sub.add_parser("fewshot", help="supervised linear-probe comparison")
    _add_world_args(p_few)
    _add_config_args(p_few)
    p_few.add_argument("--shots", default="1,2,5")
    p_few.add_argument("--out", required=True)
    p_few.set_defaults(func=cmd_fewshot)

    p_rep = sub.add_parser("report", help="aggregate per-split reports")
    p_rep.add_argument("reports", nargs="+", type=Path)
    p_rep.add_argument("--force", action="store_true",
                       help="aggregate despite mixed config hashes")
    p_rep.add_argument("--out")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ZsarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
