"""Command-line entry point wiring ingestion, KB mining, training,
evaluation, ablation and single-example prediction.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

import csv as csv_mod
import hashlib
import json
import os
import sys

import click

from . import corpus as corpus_mod
from . import fixtures
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import IngestionError, StructuralError
from .general_kb import load_affect_lexicon, load_triple_store
from .kb_mining import load_kb, mine_domain_kb, save_kb
from .model import ModelConfig, featurize
from .span_repr import EncoderConfig
from .subtok import SubTokenizer
from .training import Resources, TrainConfig, ablate, evaluate, train


def _fail(message, code):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_run_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        _fail(f"config file not found: {path}", 2)
    except json.JSONDecodeError as exc:
        _fail(f"invalid config JSON: {exc}", 2)
    try:
        model_config = ModelConfig(**raw.get("model_config", {}))
        train_config = TrainConfig(**raw.get("train_config", {}))
    except (TypeError, ValueError) as exc:
        _fail(f"invalid config: {exc}", 2)
    paths = raw.get("paths", {})
    for key in ("corpus", "annotations"):
        if key in paths and not os.path.exists(paths[key]):
            _fail(f"configured path does not exist: {key}={paths[key]}", 2)
    return {
        "raw": raw,
        "seed": raw.get("seed", train_config.seed),
        "domain": raw.get("domain", ""),
        "paths": paths,
        "model_config": model_config,
        "train_config": train_config,
        "neg_pos_ratio": raw.get("neg_pos_ratio", 2.4),
        "split": tuple(raw.get("split", (0.8, 0.1, 0.1))),
    }


def _build_resources(kb_path=None, triple_store_path=None, affect_path=None):
    res = Resources()
    if kb_path:
        res.domain_kb = load_kb(kb_path)
    if triple_store_path:
        res.triple_store = load_triple_store(triple_store_path)
    if affect_path:
        res.affect = load_affect_lexicon(affect_path)
    return res


@click.group()
def main():
    """Knowledge-aware coreference classification for opinionated reviews."""


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--domain", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest(corpus_path, domain, out_path):
    """Validate a pre-parsed JSONL corpus and re-serialize it."""
    if not os.path.exists(corpus_path):
        _fail(f"corpus file not found: {corpus_path}", 2)
    try:
        docs = corpus_mod.ingest_parsed_corpus(corpus_path, domain)
    except (IngestionError, StructuralError) as exc:
        _fail(str(exc), 1)
    corpus_mod.write_parsed_corpus(docs, out_path)
    click.echo(f"ingested {len(docs)} documents -> {out_path}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--annotations", "ann_path", required=True, type=click.Path())
@click.option("--domain", required=True)
@click.option("--neg-ratio", default=2.4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def triples(corpus_path, ann_path, domain, neg_ratio, seed, out_path):
    """Build labeled triples from cluster annotations."""
    for p in (corpus_path, ann_path):
        if not os.path.exists(p):
            _fail(f"file not found: {p}", 2)
    try:
        docs = corpus_mod.ingest_parsed_corpus(corpus_path, domain)
        annotations = corpus_mod.ingest_annotations(ann_path, docs)
        out = corpus_mod.build_triples(annotations, docs, neg_pos_ratio=neg_ratio,
                                       seed=seed)
    except (IngestionError, StructuralError) as exc:
        _fail(str(exc), 1)
    corpus_mod.write_triples(out, out_path)
    n_pos = sum(t.label for t in out)
    click.echo(f"built {len(out)} triples ({n_pos} positive) -> {out_path}")


@main.command("mine-kb")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--domain", required=True)
@click.option("--rho", default=5.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def mine_kb(corpus_path, domain, rho, out_path):
    """Mine the domain knowledge base from unlabeled reviews."""
    if not os.path.exists(corpus_path):
        _fail(f"corpus file not found: {corpus_path}", 2)
    try:
        docs = corpus_mod.ingest_parsed_corpus(corpus_path, domain)
        kb = mine_domain_kb(docs, rho=rho, domain=domain)
    except (IngestionError, StructuralError, ValueError) as exc:
        _fail(str(exc), 1)
    save_kb(kb, out_path)
    click.echo(
        f"mined KB for {domain}: {len(kb.entries)} mention words, rho={rho} "
        f"-> {out_path}"
    )


def _prepare_splits(cfg):
    paths = cfg["paths"]
    domain = cfg["domain"]
    docs = corpus_mod.ingest_parsed_corpus(paths["corpus"], domain)
    annotations = corpus_mod.ingest_annotations(paths["annotations"], docs)
    all_triples = corpus_mod.build_triples(
        annotations, docs, neg_pos_ratio=cfg["neg_pos_ratio"], seed=cfg["seed"]
    )
    return docs, annotations, corpus_mod.split_dataset(
        all_triples, ratios=cfg["split"], seed=cfg["seed"]
    )


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--domain", default=None)
@click.option("--kb", "kb_path", default=None, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def train_cmd(config_path, domain, kb_path, out_dir):
    """Train a per-domain model from a run config."""
    cfg = _load_run_config(config_path)
    if domain:
        cfg["domain"] = domain
    os.makedirs(out_dir, exist_ok=True)
    try:
        _, _, (train_set, dev_set, _) = _prepare_splits(cfg)
        res = _build_resources(
            kb_path or cfg["paths"].get("domain_kb"),
            cfg["paths"].get("triple_store"),
            cfg["paths"].get("affect_lexicon"),
        )
        model, history = train(train_set, dev_set, cfg["model_config"],
                               cfg["train_config"], res)
    except (IngestionError, StructuralError, ValueError, RuntimeError) as exc:
        _fail(str(exc), 1)
    ckpt_path = os.path.join(out_dir, "model.ckpt")
    save_checkpoint(
        ckpt_path,
        model,
        metadata={
            "seed": cfg["seed"],
            "domain": cfg["domain"],
            "config_fingerprint": cfg["model_config"].fingerprint(),
            "best_dev_f1": history["best_dev_f1"],
        },
    )
    with open(os.path.join(out_dir, "history.json"), "w") as fh:
        json.dump(history, fh, sort_keys=True, indent=1)
    click.echo(f"trained (best dev F1 {history['best_dev_f1']:.4f}) -> {ckpt_path}")


@main.command("eval")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_cmd(ckpt_path, config_path, kb_path, out_path):
    """Evaluate a checkpoint on the test split; emits an EvalReport JSON."""
    cfg = _load_run_config(config_path)
    if not os.path.exists(ckpt_path):
        _fail(f"checkpoint not found: {ckpt_path}", 2)
    try:
        _, _, (_, _, test_set) = _prepare_splits(cfg)
        res = _build_resources(
            kb_path or cfg["paths"].get("domain_kb"),
            cfg["paths"].get("triple_store"),
            cfg["paths"].get("affect_lexicon"),
        )
        model, _ = load_checkpoint(ckpt_path)
        report = evaluate(model, test_set, res, domain=cfg["domain"])
    except (IngestionError, StructuralError, ValueError, RuntimeError) as exc:
        _fail(str(exc), 1)
    payload = dict(report.to_dict(), schema_version=1, seed=cfg["seed"])
    with open(out_path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
    click.echo(f"positive F1 {report.f1_pos:.4f} -> {out_path}")


@main.command("ablate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--grid", "grid_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def ablate_cmd(config_path, grid_path, kb_path, out_path):
    """Run the ablation grid; emits a CSV summary."""
    cfg = _load_run_config(config_path)
    try:
        with open(grid_path) as fh:
            grid = json.load(fh)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        _fail(f"bad grid file: {exc}", 2)
    try:
        _, _, (train_set, dev_set, test_set) = _prepare_splits(cfg)
        res = _build_resources(
            kb_path or cfg["paths"].get("domain_kb"),
            cfg["paths"].get("triple_store"),
            cfg["paths"].get("affect_lexicon"),
        )
        reports = ablate(cfg["model_config"], grid, train_set, dev_set, test_set,
                         cfg["train_config"], res)
    except (IngestionError, StructuralError, ValueError, RuntimeError) as exc:
        _fail(str(exc), 1)
    with open(out_path, "w", newline="") as fh:
        writer = csv_mod.writer(fh)
        writer.writerow(["axis", "f1_pos", "precision_pos", "recall_pos",
                         "config_fingerprint"])
        for r in reports:
            writer.writerow([r.axis, f"{r.f1_pos:.4f}", f"{r.precision_pos:.4f}",
                             f"{r.recall_pos:.4f}", r.config_fingerprint])
    click.echo(f"wrote {len(reports)} ablation rows -> {out_path}")


def _parse_offsets(text):
    try:
        start, end = (int(v) for v in text.split(":"))
    except ValueError:
        _fail(f"offsets must look like start:end, got {text!r}", 2)
    return start, end


@main.command("predict")
@click.option("--doc", "doc_path", required=True, type=click.Path())
@click.option("--domain", required=True)
@click.option("--mention", "mention_arg", required=True, help="start:end token offsets")
@click.option("--anaphor", "anaphor_arg", required=True, help="start:end token offsets")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", default=None, type=click.Path())
@click.option("--triple-store", "ts_path", default=None, type=click.Path())
@click.option("--affect", "affect_path", default=None, type=click.Path())
def predict_cmd(doc_path, domain, mention_arg, anaphor_arg, ckpt_path, kb_path,
                ts_path, affect_path):
    """Score one (mention, anaphor) pair in a pre-parsed document."""
    if not os.path.exists(doc_path):
        _fail(f"document file not found: {doc_path}", 2)
    try:
        docs = corpus_mod.ingest_parsed_corpus(doc_path, domain)
    except (IngestionError, StructuralError) as exc:
        _fail(str(exc), 1)
    if len(docs) != 1:
        _fail(f"expected exactly one document, got {len(docs)}", 2)
    doc = docs[0]
    m_start, m_end = _parse_offsets(mention_arg)
    p_start, p_end = _parse_offsets(anaphor_arg)
    try:
        mention = corpus_mod._span_from_record({"start": m_start, "end": m_end}, doc)
        anaphor = corpus_mod._span_from_record(
            {"start": p_start, "end": p_end, "kind": "ANAPHOR"}, doc
        )
        triple = corpus_mod.LabeledTriple(context=doc, mention=mention,
                                          anaphor=anaphor, label=0)
    except (StructuralError, ValueError) as exc:
        _fail(f"bad span offsets: {exc}", 2)
    try:
        model, _ = load_checkpoint(ckpt_path)
        res = _build_resources(kb_path, ts_path, affect_path)
        feats = featurize(triple, model.config, res.subtok,
                          domain_kb=res.domain_kb, triple_store=res.triple_store,
                          affect=res.affect)
        bundle, attended = model.predict(feats)
    except (FileNotFoundError, ValueError, RuntimeError, KeyError) as exc:
        _fail(str(exc), 1)
    payload = {
        "f_c": bundle.f_c,
        "f_k": bundle.f_k,
        "f_sk": bundle.f_sk,
        "f_hat": bundle.f_hat,
        "label": bundle.label,
        "knowledge": attended,
    }
    if not attended:
        payload["note"] = "no knowledge matched"
    click.echo(json.dumps(payload, indent=1, sort_keys=True))


@main.command("pipeline")
@click.option("--config", "config_path", required=True, type=click.Path())
def pipeline(config_path):
    """Run ingest -> triples -> mine-kb -> train -> eval end to end."""
    cfg = _load_run_config(config_path)
    paths = cfg["paths"]
    out_dir = paths.get("output_dir")
    if not out_dir:
        _fail("config must set paths.output_dir", 2)
    for key in ("corpus", "annotations"):
        if key not in paths:
            _fail(f"config must set paths.{key}", 2)
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "seed": cfg["seed"],
        "domain": cfg["domain"],
        "config_fingerprint": cfg["model_config"].fingerprint(),
        "artifacts": {},
    }
    stage = "ingest"
    try:
        docs = corpus_mod.ingest_parsed_corpus(paths["corpus"], cfg["domain"])
        docs_path = os.path.join(out_dir, "documents.jsonl")
        corpus_mod.write_parsed_corpus(docs, docs_path)

        stage = "triples"
        annotations = corpus_mod.ingest_annotations(paths["annotations"], docs)
        all_triples = corpus_mod.build_triples(
            annotations, docs, neg_pos_ratio=cfg["neg_pos_ratio"], seed=cfg["seed"]
        )
        triples_path = os.path.join(out_dir, "triples.jsonl")
        corpus_mod.write_triples(all_triples, triples_path)
        train_set, dev_set, test_set = corpus_mod.split_dataset(
            all_triples, ratios=cfg["split"], seed=cfg["seed"]
        )

        stage = "mine-kb"
        annotated_ids = {a.doc_id for a in annotations}
        unlabeled = [d for d in docs if d.doc_id not in annotated_ids]
        kb = mine_domain_kb(unlabeled, rho=cfg["train_config"].rho,
                            domain=cfg["domain"])
        kb_path = os.path.join(out_dir, "domain_kb.json")
        save_kb(kb, kb_path)

        stage = "train"
        res = _build_resources(kb_path, paths.get("triple_store"),
                               paths.get("affect_lexicon"))
        model, history = train(train_set, dev_set, cfg["model_config"],
                               cfg["train_config"], res)
        ckpt_path = os.path.join(out_dir, "model.ckpt")
        save_checkpoint(ckpt_path, model,
                        metadata={"seed": cfg["seed"],
                                  "config_fingerprint": manifest["config_fingerprint"]})

        stage = "eval"
        report = evaluate(model, test_set, res, domain=cfg["domain"])
        report_path = os.path.join(out_dir, "eval_report.json")
        with open(report_path, "w") as fh:
            json.dump(dict(report.to_dict(), schema_version=1, seed=cfg["seed"]),
                      fh, sort_keys=True, indent=1)
    except (IngestionError, StructuralError, ValueError, RuntimeError) as exc:
        _fail(f"pipeline failed at stage {stage}: {exc}", 1)

    for name, path in (("documents", docs_path), ("triples", triples_path),
                       ("domain_kb", kb_path), ("checkpoint", ckpt_path),
                       ("eval_report", report_path)):
        manifest["artifacts"][name] = {"path": path, "sha256": _sha256(path)}
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    click.echo(f"pipeline complete; manifest -> {manifest_path}")


@main.command("demo-fixture")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
def demo_fixture(out_dir, seed):
    """Write the bundled 20-review demo corpus and a ready-to-run config."""
    os.makedirs(out_dir, exist_ok=True)
    docs, annotations = fixtures.gen_demo_fixture(seed=seed)
    corpus_path = os.path.join(out_dir, "corpus.jsonl")
    ann_path = os.path.join(out_dir, "annotations.jsonl")
    corpus_mod.write_parsed_corpus(docs, corpus_path)
    with open(ann_path, "w") as fh:
        for ann in annotations:
            fh.write(json.dumps({
                "doc_id": ann.doc_id,
                "clusters": [
                    [{"start": s.start, "end": s.end, "head": s.head}
                     for s in cluster]
                    for cluster in ann.clusters
                ],
            }, sort_keys=True) + "\n")
    config = {
        "seed": seed,
        "domain": "demo",
        "paths": {
            "corpus": corpus_path,
            "annotations": ann_path,
            "output_dir": os.path.join(out_dir, "run"),
        },
        "model_config": {"encoder": {"embed_dim": 16, "lookup_width": 16},
                         "ffn_hidden": 16},
        "train_config": {"epochs": 2, "learning_rate": 0.01, "batch_size": 8,
                         "rho": 1.0, "seed": seed},
    }
    config_path = os.path.join(out_dir, "config.json")
    with open(config_path, "w") as fh:
        json.dump(config, fh, sort_keys=True, indent=1)
    click.echo(f"demo fixture -> {out_dir}")


if __name__ == "__main__":
    main()
