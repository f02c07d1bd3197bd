"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines inline;
under plain `pytest` they appear in captured output on failure.
"""

import math
import random
import time

import numpy as np
import pytest
import torch
from click.testing import CliRunner

from conftest import tiny_model
from oracles import brute_force_domain_kb, finite_difference_check
from revcoref.cli import main as cli_main
from revcoref.corpus import LabeledTriple, build_triples, split_dataset
from revcoref.fixtures import (
    gen_alarm_corpus,
    gen_knowledge_dataset,
    gen_laptop_corpus,
    running_example_doc,
    running_example_spans,
)
from revcoref.kb_mining import mine_domain_kb
from revcoref.model import ModelConfig, bce_loss, featurize
from revcoref.span_repr import EncoderConfig, SpanEncoder
from revcoref.subtok import SubTokenizer
from revcoref.training import Resources, TrainConfig, apply_axis, train
from test_kb_mining import random_corpus


def _verdict(num, name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num} ({name})"
    if detail:
        line += f": {detail}"
    print(line)
    assert ok, line


def test_criterion_1_tfidf_oracle_equivalence():
    t0 = time.time()
    worst = 0.0
    for trial in range(10):
        rng = random.Random(trial)
        docs = random_corpus(rng, n_docs=rng.randint(4, 12),
                             max_sentences=5, max_tokens=9)
        n_sentences = sum(len(d.sentences) for d in docs)
        assert n_sentences <= 50
        kb = mine_domain_kb(docs, rho=0.0)
        oracle = brute_force_domain_kb(docs, rho=0.0)
        got = {
            w: {e.phrase: (e.count, e.score) for e in entries}
            for w, entries in kb.entries.items()
        }
        assert got.keys() == oracle.keys()
        for w in oracle:
            assert got[w].keys() == oracle[w].keys()
            for phrase, (count, score) in oracle[w].items():
                assert got[w][phrase][0] == count
                worst = max(worst, abs(got[w][phrase][1] - score))
    elapsed = time.time() - t0
    ok = worst <= 1e-9 and elapsed < 10
    _verdict(1, "tf-idf oracle equivalence", ok,
             f"10 corpora, max score diff {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_laptop_filtering():
    t0 = time.time()
    docs = gen_laptop_corpus()
    kb = mine_domain_kb(docs, rho=5.0, domain="laptop")
    entries = {e.phrase for e in kb.entries.get("windows", [])}
    retained = {"microsoft", "system", "upgrade", "xp"}
    ok_retained = retained <= entries
    ok_filtered = not ({"keep", "like"} & entries)
    elapsed = time.time() - t0
    ok = ok_retained and ok_filtered and elapsed < 120
    _verdict(2, "laptop tf-idf filtering", ok,
             f"windows -> {sorted(entries)}, {elapsed:.1f}s")


def test_criterion_3_gradient_suite(subtok):
    t0 = time.time()
    model = tiny_model(seed=3)
    model.eval()
    doc = running_example_doc()
    spans = running_example_spans(doc)
    from revcoref.kb_mining import DomainKB, KBEntry

    kb = DomainKB(domain="alarm", rho=0.0, corpus_size=10, entries={
        "moonbeam": [KBEntry("clock", "NOUN", 5, 3.0),
                     KBEntry("alarm", "NOUN", 4, 2.5)],
    })
    rich = featurize(
        LabeledTriple(doc, spans["mention"], spans["it"], 1),
        model.config, subtok, domain_kb=kb,
    )
    # a second triple with no knowledge and no syntax phrases exercises
    # the three sentinel vectors
    bare = featurize(
        LabeledTriple(doc, spans["its"], spans["it"], 0), model.config, subtok
    )
    bare.syn_m = []
    bare.syn_p = []

    def loss_fn():
        probs = torch.stack([model(rich)["f_hat"], model(bare)["f_hat"]])
        return bce_loss(probs, torch.tensor([1, 0]))

    records = finite_difference_check(model, loss_fn, max_per_tensor=8)
    bad = [r for r in records if not r[3]]
    covered = {name.split("[")[0] for name, *_ in records}
    missing = {n for n, _ in model.named_parameters()} - covered
    elapsed = time.time() - t0
    ok = not bad and not missing and elapsed < 60
    _verdict(3, "finite-difference gradient suite", ok,
             f"{len(records)} checks, {len(bad)} failures, "
             f"{len(missing)} uncovered tensors, {elapsed:.1f}s")


def test_criterion_4_attention_invariants():
    torch.manual_seed(4)
    enc = SpanEncoder(EncoderConfig(embed_dim=6, bucket_embed_dim=4),
                      ffn_hidden=5, dropout=0.0).double()
    model = tiny_model(seed=4)
    rng = np.random.default_rng(4)
    cases = failures = 0

    def rand_embeds(n):
        return torch.from_numpy(rng.normal(size=(n, 6)))

    for _ in range(250):  # softmax normalization of every attention head
        n = int(rng.integers(2, 8))
        dists = [int(d) for d in rng.integers(0, 3, size=n)]
        b = enc.attention_weights(rand_embeds(n), 0, dists, SpanEncoder.SYNTAX)
        v_m, v_p = rand_embeds(1)[0], rand_embeds(1)[0]
        t = rand_embeds(int(rng.integers(1, 6)))
        _, c = model.knowledge_score(
            torch.zeros(6, dtype=torch.float64), v_m[:6],
            list(rand_embeds(int(rng.integers(1, 5)))),
        )
        for dist in (b, c):
            cases += 1
            if abs(dist.sum().item() - 1.0) > 1e-6 or (dist < 0).any():
                failures += 1

    for _ in range(250):  # window hard-zero beyond dependency distance L
        n = int(rng.integers(2, 8))
        dists = [0] + [int(d) for d in rng.integers(0, 6, size=n - 1)]
        b = enc.attention_weights(rand_embeds(n), 0, dists, SpanEncoder.SYNTAX)
        cases += 1
        if any(b[i].item() != 0.0 for i in range(n) if dists[i] > 2):
            failures += 1

    for _ in range(250):  # distance monotonicity at equal scores
        n = int(rng.integers(3, 8))
        x = rand_embeds(1).repeat(n, 1)
        dists = sorted(int(d) for d in rng.integers(0, 3, size=n))
        dists[0] = 0
        b = enc.attention_weights(x, 0, dists, SpanEncoder.SYNTAX)
        cases += 1
        if any(b[i].item() < b[i + 1].item() - 1e-12 for i in range(n - 1)):
            failures += 1

    for _ in range(125):  # permutation invariance of F_K and F_SK
        v_m, v_p = rand_embeds(2)
        vk = list(rand_embeds(int(rng.integers(2, 6))))
        perm = list(rng.permutation(len(vk)))
        a, _ = model.knowledge_score(v_m, v_p, vk)
        b, _ = model.knowledge_score(v_m, v_p, [vk[i] for i in perm])
        cases += 1
        if abs(a.item() - b.item()) > 1e-6:
            failures += 1
        sm = list(rand_embeds(2))
        sp = list(rand_embeds(2))
        s1 = model.syntax_knowledge_score(vk, sm, sp).item()
        s2 = model.syntax_knowledge_score([vk[i] for i in perm], sm, sp).item()
        cases += 1
        if abs(s1 - s2) > 1e-6:
            failures += 1

    ok = cases >= 1000 and failures == 0
    _verdict(4, "attention invariants", ok, f"{cases} cases, {failures} failures")


@pytest.mark.slow
def test_criterion_5_knowledge_dependence():
    t0 = time.time()
    ds = gen_knowledge_dataset(seed=1)
    assert len(ds["train"]) + len(ds["dev"]) == 200
    kb = mine_domain_kb(ds["unlabeled"], rho=ds["rho"], domain=ds["domain"])
    res = Resources(domain_kb=kb)
    base = ModelConfig(
        encoder=EncoderConfig(embed_dim=32, lookup_width=32),
        ffn_hidden=64, use_general_kb=False, use_affect=False,
    )
    results = []
    for seed in range(5):
        tc = TrainConfig(epochs=15, learning_rate=0.003, batch_size=16,
                         seed=seed, optimizer="adam", rho=1.0)
        _, h_full = train(ds["train"], ds["dev"], base, tc, res)
        _, h_abl = train(ds["train"], ds["dev"], apply_axis(base, "-domain_kb"),
                         tc, res)
        results.append((h_full["best_dev_f1"], h_abl["best_dev_f1"]))
    elapsed = time.time() - t0
    full_ok = all(f >= 0.95 for f, _ in results)
    direction = sum(1 for f, a in results if a < f)
    ok = full_ok and direction >= 4 and elapsed < 600
    detail = ", ".join(f"seed {i}: {f:.3f}/{a:.3f}"
                       for i, (f, a) in enumerate(results))
    _verdict(5, "synthetic knowledge dependence", ok,
             f"{detail}; ablated lower in {direction}/5, {elapsed:.0f}s")


def test_criterion_6_score_additivity(subtok):
    doc = running_example_doc()
    spans = running_example_spans(doc)
    triples = [
        LabeledTriple(doc, spans["mention"], spans["it"], 1),
        LabeledTriple(doc, spans["its_voice"], spans["it"], 0),
    ]
    model_config = ModelConfig(
        encoder=EncoderConfig(embed_dim=8, lookup_width=8, bucket_embed_dim=4),
        ffn_hidden=8, dropout=0.0, use_general_kb=False, use_affect=False,
    )
    train_config = TrainConfig(epochs=3, learning_rate=0.01, batch_size=2,
                               optimizer="adam")
    model, _ = train(triples, triples, model_config, train_config)
    worst = 0.0
    for t in triples:
        feats = featurize(t, model.config, subtok)
        bundle, _ = model.predict(feats)
        recomposed = 1.0 / (1.0 + math.exp(-(bundle.f_c + bundle.f_k + bundle.f_sk)))
        worst = max(worst, abs(recomposed - bundle.f_hat))
    ok = worst <= 1e-9
    _verdict(6, "score additivity", ok, f"max |sigmoid(sum) - f_hat| = {worst:.2e}")


def test_criterion_7_pipeline_determinism(tmp_path):
    runner = CliRunner()
    fixture_dir = tmp_path / "fixture"
    result = runner.invoke(cli_main, ["demo-fixture", "--out", str(fixture_dir)])
    assert result.exit_code == 0, result.output
    import json

    config = json.loads((fixture_dir / "config.json").read_text())
    artifacts = {}
    for run in ("run1", "run2"):
        config["paths"]["output_dir"] = str(tmp_path / run)
        cfg_path = tmp_path / f"{run}.json"
        cfg_path.write_text(json.dumps(config))
        result = runner.invoke(cli_main, ["pipeline", "--config", str(cfg_path)])
        assert result.exit_code == 0, result.output
        artifacts[run] = {
            "kb": (tmp_path / run / "domain_kb.json").read_bytes(),
            "ckpt": (tmp_path / run / "model.ckpt").read_bytes(),
        }
    kb_ok = artifacts["run1"]["kb"] == artifacts["run2"]["kb"]
    ckpt_ok = artifacts["run1"]["ckpt"] == artifacts["run2"]["ckpt"]
    _verdict(7, "pipeline determinism", kb_ok and ckpt_ok,
             f"KB byte-identical: {kb_ok}, checkpoint bit-identical: {ckpt_ok}")


def test_criterion_8_data_protocol_fidelity():
    docs, annotations = gen_alarm_corpus()
    seed = 0
    triples = build_triples(annotations, docs, neg_pos_ratio=2.4, seed=seed)
    n_pos = sum(t.label for t in triples)
    n_neg = len(triples) - n_pos
    per_review_ok = True
    by_doc = {}
    for t in triples:
        by_doc.setdefault(t.context.doc_id, []).append(t.label)
    for labels in by_doc.values():
        p = sum(labels)
        n = len(labels) - p
        if n > math.floor(2.4 * p):  # negatives never exceed floor(2.4p)
            per_review_ok = False
    train_part, dev_part, test_part = split_dataset(triples, seed=seed)
    split_counts = tuple(len(p) for p in (train_part, dev_part, test_part))
    totals_ok = n_pos == 832 and n_neg == 1963
    ok = totals_ok and per_review_ok and sum(split_counts) == len(triples)
    _verdict(8, "data-protocol fidelity", ok,
             f"totals {n_pos}P/{n_neg}N, per-review cap respected, "
             f"seed={seed} split sizes {split_counts}")
