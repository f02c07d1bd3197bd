import pytest
import torch

from revcoref.corpus import LabeledTriple, Span
from revcoref.fixtures import gen_demo_fixture, make_doc
from revcoref.model import ModelConfig
from revcoref.span_repr import EncoderConfig
from revcoref.training import (
    ABLATION_AXES,
    Resources,
    TrainConfig,
    ablate,
    apply_axis,
    evaluate,
    learning_rate_at,
    positive_f1,
    train,
)


class TestLearningRateSchedule:
    def test_endpoints(self):
        cfg = TrainConfig(learning_rate=0.1, decay_floor=1e-4)
        assert learning_rate_at(0, 100, cfg) == pytest.approx(0.1)
        assert learning_rate_at(99, 100, cfg) == pytest.approx(1e-5)

    def test_linear_midpoint(self):
        cfg = TrainConfig(learning_rate=0.2, decay_floor=0.0)
        assert learning_rate_at(50, 101, cfg) == pytest.approx(0.1)

    def test_monotone_nonincreasing(self):
        cfg = TrainConfig(learning_rate=0.05)
        rates = [learning_rate_at(s, 40, cfg) for s in range(45)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        # clipped at the floor beyond the schedule
        assert rates[-1] == pytest.approx(cfg.decay_floor * cfg.learning_rate)

    def test_single_step(self):
        cfg = TrainConfig(learning_rate=0.3)
        assert learning_rate_at(0, 1, cfg) == 0.3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)


class TestPositiveF1:
    def test_perfect(self):
        p, r, f1, conf = positive_f1([(1, 1), (0, 0), (1, 1)])
        assert (p, r, f1) == (1.0, 1.0, 1.0)
        assert conf == [[1, 0], [0, 2]]

    def test_hand_computed(self):
        # tp=2 fp=1 fn=1 tn=1
        pairs = [(1, 1), (1, 1), (1, 0), (0, 1), (0, 0)]
        p, r, f1, conf = positive_f1(pairs)
        assert p == pytest.approx(2 / 3)
        assert r == pytest.approx(2 / 3)
        assert f1 == pytest.approx(2 / 3)
        assert conf == [[1, 1], [1, 2]]

    def test_degenerate_zero(self):
        p, r, f1, conf = positive_f1([(0, 0), (0, 0)])
        assert (p, r, f1) == (0.0, 0.0, 0.0)
        assert sum(map(sum, conf)) == 2


def _separable_dataset():
    """Tiny dataset where the surface word pair decides the label."""
    triples = []
    pairs = [("alarm", "clock", 1), ("alarm", "radio", 0),
             ("moon", "beam", 1), ("moon", "shelf", 0)]
    for di, (a, b, label) in enumerate(pairs * 2):
        doc = make_doc(f"doc{di}", "alarm", [[
            (a, a, "NOUN", "NONE", -1, "root"),
            ("and", "and", "OTHER", "NONE", 0, "cc"),
            (b, b, "NOUN", "NONE", 0, "conj"),
        ]])
        triples.append(
            LabeledTriple(doc, Span(f"doc{di}", 0, 1, 0), Span(f"doc{di}", 2, 3, 2), label)
        )
    return triples


def _small_configs(**model_kwargs):
    model_config = ModelConfig(
        encoder=EncoderConfig(embed_dim=8, lookup_width=8, bucket_embed_dim=4),
        ffn_hidden=8,
        dropout=0.0,
        use_general_kb=False,
        use_affect=False,
        **model_kwargs,
    )
    train_config = TrainConfig(
        epochs=30, learning_rate=0.01, batch_size=4, optimizer="adam", seed=0
    )
    return model_config, train_config


class TestTrain:
    def test_separable_dataset_reaches_f1_one(self):
        triples = _separable_dataset()
        model_config, train_config = _small_configs()
        model, history = train(triples, triples, model_config, train_config)
        assert history["best_dev_f1"] == 1.0
        report = evaluate(model, triples)
        assert report.f1_pos == 1.0

    def test_same_seed_bit_identical(self):
        triples = _separable_dataset()
        model_config, train_config = _small_configs()
        train_config.epochs = 3
        m1, h1 = train(triples, triples, model_config, train_config)
        m2, h2 = train(triples, triples, model_config, train_config)
        assert h1 == h2
        for (n1, p1), (n2, p2) in zip(
            m1.state_dict().items(), m2.state_dict().items()
        ):
            assert n1 == n2
            assert torch.equal(p1, p2), n1

    def test_history_shape(self):
        triples = _separable_dataset()
        model_config, train_config = _small_configs()
        train_config.epochs = 4
        _, history = train(triples, triples, model_config, train_config)
        assert len(history["train_loss"]) == 4
        assert len(history["dev_f1"]) == 4
        assert history["best_dev_f1"] == max(history["dev_f1"])

    def test_empty_train_set_rejected(self):
        model_config, train_config = _small_configs()
        with pytest.raises(ValueError, match="empty"):
            train([], [], model_config, train_config)


class TestEvaluate:
    def _trained(self):
        triples = _separable_dataset()
        model_config, train_config = _small_configs()
        model, _ = train(triples, triples, model_config, train_config)
        return model, triples

    def test_confusion_consistent_with_metrics(self):
        model, triples = self._trained()
        report = evaluate(model, triples)
        [[tn, fp], [fn, tp]] = report.confusion
        assert tn + fp + fn + tp == len(triples)
        if tp + fp:
            assert report.precision_pos == pytest.approx(tp / (tp + fp))
        if tp + fn:
            assert report.recall_pos == pytest.approx(tp / (tp + fn))
        assert report.domain == "alarm"
        assert report.config_fingerprint == model.config.fingerprint()

    def test_empty_test_set_rejected(self):
        model, _ = self._trained()
        with pytest.raises(ValueError, match="empty"):
            evaluate(model, [])


class TestAblation:
    def test_unknown_axis(self):
        with pytest.raises(ValueError, match="unknown ablation axis"):
            apply_axis(ModelConfig(), "-everything")

    def test_axis_does_not_mutate_base(self):
        base = ModelConfig()
        cfg = apply_axis(base, "-domain_kb")
        assert base.use_domain_kb is True
        assert cfg.use_domain_kb is False

    def test_every_axis_produces_valid_config(self):
        base = ModelConfig()
        fingerprints = {}
        for axis in ABLATION_AXES:
            fingerprints[axis] = apply_axis(base, axis).fingerprint()
        assert fingerprints["full"] == base.fingerprint()
        others = [v for k, v in fingerprints.items() if k != "full"]
        assert len(set(others)) == len(others)

    def test_grid_run(self):
        triples = _separable_dataset()
        model_config, train_config = _small_configs()
        train_config.epochs = 2
        reports = ablate(
            model_config, ["full", "-f_sk"], triples, triples, triples, train_config
        )
        assert [r.axis for r in reports] == ["full", "-f_sk"]
        assert reports[0].config_fingerprint != reports[1].config_fingerprint


def test_demo_fixture_trains_end_to_end():
    from revcoref.corpus import build_triples
    from revcoref.kb_mining import mine_domain_kb

    docs, annotations = gen_demo_fixture()
    triples = build_triples(annotations, docs, seed=0)
    kb = mine_domain_kb(docs, rho=1.0)
    res = Resources(domain_kb=kb)
    model_config, train_config = _small_configs()
    train_config.epochs = 2
    model, history = train(triples, triples, model_config, train_config, res)
    assert len(history["train_loss"]) == 2
    report = evaluate(model, triples, res)
    assert 0.0 <= report.f1_pos <= 1.0
