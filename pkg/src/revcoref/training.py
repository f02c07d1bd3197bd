"""End-to-end training, positive-F1 evaluation and the ablation grid."""

import copy
import math
import random
from dataclasses import asdict, dataclass, field

import torch

from .general_kb import AffectLexicon, TripleStore
from .kb_mining import DomainKB
from .model import CorefScorer, ModelConfig, bce_loss, featurize
from .span_repr import SpanEncoder, TokenVocab, TOY_TRAINABLE
from .subtok import SubTokenizer


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 3e-5
    decay_floor: float = 1e-4  # final lr = decay_floor * learning_rate
    batch_size: int = 16
    seed: int = 0
    rho: float = 5.0
    max_seq_len: int = 256
    momentum: float = 0.9
    optimizer: str = "sgd"  # or "adam"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EvalReport:
    domain: str
    precision_pos: float
    recall_pos: float
    f1_pos: float
    confusion: list  # [[tn, fp], [fn, tp]]
    config_fingerprint: str
    axis: str = "full"

    def to_dict(self):
        return asdict(self)


def learning_rate_at(step: int, total_steps: int, config: TrainConfig) -> float:
    """Linear interpolation from the base rate down to its decay floor."""
    if total_steps <= 1:
        return config.learning_rate
    frac = min(step / (total_steps - 1), 1.0)
    floor = config.decay_floor * config.learning_rate
    return config.learning_rate + frac * (floor - config.learning_rate)


def positive_f1(pairs):
    """(precision, recall, F1, confusion) for the positive class over
    (prediction, label) pairs; F1 is 0 when undefined."""
    confusion = [[0, 0], [0, 0]]
    for pred, label in pairs:
        confusion[label][pred] += 1
    tp = confusion[1][1]
    fp = confusion[0][1]
    fn = confusion[1][0]
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, confusion


@dataclass
class Resources:
    """Everything needed to featurize triples for one domain."""

    domain_kb: DomainKB = None
    triple_store: TripleStore = None
    affect: AffectLexicon = None
    subtok: SubTokenizer = field(default_factory=SubTokenizer.bundled)


def featurize_all(triples, model_config: ModelConfig, res: Resources):
    return [
        featurize(
            t,
            model_config,
            res.subtok,
            domain_kb=res.domain_kb,
            triple_store=res.triple_store,
            affect=res.affect,
        )
        for t in triples
    ]


def build_vocab(triples, res: Resources, model_config: ModelConfig) -> TokenVocab:
    docs = {t.context.doc_id: t.context for t in triples}
    phrases = []
    if res.domain_kb is not None:
        for entries in res.domain_kb.entries.values():
            phrases.extend(e.phrase for e in entries)
    if res.triple_store is not None:
        for t in res.triple_store.triples:
            phrases.extend((t.e1, t.e2))
    return TokenVocab.build(docs.values(), res.subtok, extra_phrases=phrases)


def _score_split(model: CorefScorer, features):
    model.eval()
    pairs = []
    with torch.no_grad():
        for f in features:
            prob = model(f)["f_hat"].item()
            pairs.append((1 if prob >= 0.5 else 0, f.label))
    return positive_f1(pairs)


def train(
    train_set,
    dev_set,
    model_config: ModelConfig,
    train_config: TrainConfig,
    resources: Resources = None,
    frozen_path=None,
):
    """Gradient-descent training with linear learning-rate decay; returns
    (model restored to its best-dev-F1 state, history dict)."""
    if not train_set:
        raise ValueError("training set is empty")
    res = resources or Resources()
    torch.manual_seed(train_config.seed)
    torch.set_num_threads(1)
    rng = random.Random(train_config.seed)

    model_config.encoder.max_seq_len = train_config.max_seq_len
    affect_width = res.affect.width if (res.affect and model_config.use_affect) else 0
    if model_config.encoder.mode == TOY_TRAINABLE:
        vocab = build_vocab(list(train_set) + list(dev_set), res, model_config)
        model = CorefScorer(model_config, vocab=vocab, affect_width=affect_width)
    else:
        model = CorefScorer(model_config, frozen_path=frozen_path)

    train_feats = featurize_all(train_set, model_config, res)
    dev_feats = featurize_all(dev_set, model_config, res)

    if train_config.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=train_config.learning_rate)
    else:
        opt = torch.optim.SGD(
            model.parameters(),
            lr=train_config.learning_rate,
            momentum=train_config.momentum,
        )

    steps_per_epoch = math.ceil(len(train_feats) / train_config.batch_size)
    total_steps = steps_per_epoch * train_config.epochs
    step = 0
    best_f1 = -1.0
    best_state = None
    history = {"train_loss": [], "dev_f1": []}

    for epoch in range(train_config.epochs):
        model.train()
        order = list(range(len(train_feats)))
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), train_config.batch_size):
            batch = [train_feats[i] for i in order[start : start + train_config.batch_size]]
            lr = learning_rate_at(step, total_steps, train_config)
            for group in opt.param_groups:
                group["lr"] = lr
            opt.zero_grad()
            probs = torch.stack([model(f)["f_hat"] for f in batch])
            labels = torch.tensor([f.label for f in batch])
            loss = bce_loss(probs, labels)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, step {step}"
                )
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(batch)
            step += 1
        history["train_loss"].append(epoch_loss / len(train_feats))
        if dev_feats:
            _, _, dev_f1, _ = _score_split(model, dev_feats)
        else:
            dev_f1 = -history["train_loss"][-1]
        history["dev_f1"].append(dev_f1)
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_state = copy.deepcopy(model.state_dict())

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    history["best_dev_f1"] = best_f1
    return model, history


def evaluate(model: CorefScorer, test_set, resources: Resources = None, domain: str = "",
             axis: str = "full") -> EvalReport:
    if not test_set:
        raise ValueError("test set is empty")
    res = resources or Resources()
    features = featurize_all(test_set, model.config, res)
    precision, recall, f1, confusion = _score_split(model, features)
    if not domain:
        domain = test_set[0].context.domain
    return EvalReport(
        domain=domain,
        precision_pos=precision,
        recall_pos=recall,
        f1_pos=f1,
        confusion=confusion,
        config_fingerprint=model.config.fingerprint(),
        axis=axis,
    )


ABLATION_AXES = {
    "full": {},
    "-omcs": {"use_general_kb": False},
    "-domain_kb": {"use_domain_kb": False},
    "-affect": {"use_affect": False},
    "-all_knowledge": {
        "use_general_kb": False,
        "use_domain_kb": False,
        "use_affect": False,
    },
    "-f_c": {"enable_f_c": False},
    "-f_k": {"enable_f_k": False},
    "-f_sk": {"enable_f_sk": False},
    "-syntax_attention": {"attention_variant": SpanEncoder.UNIFORM},
    "+dot_attention": {"attention_variant": SpanEncoder.DOT},
}


def apply_axis(base: ModelConfig, axis: str) -> ModelConfig:
    if axis not in ABLATION_AXES:
        raise ValueError(
            f"unknown ablation axis {axis!r}; valid axes: {sorted(ABLATION_AXES)}"
        )
    cfg = copy.deepcopy(base)
    for key, value in ABLATION_AXES[axis].items():
        setattr(cfg, key, value)
    return cfg


def ablate(
    base_config: ModelConfig,
    grid,
    train_set,
    dev_set,
    test_set,
    train_config: TrainConfig,
    resources: Resources = None,
):
    """Retrain and evaluate one model per grid cell with shared seed and
    shared splits."""
    reports = []
    for axis in grid:
        cfg = apply_axis(base_config, axis)
        model, _ = train(train_set, dev_set, cfg, train_config, resources)
        reports.append(evaluate(model, test_set, resources, axis=axis))
    return reports
