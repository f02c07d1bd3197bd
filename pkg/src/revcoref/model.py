"""Knowledge-driven coreference scorer.

Fuses three relevance scores: a contextual score between mention and
anaphor, a knowledge-based score attending retrieved knowledge phrases
against the mention, and a scaled-dot interaction score between knowledge
and the syntax-related phrases of both spans. The fused probability is
sigmoid(F_C + F_K + F_SK).
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .corpus import LabeledTriple
from .general_kb import AffectLexicon, TripleStore, lookup_general_knowledge
from .kb_mining import DomainKB, extract_mention_words, lookup_domain_knowledge
from .span_repr import (
    EncodedDocument,
    EncoderConfig,
    FeedForward,
    FrozenEncoder,
    SpanEncoder,
    TokenVocab,
    ToyEncoder,
    extract_syntax_phrases,
    span_subtoken_view,
    subtokenize_document,
    TOY_TRAINABLE,
)
from .subtok import SubTokenizer

PROB_EPS = 1e-7


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    ffn_hidden: int = 64
    dropout: float = 0.1
    use_domain_kb: bool = True
    use_general_kb: bool = True
    use_affect: bool = True
    enable_f_c: bool = True
    enable_f_k: bool = True
    enable_f_sk: bool = True
    attention_variant: str = SpanEncoder.SYNTAX
    # use v_p*v_hat for both product terms of the knowledge fusion input
    # instead of the default (v_m*v_hat, v_p*v_hat)
    duplicate_anaphor_product: bool = False
    knowledge_cap: int = 50  # per knowledge source
    total_knowledge_cap: int = 64

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        if not (self.enable_f_c or self.enable_f_k or self.enable_f_sk):
            raise ValueError("at least one score head must be enabled")

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ScoreBundle:
    f_c: float
    f_k: float
    f_sk: float
    f_hat: float

    @property
    def label(self) -> int:
        return 1 if self.f_hat >= 0.5 else 0


@dataclass
class TripleFeatures:
    """Model-independent inputs for one triple: sub-tokenizations, span
    views and retrieved knowledge. Computed once, reused across epochs."""

    triple: LabeledTriple
    context: EncodedDocument
    mention_view: tuple
    anaphor_view: tuple
    knowledge: list  # (KnowledgePhrase, EncodedDocument, view)
    syn_m: list  # (Span, view) in the context document
    syn_p: list
    context_affect: np.ndarray = None
    knowledge_affect: list = None

    @property
    def label(self) -> int:
        return self.triple.label


def _affect_matrix(encoded: EncodedDocument, lexicon: AffectLexicon) -> np.ndarray:
    rows = [
        lexicon.vector(encoded.doc.tokens[w].lemma) for w in encoded.word_index
    ]
    return np.asarray(rows, dtype=np.float64)


def featurize(
    triple: LabeledTriple,
    config: ModelConfig,
    subtok: SubTokenizer,
    domain_kb: DomainKB = None,
    triple_store: TripleStore = None,
    affect: AffectLexicon = None,
) -> TripleFeatures:
    doc = triple.context
    encoded = subtokenize_document(doc, subtok, config.encoder.max_seq_len)
    mention_view = span_subtoken_view(encoded, triple.mention)
    anaphor_view = span_subtoken_view(encoded, triple.anaphor)

    phrases = []
    if config.use_domain_kb and domain_kb is not None:
        phrases.extend(
            lookup_domain_knowledge(domain_kb, triple.mention, doc, cap=config.knowledge_cap)
        )
    if config.use_general_kb and triple_store is not None:
        words = extract_mention_words(triple.mention, doc)
        phrases.extend(lookup_general_knowledge(triple_store, words, cap=config.knowledge_cap))
    seen = set()
    unique = []
    for kp in phrases:
        if kp.phrase not in seen:
            seen.add(kp.phrase)
            unique.append(kp)
    unique = unique[: config.total_knowledge_cap]

    knowledge = []
    for kp in unique:
        enc = subtokenize_document(kp.doc, subtok, config.encoder.max_seq_len)
        knowledge.append((kp, enc, span_subtoken_view(enc, kp.span)))

    def _surviving(spans):
        out = []
        for span in spans:
            try:
                out.append((span, span_subtoken_view(encoded, span)))
            except ValueError:
                continue  # truncated away
        return out

    syn_m = _surviving(extract_syntax_phrases(triple.mention, doc).phrases)
    syn_p = _surviving(extract_syntax_phrases(triple.anaphor, doc).phrases)

    context_affect = None
    knowledge_affect = None
    if config.use_affect and affect is not None:
        context_affect = _affect_matrix(encoded, affect)
        knowledge_affect = [_affect_matrix(enc, affect) for _, enc, _ in knowledge]

    return TripleFeatures(
        triple=triple,
        context=encoded,
        mention_view=mention_view,
        anaphor_view=anaphor_view,
        knowledge=knowledge,
        syn_m=syn_m,
        syn_p=syn_p,
        context_affect=context_affect,
        knowledge_affect=knowledge_affect,
    )


class CorefScorer(nn.Module):
    def __init__(self, config: ModelConfig, vocab: TokenVocab = None, frozen_path=None,
                 affect_width: int = 0):
        super().__init__()
        self.config = config
        enc_cfg = config.encoder
        d = enc_cfg.embed_dim
        h = config.ffn_hidden
        p = config.dropout
        if not config.use_affect:
            affect_width = 0
        if enc_cfg.mode == TOY_TRAINABLE:
            if vocab is None:
                raise ValueError("toy encoder needs a token vocabulary")
            self.encoder = ToyEncoder(vocab, enc_cfg, affect_width=affect_width)
        else:
            if frozen_path is None:
                raise ValueError("frozen encoder needs an embedding file")
            self.encoder = FrozenEncoder(frozen_path, enc_cfg)
        self.span_encoder = SpanEncoder(enc_cfg, ffn_hidden=h, dropout=p)
        self.context_score_ffn = FeedForward(3 * d, h, 1, p)  # FFN_3
        self.context_out_ffn = FeedForward(3 * d, h, 1, p)  # FFN_4
        self.knowledge_score_ffn = FeedForward(3 * d, h, 1, p)  # FFN_5
        self.knowledge_out_ffn = FeedForward(5 * d, h, 1, p)  # FFN_6
        self.interaction_ffn = FeedForward(1, h, h, p)  # FFN_7
        self.interaction_out_ffn = FeedForward(h, h, 1, p)  # FFN_8
        self.sentinel_knowledge = nn.Parameter(torch.zeros(d))
        self.sentinel_syn_m = nn.Parameter(torch.zeros(d))
        self.sentinel_syn_p = nn.Parameter(torch.zeros(d))
        nn.init.normal_(self.sentinel_knowledge, std=0.1)
        nn.init.normal_(self.sentinel_syn_m, std=0.1)
        nn.init.normal_(self.sentinel_syn_p, std=0.1)
        self.double()

    # -- encoding -------------------------------------------------------

    def _encode(self, encoded: EncodedDocument, affect: np.ndarray = None):
        if isinstance(self.encoder, ToyEncoder):
            ids = torch.tensor(self.encoder.vocab.ids(encoded.pieces))
            aff = None
            if affect is not None and self.encoder.affect_width:
                aff = torch.from_numpy(affect)
            return self.encoder(ids, aff)
        vecs = self.encoder.lookup(encoded.doc.doc_id, len(encoded.pieces))
        return self.encoder(vecs)

    def _span_vector(self, embeds, view, variant=None):
        positions, head_pos, dists, n_words = view
        idx = torch.tensor(positions)
        variant = variant or self.config.attention_variant
        return self.span_encoder(embeds[idx], head_pos, dists, n_words, variant)

    # -- score heads ----------------------------------------------------

    def context_score(self, context_embeds, v_m, v_p):
        """Cross attention between every context sub-token and each span
        vector, fused through a pooled pairwise-product projection."""
        parts = []
        for v in (v_m, v_p):
            feats = torch.cat(
                [context_embeds, v.expand_as(context_embeds), context_embeds * v],
                dim=-1,
            )
            g = self.context_score_ffn(feats).squeeze(-1)
            alpha = torch.softmax(g, dim=0)
            parts.append(alpha.unsqueeze(-1) * context_embeds)
        w_m, w_p = parts
        pooled = torch.cat([w_m, w_p, w_m * w_p], dim=-1).sum(dim=0)
        return self.context_out_ffn(pooled).squeeze(-1)

    def knowledge_score(self, v_m, v_p, knowledge_vectors):
        """Attend knowledge phrases against the mention, then fuse the
        attended summary with both span vectors."""
        if knowledge_vectors:
            mk = torch.stack(knowledge_vectors)
            feats = torch.cat([mk, v_m.expand_as(mk), mk * v_m], dim=-1)
            c = torch.softmax(self.knowledge_score_ffn(feats).squeeze(-1), dim=0)
            v_hat = c @ mk
        else:
            c = torch.zeros(0, dtype=v_m.dtype)
            v_hat = self.sentinel_knowledge
        first_prod = (
            v_p * v_hat if self.config.duplicate_anaphor_product else v_m * v_hat
        )
        fused = torch.cat([v_m, v_p, v_hat, first_prod, v_p * v_hat])
        return self.knowledge_out_ffn(fused).squeeze(-1), c

    def syntax_knowledge_score(self, knowledge_vectors, syn_m_vectors, syn_p_vectors):
        """Scaled dot attention of each syntax-phrase matrix over the
        knowledge matrix; the pairwise interaction is sum-pooled."""
        d = self.config.encoder.embed_dim
        m_k = (
            torch.stack(knowledge_vectors)
            if knowledge_vectors
            else self.sentinel_knowledge.unsqueeze(0)
        )
        m_sm = (
            torch.stack(syn_m_vectors)
            if syn_m_vectors
            else self.sentinel_syn_m.unsqueeze(0)
        )
        m_sp = (
            torch.stack(syn_p_vectors)
            if syn_p_vectors
            else self.sentinel_syn_p.unsqueeze(0)
        )
        att_m = torch.softmax(m_sm @ m_k.T / d**0.5, dim=-1) @ m_k
        att_p = torch.softmax(m_sp @ m_k.T / d**0.5, dim=-1) @ m_k
        interaction = att_m @ att_p.T
        pooled = interaction.sum().reshape(1)
        return self.interaction_out_ffn(self.interaction_ffn(pooled)).squeeze(-1)

    # -- full forward ---------------------------------------------------

    def forward(self, feats: TripleFeatures):
        cfg = self.config
        context_embeds = self._encode(feats.context, feats.context_affect)
        v_m, _ = self._span_vector(context_embeds, feats.mention_view)
        v_p, _ = self._span_vector(context_embeds, feats.anaphor_view)

        knowledge_vectors = []
        for i, (kp, enc, view) in enumerate(feats.knowledge):
            aff = feats.knowledge_affect[i] if feats.knowledge_affect else None
            k_embeds = self._encode(enc, aff)
            vec, _ = self._span_vector(k_embeds, view)
            knowledge_vectors.append(vec)

        zero = torch.zeros((), dtype=v_m.dtype)
        c_weights = torch.zeros(len(knowledge_vectors), dtype=v_m.dtype)
        f_c = self.context_score(context_embeds, v_m, v_p) if cfg.enable_f_c else zero
        if cfg.enable_f_k:
            f_k, c_weights = self.knowledge_score(v_m, v_p, knowledge_vectors)
        else:
            f_k = zero
        if cfg.enable_f_sk:
            syn_m_vecs = [
                self._span_vector(context_embeds, view)[0] for _, view in feats.syn_m
            ]
            syn_p_vecs = [
                self._span_vector(context_embeds, view)[0] for _, view in feats.syn_p
            ]
            f_sk = self.syntax_knowledge_score(knowledge_vectors, syn_m_vecs, syn_p_vecs)
        else:
            f_sk = zero
        f_hat = torch.sigmoid(f_c + f_k + f_sk)
        return {"f_c": f_c, "f_k": f_k, "f_sk": f_sk, "f_hat": f_hat, "c": c_weights}

    def predict(self, feats: TripleFeatures):
        """Inference on one triple: the score bundle plus the attended
        knowledge phrases with their attention weights."""
        self.eval()
        with torch.no_grad():
            out = self(feats)
        bundle = ScoreBundle(
            f_c=out["f_c"].item(),
            f_k=out["f_k"].item(),
            f_sk=out["f_sk"].item(),
            f_hat=out["f_hat"].item(),
        )
        weights = out["c"].tolist()
        attended = [
            {"phrase": kp.phrase, "source": kp.source, "weight": w}
            for (kp, _, _), w in zip(feats.knowledge, weights)
        ]
        attended.sort(key=lambda e: -e["weight"])
        return bundle, attended


def bce_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over clamped probabilities; stays finite for any
    parameters."""
    if probs.numel() == 0:
        raise ValueError("loss over an empty batch")
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    y = labels.to(p.dtype)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)).mean()
