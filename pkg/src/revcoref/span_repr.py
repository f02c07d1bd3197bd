"""Span representations with syntax-based attention.

A span vector is assembled from its boundary sub-token embeddings, an
attention-pooled interior and a learned span-length feature. Attention
weights decay by powers of two with the dependency-path distance of a
word to the span head and are hard-zeroed beyond a window.
"""

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .corpus import ROOT, ParsedDocument, Span, SpanKind
from .subtok import UNK, SubTokenizer

TOY_TRAINABLE = "TOY_TRAINABLE"
FROZEN_PRETRAINED = "FROZEN_PRETRAINED"

# POS tags allowed inside a noun-phrase chunk
_NP_MODIFIER_POS = frozenset({"DET", "ADJ", "NOUN", "PROPN", "NUM"})
_PREDICATE_POS = frozenset({"VERB", "ADJ"})


@dataclass
class EncoderConfig:
    mode: str = TOY_TRAINABLE
    embed_dim: int = 32  # d, width of span vectors and projected tokens
    max_seq_len: int = 256
    attention_window: int = 2  # L
    length_buckets: tuple = (1, 2, 3, 4, 7, 15)  # {1,2,3,4,5-7,8-15,16+}
    bucket_embed_dim: int = 20
    lookup_width: int = 32  # toy embedding width before projection
    frozen_width: int = 0  # d' of the frozen encoder, 0 when unused

    def __post_init__(self):
        self.length_buckets = tuple(self.length_buckets)
        if self.embed_dim <= 0:
            raise ValueError("embed_dim must be positive")
        if self.attention_window < 1:
            raise ValueError("attention_window must be >= 1")

    def length_bucket(self, n_words: int) -> int:
        return sum(n_words > b for b in self.length_buckets)


@dataclass
class SyntaxPhraseSet:
    for_span: Span
    phrases: list  # Span objects of kind SYNTAX_PHRASE


def extract_syntax_phrases(span: Span, doc: ParsedDocument) -> SyntaxPhraseSet:
    """Syntax-related phrases of a span: the verb/adjective governing its
    head, plus verbs/adjectives/noun phrases directly governed by the head
    or sharing its governor, within the sentence."""
    s_start, s_end = doc.sentence_of(span.head)
    head_tok = doc.tokens[span.head]
    governor = head_tok.dep_head

    def in_span(i):
        return span.start <= i < span.end

    candidates = []
    if governor != ROOT and not in_span(governor):
        if doc.tokens[governor].pos in _PREDICATE_POS:
            candidates.append(governor)
    for i in range(s_start, s_end):
        if in_span(i):
            continue
        tok = doc.tokens[i]
        related = tok.dep_head == span.head or (
            governor != ROOT and tok.dep_head == governor and i != governor
        )
        if not related:
            continue
        if tok.pos in _PREDICATE_POS or tok.pos in ("NOUN", "PROPN"):
            candidates.append(i)

    phrases = []
    seen = set()
    for i in sorted(set(candidates)):
        tok = doc.tokens[i]
        if tok.pos in ("NOUN", "PROPN"):
            start, end = _noun_chunk(doc, i, s_start, span)
        else:
            start, end = i, i + 1
        key = (start, end)
        if key in seen:
            continue
        seen.add(key)
        phrases.append(
            Span(doc_id=doc.doc_id, start=start, end=end, head=i, kind=SpanKind.SYNTAX_PHRASE)
        )
    phrases.sort(key=lambda p: p.start)
    return SyntaxPhraseSet(for_span=span, phrases=phrases)


def _noun_chunk(doc: ParsedDocument, head: int, s_start: int, exclude: Span):
    """Contiguous noun-phrase chunk around a noun head: left modifiers whose
    dependency head stays inside the chunk; never overlaps `exclude`."""
    left = head
    while left - 1 >= s_start:
        tok = doc.tokens[left - 1]
        if tok.pos not in _NP_MODIFIER_POS:
            break
        if not (left <= tok.dep_head <= head):
            break
        if exclude.start <= left - 1 < exclude.end:
            break
        left -= 1
    return left, head + 1


def dependency_distances(span: Span, doc: ParsedDocument):
    """BFS distances (in dependency edges, undirected) from the span head to
    every word of the span, restricted to span-internal edges. Unreachable
    words map to None."""
    indices = range(span.start, span.end)
    adj = {i: [] for i in indices}
    for i in indices:
        h = doc.tokens[i].dep_head
        if h != ROOT and span.start <= h < span.end:
            adj[i].append(h)
            adj[h].append(i)
    dist = {i: None for i in indices}
    dist[span.head] = 0
    queue = deque([span.head])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if dist[nxt] is None:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


class TokenVocab:
    """Sub-token piece vocabulary for the trainable toy encoder."""

    def __init__(self, pieces):
        ordered = [UNK] + sorted(set(pieces) - {UNK})
        self.index = {p: i for i, p in enumerate(ordered)}
        self.pieces = ordered

    @classmethod
    def build(cls, docs, subtok: SubTokenizer, extra_phrases=()):
        pieces = set()
        for doc in docs:
            for tok in doc.tokens:
                pieces.update(subtok.tokenize_word(tok.surface))
        for phrase in extra_phrases:
            for word in phrase.split():
                pieces.update(subtok.tokenize_word(word))
        return cls(pieces)

    def __len__(self):
        return len(self.index)

    def ids(self, pieces):
        unk = self.index[UNK]
        return [self.index.get(p, unk) for p in pieces]


class FeedForward(nn.Module):
    """One hidden layer with tanh; dropout applied at the input."""

    def __init__(self, in_dim, hidden, out_dim, dropout=0.1):
        super().__init__()
        self.drop = nn.Dropout(dropout)
        self.lin1 = nn.Linear(in_dim, hidden)
        self.lin2 = nn.Linear(hidden, out_dim)

    def forward(self, x):
        return self.lin2(torch.tanh(self.lin1(self.drop(x))))


class ToyEncoder(nn.Module):
    """Trainable lookup-table encoder over a corpus-built piece vocabulary,
    optionally concatenated with affect vectors before projection to d."""

    def __init__(self, vocab: TokenVocab, config: EncoderConfig, affect_width: int = 0):
        super().__init__()
        self.vocab = vocab
        self.config = config
        self.affect_width = affect_width
        self.embedding = nn.Embedding(len(vocab), config.lookup_width)
        self.proj = nn.Linear(config.lookup_width + affect_width, config.embed_dim)

    def forward(self, piece_ids, affect=None):
        x = self.embedding(piece_ids)
        if self.affect_width:
            if affect is None:
                affect = torch.zeros(
                    x.shape[0], self.affect_width, dtype=x.dtype, device=x.device
                )
            x = torch.cat([x, affect], dim=-1)
        return self.proj(x)


class FrozenEncoder(nn.Module):
    """Projection over pre-computed contextual embeddings loaded from an
    .npz file mapping doc_id -> (n_subtokens, d') array."""

    def __init__(self, path, config: EncoderConfig):
        super().__init__()
        data = np.load(path)
        self.table = {k: np.asarray(data[k], dtype=np.float64) for k in data.files}
        widths = {v.shape[1] for v in self.table.values()}
        if len(widths) != 1:
            raise ValueError(f"frozen embeddings have inconsistent widths {widths}")
        config.frozen_width = widths.pop()
        self.config = config
        self.proj = nn.Linear(config.frozen_width, config.embed_dim)

    def lookup(self, doc_id: str, n_subtokens: int):
        arr = self.table.get(doc_id)
        if arr is None:
            raise KeyError(f"no frozen embeddings for document {doc_id!r}")
        if arr.shape[0] < n_subtokens:
            raise ValueError(
                f"frozen embeddings for {doc_id!r} cover {arr.shape[0]} sub-tokens, "
                f"need {n_subtokens}"
            )
        return torch.from_numpy(arr[:n_subtokens])

    def forward(self, vectors):
        return self.proj(vectors)


@dataclass
class EncodedDocument:
    """Sub-tokenization of a document plus its projected embeddings."""

    doc: ParsedDocument
    pieces: list
    word_index: list  # sub-token -> word index
    embeds: torch.Tensor = None  # (n_subtokens, d), filled by the model

    def word_subtokens(self, word: int):
        return [i for i, w in enumerate(self.word_index) if w == word]


def subtokenize_document(doc: ParsedDocument, subtok: SubTokenizer, max_seq_len: int):
    words = [t.surface for t in doc.tokens]
    if not words:
        raise ValueError(f"document {doc.doc_id} is empty")
    pieces, word_index = subtok.tokenize(words)
    if len(pieces) > max_seq_len:
        warnings.warn(
            f"{doc.doc_id}: truncating {len(pieces)} sub-tokens to {max_seq_len}"
        )
        pieces = pieces[:max_seq_len]
        word_index = word_index[:max_seq_len]
    return EncodedDocument(doc=doc, pieces=pieces, word_index=word_index)


class SpanEncoder(nn.Module):
    """Computes span vectors from sub-token embeddings: a head-conditioned
    score per sub-token, distance-decayed and window-clipped weights, and
    a boundary + pooled + length-feature projection."""

    SYNTAX = "SYNTAX"
    DOT = "DOT"
    UNIFORM = "UNIFORM"

    def __init__(self, config: EncoderConfig, ffn_hidden: int = 64, dropout: float = 0.1):
        super().__init__()
        d = config.embed_dim
        self.config = config
        self.score_ffn = FeedForward(3 * d, ffn_hidden, 1, dropout)  # FFN_1
        self.out_ffn = FeedForward(
            3 * d + config.bucket_embed_dim, ffn_hidden, d, dropout
        )  # FFN_2
        self.length_embed = nn.Embedding(
            len(config.length_buckets) + 1, config.bucket_embed_dim
        )

    def attention_weights(self, embeds, head_pos, dists, variant):
        """Per-sub-token weights b_i. `dists` holds the dependency distance
        of each sub-token's word to the head word (None = unreachable)."""
        n = embeds.shape[0]
        if n == 1:
            return torch.ones(1, dtype=embeds.dtype)
        if variant == self.UNIFORM:
            return torch.full((n,), 1.0 / n, dtype=embeds.dtype)
        head = embeds[head_pos]
        if variant == self.DOT:
            scores = embeds @ head / (embeds.shape[1] ** 0.5)
            return torch.softmax(scores, dim=0)
        if variant != self.SYNTAX:
            raise ValueError(f"unknown attention variant {variant!r}")
        feats = torch.cat([embeds, head.expand_as(embeds), embeds * head], dim=-1)
        f = self.score_ffn(feats).squeeze(-1)
        L = self.config.attention_window
        eligible = torch.tensor(
            [d is not None and d <= L for d in dists], dtype=torch.bool
        )
        if not eligible.any():
            # every word is beyond the window: fall back to head-only weight
            b = torch.zeros(n, dtype=embeds.dtype)
            b[head_pos] = 1.0
            return b
        decay = torch.tensor(
            [float(d) if d is not None else 0.0 for d in dists], dtype=embeds.dtype
        )
        # stabilized exp(f_i) / 2^{l_i}, exact zero outside the window;
        # mask before exponentiating so ineligible scores cannot overflow
        log_a = f - f[eligible].max().detach() - decay * torch.log(
            torch.tensor(2.0, dtype=embeds.dtype)
        )
        neg_inf = torch.full_like(log_a, float("-inf"))
        a = torch.exp(torch.where(eligible, log_a, neg_inf))
        return a / a.sum()

    def forward(self, embeds, head_pos, dists, n_words, variant=SYNTAX):
        b = self.attention_weights(embeds, head_pos, dists, variant)
        pooled = b @ embeds
        bucket = torch.tensor(self.config.length_bucket(n_words))
        feat = torch.cat([embeds[0], embeds[-1], pooled, self.length_embed(bucket)])
        return self.out_ffn(feat), b


def span_subtoken_view(encoded: EncodedDocument, span: Span):
    """Indices, head position and per-sub-token distances for a span inside
    an encoded document. Word-level distances are inherited by sub-tokens."""
    word_dists = dependency_distances(span, encoded.doc)
    positions = [
        i for i, w in enumerate(encoded.word_index) if span.start <= w < span.end
    ]
    if not positions:
        raise ValueError(
            f"span [{span.start}, {span.end}) of {span.doc_id} was truncated away"
        )
    dists = [word_dists[encoded.word_index[i]] for i in positions]
    head_subs = [i for i in positions if encoded.word_index[i] == span.head]
    head_pos = positions.index(head_subs[0]) if head_subs else 0
    n_words = span.end - span.start
    return positions, head_pos, dists, n_words
