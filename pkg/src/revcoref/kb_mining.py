"""Domain knowledge base mined from unlabeled reviews.

For every mention word (nouns and named-entity words) we count content
words (nouns/adjectives/verbs) co-occurring in the same unlabeled
sentence, score them with tf-idf and keep those scoring at least rho.
The co-occurrence unit is the sentence; the idf document unit is the
whole review. Natural log throughout.
"""

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources

from .corpus import CONTENT_POS, NOMINAL_POS, ParsedDocument, Span, SpanKind, Token, ROOT


def _load_stopwords():
    text = resources.files("revcoref.data").joinpath("stopwords.txt").read_text()
    return frozenset(w for w in text.split() if w)


STOPWORDS = _load_stopwords()


@dataclass(frozen=True)
class KBEntry:
    phrase: str
    pos: str  # NOUN, ADJ or VERB
    count: int  # co-occurrence count C_k
    score: float  # tf-idf


@dataclass
class DomainKB:
    domain: str
    rho: float
    corpus_size: int  # number of unlabeled reviews
    entries: dict  # mention word -> list of KBEntry, score-descending


@dataclass(frozen=True)
class KnowledgePhrase:
    """A retrieved knowledge phrase materialized as a span in a tiny
    synthetic context, so it can run through the span-embedding pipeline."""

    phrase: str
    source: str  # "domain" or "general"
    score: float
    span: Span
    doc: ParsedDocument


def is_mention_word(token: Token) -> bool:
    """A mention word is a noun or part of a named entity."""
    return token.pos in NOMINAL_POS or token.ner != "NONE"


def extract_mention_words(mention: Span, doc: ParsedDocument):
    """Lowercased lemmas of qualifying tokens, deduplicated in span order."""
    out = []
    seen = set()
    for tok in doc.tokens[mention.start : mention.end]:
        if not is_mention_word(tok):
            continue
        lemma = tok.lemma.lower()
        if lemma in STOPWORDS or lemma in seen:
            continue
        seen.add(lemma)
        out.append(lemma)
    return out


def _phrase_pos(pos: str) -> str:
    return "NOUN" if pos == "PROPN" else pos


def mine_domain_kb(unlabeled, rho: float, domain: str | None = None) -> DomainKB:
    """Build the domain KB from unlabeled reviews by tf-idf filtering.

    tf_k  = C_k / max C over the word's co-occurring phrases
    idf_k = ln(#reviews / #reviews containing phrase k)
    """
    if not unlabeled:
        raise ValueError("cannot mine a knowledge base from an empty corpus")
    if rho < 0:
        raise ValueError(f"rho must be non-negative, got {rho}")
    if domain is None:
        domain = unlabeled[0].domain

    cooc = defaultdict(Counter)  # mention word -> phrase lemma -> C_k
    phrase_pos = {}
    doc_freq = Counter()  # phrase lemma -> number of reviews containing it

    for doc in unlabeled:
        doc_freq.update({t.lemma.lower() for t in doc.tokens})
        for sent in doc.sentences:
            start, end = sent
            tokens = doc.tokens[start:end]
            words = {
                t.lemma.lower()
                for t in tokens
                if is_mention_word(t) and t.lemma.lower() not in STOPWORDS
            }
            if not words:
                continue
            phrases = [
                t
                for t in tokens
                if t.pos in CONTENT_POS and t.lemma.lower() not in STOPWORDS
            ]
            for w in words:
                for t in phrases:
                    lemma = t.lemma.lower()
                    if lemma == w:
                        continue
                    cooc[w][lemma] += 1
                    phrase_pos.setdefault(lemma, _phrase_pos(t.pos))

    n_reviews = len(unlabeled)
    entries = {}
    for word in sorted(cooc):
        counts = cooc[word]
        max_count = max(counts.values())
        kept = []
        for lemma in sorted(counts):
            c = counts[lemma]
            tf = c / max_count
            idf = math.log(n_reviews / doc_freq[lemma])
            score = tf * idf
            if score >= rho:
                kept.append(KBEntry(phrase=lemma, pos=phrase_pos[lemma], count=c, score=score))
        if kept:
            kept.sort(key=lambda e: (-e.score, e.phrase))
            entries[word] = kept
    return DomainKB(domain=domain, rho=rho, corpus_size=n_reviews, entries=entries)


def phrase_document(phrase: str, pos: str = "NOUN", doc_id: str | None = None) -> ParsedDocument:
    """Materialize a knowledge phrase as a minimal parsed document: every
    word depends on the last one, which is the root/head."""
    words = phrase.split()
    n = len(words)
    tokens = tuple(
        Token(
            surface=w,
            lemma=w,
            pos=pos if i == n - 1 else "OTHER",
            ner="NONE",
            dep_head=ROOT if i == n - 1 else n - 1,
            dep_label="root" if i == n - 1 else "dep",
        )
        for i, w in enumerate(words)
    )
    return ParsedDocument(
        doc_id=doc_id or f"phrase::{phrase}",
        domain="_phrase",
        tokens=tokens,
        sentences=((0, n),),
    )


def make_knowledge_phrase(phrase: str, source: str, score: float, pos: str = "NOUN") -> KnowledgePhrase:
    doc = phrase_document(phrase, pos=pos)
    span = Span(
        doc_id=doc.doc_id,
        start=0,
        end=len(doc.tokens),
        head=len(doc.tokens) - 1,
        kind=SpanKind.KNOWLEDGE_PHRASE,
    )
    return KnowledgePhrase(phrase=phrase, source=source, score=score, span=span, doc=doc)


def lookup_domain_knowledge(kb: DomainKB, mention: Span, doc: ParsedDocument, cap: int = 50):
    """Union of KB entries over the mention's words, deduplicated by phrase
    (keeping the max score), score-sorted and truncated to cap."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    best = {}
    for word in extract_mention_words(mention, doc):
        for entry in kb.entries.get(word, ()):
            prev = best.get(entry.phrase)
            if prev is None or entry.score > prev.score:
                best[entry.phrase] = entry
    ranked = sorted(best.values(), key=lambda e: (-e.score, e.phrase))[:cap]
    return [
        make_knowledge_phrase(e.phrase, source="domain", score=e.score, pos=e.pos)
        for e in ranked
    ]


def save_kb(kb: DomainKB, path):
    payload = {
        "domain": kb.domain,
        "rho": kb.rho,
        "corpus_size": kb.corpus_size,
        "entries": {
            word: [
                {"phrase": e.phrase, "pos": e.pos, "count": e.count, "score": e.score}
                for e in entries
            ]
            for word, entries in sorted(kb.entries.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_kb(path) -> DomainKB:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    entries = {
        word: [KBEntry(**e) for e in items]
        for word, items in payload["entries"].items()
    }
    return DomainKB(
        domain=payload["domain"],
        rho=payload["rho"],
        corpus_size=payload["corpus_size"],
        entries=entries,
    )
