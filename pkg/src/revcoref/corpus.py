"""Data model for parsed reviews and labeled coreference triples.

Parsing (POS/NER/dependencies) happens outside this package; we ingest
pre-parsed JSONL, validate it, and build labeled (context, mention,
anaphor) triples from coreference cluster annotations.
"""

import itertools
import json
import math
import random
from dataclasses import dataclass
from enum import Enum

ROOT = -1

POS_TAGS = frozenset(
    {"NOUN", "PROPN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "OTHER"}
)
NER_TAGS = frozenset({"NONE", "PRODUCT", "ORG", "PERSON", "LOC", "MISC"})

NOMINAL_POS = frozenset({"NOUN", "PROPN"})
CONTENT_POS = frozenset({"NOUN", "PROPN", "VERB", "ADJ"})


class IngestionError(ValueError):
    """Malformed record in an input file."""


class StructuralError(ValueError):
    """Record parses but violates a structural invariant."""


class SpanKind(str, Enum):
    MENTION = "MENTION"
    ANAPHOR = "ANAPHOR"
    KNOWLEDGE_PHRASE = "KNOWLEDGE_PHRASE"
    SYNTAX_PHRASE = "SYNTAX_PHRASE"


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    pos: str
    ner: str
    dep_head: int  # document-global token index, or ROOT
    dep_label: str


@dataclass(frozen=True)
class ParsedDocument:
    doc_id: str
    domain: str
    tokens: tuple
    sentences: tuple  # (start, end) half-open token ranges

    def __len__(self):
        return len(self.tokens)

    def sentence_of(self, index: int):
        """Return the (start, end) sentence range containing token index."""
        for start, end in self.sentences:
            if start <= index < end:
                return start, end
        raise IndexError(f"token index {index} outside document {self.doc_id}")

    def sentence_lemmas(self, sent):
        start, end = sent
        return [t.lemma.lower() for t in self.tokens[start:end]]


@dataclass(frozen=True)
class Span:
    doc_id: str
    start: int
    end: int  # exclusive
    head: int
    kind: SpanKind = SpanKind.MENTION

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise StructuralError(f"bad span range [{self.start}, {self.end})")
        if not (self.start <= self.head < self.end):
            raise StructuralError(
                f"head {self.head} outside span [{self.start}, {self.end})"
            )

    def overlaps(self, other) -> bool:
        return self.doc_id == other.doc_id and (
            self.start < other.end and other.start < self.end
        )

    def text(self, doc: ParsedDocument) -> str:
        return " ".join(t.surface for t in doc.tokens[self.start : self.end])


@dataclass(frozen=True)
class LabeledTriple:
    context: ParsedDocument
    mention: Span
    anaphor: Span
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise StructuralError(f"label must be 0 or 1, got {self.label}")
        if self.mention.overlaps(self.anaphor):
            raise StructuralError("mention and anaphor spans overlap")


@dataclass(frozen=True)
class CorefAnnotation:
    doc_id: str
    clusters: tuple  # tuple of tuples of Span


def validate_document(doc: ParsedDocument):
    """Check every ParsedDocument/Token invariant; raise StructuralError."""
    n = len(doc.tokens)
    covered = 0
    prev_end = 0
    for start, end in doc.sentences:
        if start != prev_end or start >= end:
            raise StructuralError(
                f"{doc.doc_id}: sentence ranges must be sorted, non-overlapping "
                f"and contiguous (got ({start}, {end}) after {prev_end})"
            )
        prev_end = end
        covered += end - start
    if prev_end != n or covered != n:
        raise StructuralError(f"{doc.doc_id}: sentences do not cover [0, {n})")
    for i, tok in enumerate(doc.tokens):
        if tok.pos not in POS_TAGS:
            raise StructuralError(f"{doc.doc_id}: unknown POS tag {tok.pos!r}")
        if tok.ner not in NER_TAGS:
            raise StructuralError(f"{doc.doc_id}: unknown NER tag {tok.ner!r}")
        if tok.dep_head == ROOT:
            continue
        start, end = doc.sentence_of(i)
        if not (start <= tok.dep_head < end):
            raise StructuralError(
                f"{doc.doc_id}: token {i} dep_head {tok.dep_head} "
                f"outside its sentence [{start}, {end})"
            )
    return doc


def _document_from_record(rec: dict) -> ParsedDocument:
    tokens = []
    sentences = []
    offset = 0
    for sent in rec["sentences"]:
        for tok in sent:
            head = tok["dep_head"]
            tokens.append(
                Token(
                    surface=tok["surface"],
                    lemma=tok["lemma"],
                    pos=tok["pos"],
                    ner=tok.get("ner", "NONE"),
                    dep_head=ROOT if head == ROOT else offset + head,
                    dep_label=tok["dep_label"],
                )
            )
        sentences.append((offset, offset + len(sent)))
        offset += len(sent)
    return ParsedDocument(
        doc_id=rec["doc_id"],
        domain=rec["domain"],
        tokens=tuple(tokens),
        sentences=tuple(sentences),
    )


def document_to_record(doc: ParsedDocument) -> dict:
    sentences = []
    for start, end in doc.sentences:
        sent = []
        for tok in doc.tokens[start:end]:
            head = tok.dep_head if tok.dep_head == ROOT else tok.dep_head - start
            sent.append(
                {
                    "surface": tok.surface,
                    "lemma": tok.lemma,
                    "pos": tok.pos,
                    "ner": tok.ner,
                    "dep_head": head,
                    "dep_label": tok.dep_label,
                }
            )
        sentences.append(sent)
    return {"doc_id": doc.doc_id, "domain": doc.domain, "sentences": sentences}


def ingest_parsed_corpus(path, domain: str):
    """Read pre-parsed JSONL documents for one domain, validating invariants.

    Records of other domains are skipped; records without a domain field
    inherit the requested one.
    """
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            rec.setdefault("domain", domain)
            if rec["domain"] != domain:
                continue
            try:
                doc = _document_from_record(rec)
            except (KeyError, TypeError) as exc:
                raise IngestionError(
                    f"{path}:{lineno}: malformed record, missing or bad field {exc}"
                ) from exc
            try:
                validate_document(doc)
            except StructuralError as exc:
                raise StructuralError(f"{path}:{lineno}: {exc}") from exc
            docs.append(doc)
    return docs


def write_parsed_corpus(docs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_record(doc), sort_keys=True) + "\n")


def resolve_head(doc: ParsedDocument, start: int, end: int) -> int:
    """Head of a span = first token whose dependency head lies outside it."""
    for i in range(start, end):
        head = doc.tokens[i].dep_head
        if head == ROOT or not (start <= head < end):
            return i
    return start


def _span_from_record(rec: dict, doc: ParsedDocument) -> Span:
    start, end = rec["start"], rec["end"]
    if not (0 <= start < end <= len(doc.tokens)):
        raise StructuralError(
            f"{doc.doc_id}: span [{start}, {end}) outside document of "
            f"length {len(doc.tokens)}"
        )
    s_start, s_end = doc.sentence_of(start)
    if end > s_end:
        raise StructuralError(
            f"{doc.doc_id}: span [{start}, {end}) crosses a sentence boundary"
        )
    head = rec.get("head")
    if head is None:
        head = resolve_head(doc, start, end)
    kind = SpanKind(rec.get("kind", "MENTION"))
    return Span(doc_id=doc.doc_id, start=start, end=end, head=head, kind=kind)


def ingest_annotations(path, docs):
    """Read cluster annotations (JSONL) and resolve spans against docs."""
    by_id = {d.doc_id: d for d in docs}
    annotations = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            doc = by_id.get(rec.get("doc_id"))
            if doc is None:
                raise IngestionError(
                    f"{path}:{lineno}: annotation references unknown doc_id "
                    f"{rec.get('doc_id')!r}"
                )
            clusters = tuple(
                tuple(_span_from_record(s, doc) for s in cluster)
                for cluster in rec["clusters"]
            )
            seen = set()
            for cluster in clusters:
                for span in cluster:
                    key = (span.start, span.end)
                    if key in seen:
                        raise StructuralError(
                            f"{path}:{lineno}: span {key} appears in two clusters"
                        )
                    seen.add(key)
            annotations.append(CorefAnnotation(doc_id=doc.doc_id, clusters=clusters))
    return annotations


def _anaphor_mention(a: Span, b: Span):
    """Assign anaphor/mention roles: explicit ANAPHOR kind wins, else the
    later span (by start index) is the anaphor."""
    if a.kind == SpanKind.ANAPHOR and b.kind != SpanKind.ANAPHOR:
        return a, b
    if b.kind == SpanKind.ANAPHOR and a.kind != SpanKind.ANAPHOR:
        return b, a
    return (b, a) if b.start > a.start else (a, b)


def build_triples(annotations, docs, neg_pos_ratio: float = 2.4, seed: int = 0):
    """Construct labeled triples from cluster annotations.

    Positives are all same-cluster pairs; negatives enumerate cross-cluster
    pairs and are downsampled per review to floor(neg_pos_ratio * positives),
    seed-controlled.
    """
    by_id = {d.doc_id: d for d in docs}
    rng = random.Random(seed)
    triples = []
    for ann in sorted(annotations, key=lambda a: a.doc_id):
        doc = by_id.get(ann.doc_id)
        if doc is None:
            raise IngestionError(f"annotation references unknown doc_id {ann.doc_id!r}")
        positives = []
        for cluster in ann.clusters:
            for a, b in itertools.combinations(cluster, 2):
                anaphor, mention = _anaphor_mention(a, b)
                if mention.overlaps(anaphor):
                    continue
                positives.append(
                    LabeledTriple(context=doc, mention=mention, anaphor=anaphor, label=1)
                )
        candidates = []
        for ca, cb in itertools.combinations(ann.clusters, 2):
            for a in ca:
                for b in cb:
                    anaphor, mention = _anaphor_mention(a, b)
                    if mention.overlaps(anaphor):
                        continue
                    candidates.append(
                        LabeledTriple(
                            context=doc, mention=mention, anaphor=anaphor, label=0
                        )
                    )
        target = math.floor(neg_pos_ratio * len(positives))
        if len(candidates) > target:
            candidates = rng.sample(candidates, target)
        triples.extend(positives)
        triples.extend(candidates)
    return triples


def write_triples(triples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(
                json.dumps(
                    {
                        "doc_id": t.context.doc_id,
                        "mention": {"start": t.mention.start, "end": t.mention.end},
                        "anaphor": {"start": t.anaphor.start, "end": t.anaphor.end},
                        "label": t.label,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_triples(path, docs):
    by_id = {d.doc_id: d for d in docs}
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            doc = by_id.get(rec["doc_id"])
            if doc is None:
                raise IngestionError(
                    f"{path}:{lineno}: triple references unknown doc_id "
                    f"{rec['doc_id']!r}"
                )
            mention = _span_from_record(rec["mention"], doc)
            anaphor = _span_from_record(dict(rec["anaphor"], kind="ANAPHOR"), doc)
            triples.append(
                LabeledTriple(
                    context=doc, mention=mention, anaphor=anaphor, label=rec["label"]
                )
            )
    return triples


def split_dataset(triples, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Split triples at the review level so no context leaks across splits."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    doc_ids = sorted({t.context.doc_id for t in triples})
    n_splits = sum(1 for r in ratios if r > 0)
    if len(doc_ids) < n_splits:
        raise ValueError(
            f"cannot split {len(doc_ids)} reviews into {n_splits} non-empty parts"
        )
    rng = random.Random(seed)
    rng.shuffle(doc_ids)
    n = len(doc_ids)
    cut1 = round(n * ratios[0])
    cut2 = cut1 + round(n * ratios[1])
    groups = (set(doc_ids[:cut1]), set(doc_ids[cut1:cut2]), set(doc_ids[cut2:]))
    return tuple(
        [t for t in triples if t.context.doc_id in group] for group in groups
    )
