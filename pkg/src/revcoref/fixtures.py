"""Deterministic corpus generators.

The original five-domain review corpus is not redistributable with this
package, so tests and demos run on generated stand-ins: an alarm-domain
corpus matching the published annotation statistics, a laptop-domain
corpus matching the published tf-idf filtering behaviour for the mention
word "windows", and a synthetic dataset whose labels are decidable only
through mined domain knowledge.
"""

import itertools
import random

from .corpus import (
    ROOT,
    CorefAnnotation,
    LabeledTriple,
    ParsedDocument,
    Span,
    SpanKind,
    Token,
)

# (surface, lemma, pos, ner, sentence-local head, dep label)


def make_doc(doc_id, domain, sentences):
    tokens = []
    ranges = []
    offset = 0
    for sent in sentences:
        for surface, lemma, pos, ner, head, label in sent:
            tokens.append(
                Token(
                    surface=surface,
                    lemma=lemma,
                    pos=pos,
                    ner=ner,
                    dep_head=ROOT if head == ROOT else offset + head,
                    dep_label=label,
                )
            )
        ranges.append((offset, offset + len(sent)))
        offset += len(sent)
    return ParsedDocument(
        doc_id=doc_id, domain=domain, tokens=tuple(tokens), sentences=tuple(ranges)
    )


def running_example_doc():
    """Hand-parsed two-sentence review: "I bought a green Moonbeam for
    myself. I like its voice because it is loud and long." """
    s1 = [
        ("I", "i", "PRON", "NONE", 1, "nsubj"),
        ("bought", "buy", "VERB", "NONE", ROOT, "root"),
        ("a", "a", "DET", "NONE", 4, "det"),
        ("green", "green", "ADJ", "NONE", 4, "amod"),
        ("Moonbeam", "moonbeam", "PROPN", "PRODUCT", 1, "obj"),
        ("for", "for", "ADP", "NONE", 1, "prep"),
        ("myself", "myself", "PRON", "NONE", 5, "pobj"),
        (".", ".", "OTHER", "NONE", 1, "punct"),
    ]
    s2 = [
        ("I", "i", "PRON", "NONE", 1, "nsubj"),
        ("like", "like", "VERB", "NONE", ROOT, "root"),
        ("its", "its", "PRON", "NONE", 3, "poss"),
        ("voice", "voice", "NOUN", "NONE", 1, "obj"),
        ("because", "because", "OTHER", "NONE", 7, "mark"),
        ("it", "it", "PRON", "NONE", 1, "nsubj"),
        ("is", "be", "VERB", "NONE", 7, "cop"),
        ("loud", "loud", "ADJ", "NONE", 3, "advcl"),
        ("and", "and", "OTHER", "NONE", 7, "cc"),
        ("long", "long", "ADJ", "NONE", 7, "conj"),
        (".", ".", "OTHER", "NONE", 1, "punct"),
    ]
    return make_doc("alarm-example", "alarm", [s1, s2])


def running_example_spans(doc):
    return {
        "mention": Span(doc.doc_id, 2, 5, 4),  # a green Moonbeam
        "its": Span(doc.doc_id, 10, 11, 10, SpanKind.ANAPHOR),
        "its_voice": Span(doc.doc_id, 10, 12, 11),
        "it": Span(doc.doc_id, 13, 14, 13, SpanKind.ANAPHOR),
    }


def _simple_sentence(words):
    """A flat parse: every word depends on the first, which is the root."""
    sent = [(words[0], words[0], "VERB", "NONE", ROOT, "root")]
    for w in words[1:]:
        sent.append((w, w, "NOUN", "NONE", 0, "dep"))
    return sent


# ---------------------------------------------------------------------------
# knowledge-dependent synthetic dataset
# ---------------------------------------------------------------------------

CATEGORIES = {
    "clock": ("alarm", "ring"),
    "camera": ("lens", "photo"),
    "phone": ("call", "battery"),
    "screen": ("display", "light"),
    "speaker": ("volume", "music"),
}

_SYLLA = ("zor", "qua", "ble", "dri", "fon", "gri", "hul", "jat", "kel", "mur",
          "nop", "pex", "ril", "sut", "tav", "vok", "wib", "xan", "yer", "zul")


def _alias_name(i):
    a = _SYLLA[i % len(_SYLLA)]
    b = _SYLLA[(i * 7 + 3) % len(_SYLLA)]
    return f"{a}{b}{i}"


def _alias_review(doc_id, domain, alias, cat, extras):
    s1 = [
        ("the", "the", "DET", "NONE", 1, "det"),
        (alias, alias, "NOUN", "PRODUCT", 4, "nsubj"),
        ("is", "be", "VERB", "NONE", 4, "cop"),
        ("a", "a", "DET", "NONE", 4, "det"),
        ("great", "great", "ADJ", "NONE", ROOT, "root"),
        (cat, cat, "NOUN", "NONE", 4, "attr"),
        (".", ".", "OTHER", "NONE", 4, "punct"),
    ]
    s2 = [
        (alias, alias, "NOUN", "PRODUCT", 1, "nsubj"),
        ("has", "have", "VERB", "NONE", ROOT, "root"),
        ("nice", "nice", "ADJ", "NONE", 3, "amod"),
        (extras[0], extras[0], "NOUN", "NONE", 1, "obj"),
        ("and", "and", "OTHER", "NONE", 5, "cc"),
        (extras[1], extras[1], "NOUN", "NONE", 1, "conj"),
        (".", ".", "OTHER", "NONE", 1, "punct"),
    ]
    return make_doc(doc_id, domain, [s1, s2])


def _filler_review(doc_id, domain, rng):
    extra = rng.choice(["today", "work", "home", "time", "value"])
    words = ["like", "this", "product", "and", "keep", "it", "every", "day", extra]
    sent = [("i", "i", "PRON", "NONE", 1, "nsubj")]
    pos = {"like": "VERB", "keep": "VERB", "and": "OTHER", "this": "DET",
           "it": "PRON", "every": "DET"}
    for i, w in enumerate(words):
        head = ROOT if w == "like" else 1
        sent.append((w, w, pos.get(w, "NOUN"), "NONE", head, "dep"))
    return make_doc(doc_id, domain, [sent])


def _labeled_doc(doc_id, domain, alias, cat):
    s1 = [
        ("i", "i", "PRON", "NONE", 1, "nsubj"),
        ("bought", "buy", "VERB", "NONE", ROOT, "root"),
        ("the", "the", "DET", "NONE", 3, "det"),
        (alias, alias, "NOUN", "PRODUCT", 1, "obj"),
        ("yesterday", "yesterday", "NOUN", "NONE", 1, "npadvmod"),
        (".", ".", "OTHER", "NONE", 1, "punct"),
    ]
    s2 = [
        ("the", "the", "DET", "NONE", 1, "det"),
        (cat, cat, "NOUN", "NONE", 2, "nsubj"),
        ("works", "work", "VERB", "NONE", ROOT, "root"),
        ("well", "well", "ADV", "NONE", 2, "advmod"),
        (".", ".", "OTHER", "NONE", 2, "punct"),
    ]
    doc = make_doc(doc_id, domain, [s1, s2])
    mention = Span(doc_id, 2, 4, 3)
    anaphor = Span(doc_id, 6, 8, 7, SpanKind.ANAPHOR)
    return doc, mention, anaphor


def gen_knowledge_dataset(seed=0, n_triples=200, domain="synthetic"):
    """Synthetic dataset whose labels are decidable only through the mined
    domain KB: dev mentions are product aliases never seen in the labeled
    training data, linked to their category only in the unlabeled corpus.

    Returns dict with unlabeled docs, train/dev triples and the mining rho.
    """
    rng = random.Random(seed)
    cats = sorted(CATEGORIES)
    aliases = {}
    train_aliases, dev_aliases = [], []
    for ci, cat in enumerate(cats):
        for j in range(6):
            name = _alias_name(ci * 6 + j)
            aliases[name] = cat
            (train_aliases if j < 4 else dev_aliases).append(name)

    unlabeled = []
    for ai, (alias, cat) in enumerate(sorted(aliases.items())):
        for r in range(3):
            unlabeled.append(
                _alias_review(f"{domain}-u{ai:03d}-{r}", domain, alias, cat,
                              CATEGORIES[cat])
            )
    for f in range(60):
        unlabeled.append(_filler_review(f"{domain}-f{f:03d}", domain, rng))

    def _make_triples(pool, count, prefix):
        triples = []
        for i in range(count):
            alias = pool[i % len(pool)]
            label = (i + i // len(pool)) % 2  # decorrelate alias and label
            true_cat = aliases[alias]
            if label == 1:
                cat = true_cat
            else:
                cat = rng.choice([c for c in cats if c != true_cat])
            doc, mention, anaphor = _labeled_doc(f"{domain}-{prefix}{i:03d}", domain,
                                                 alias, cat)
            triples.append(
                LabeledTriple(context=doc, mention=mention, anaphor=anaphor, label=label)
            )
        rng.shuffle(triples)
        return triples

    n_dev = max(n_triples // 5, 10)
    train = _make_triples(train_aliases, n_triples - n_dev, "t")
    dev = _make_triples(dev_aliases, n_dev, "d")
    return {"unlabeled": unlabeled, "train": train, "dev": dev, "rho": 1.0,
            "domain": domain}


# ---------------------------------------------------------------------------
# laptop corpus reproducing the tf-idf filtering example
# ---------------------------------------------------------------------------


def gen_laptop_corpus():
    """900 laptop reviews where 'windows' co-occurs with microsoft, system,
    upgrade and xp (high tf-idf) and with keep/like (low idf)."""
    targets = {
        "microsoft": ("PROPN", "ORG", [(0, 4), (1, 4), (2, 4), (3, 3)]),
        "system": ("NOUN", "NONE", [(4, 4), (5, 4), (6, 4), (7, 3)]),
        "upgrade": ("VERB", "NONE", [(8, 4), (9, 4), (10, 4), (11, 3)]),
        "xp": ("PROPN", "PRODUCT", [(2, 4), (5, 4), (9, 4), (11, 3)]),
    }
    per_review = {i: [] for i in range(12)}
    for word, (pos, ner, alloc) in targets.items():
        for review, count in alloc:
            per_review[review].extend([(word, pos, ner)] * count)
    for i in range(8):
        per_review[i].append(("keep", "VERB", "NONE"))
        per_review[i + 4].append(("like", "VERB", "NONE"))

    docs = []
    for i in range(12):
        sent = [
            ("i", "i", "PRON", "NONE", 1, "nsubj"),
            ("use", "use", "VERB", "NONE", ROOT, "root"),
            ("windows", "windows", "NOUN", "NONE", 1, "obj"),
        ]
        for word, pos, ner in per_review[i]:
            sent.append((word, word, pos, ner, 1, "dep"))
        sent.append((".", ".", "OTHER", "NONE", 1, "punct"))
        docs.append(make_doc(f"laptop-w{i:03d}", "laptop", [sent]))

    rng = random.Random(7)
    for f in range(888):
        docs.append(_filler_review(f"laptop-f{f:03d}", "laptop", rng))
    return docs


# ---------------------------------------------------------------------------
# alarm corpus reproducing the annotated-dataset statistics
# ---------------------------------------------------------------------------

# cluster-size plans: 64 reviews of [4,2,2], 35 of [4,2,2,2], 1 of [3,2,2];
# with negatives at floor(2.4 * positives) this yields 832 positives and
# 1963 negatives over 100 reviews. 55 extra singletons bring the span
# count to 924.
_ALARM_PLANS = [[4, 2, 2]] * 64 + [[4, 2, 2, 2]] * 35 + [[3, 2, 2]]

_ALARM_VERBS = ("beeps", "rings", "works", "sounds", "glows", "ticks")
_ALARM_NOUNS = ("band", "hand", "light", "button", "voice", "bell", "dial",
                "face", "knob", "case")


def _alarm_annotated(doc_id, plan, singleton, rng):
    n_spans = sum(plan) + (1 if singleton else 0)
    sentences = []
    spans = []
    offset = 0
    remaining = n_spans
    while remaining > 0:
        pair = remaining >= 2
        sent = []
        noun1 = rng.choice(_ALARM_NOUNS)
        verb1 = rng.choice(_ALARM_VERBS)
        sent.extend(
            [
                ("the", "the", "DET", "NONE", 1, "det"),
                (noun1, noun1, "NOUN", "NONE", 2, "nsubj"),
                (verb1, verb1, "VERB", "NONE", ROOT, "root"),
            ]
        )
        spans.append((offset, offset + 2, offset + 1))
        if pair:
            noun2 = rng.choice(_ALARM_NOUNS)
            verb2 = rng.choice(_ALARM_VERBS)
            sent.extend(
                [
                    ("and", "and", "OTHER", "NONE", 2, "cc"),
                    ("the", "the", "DET", "NONE", 5, "det"),
                    (noun2, noun2, "NOUN", "NONE", 6, "nsubj"),
                    (verb2, verb2, "VERB", "NONE", 2, "conj"),
                ]
            )
            spans.append((offset + 4, offset + 6, offset + 5))
        sent.append((".", ".", "OTHER", "NONE", 2, "punct"))
        sentences.append(sent)
        offset += len(sent)
        remaining -= 2 if pair else 1
    doc = make_doc(doc_id, "alarm", sentences)
    span_objs = [Span(doc_id, s, e, h) for s, e, h in spans]
    clusters = []
    idx = 0
    for size in plan:
        clusters.append(tuple(span_objs[idx : idx + size]))
        idx += size
    if singleton:
        clusters.append((span_objs[idx],))
    return doc, CorefAnnotation(doc_id=doc_id, clusters=tuple(clusters))


def gen_alarm_corpus(seed=0):
    """1,000 alarm-domain reviews, 100 of which carry cluster annotations
    whose triple statistics match the published dataset (832 positives,
    1,963 negatives at a 2.4 negative ratio, 924 annotated spans)."""
    rng = random.Random(seed)
    docs = []
    annotations = []
    for i, plan in enumerate(_ALARM_PLANS):
        doc, ann = _alarm_annotated(f"alarm-a{i:03d}", plan, singleton=i < 55, rng=rng)
        docs.append(doc)
        annotations.append(ann)
    for f in range(900):
        docs.append(_filler_review(f"alarm-f{f:03d}", "alarm", rng))
    return docs, annotations


# ---------------------------------------------------------------------------
# small end-to-end demo fixture for the pipeline command
# ---------------------------------------------------------------------------


def gen_demo_fixture(n_annotated=20, seed=0, domain="demo"):
    """A 20-review annotated corpus plus unlabeled reviews, small enough for
    an end-to-end pipeline run; labels follow the alias/category scheme of
    the knowledge-dependent dataset."""
    rng = random.Random(seed)
    cats = sorted(CATEGORIES)
    docs = []
    annotations = []
    for i in range(n_annotated):
        alias = _alias_name(i % 10)
        cat = cats[i % len(cats)]
        doc_id = f"{domain}-a{i:03d}"
        s1 = [
            ("i", "i", "PRON", "NONE", 1, "nsubj"),
            ("bought", "buy", "VERB", "NONE", ROOT, "root"),
            ("the", "the", "DET", "NONE", 3, "det"),
            (alias, alias, "NOUN", "PRODUCT", 1, "obj"),
            (".", ".", "OTHER", "NONE", 1, "punct"),
        ]
        s2 = [
            ("the", "the", "DET", "NONE", 1, "det"),
            (alias, alias, "NOUN", "PRODUCT", 2, "nsubj"),
            ("works", "work", "VERB", "NONE", ROOT, "root"),
            (".", ".", "OTHER", "NONE", 2, "punct"),
        ]
        s3 = [
            ("the", "the", "DET", "NONE", 1, "det"),
            (cat, cat, "NOUN", "NONE", 2, "nsubj"),
            ("rings", "ring", "VERB", "NONE", ROOT, "root"),
            (".", ".", "OTHER", "NONE", 2, "punct"),
        ]
        doc = make_doc(doc_id, domain, [s1, s2, s3])
        docs.append(doc)
        m1 = Span(doc_id, 2, 4, 3)
        m2 = Span(doc_id, 5, 7, 6)
        m3 = Span(doc_id, 9, 11, 10)
        annotations.append(
            CorefAnnotation(doc_id=doc_id, clusters=((m1, m2), (m3,)))
        )
    for ai, cat in enumerate(cats):
        alias = _alias_name(ai * 2)
        docs.append(
            _alias_review(f"{domain}-u{ai:03d}", domain, alias, cat, CATEGORIES[cat])
        )
    for f in range(10):
        docs.append(_filler_review(f"{domain}-f{f:03d}", domain, rng))
    return docs, annotations
