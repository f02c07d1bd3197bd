"""General commonsense knowledge: a (e1, relation, e2) triple store queried
by mention words, and an affect lexicon providing per-lemma vectors that get
concatenated onto token embeddings."""

import csv
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .corpus import IngestionError, Token
from .kb_mining import make_knowledge_phrase


@dataclass(frozen=True)
class Triple:
    e1: str
    relation: str
    e2: str


@dataclass
class TripleStore:
    triples: list
    word_index: dict = field(default_factory=dict)  # word -> sorted triple ids

    def __post_init__(self):
        if not self.word_index:
            index = defaultdict(list)
            for i, t in enumerate(self.triples):
                for word in set(t.e1.lower().split()) | set(t.e2.lower().split()):
                    index[word].append(i)
            self.word_index = dict(index)

    def __len__(self):
        return len(self.triples)


def load_triple_store(path) -> TripleStore:
    """Load a TSV of e1<TAB>relation<TAB>e2 rows."""
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise IngestionError(
                    f"{path}:{lineno}: expected 3 non-empty tab-separated fields"
                )
            triples.append(Triple(*(p.strip() for p in parts)))
    return TripleStore(triples=triples)


def lookup_general_knowledge(store: TripleStore, mention_words, cap: int = 50):
    """For each triple where an entity contains a mention word (full-word
    match, lowercase), return the opposite entity. Deduplicated, capped."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    seen = set()
    phrases = []
    for word in mention_words:
        for idx in store.word_index.get(word.lower(), ()):
            t = store.triples[idx]
            for side, other in ((t.e1, t.e2), (t.e2, t.e1)):
                if word.lower() in side.lower().split() and other not in seen:
                    seen.add(other)
                    phrases.append(other)
    return [
        make_knowledge_phrase(p, source="general", score=0.0)
        for p in phrases[:cap]
    ]


@dataclass
class AffectLexicon:
    table: dict  # lemma -> np.ndarray of shape (width,)
    width: int

    def vector(self, lemma: str) -> np.ndarray:
        vec = self.table.get(lemma.lower())
        if vec is None:
            return np.zeros(self.width)
        return vec


def affect_vector(lexicon: AffectLexicon, token: Token) -> np.ndarray:
    """Affect vector for a token's lemma; zero vector when absent."""
    return lexicon.vector(token.lemma)


def load_affect_lexicon(path) -> AffectLexicon:
    """Load a CSV lexicon whose header row declares the vector width."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        width = len(header) - 1
        if header[0] != "lemma" or width < 1:
            raise IngestionError(f"{path}: bad header {header!r}")
        table = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise IngestionError(
                    f"{path}:{lineno}: expected {width + 1} columns, got {len(row)}"
                )
            table[row[0].lower()] = np.array([float(v) for v in row[1:]])
    return AffectLexicon(table=table, width=width)


def empty_affect_lexicon(width: int = 4) -> AffectLexicon:
    return AffectLexicon(table={}, width=width)
