"""Greedy longest-match sub-word tokenizer over a bundled piece vocabulary.

Used by the trainable toy encoder; continuation pieces carry a ## prefix.
Characters with no matching piece fall back to [UNK].
"""

from importlib import resources

UNK = "[UNK]"


class SubTokenizer:
    def __init__(self, pieces):
        self.pieces = list(pieces)
        self._set = set(self.pieces)
        self._max_len = max(len(p) for p in self._set)

    @classmethod
    def bundled(cls):
        text = resources.files("revcoref.data").joinpath("wordpiece_vocab.txt").read_text()
        return cls(p for p in text.split("\n") if p)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(p.strip() for p in fh if p.strip())

    def tokenize_word(self, word: str):
        word = word.lower()
        pieces = []
        pos = 0
        while pos < len(word):
            prefix = "" if pos == 0 else "##"
            match = None
            limit = min(len(word) - pos, self._max_len)
            for length in range(limit, 0, -1):
                cand = prefix + word[pos : pos + length]
                if cand in self._set:
                    match = cand
                    pos += length
                    break
            if match is None:
                match = UNK
                pos += 1
            pieces.append(match)
        return pieces or [UNK]

    def tokenize(self, words):
        """Sub-tokenize a word sequence.

        Returns (pieces, word_index) where word_index[i] is the index of the
        word that produced piece i.
        """
        pieces = []
        word_index = []
        for wi, word in enumerate(words):
            for p in self.tokenize_word(word):
                pieces.append(p)
                word_index.append(wi)
        return pieces, word_index
