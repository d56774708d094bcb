"""Caption tokenization and vocabulary."""

import re

from .errors import ConfigError

BOS = "<BOS>"
EOS = "<EOS>"
UNK = "<UNK>"
SOMEONE = "someone"

_WORDPUNCT = re.compile(r"\w+|[^\w\s]+", re.UNICODE)


def tokenize(text):
    """Word-punct split, pure-punctuation tokens dropped, lowercased."""
    tokens = []
    for tok in _WORDPUNCT.findall(text):
        if re.search(r"\w", tok):
            tokens.append(tok.lower())
    return tokens


class Vocabulary:
    """Dense token -> index map with <BOS>, <EOS>, <UNK> reserved."""

    def __init__(self, words):
        self.index = {}
        for tok in (BOS, EOS, UNK):
            self.index[tok] = len(self.index)
        for w in words:
            if w not in self.index:
                self.index[w] = len(self.index)
        self.words = [None] * len(self.index)
        for w, i in self.index.items():
            self.words[i] = w

    def __len__(self):
        return len(self.index)

    @property
    def bos(self):
        return self.index[BOS]

    @property
    def eos(self):
        return self.index[EOS]

    @property
    def unk(self):
        return self.index[UNK]

    def encode(self, tokens):
        return [self.index.get(t, self.unk) for t in tokens]

    def decode(self, ids):
        return [self.words[i] for i in ids]


def build_vocab(captions):
    """Vocabulary over a caption corpus; rare words are retained."""
    words = []
    seen = set()
    for caption in captions:
        for tok in tokenize(caption):
            if tok not in seen:
                seen.add(tok)
                words.append(tok)
    if not words:
        raise ConfigError("empty caption corpus")
    return Vocabulary(words)
