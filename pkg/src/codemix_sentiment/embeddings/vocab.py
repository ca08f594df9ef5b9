from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np

FNV_OFFSET = 2166136261
FNV_PRIME = 16777619
BOW, EOW = "<", ">"


class EmptyVocabularyError(ValueError):
    pass


def hash_ngram(ngram: str, bucket_count: int) -> int:
    """32-bit FNV-1a over the UTF-8 bytes, reduced modulo ``bucket_count``."""
    h = FNV_OFFSET
    for byte in ngram.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFF
    return h % bucket_count


def extract_ngrams(word: str, n_min: int = 3, n_max: int = 6) -> List[str]:
    """Character n-grams of ``<word>``, excluding the wrapped word itself."""
    wrapped = BOW + word + EOW
    out = []
    for n in range(n_min, min(n_max, len(wrapped)) + 1):
        for i in range(len(wrapped) - n + 1):
            gram = wrapped[i:i + n]
            if gram != wrapped:
                out.append(gram)
    return out


@dataclass(frozen=True)
class SubwordIndex:
    n_min: int = 3
    n_max: int = 6
    bucket_count: int = 2_000_000
    hash_function: str = "fnv1a32"

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got {self.n_min}, {self.n_max}")
        if self.bucket_count < 0:
            raise ValueError("bucket_count must be non-negative")
        if self.hash_function != "fnv1a32":
            raise ValueError(f"unsupported hash function {self.hash_function!r}")

    def ngrams(self, word: str) -> List[str]:
        if self.bucket_count == 0:
            return []
        return extract_ngrams(word, self.n_min, self.n_max)

    def buckets(self, word: str) -> List[int]:
        return [hash_ngram(g, self.bucket_count) for g in self.ngrams(word)]


@dataclass
class Vocabulary:
    words: List[str]
    counts: np.ndarray
    min_count: int = 1
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.words = list(self.words)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if len(self.counts) != len(self.words):
            raise ValueError("words and counts differ in length")
        if self.min_count < 1:
            raise ValueError("min_count must be positive")
        self.index = {}
        for i, w in enumerate(self.words):
            self.index.setdefault(w, i)
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __getitem__(self, word: str) -> int:
        return self.index[word]

    def get(self, word, default=None):
        return self.index.get(word, default)

    def lookup(self, idx: int) -> str:
        return self.words[idx]


def count_words(sentences: Iterable[Sequence[str]]) -> Counter:
    counter: Counter = Counter()
    for sent in sentences:
        counter.update(sent)
    return counter


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 5) -> Vocabulary:
    """Frequency-ranked vocabulary; ties broken lexicographically."""
    from ..corpus import Corpus

    if isinstance(sentences, Corpus):
        sentences = sentences.token_lists()
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counter = count_words(sentences)
    kept = sorted(((w, c) for w, c in counter.items() if c >= min_count),
                  key=lambda wc: (-wc[1], wc[0]))
    if not kept:
        raise EmptyVocabularyError(
            f"no word reaches min_count={min_count} ({len(counter)} distinct words seen)"
        )
    words, counts = zip(*kept)
    return Vocabulary(list(words), np.array(counts, dtype=np.int64), min_count)
