import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .. import serialization
from .vocab import SubwordIndex, Vocabulary

logger = logging.getLogger(__name__)


class VecFormatError(ValueError):
    pass


@dataclass
class EmbeddingMatrix:
    """Input rows (words then subword buckets), output rows and a freeze mask."""

    input: np.ndarray
    output: np.ndarray
    freeze_mask: np.ndarray = None

    def __post_init__(self):
        self.input = np.ascontiguousarray(self.input, dtype=np.float32)
        self.output = np.ascontiguousarray(self.output, dtype=np.float32)
        if self.freeze_mask is None:
            self.freeze_mask = np.zeros(len(self.input), dtype=bool)
        self.freeze_mask = np.ascontiguousarray(self.freeze_mask, dtype=bool)
        if self.input.ndim != 2 or self.output.ndim != 2:
            raise ValueError("embedding matrices must be two-dimensional")
        if self.output.shape[1] != self.input.shape[1]:
            raise ValueError("input and output rows differ in dimension")
        if len(self.output) > len(self.input):
            raise ValueError("more output rows than input rows")
        if self.freeze_mask.shape != (len(self.input),):
            raise ValueError("freeze mask must have one entry per input row")

    @property
    def dim(self) -> int:
        return self.input.shape[1]

    @property
    def n_words(self) -> int:
        return len(self.output)

    @property
    def n_buckets(self) -> int:
        return len(self.input) - len(self.output)

    @property
    def word_rows(self) -> np.ndarray:
        return self.input[:self.n_words]

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.input.copy(), self.output.copy(), self.freeze_mask.copy())


def word_vector(word: str, matrix: EmbeddingMatrix, vocab: Vocabulary,
                subwords: SubwordIndex) -> np.ndarray:
    """Mean of the word's own row (if any) and its n-gram bucket rows."""
    rows = []
    idx = vocab.get(word)
    if idx is not None:
        rows.append(idx)
    if matrix.n_buckets:
        rows.extend(len(vocab) + b for b in subwords.buckets(word))
    if not rows:
        return np.zeros(matrix.dim, dtype=np.float32)
    if len(rows) == 1:
        return matrix.input[rows[0]].copy()
    return matrix.input[rows].mean(axis=0, dtype=np.float64).astype(np.float32)


@dataclass
class Embeddings:
    """A vocabulary, its subword scheme and the trained matrix, queried by word."""

    vocab: Vocabulary
    matrix: EmbeddingMatrix
    subwords: SubwordIndex = field(default_factory=lambda: SubwordIndex(bucket_count=0))
    config: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.matrix.n_words != len(self.vocab):
            raise ValueError(
                f"matrix has {self.matrix.n_words} word rows for {len(self.vocab)} words"
            )
        if self.matrix.n_buckets != self.subwords.bucket_count:
            raise ValueError(
                f"matrix has {self.matrix.n_buckets} bucket rows, "
                f"subword index expects {self.subwords.bucket_count}"
            )
        self._cache: Dict[str, np.ndarray] = {}
        self._fingerprint: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def __contains__(self, word):
        return word in self.vocab

    def word_vector(self, word: str) -> np.ndarray:
        vec = self._cache.get(word)
        if vec is None:
            vec = word_vector(word, self.matrix, self.vocab, self.subwords)
            self._cache[word] = vec
        return vec

    __getitem__ = word_vector

    def vectors(self, words: Sequence[str]) -> np.ndarray:
        if not words:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([self.word_vector(w) for w in words])

    def fingerprint(self) -> str:
        """Content hash identifying these embeddings (recorded by classifiers)."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update("\n".join(self.vocab.words).encode("utf-8"))
            h.update(repr((self.subwords.n_min, self.subwords.n_max,
                           self.subwords.bucket_count)).encode())
            h.update(memoryview(self.matrix.input))
            self._fingerprint = h.hexdigest()[:16]
        return self._fingerprint

    def save(self, path) -> None:
        save_native(self, path)

    @classmethod
    def load(cls, path) -> "Embeddings":
        return load_embeddings(path)


def load_vec(stream: Iterable[str]) -> Tuple[Vocabulary, EmbeddingMatrix]:
    """Read the ``.vec`` text format; rows keep file order."""
    it = iter(stream)
    try:
        header = next(it)
    except StopIteration:
        raise VecFormatError("empty .vec stream") from None
    try:
        n_rows, dim = (int(x) for x in header.split())
    except ValueError:
        raise VecFormatError(f"line 1: malformed header {header.strip()!r}") from None
    if n_rows < 0 or dim <= 0:
        raise VecFormatError(f"line 1: invalid header {header.strip()!r}")

    words: List[str] = []
    rows: List[np.ndarray] = []
    seen = set()
    n_read = 0
    for lineno, line in enumerate(it, start=2):
        if not line.strip():
            continue
        parts = line.rstrip("\r\n").rstrip(" ").split(" ")
        n_read += 1
        if len(parts) != dim + 1:
            raise VecFormatError(
                f"line {lineno}: row {parts[0]!r} has {len(parts) - 1} values, expected {dim}"
            )
        word = parts[0]
        try:
            vec = np.array(parts[1:], dtype=np.float32)
        except ValueError:
            raise VecFormatError(f"line {lineno}: non-numeric value in row {word!r}") from None
        if word in seen:
            warnings.warn(f".vec line {lineno}: duplicate word {word!r}; keeping the first")
            continue
        seen.add(word)
        words.append(word)
        rows.append(vec)
    if n_read != n_rows:
        raise VecFormatError(f"header announces {n_rows} rows but {n_read} were read")

    inp = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    counts = np.arange(len(words), 0, -1, dtype=np.int64)
    vocab = Vocabulary(words, counts, min_count=1)
    return vocab, EmbeddingMatrix(inp, np.zeros_like(inp))


def save_vec(words: Sequence[str], vectors: np.ndarray, stream: TextIO) -> None:
    vectors = np.asarray(vectors)
    stream.write(f"{len(words)} {vectors.shape[1]}\n")
    for word, vec in zip(words, vectors):
        stream.write(word + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


def read_vec_file(path) -> Embeddings:
    with open(path, encoding="utf-8", errors="surrogateescape") as fh:
        vocab, matrix = load_vec(fh)
    return Embeddings(vocab, matrix)


def write_vec_file(emb: Embeddings, path) -> None:
    with open(path, "w", encoding="utf-8", errors="surrogateescape") as fh:
        save_vec(emb.vocab.words, emb.matrix.word_rows, fh)


def native_parts(emb: Embeddings):
    meta = {
        "words": emb.vocab.words,
        "min_count": emb.vocab.min_count,
        "subwords": {"n_min": emb.subwords.n_min, "n_max": emb.subwords.n_max,
                     "bucket_count": emb.subwords.bucket_count,
                     "hash_function": emb.subwords.hash_function},
        "config": emb.config,
    }
    tensors = {
        "counts": emb.vocab.counts,
        "input": emb.matrix.input,
        "output": emb.matrix.output,
        "freeze_mask": emb.matrix.freeze_mask,
    }
    return meta, tensors


def embeddings_from_parts(meta, t) -> Embeddings:
    vocab = Vocabulary(meta["words"], t["counts"], meta["min_count"])
    matrix = EmbeddingMatrix(t["input"], t["output"], t["freeze_mask"].astype(bool))
    return Embeddings(vocab, matrix, SubwordIndex(**meta["subwords"]), meta.get("config", {}))


def save_native(emb: Embeddings, path) -> None:
    meta, tensors = native_parts(emb)
    serialization.save_file(path, "embeddings", meta, tensors)


def load_embeddings(path):
    """Load a native model (plain or joint), or a ``.vec`` file when the magic is absent."""
    with open(path, "rb") as fh:
        magic = fh.read(len(serialization.MAGIC))
    if magic != serialization.MAGIC:
        return read_vec_file(path)
    kind, meta, t = serialization.load_file(path, "embeddings")
    if kind == "embeddings/joint":
        from ..alignment import JointEmbeddings

        return JointEmbeddings.from_parts(meta, t)
    return embeddings_from_parts(meta, t)
