"""Subword skip-gram with negative sampling, plus frozen-row incremental retraining."""

import logging
import threading
import time
from dataclasses import asdict, dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from .model import EmbeddingMatrix, Embeddings
from .vocab import SubwordIndex, Vocabulary, build_vocab, count_words

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 300
    window: int = 5
    negative: int = 5
    epochs: int = 5
    lr: float = 0.05
    min_count: int = 5
    sample: float = 1e-4
    n_min: int = 3
    n_max: int = 6
    bucket_count: int = 2_000_000
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        for name in ("dim", "window", "min_count", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.negative < 0 or self.epochs < 0:
            raise ValueError("negative and epochs must be non-negative")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.sample < 0:
            raise ValueError("sample must be non-negative")

    @property
    def subwords(self) -> SubwordIndex:
        return SubwordIndex(self.n_min, self.n_max, self.bucket_count)


# reference objective, used to check the compiled update


def pair_loss(hidden, u_pos, u_negs) -> float:
    """-log s(u_pos.h) - sum log s(-u_neg.h) for one (center, context) pair."""
    loss = np.logaddexp(0.0, -u_pos @ hidden)
    if len(u_negs):
        loss += np.logaddexp(0.0, u_negs @ hidden).sum()
    return float(loss)


def pair_loss_grad(hidden, u_pos, u_negs):
    """Analytic gradients of :func:`pair_loss` w.r.t. hidden, u_pos and u_negs."""
    sp = 1.0 / (1.0 + np.exp(-(u_pos @ hidden)))
    g_h = -(1.0 - sp) * u_pos
    g_pos = -(1.0 - sp) * hidden
    u_negs = np.asarray(u_negs).reshape(-1, len(hidden))
    sn = 1.0 / (1.0 + np.exp(-(u_negs @ hidden)))
    g_h = g_h + sn @ u_negs
    g_negs = sn[:, None] * hidden[None, :]
    return g_h, g_pos, g_negs


def composed_pair_loss(input_rows, u_pos, u_negs) -> float:
    """Pair loss with the center vector taken as the mean of ``input_rows``."""
    return pair_loss(np.mean(input_rows, axis=0), u_pos, u_negs)


def composed_pair_loss_grad(input_rows, u_pos, u_negs):
    g_h, g_pos, g_negs = pair_loss_grad(np.mean(input_rows, axis=0), u_pos, u_negs)
    g_rows = np.repeat(g_h[None, :] / len(input_rows), len(input_rows), axis=0)
    return g_rows, g_pos, g_negs


def _subword_csr(vocab: Vocabulary, subwords: SubwordIndex):
    ptr = np.zeros(len(vocab) + 1, dtype=np.int64)
    ids: List[int] = []
    for i, word in enumerate(vocab.words):
        ids.extend(len(vocab) + b for b in subwords.buckets(word))
        ptr[i + 1] = len(ids)
    return ptr, np.asarray(ids, dtype=np.int64)


def _encode(sentences: Iterable[Sequence[str]], vocab: Vocabulary):
    ids: List[int] = []
    bounds = [0]
    for sent in sentences:
        for w in sent:
            i = vocab.index.get(w)
            if i is not None:
                ids.append(i)
        if len(ids) > bounds[-1]:
            bounds.append(len(ids))
    return np.asarray(ids, dtype=np.int64), np.asarray(bounds, dtype=np.int64)


def _keep_probabilities(counts: np.ndarray, sample: float) -> np.ndarray:
    total = counts.sum()
    keep = np.ones(len(counts), dtype=np.float64)
    if sample <= 0 or total == 0:
        return keep
    freq = counts / total
    nz = freq > 0
    ratio = sample / freq[nz]
    keep[nz] = np.minimum(1.0, np.sqrt(ratio) + ratio)
    return keep


def _negative_cdf(counts: np.ndarray, power: float = 0.75) -> np.ndarray:
    weights = np.power(counts.astype(np.float64), power)
    return np.cumsum(weights)


def init_matrix(n_words: int, n_buckets: int, dim: int, seed: int) -> EmbeddingMatrix:
    rng = np.random.default_rng(seed)
    bound = 1.0 / (2 * dim)
    inp = np.empty((n_words + n_buckets, dim), dtype=np.float32)
    # row chunks draw the same stream as one call, without a float64 copy of the table
    step = max(1, (1 << 22) // dim)
    for start in range(0, len(inp), step):
        stop = min(start + step, len(inp))
        inp[start:stop] = rng.uniform(-bound, bound, size=(stop - start, dim))
    out = np.zeros((n_words, dim), dtype=np.float32)
    return EmbeddingMatrix(inp, out)


def _as_sentences(corpus) -> List[List[str]]:
    from ..corpus import Corpus

    if isinstance(corpus, Corpus):
        return corpus.token_lists()
    return [list(s) for s in corpus]


def _run(sentences, vocab: Vocabulary, matrix: EmbeddingMatrix, subwords: SubwordIndex,
         config: SkipGramConfig, deterministic: bool) -> List[float]:
    tokens, bounds = _encode(sentences, vocab)
    n_sent = len(bounds) - 1
    counts = np.bincount(tokens, minlength=len(vocab)).astype(np.int64)
    keep = _keep_probabilities(counts, config.sample)
    neg_cdf = _negative_cdf(counts)
    sub_ptr, sub_idx = _subword_csr(vocab, subwords)
    workers = 1 if deterministic else max(1, min(config.workers, n_sent))
    total_work = float(max(1, config.epochs * len(tokens)))
    seeds = np.random.SeedSequence(config.seed).generate_state(max(workers, 1), np.uint64)
    states = [np.array([s | np.uint64(1)], dtype=np.uint64) for s in seeds]
    shards = np.linspace(0, n_sent, workers + 1).astype(np.int64)

    losses = []
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        stats = [np.zeros(3) for _ in range(workers)]
        work_start = float(epoch * len(tokens))

        def job(k):
            _kernels.train_sentences(
                tokens, bounds, shards[k], shards[k + 1], matrix.input, matrix.output,
                matrix.freeze_mask, sub_ptr, sub_idx, keep, neg_cdf, config.window,
                config.negative, config.lr, total_work, work_start, float(workers),
                states[k], stats[k],
            )

        if workers == 1:
            job(0)
        else:
            threads = [threading.Thread(target=job, args=(k,)) for k in range(workers)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        loss = sum(s[0] for s in stats) / max(1.0, sum(s[1] for s in stats))
        losses.append(loss)
        logger.info("epoch %d/%d: mean loss %.5f (%.1fs)", epoch + 1, config.epochs,
                    loss, time.perf_counter() - t0)
    if not np.isfinite(matrix.input).all() or not np.isfinite(matrix.output).all():
        raise FloatingPointError("training diverged: non-finite embedding values")
    return losses


def train_skipgram(corpus, config: SkipGramConfig = SkipGramConfig(),
                   deterministic: bool = True) -> Tuple[Vocabulary, EmbeddingMatrix]:
    """Train subword skip-gram embeddings from scratch."""
    sentences = _as_sentences(corpus)
    vocab = build_vocab(sentences, config.min_count)
    subwords = config.subwords
    matrix = init_matrix(len(vocab), subwords.bucket_count, config.dim, config.seed)
    _run(sentences, vocab, matrix, subwords, config, deterministic)
    return vocab, matrix


def incremental_retrain(pretrained: Tuple[Vocabulary, EmbeddingMatrix], corpus,
                        config: SkipGramConfig = SkipGramConfig(),
                        deterministic: bool = True) -> Tuple[Vocabulary, EmbeddingMatrix]:
    """Extend pretrained vectors with new words learned from ``corpus``.

    Every pretrained word keeps its input row bit-for-bit. New words meeting
    ``min_count`` and a fresh table of subword buckets are trained.
    """
    old_vocab, old_matrix = pretrained
    if old_matrix.dim != config.dim:
        raise ValueError(
            f"config dimension {config.dim} differs from pretrained dimension {old_matrix.dim}"
        )
    sentences = _as_sentences(corpus)
    if not sentences:
        raise ValueError("retraining corpus is empty")
    counter = count_words(sentences)
    new = sorted(((w, c) for w, c in counter.items()
                  if c >= config.min_count and w not in old_vocab),
                 key=lambda wc: (-wc[1], wc[0]))
    words = list(old_vocab.words) + [w for w, _ in new]
    counts = np.array([counter.get(w, 0) for w in words], dtype=np.int64)
    vocab = Vocabulary(words, counts, config.min_count)
    V_old = len(old_vocab)
    subwords = config.subwords

    matrix = init_matrix(len(vocab), subwords.bucket_count, config.dim, config.seed)
    matrix.input[:V_old] = old_matrix.word_rows
    matrix.freeze_mask[:V_old] = True
    logger.info("retraining: %d frozen pretrained words, %d new words, %d buckets",
                V_old, len(new), subwords.bucket_count)
    _run(sentences, vocab, matrix, subwords, config, deterministic)
    return vocab, matrix


class SkipGramEmbedder(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` on token lists, ``transform`` words to vectors.

    With ``pretrained`` set, fitting performs incremental retraining and the
    pretrained word rows stay frozen.
    """

    def __init__(self, dim=300, window=5, negative=5, epochs=5, lr=0.05, min_count=5,
                 sample=1e-4, n_min=3, n_max=6, bucket_count=2_000_000, seed=1,
                 workers=1, deterministic=True, pretrained=None):
        self.dim = dim
        self.window = window
        self.negative = negative
        self.epochs = epochs
        self.lr = lr
        self.min_count = min_count
        self.sample = sample
        self.n_min = n_min
        self.n_max = n_max
        self.bucket_count = bucket_count
        self.seed = seed
        self.workers = workers
        self.deterministic = deterministic
        self.pretrained = pretrained

    def _config(self) -> SkipGramConfig:
        return SkipGramConfig(
            dim=self.dim, window=self.window, negative=self.negative, epochs=self.epochs,
            lr=self.lr, min_count=self.min_count, sample=self.sample, n_min=self.n_min,
            n_max=self.n_max, bucket_count=self.bucket_count, seed=self.seed,
            workers=self.workers,
        )

    def fit(self, X, y=None):
        config = self._config()
        if self.pretrained is None:
            vocab, matrix = train_skipgram(X, config, self.deterministic)
        else:
            pre = self.pretrained
            if isinstance(pre, Embeddings):
                pre = (pre.vocab, pre.matrix)
            vocab, matrix = incremental_retrain(pre, X, config, self.deterministic)
        self.embeddings_ = Embeddings(vocab, matrix, config.subwords, asdict(config))
        return self

    def transform(self, X):
        """Map a sequence of words to an ``(n_words, dim)`` array."""
        check_is_fitted(self, "embeddings_")
        return self.embeddings_.vectors(list(X))
