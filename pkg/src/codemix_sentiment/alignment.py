"""Unsupervised cross-lingual alignment by self-learning.

The seed dictionary comes from comparing sorted intra-space similarity
distributions, and is then refined by alternating an orthogonal Procrustes
mapping with CSLS re-induction using stochastic dictionary dropout.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .embeddings.model import EmbeddingMatrix, Embeddings

logger = logging.getLogger(__name__)

FORWARD = "forward"
BACKWARD = "backward"


class AlignmentError(ValueError):
    pass


class DimensionMismatchError(AlignmentError):
    pass


@dataclass(frozen=True)
class AlignmentConfig:
    csls_k: int = 8
    vocab_cutoff: int = 15000
    normalization: str = "unit"
    convergence_threshold: float = 1e-6
    keep_prob: float = 0.1
    keep_prob_growth: float = 2.0
    patience: int = 50
    max_iterations: int = 1000
    symmetric: bool = False
    batch_size: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.csls_k < 1:
            raise ValueError("csls_k must be >= 1")
        if self.vocab_cutoff < 2:
            raise ValueError("vocab_cutoff must be >= 2")
        if self.normalization != "unit":
            raise ValueError(f"unsupported normalization {self.normalization!r}")
        if not 0 < self.keep_prob <= 1:
            raise ValueError("keep_prob must lie in (0, 1]")
        if self.keep_prob_growth <= 1 and self.keep_prob < 1:
            raise ValueError("keep_prob_growth must exceed 1")
        if self.patience < 1 or self.max_iterations < 1:
            raise ValueError("patience and max_iterations must be positive")


@dataclass
class BilingualDictionary:
    """Induced (source, target) index pairs, tagged with the direction that produced them."""

    src: np.ndarray
    trg: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.trg = np.asarray(self.trg, dtype=np.int64)
        self.direction = np.asarray(self.direction, dtype="<U8")
        if not (len(self.src) == len(self.trg) == len(self.direction)):
            raise ValueError("dictionary arrays differ in length")

    @classmethod
    def from_directions(cls, fwd_src, fwd_trg, bwd_src, bwd_trg) -> "BilingualDictionary":
        src = np.concatenate([fwd_src, bwd_src]).astype(np.int64)
        trg = np.concatenate([fwd_trg, bwd_trg]).astype(np.int64)
        direction = np.array([FORWARD] * len(fwd_src) + [BACKWARD] * len(bwd_src), dtype="<U8")
        # a pair found in both directions is kept once, under "forward"
        _, first = np.unique(np.stack([src, trg], axis=1), axis=0, return_index=True)
        first.sort()
        return cls(src[first], trg[first], direction[first])

    def __len__(self):
        return len(self.src)

    def pairs(self) -> List[Tuple[int, int]]:
        return list(zip(self.src.tolist(), self.trg.tolist()))

    def forward_map(self) -> Dict[int, int]:
        mask = self.direction == FORWARD
        return dict(zip(self.src[mask].tolist(), self.trg[mask].tolist()))


def normalize_embeddings(X: np.ndarray, scheme: str = "unit") -> np.ndarray:
    """Scale every row to unit Euclidean length; zero rows stay zero."""
    if scheme != "unit":
        raise ValueError(f"unsupported normalization {scheme!r}")
    X = np.asarray(X)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    zero = norms[:, 0] == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero row(s) left unnormalized")
        norms[zero] = 1.0
    return X / norms


def topk_mean(sim: np.ndarray, k: int) -> np.ndarray:
    """Row-wise mean of the ``k`` largest entries."""
    k = min(k, sim.shape[1])
    if k == sim.shape[1]:
        return sim.mean(axis=1)
    part = np.partition(sim, sim.shape[1] - k, axis=1)[:, sim.shape[1] - k:]
    return part.mean(axis=1)


def _clamped_k(k: int, n: int) -> int:
    return max(1, min(k, n))


def csls_scores(A: np.ndarray, B: np.ndarray, k: int) -> np.ndarray:
    """Full CSLS matrix: 2 cos(a, b) - r_B(a) - r_A(b)."""
    if len(B) == 0:
        raise AlignmentError("CSLS target matrix is empty")
    sim = A @ B.T
    r_b = topk_mean(sim, _clamped_k(k, len(B)))
    r_a = topk_mean(sim.T, _clamped_k(k, len(A)))
    return 2 * sim - r_b[:, None] - r_a[None, :]


def csls_match(A: np.ndarray, B: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Best CSLS partner in ``B`` for every row of ``A`` and its score.

    Neighbourhood sizes are clamped to the size of the searched space.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    scores = csls_scores(A, B, k)
    idx = scores.argmax(axis=1)
    return idx, scores[np.arange(len(A)), idx]


def _sorted_similarity_profile(X: np.ndarray) -> np.ndarray:
    # float32 keeps two 15k x 15k profiles within desktop memory
    dtype = np.float64 if len(X) <= 5000 else np.float32
    X = X.astype(dtype, copy=False)
    M = X @ X.T
    M.sort(axis=1)
    M /= np.maximum(np.linalg.norm(M, axis=1, keepdims=True), np.finfo(dtype).tiny)
    return M


def _truncate(X: np.ndarray, cutoff: int, name: str) -> np.ndarray:
    if cutoff > len(X):
        logger.info("vocab_cutoff %d exceeds %s vocabulary (%d); using all rows", cutoff, name, len(X))
    return X[:cutoff]


def build_seed_dictionary(X: np.ndarray, Z: np.ndarray,
                          config: AlignmentConfig = AlignmentConfig()) -> BilingualDictionary:
    """Initial dictionary from matching sorted similarity distributions under CSLS."""
    X = _truncate(np.asarray(X, dtype=np.float64), config.vocab_cutoff, "source")
    Z = _truncate(np.asarray(Z, dtype=np.float64), config.vocab_cutoff, "target")
    px = _sorted_similarity_profile(X)
    pz = _sorted_similarity_profile(Z)
    n = min(px.shape[1], pz.shape[1])
    if px.shape[1] != pz.shape[1]:
        # distributions of unequal length are compared on their top entries
        px = normalize_embeddings(px[:, -n:]).astype(px.dtype)
        pz = normalize_embeddings(pz[:, -n:]).astype(pz.dtype)
    d, _ = _induce(px, pz, config.csls_k, 1.0, None, config.batch_size)
    return d


def orthogonal_map(X: np.ndarray, Z: np.ndarray, dictionary: BilingualDictionary) -> np.ndarray:
    """Orthogonal W minimizing ||X_d W - Z_d||_F over the dictionary pairs."""
    if len(dictionary) == 0:
        raise AlignmentError("cannot fit a mapping from an empty dictionary")
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatchError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    u, _, vt = np.linalg.svd(X[dictionary.src].T @ Z[dictionary.trg])
    return u @ vt


def _induce(xw, zw, k, keep_prob, rng, batch):
    """Dictionary re-induction in both directions with dropout on the CSLS scores."""
    n_x, n_z = len(xw), len(zw)
    k_x, k_z = _clamped_k(k, n_z), _clamped_k(k, n_x)
    # neighbourhood radii need the full similarity rows first
    r_x = np.empty(n_x)
    for i in range(0, n_x, batch):
        r_x[i:i + batch] = topk_mean(xw[i:i + batch] @ zw.T, k_x)
    r_z = np.empty(n_z)
    for i in range(0, n_z, batch):
        r_z[i:i + batch] = topk_mean(zw[i:i + batch] @ xw.T, k_z)

    def direction(a, b, r_b_side):
        best = np.empty(len(a), dtype=np.int64)
        best_sim = np.empty(len(a))
        for i in range(0, len(a), batch):
            sim = a[i:i + batch] @ b.T
            # argmax of 2cos - r(a) - r(b) equals argmax of cos - r(b)/2
            score = sim - r_b_side[None, :] / 2
            if keep_prob < 1:
                score = np.where(rng.random(score.shape) < keep_prob, score, -np.inf)
            j = score.argmax(axis=1)
            best[i:i + batch] = j
            best_sim[i:i + batch] = sim[np.arange(len(j)), j]
        return best, best_sim

    fwd, fwd_sim = direction(xw, zw, r_z)
    bwd, bwd_sim = direction(zw, xw, r_x)
    objective = (fwd_sim.mean() + bwd_sim.mean()) / 2
    d = BilingualDictionary.from_directions(np.arange(n_x), fwd, bwd, np.arange(n_z))
    return d, objective


def _whitening(M: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    return vt.T @ np.diag(1 / s) @ vt


def _symmetric_mapping(X, Z, d: BilingualDictionary, reweight: float = 0.5):
    """Whitening, orthogonal mapping, re-weighting and de-whitening, on both sides."""
    xd, zd = X[d.src], Z[d.trg]
    wx1 = _whitening(xd)
    wz1 = _whitening(zd)
    u, s, vt = np.linalg.svd((xd @ wx1).T @ (zd @ wz1))
    wx2, wz2 = u, vt.T
    xw = wx1 @ wx2 * s ** reweight
    zw = wz1 @ wz2 * s ** reweight
    # de-whiten each side back in its own space
    xw = xw @ wx2.T @ np.linalg.inv(wx1) @ wx2
    zw = zw @ wz2.T @ np.linalg.inv(wz1) @ wz2
    return xw, zw


@dataclass
class AlignmentResult:
    W_src: np.ndarray
    W_trg: np.ndarray
    dictionary: BilingualDictionary
    objective: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


def self_learning_align(X: np.ndarray, Z: np.ndarray,
                        config: AlignmentConfig = AlignmentConfig()) -> AlignmentResult:
    """Alternate Procrustes mapping and stochastic CSLS dictionary induction.

    ``X`` and ``Z`` must be unit-normalized, frequency-ordered matrices; only
    the first ``vocab_cutoff`` rows take part. Returns the best mapping seen
    (by mean dictionary similarity) and whether the loop converged.
    """
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatchError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    X = _truncate(X, config.vocab_cutoff, "source")
    Z = _truncate(Z, config.vocab_cutoff, "target")
    rng = np.random.default_rng(config.seed)
    d = build_seed_dictionary(X, Z, config)
    dim = X.shape[1]

    keep_prob = config.keep_prob
    best_objective = -np.inf
    best = None
    stale = 0
    converged = False
    history = []
    it = 0
    for it in range(1, config.max_iterations + 1):
        if config.symmetric:
            W_src, W_trg = _symmetric_mapping(X, Z, d)
        else:
            W_src, W_trg = orthogonal_map(X, Z, d), np.eye(dim)
        new_d, objective = _induce(X @ W_src, Z @ W_trg, config.csls_k, keep_prob, rng,
                                   config.batch_size)
        logger.debug("iteration %d: keep %.3f objective %.6f dictionary %d",
                     it, keep_prob, objective, len(new_d))
        if objective - best_objective >= config.convergence_threshold:
            best_objective = objective
            best = (W_src, W_trg, new_d)
            history.append(objective)
            stale = 0
        else:
            if keep_prob >= 1:
                converged = True
                break
            stale += 1
            if stale >= config.patience:
                keep_prob = min(1.0, keep_prob * config.keep_prob_growth)
                stale = 0
        d = new_d
    if not converged:
        warnings.warn(f"self-learning stopped at max_iterations={config.max_iterations} "
                      "before converging; returning the best mapping seen")
    W_src, W_trg, d = best
    if not config.symmetric:
        # final Procrustes fit on the best dictionary keeps the mapping orthogonal
        W_src = orthogonal_map(X, Z, d)
    return AlignmentResult(W_src, W_trg, d, float(best_objective), it, converged, history)


def project_full(matrix, W: np.ndarray):
    """Right-multiply every input row (words and buckets) by ``W``."""
    W = np.asarray(W)
    if isinstance(matrix, EmbeddingMatrix):
        if matrix.dim != W.shape[0]:
            raise DimensionMismatchError(
                f"dimension mismatch: matrix has {matrix.dim}, mapping expects {W.shape[0]}"
            )
        inp = (matrix.input.astype(np.float64) @ W).astype(np.float32)
        return EmbeddingMatrix(inp, matrix.output.copy(), matrix.freeze_mask.copy())
    matrix = np.asarray(matrix)
    if matrix.shape[1] != W.shape[0]:
        raise DimensionMismatchError(
            f"dimension mismatch: matrix has {matrix.shape[1]}, mapping expects {W.shape[0]}"
        )
    return matrix @ W


def orthogonality_error(W: np.ndarray) -> float:
    return float(np.abs(W.T @ W - np.eye(W.shape[1])).max())


class JointEmbeddings:
    """Shared-space lookup over a mapped source model and a target model.

    Source-vocabulary words (and out-of-vocabulary words, through source
    subwords) use the mapped source vectors; words only the target knows use
    the target vectors. Every returned vector has unit length (zero stays zero).
    """

    def __init__(self, source: Embeddings, target: Embeddings, W_src: np.ndarray,
                 W_trg: Optional[np.ndarray] = None):
        if source.dim != target.dim:
            raise DimensionMismatchError(
                f"dimension mismatch: {source.dim} vs {target.dim}"
            )
        self.source = source
        self.target = target
        # stored as float32 on disk; round now so the fingerprint survives a reload
        self.W_src = np.asarray(W_src, dtype=np.float32).astype(np.float64)
        self.W_trg = (None if W_trg is None
                      else np.asarray(W_trg, dtype=np.float32).astype(np.float64))
        self._cache: Dict[str, np.ndarray] = {}
        self._fingerprint = None

    @property
    def dim(self) -> int:
        return self.source.dim

    def __contains__(self, word):
        return word in self.source or word in self.target

    def word_vector(self, word: str) -> np.ndarray:
        vec = self._cache.get(word)
        if vec is not None:
            return vec
        if word in self.source.vocab or word not in self.target.vocab:
            v = self.source.word_vector(word) @ self.W_src
        else:
            v = self.target.word_vector(word).astype(np.float64)
            if self.W_trg is not None:
                v = v @ self.W_trg
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
        vec = v.astype(np.float32)
        self._cache[word] = vec
        return vec

    __getitem__ = word_vector

    def vectors(self, words: Sequence[str]) -> np.ndarray:
        if not words:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([self.word_vector(w) for w in words])

    def fingerprint(self) -> str:
        if self._fingerprint is None:
            import hashlib

            h = hashlib.sha256()
            h.update(self.source.fingerprint().encode())
            h.update(self.target.fingerprint().encode())
            h.update(self.W_src.tobytes())
            if self.W_trg is not None:
                h.update(self.W_trg.tobytes())
            self._fingerprint = h.hexdigest()[:16]
        return self._fingerprint

    def save(self, path) -> None:
        from .embeddings.model import native_parts
        from . import serialization

        meta, tensors = {}, {}
        for side, emb in (("source", self.source), ("target", self.target)):
            m, t = native_parts(emb)
            meta[side] = m
            tensors.update({f"{side}.{k}": v for k, v in t.items()})
        tensors["W_src"] = self.W_src
        if self.W_trg is not None:
            tensors["W_trg"] = self.W_trg
        serialization.save_file(path, "embeddings/joint", meta, tensors)

    @classmethod
    def from_parts(cls, meta, tensors) -> "JointEmbeddings":
        from .embeddings.model import embeddings_from_parts

        sides = {}
        for side in ("source", "target"):
            prefix = side + "."
            part = {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}
            sides[side] = embeddings_from_parts(meta[side], part)
        return cls(sides["source"], sides["target"], tensors["W_src"], tensors.get("W_trg"))


def joint_embeddings(src: Embeddings, trg: Embeddings, W_src: np.ndarray,
                     W_trg: Optional[np.ndarray] = None) -> JointEmbeddings:
    return JointEmbeddings(src, trg, W_src, W_trg)


def write_dictionary(dictionary: BilingualDictionary, src_words: Sequence[str],
                     trg_words: Sequence[str], stream: TextIO) -> None:
    for s, t in dictionary.pairs():
        stream.write(f"{src_words[s]}\t{trg_words[t]}\n")


class CrossLingualAligner(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit(X, Z)`` learns the mapping, ``transform`` projects source rows."""

    def __init__(self, csls_k=8, vocab_cutoff=15000, keep_prob=0.1, keep_prob_growth=2.0,
                 patience=50, max_iterations=1000, convergence_threshold=1e-6,
                 symmetric=False, seed=0):
        self.csls_k = csls_k
        self.vocab_cutoff = vocab_cutoff
        self.keep_prob = keep_prob
        self.keep_prob_growth = keep_prob_growth
        self.patience = patience
        self.max_iterations = max_iterations
        self.convergence_threshold = convergence_threshold
        self.symmetric = symmetric
        self.seed = seed

    def config(self) -> AlignmentConfig:
        return AlignmentConfig(
            csls_k=self.csls_k, vocab_cutoff=self.vocab_cutoff, keep_prob=self.keep_prob,
            keep_prob_growth=self.keep_prob_growth, patience=self.patience,
            max_iterations=self.max_iterations,
            convergence_threshold=self.convergence_threshold, symmetric=self.symmetric,
            seed=self.seed,
        )

    def fit(self, X, Z):
        X = normalize_embeddings(check_array(X, dtype=np.float64))
        Z = normalize_embeddings(check_array(Z, dtype=np.float64))
        result = self_learning_align(X, Z, self.config())
        self.W_src_ = result.W_src
        self.W_trg_ = result.W_trg
        self.dictionary_ = result.dictionary
        self.objective_ = result.objective
        self.converged_ = result.converged
        self.n_iter_ = result.iterations
        return self

    def transform(self, X):
        check_is_fitted(self, "W_src_")
        return project_full(check_array(X), self.W_src_)
