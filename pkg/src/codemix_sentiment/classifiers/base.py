import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .. import serialization
from ..corpus import LABELS, Corpus, LabeledTweet, SentimentLabel

logger = logging.getLogger(__name__)

CLASSES = np.array([label.value for label in LABELS])
MIN_SEQUENCE_LENGTH = 5


class TrainingDataError(ValueError):
    pass


def tweet_tokens(tweet) -> List[str]:
    if isinstance(tweet, LabeledTweet):
        return tweet.normalized_tokens()
    if isinstance(tweet, str):
        raise TypeError("expected a token list or LabeledTweet, got a plain string")
    return list(tweet)


def as_token_lists(X) -> List[List[str]]:
    if isinstance(X, Corpus):
        X = X.tweets
    return [tweet_tokens(t) for t in X]


def label_indices(y) -> np.ndarray:
    """Map labels (enum members or their string values) to class indices."""
    out = np.empty(len(y), dtype=np.int64)
    for i, label in enumerate(y):
        if not isinstance(label, SentimentLabel):
            label = SentimentLabel.parse(str(label))
        out[i] = label.rank
    return out


def corpus_xy(corpus: Corpus) -> Tuple[List[List[str]], np.ndarray]:
    if corpus.split == "unlabeled":
        raise TrainingDataError("classifier training needs a labeled corpus")
    return as_token_lists(corpus), label_indices(corpus.labels)


def encode_mean(tweet, embeddings) -> np.ndarray:
    """Mean word vector of the tweet; zero vector for an empty tweet."""
    tokens = tweet_tokens(tweet)
    if not tokens:
        return np.zeros(embeddings.dim, dtype=np.float32)
    return embeddings.vectors(tokens).mean(axis=0, dtype=np.float64).astype(np.float32)


@dataclass
class EncodedDocument:
    vectors: np.ndarray
    length: int

    def __post_init__(self):
        if self.vectors.shape[0] < MIN_SEQUENCE_LENGTH:
            raise ValueError(f"padded length must be at least {MIN_SEQUENCE_LENGTH}")
        if self.length > self.vectors.shape[0]:
            raise ValueError("true length exceeds padded length")


def encode_sequence(tweet, embeddings, max_len: int = 64) -> EncodedDocument:
    """Per-token vectors, right-padded with zeros (or truncated) to ``max_len``."""
    if max_len < MIN_SEQUENCE_LENGTH:
        raise ValueError(f"max_len must be at least {MIN_SEQUENCE_LENGTH}")
    tokens = tweet_tokens(tweet)[:max_len]
    out = np.zeros((max_len, embeddings.dim), dtype=np.float32)
    if tokens:
        out[:len(tokens)] = embeddings.vectors(tokens)
    return EncodedDocument(out, len(tokens))


def index_documents(docs: Sequence[Sequence[str]], embeddings, max_len: int):
    """Token-id matrix plus a lookup table whose row 0 is the zero padding vector."""
    table_index: Dict[str, int] = {}
    ids = np.zeros((len(docs), max_len), dtype=np.int64)
    lengths = np.zeros(len(docs), dtype=np.int64)
    for i, doc in enumerate(docs):
        doc = doc[:max_len]
        lengths[i] = len(doc)
        for j, tok in enumerate(doc):
            ids[i, j] = table_index.setdefault(tok, len(table_index) + 1)
    table = np.zeros((len(table_index) + 1, embeddings.dim), dtype=np.float32)
    if table_index:
        table[1:] = embeddings.vectors(list(table_index))
    return ids, lengths, table


def first_argmax(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, which is the label-order tie break
    return np.argmax(scores, axis=-1)


class SentimentClassifier(ClassifierMixin, BaseEstimator):
    """Shared plumbing: label handling, embedding fingerprints and persistence.

    Subclasses implement ``_fit(docs, y, val)`` and ``decision_scores(docs)``
    and list their tensors in ``_tensors`` / ``_set_tensors``.
    """

    kind = "base"

    def fit(self, X, y=None, X_val=None, y_val=None):
        if isinstance(X, Corpus):
            docs, yi = corpus_xy(X)
        else:
            docs, yi = as_token_lists(X), label_indices(y)
        if len(docs) != len(yi):
            raise TrainingDataError("X and y differ in length")
        if len(np.unique(yi)) < 2:
            raise TrainingDataError("training data contains a single class")
        val = None
        if X_val is not None:
            if isinstance(X_val, Corpus):
                val = corpus_xy(X_val)
            else:
                val = (as_token_lists(X_val), label_indices(y_val))
        self.classes_ = CLASSES.copy()
        self.embedding_fingerprint_ = self.embeddings.fingerprint()
        self._fit(docs, yi, val)
        return self

    def _check_embeddings(self):
        check_is_fitted(self, "classes_")
        fp = self.embeddings.fingerprint()
        if fp != self.embedding_fingerprint_:
            warnings.warn(
                f"embeddings {fp} differ from those the model was trained with "
                f"({self.embedding_fingerprint_})"
            )

    def predict_scores(self, X) -> np.ndarray:
        self._check_embeddings()
        return self.decision_scores(as_token_lists(X))

    def decision_function(self, X):
        return self.predict_scores(X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[first_argmax(self.predict_scores(X))]

    def predict_labels(self, X) -> List[SentimentLabel]:
        return [LABELS[i] for i in first_argmax(self.predict_scores(X))]

    # persistence

    def _meta_params(self) -> dict:
        params = self.get_params(deep=False)
        params.pop("embeddings", None)
        return params

    def save(self, path) -> None:
        check_is_fitted(self, "classes_")
        meta = {
            "params": self._meta_params(),
            "embedding_fingerprint": self.embedding_fingerprint_,
            "classes": self.classes_.tolist(),
            "extra": self._extra_meta(),
        }
        serialization.save_file(path, f"classifier/{self.kind}", meta, self._tensors())

    def _extra_meta(self) -> dict:
        return {}

    @classmethod
    def _from_saved(cls, meta, tensors, embeddings):
        model = cls(embeddings=embeddings, **meta["params"])
        model.classes_ = np.array(meta["classes"])
        model.embedding_fingerprint_ = meta["embedding_fingerprint"]
        model._set_tensors(tensors, meta.get("extra", {}))
        return model
