"""Sentence classifiers (linear SVM, BiLSTM, CNN) over frozen word embeddings."""

from typing import Tuple

import numpy as np

from .. import serialization
from ..corpus import LABELS, Corpus, SentimentLabel
from .base import (
    CLASSES,
    EncodedDocument,
    SentimentClassifier,
    TrainingDataError,
    encode_mean,
    encode_sequence,
)
from .neural import BiLSTMClassifier, CNNClassifier
from .svm import LinearSVMClassifier

KINDS = {
    "svm": LinearSVMClassifier,
    "bilstm": BiLSTMClassifier,
    "cnn": CNNClassifier,
}


def make_classifier(kind: str, embeddings, **params) -> SentimentClassifier:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown classifier kind {kind!r}; expected one of {sorted(KINDS)}")
    return cls(embeddings=embeddings, **params)


def _train(kind, corpus: Corpus, embeddings, validation=None, **params):
    return make_classifier(kind, embeddings, **params).fit(corpus, X_val=validation)


def train_svm(corpus: Corpus, embeddings, validation=None, **params) -> LinearSVMClassifier:
    return _train("svm", corpus, embeddings, validation, **params)


def train_bilstm(corpus: Corpus, embeddings, validation=None, **params) -> BiLSTMClassifier:
    return _train("bilstm", corpus, embeddings, validation, **params)


def train_cnn(corpus: Corpus, embeddings, validation=None, **params) -> CNNClassifier:
    return _train("cnn", corpus, embeddings, validation, **params)


def predict(model: SentimentClassifier, tweet, embeddings=None) -> Tuple[SentimentLabel, np.ndarray]:
    """Label and class scores for one tweet; ties go to the earlier label."""
    if embeddings is not None and embeddings is not model.embeddings:
        model.embeddings = embeddings
    scores = model.predict_scores([tweet])[0]
    return LABELS[int(np.argmax(scores))], scores


def load_classifier(path, embeddings) -> SentimentClassifier:
    kind, meta, tensors = serialization.load_file(path, "classifier/")
    cls = KINDS[kind.split("/", 1)[1]]
    params = dict(meta["params"])
    for key in ("kernel_sizes", "betas"):
        if key in params:
            params[key] = tuple(params[key])
    meta = dict(meta, params=params)
    return cls._from_saved(meta, tensors, embeddings)


__all__ = [
    "BiLSTMClassifier",
    "CLASSES",
    "CNNClassifier",
    "EncodedDocument",
    "KINDS",
    "LinearSVMClassifier",
    "SentimentClassifier",
    "TrainingDataError",
    "encode_mean",
    "encode_sequence",
    "load_classifier",
    "make_classifier",
    "predict",
    "train_bilstm",
    "train_cnn",
    "train_svm",
]
