import logging

import numpy as np

from .base import SentimentClassifier, encode_mean

logger = logging.getLogger(__name__)


def hinge_objective(W, b, X, Y, C):
    """Per-class mean hinge loss plus ||w||^2 / (2 C N); ``Y`` holds +/-1 targets."""
    n = len(X)
    margins = Y * (X @ W + b)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    return hinge + (W ** 2).sum(axis=0) / (2 * C * n)


def hinge_subgradient(W, b, X, Y, C):
    n = len(X)
    active = (Y * (X @ W + b) < 1.0).astype(X.dtype)
    coef = -(active * Y) / n
    return X.T @ coef + W / (C * n), coef.sum(axis=0)


class LinearSVMClassifier(SentimentClassifier):
    """One-vs-rest linear SVM (hinge loss, L2 penalty) over mean word vectors.

    Trained by full-batch subgradient descent with a 1/sqrt(t) step schedule.
    Subgradient steps can overshoot, so each class keeps its best iterate; the
    returned weights, and ``objective_history_``, never get worse across epochs.
    """

    kind = "svm"

    def __init__(self, embeddings=None, C=1.0, epochs=500, lr=10.0, standardize=True,
                 seed=0):
        self.embeddings = embeddings
        self.C = C
        self.epochs = epochs
        self.lr = lr
        self.standardize = standardize
        self.seed = seed

    def _features(self, docs):
        X = np.stack([encode_mean(d, self.embeddings) for d in docs]).astype(np.float64)
        return X

    def _fit(self, docs, y, val):
        if not self.C > 0:
            raise ValueError("C must be positive")
        X = self._features(docs)
        if self.standardize:
            mean = X.mean(axis=0)
            scale = X.std(axis=0)
            scale[scale == 0] = 1.0
        else:
            mean = np.zeros(X.shape[1])
            scale = np.ones(X.shape[1])
        self.mean_ = mean.astype(np.float32)
        self.scale_ = scale.astype(np.float32)
        X = (X - self.mean_) / self.scale_
        n_classes = len(self.classes_)
        Y = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)

        W = np.zeros((X.shape[1], n_classes))
        b = np.zeros(n_classes)
        best_W, best_b = W.copy(), b.copy()
        best = hinge_objective(W, b, X, Y, self.C)
        history = [float(best.sum())]
        for t in range(self.epochs):
            gW, gb = hinge_subgradient(W, b, X, Y, self.C)
            step = self.lr / np.sqrt(1.0 + t)
            W = W - step * gW
            b = b - step * gb
            obj = hinge_objective(W, b, X, Y, self.C)
            improved = obj < best
            best_W[:, improved] = W[:, improved]
            best_b[improved] = b[improved]
            best = np.where(improved, obj, best)
            history.append(float(best.sum()))
        W, b = best_W, best_b
        logger.info("svm: final objective %.6f after %d epochs", history[-1], self.epochs)
        self.objective_history_ = history
        # C order on both the fit and load paths keeps scores bit-identical
        self.coef_ = np.ascontiguousarray(W.T, dtype=np.float32)
        self.intercept_ = b.astype(np.float32)
        return self

    def decision_scores(self, docs):
        X = self._features(docs) if docs else np.zeros((0, len(self.mean_)))
        X = (X - self.mean_) / self.scale_
        return X @ self.coef_.T.astype(np.float64) + self.intercept_

    def _tensors(self):
        return {"coef": self.coef_, "intercept": self.intercept_,
                "mean": self.mean_, "scale": self.scale_}

    def _set_tensors(self, tensors, extra):
        self.coef_ = np.ascontiguousarray(tensors["coef"], dtype=np.float32)
        self.intercept_ = tensors["intercept"]
        self.mean_ = tensors["mean"]
        self.scale_ = tensors["scale"]
