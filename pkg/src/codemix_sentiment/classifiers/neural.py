"""CNN and BiLSTM sentence classifiers over frozen word vectors."""

import copy
import logging
import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from ..evaluation import confusion, macro_metrics
from .base import MIN_SEQUENCE_LENGTH, SentimentClassifier, index_documents

logger = logging.getLogger(__name__)


class TextCNN(nn.Module):
    """Parallel 1-d convolutions, max-over-time pooling and a linear head."""

    def __init__(self, dim, n_filters=100, kernel_sizes=(1, 2, 3, 4, 5), n_classes=3,
                 dropout=0.0):
        super().__init__()
        self.convs = nn.ModuleList(nn.Conv1d(dim, n_filters, k) for k in kernel_sizes)
        self.dropout = nn.Dropout(dropout)
        self.fc = nn.Linear(n_filters * len(kernel_sizes), n_classes)

    def features(self, x):
        # x: (batch, length, dim)
        x = x.transpose(1, 2)
        pooled = [F.relu(conv(x)).max(dim=2).values for conv in self.convs]
        return torch.cat(pooled, dim=1)

    def forward(self, x, lengths=None):
        return F.log_softmax(self.fc(self.dropout(self.features(x))), dim=1)


class BiLSTM(nn.Module):
    """Stacked bidirectional LSTM; the top layer's final states feed a linear head."""

    def __init__(self, dim, hidden_size=128, num_layers=4, n_classes=3, dropout=0.0):
        super().__init__()
        self.hidden_size = hidden_size
        self.lstm = nn.LSTM(dim, hidden_size, num_layers=num_layers, bidirectional=True,
                            batch_first=True, dropout=dropout if num_layers > 1 else 0.0)
        self.fc = nn.Linear(2 * hidden_size, n_classes)
        bound = 1.0 / math.sqrt(hidden_size)
        with torch.no_grad():
            for name, param in self.lstm.named_parameters():
                nn.init.uniform_(param, -bound, bound)
                if name.startswith("bias_ih"):
                    # gate order is input, forget, cell, output
                    param[hidden_size:2 * hidden_size] = 1.0
                elif name.startswith("bias_hh"):
                    param[hidden_size:2 * hidden_size] = 0.0

    def encode(self, x, lengths):
        lengths = torch.as_tensor(lengths, dtype=torch.int64)
        packed = pack_padded_sequence(x, lengths.clamp(min=1).cpu(), batch_first=True,
                                      enforce_sorted=False)
        _, (h_n, _) = self.lstm(packed)
        rep = torch.cat([h_n[-2], h_n[-1]], dim=1)
        # an empty document has no final state: only the bias path remains
        return rep * (lengths > 0).to(rep.dtype).unsqueeze(1)

    def forward(self, x, lengths):
        return self.fc(self.encode(x, lengths))


def _macro_f1(y_true, y_pred) -> float:
    return macro_metrics(confusion(list(y_true), list(y_pred))).macro_f1


class _TorchClassifier(SentimentClassifier):
    def _build(self, dim):
        raise NotImplementedError

    def _optimizer(self, params):
        raise NotImplementedError

    def _loss(self, out, target):
        raise NotImplementedError

    def _batches(self, n, rng):
        order = rng.permutation(n)
        for i in range(0, n, self.batch_size):
            yield order[i:i + self.batch_size]

    def _forward(self, table, ids, lengths):
        x = F.embedding(torch.from_numpy(ids), table)
        return self.net_(x, torch.from_numpy(lengths))

    def _fit(self, docs, y, val):
        if self.max_len < MIN_SEQUENCE_LENGTH:
            raise ValueError(f"max_len must be at least {MIN_SEQUENCE_LENGTH}")
        torch.manual_seed(self.seed)
        rng = np.random.default_rng(self.seed)
        self.net_ = self._build(self.embeddings.dim)
        opt = self._optimizer(self.net_.parameters())
        ids, lengths, table = index_documents(docs, self.embeddings, self.max_len)
        table = torch.from_numpy(table)
        target = torch.from_numpy(y)

        best_f1, best_state, stale = -1.0, None, 0
        self.history_ = []
        for epoch in range(self.epochs):
            self.net_.train()
            total = 0.0
            for batch in self._batches(len(ids), rng):
                opt.zero_grad()
                out = self._forward(table, ids[batch], lengths[batch])
                loss = self._loss(out, target[batch])
                loss.backward()
                opt.step()
                total += loss.item() * len(batch)
            record = {"epoch": epoch + 1, "loss": total / len(ids)}
            if val is not None:
                f1 = _macro_f1(val[1], self._predict_indices(val[0]))
                record["val_macro_f1"] = f1
                if f1 > best_f1:
                    best_f1, best_state, stale = f1, copy.deepcopy(self.net_.state_dict()), 0
                else:
                    stale += 1
            self.history_.append(record)
            logger.info("%s epoch %d: %s", self.kind, epoch + 1, record)
            if val is not None and stale >= self.patience:
                break
        if best_state is not None:
            self.net_.load_state_dict(best_state)
        self.net_.eval()
        return self

    def _predict_indices(self, docs):
        return np.argmax(self.decision_scores(docs), axis=1)

    def decision_scores(self, docs):
        """Class probabilities, one row per document."""
        self.net_.eval()
        if not docs:
            return np.zeros((0, len(self.classes_)))
        ids, lengths, table = index_documents(docs, self.embeddings, self.max_len)
        table = torch.from_numpy(table)
        out = []
        with torch.no_grad():
            for i in range(0, len(ids), 256):
                out.append(self._probabilities(self._forward(table, ids[i:i + 256],
                                                             lengths[i:i + 256])))
        return torch.cat(out).double().numpy()

    def _tensors(self):
        return {k: v.detach().numpy() for k, v in self.net_.state_dict().items()}

    def _set_tensors(self, tensors, extra):
        self.net_ = self._build(extra["dim"])
        self.net_.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})
        self.net_.eval()

    def _extra_meta(self):
        return {"dim": self.embeddings.dim}


class CNNClassifier(_TorchClassifier):
    """Convolutional classifier: kernel widths 1-5, 100 filters each, Adam, NLL loss."""

    kind = "cnn"

    def __init__(self, embeddings=None, kernel_sizes=(1, 2, 3, 4, 5), n_filters=100,
                 lr=1e-3, betas=(0.9, 0.999), eps=1e-8, dropout=0.0, weight_decay=0.0,
                 epochs=20, batch_size=32, patience=3, max_len=64, seed=0):
        self.embeddings = embeddings
        self.kernel_sizes = kernel_sizes
        self.n_filters = n_filters
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.dropout = dropout
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.max_len = max_len
        self.seed = seed

    def _build(self, dim):
        if max(self.kernel_sizes) > self.max_len:
            raise ValueError("largest kernel exceeds max_len")
        return TextCNN(dim, self.n_filters, tuple(self.kernel_sizes), len(self.classes_),
                       self.dropout)

    def _optimizer(self, params):
        return torch.optim.Adam(params, lr=self.lr, betas=tuple(self.betas), eps=self.eps,
                                weight_decay=self.weight_decay)

    def _loss(self, out, target):
        return F.nll_loss(out, target)

    def _probabilities(self, out):
        return out.exp()


class BiLSTMClassifier(_TorchClassifier):
    """Four stacked bidirectional LSTM layers (128 units per direction), SGD, cross-entropy."""

    kind = "bilstm"

    def __init__(self, embeddings=None, hidden_size=128, num_layers=4, lr=1e-3,
                 dropout=0.0, epochs=20, batch_size=32, patience=3, max_len=64, seed=0):
        self.embeddings = embeddings
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.lr = lr
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.max_len = max_len
        self.seed = seed

    def _build(self, dim):
        if self.hidden_size < 1 or self.num_layers < 1:
            raise ValueError("hidden_size and num_layers must be positive")
        return BiLSTM(dim, self.hidden_size, self.num_layers, len(self.classes_), self.dropout)

    def _optimizer(self, params):
        return torch.optim.SGD(params, lr=self.lr)

    def _loss(self, out, target):
        return F.cross_entropy(out, target)

    def _probabilities(self, out):
        return F.softmax(out, dim=1)
