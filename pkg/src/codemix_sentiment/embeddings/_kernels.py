"""Compiled inner loops for subword skip-gram training.

The kernels release the GIL so several threads can run them against the
same matrices without locks (hogwild). Each thread owns its RNG state.
"""

import math

import numpy as np
from numba import njit

MAX_SIGMOID = 30.0


@njit(cache=True, nogil=True)
def next_random(state):
    # xorshift64*
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(2685821657736338717)


@njit(cache=True, nogil=True)
def uniform(state):
    return (next_random(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True)
def sigmoid(x):
    if x > MAX_SIGMOID:
        x = MAX_SIGMOID
    elif x < -MAX_SIGMOID:
        x = -MAX_SIGMOID
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True, nogil=True)
def binary_update(hidden, out, target, label, lr, grad):
    """One logistic term of the negative-sampling objective.

    Accumulates ``lr * d(-loss)/d(hidden)`` into ``grad``, updates the output
    row in place and returns the term's loss.
    """
    d = hidden.shape[0]
    f = 0.0
    for k in range(d):
        f += out[target, k] * hidden[k]
    s = sigmoid(f)
    g = lr * (label - s)
    for k in range(d):
        grad[k] += g * out[target, k]
        out[target, k] += g * hidden[k]
    if label > 0.5:
        return -math.log(max(s, 1e-30))
    return -math.log(max(1.0 - s, 1e-30))


@njit(cache=True, nogil=True)
def compose(inp, rows, n_rows, hidden):
    d = inp.shape[1]
    for k in range(d):
        hidden[k] = 0.0
    for r in range(n_rows):
        row = rows[r]
        for k in range(d):
            hidden[k] += inp[row, k]
    inv = 1.0 / n_rows
    for k in range(d):
        hidden[k] *= inv


@njit(cache=True, nogil=True)
def apply_input_grad(inp, frozen, rows, n_rows, grad):
    # The step on each composed row is the exact gradient scaled by n_rows, so
    # the composed vector itself moves at the nominal learning rate.
    d = inp.shape[1]
    for r in range(n_rows):
        row = rows[r]
        if frozen[row]:
            continue
        for k in range(d):
            inp[row, k] += grad[k]


@njit(cache=True, nogil=True)
def draw_negative(neg_cdf, state):
    u = uniform(state) * neg_cdf[-1]
    idx = np.searchsorted(neg_cdf, u, side="right")
    return min(idx, neg_cdf.shape[0] - 1)


@njit(cache=True, nogil=True)
def train_sentences(tokens, bounds, s_lo, s_hi, inp, out, frozen, sub_ptr, sub_idx,
                    keep_prob, neg_cdf, window, negative, lr0, total_work, work_start,
                    work_scale, state, stats):
    """Train on sentences ``s_lo..s_hi``.

    ``stats`` receives (loss sum, number of logistic terms, words processed).
    The learning rate decays linearly with global progress, estimated as
    ``work_start + work_scale * local_words`` out of ``total_work``.
    """
    d = inp.shape[1]
    V = out.shape[0]
    hidden = np.empty(d, dtype=inp.dtype)
    grad = np.empty(d, dtype=inp.dtype)
    max_rows = 1
    for w in range(V):
        n = sub_ptr[w + 1] - sub_ptr[w] + 1
        if n > max_rows:
            max_rows = n
    rows = np.empty(max_rows, dtype=np.int64)
    max_len = 0
    for s in range(s_lo, s_hi):
        if bounds[s + 1] - bounds[s] > max_len:
            max_len = bounds[s + 1] - bounds[s]
    buf = np.empty(max(max_len, 1), dtype=np.int64)

    local = 0
    loss = 0.0
    n_terms = 0
    for s in range(s_lo, s_hi):
        a = bounds[s]
        b = bounds[s + 1]
        n = 0
        for p in range(a, b):
            w = tokens[p]
            if keep_prob[w] < 1.0 and uniform(state) > keep_prob[w]:
                continue
            buf[n] = w
            n += 1
        local += b - a
        progress = (work_start + work_scale * local) / total_work
        lr = lr0 * (1.0 - progress)
        if lr < 0.0:
            lr = 0.0
        for i in range(n):
            center = buf[i]
            rows[0] = center
            n_rows = 1
            for q in range(sub_ptr[center], sub_ptr[center + 1]):
                rows[n_rows] = sub_idx[q]
                n_rows += 1
            span = 1 + np.int64(next_random(state) % np.uint64(window))
            lo = max(0, i - span)
            hi = min(n, i + span + 1)
            for j in range(lo, hi):
                if j == i:
                    continue
                compose(inp, rows, n_rows, hidden)
                for k in range(d):
                    grad[k] = 0.0
                target = buf[j]
                loss += binary_update(hidden, out, target, 1.0, lr, grad)
                n_terms += 1
                for _ in range(negative):
                    neg = target
                    tries = 0
                    while neg == target and tries < 10 and V > 1:
                        neg = draw_negative(neg_cdf, state)
                        tries += 1
                    if neg == target:
                        continue
                    loss += binary_update(hidden, out, neg, 0.0, lr, grad)
                    n_terms += 1
                apply_input_grad(inp, frozen, rows, n_rows, grad)
    stats[0] += loss
    stats[1] += n_terms
    stats[2] += local
