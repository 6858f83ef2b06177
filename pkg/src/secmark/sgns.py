"""Mini-batch skip-gram / PV-DBOW training with negative sampling."""

import numpy as np
from numba import njit


@njit(cache=True)
def scatter_add(target, rows, values):
    """``np.add.at(target, rows, values)`` for 2-D ``target``, applied in row order."""
    flat_rows = rows.ravel()
    vals = values.reshape(flat_rows.size, target.shape[1])
    for r in range(flat_rows.size):
        target[flat_rows[r]] += vals[r]


def noise_distribution(counts, power=0.75):
    p = np.asarray(counts, dtype=np.float64) ** power
    total = p.sum()
    if total <= 0:
        p = np.ones_like(p)
        total = p.sum()
    return np.cumsum(p / total)


def draw_negatives(rng, cdf, shape):
    idx = np.searchsorted(cdf, rng.random(shape), side="right")
    return np.minimum(idx, cdf.size - 1)


@njit(cache=True)
def _sgns_batch(w_in, w_out, inputs, targets, lr, update_out):
    # gradients use the pre-update vectors of the whole batch, then are applied in order
    B, K = targets.shape
    dim = w_in.shape[1]
    coef = np.empty((B, K))
    loss = 0.0
    for b in range(B):
        for k in range(K):
            s = 0.0
            for j in range(dim):
                s += w_in[inputs[b], j] * w_out[targets[b, k], j]
            if k == 0:
                coef[b, k] = 0.5 * (1.0 + np.tanh(0.5 * s)) - 1.0
                loss += np.logaddexp(0.0, -s)
            else:
                coef[b, k] = 0.5 * (1.0 + np.tanh(0.5 * s))
                loss += np.logaddexp(0.0, s)
    grad_v = np.zeros((B, dim))
    for b in range(B):
        for k in range(K):
            c = coef[b, k]
            for j in range(dim):
                grad_v[b, j] += c * w_out[targets[b, k], j]
    if update_out:
        v_old = np.empty((B, dim))
        for b in range(B):
            v_old[b] = w_in[inputs[b]]
        for b in range(B):
            for k in range(K):
                c = lr * coef[b, k]
                for j in range(dim):
                    w_out[targets[b, k], j] -= c * v_old[b, j]
    for b in range(B):
        for j in range(dim):
            w_in[inputs[b], j] -= lr * grad_v[b, j]
    return loss / B


def sgns_step(w_in, w_out, inputs, outputs, negs, lr, update_out=True):
    """One mini-batch step; returns the batch's mean negative log-likelihood."""
    targets = np.ascontiguousarray(np.concatenate([outputs[:, None], negs], axis=1), dtype=np.int64)
    return float(_sgns_batch(w_in, w_out, np.ascontiguousarray(inputs, dtype=np.int64), targets,
                             float(lr), update_out))


def sgns_train(inputs, outputs, n_in, n_out, dim, out_counts, negatives=5, epochs=5, lr=0.025,
               min_lr=1e-4, batch=512, rng=None):
    """Train input/output vectors on (input, output) id pairs; returns (w_in, w_out, losses)."""
    rng = np.random.default_rng(rng)
    inputs = np.asarray(inputs, dtype=np.int64)
    outputs = np.asarray(outputs, dtype=np.int64)
    w_in = (rng.random((n_in, dim)) - 0.5) / dim
    w_out = np.zeros((n_out, dim))
    cdf = noise_distribution(out_counts)
    n = inputs.size
    total_steps = max(1, epochs * ((n + batch - 1) // batch))
    step = 0
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = []
        for start in range(0, n, batch):
            b = order[start:start + batch]
            rate = max(min_lr, lr * (1.0 - step / total_steps))
            negs = draw_negatives(rng, cdf, (b.size, negatives))
            epoch_loss.append(sgns_step(w_in, w_out, inputs[b], outputs[b], negs, rate))
            step += 1
        losses.append(float(np.mean(epoch_loss)) if epoch_loss else 0.0)
    return w_in, w_out, losses
