"""LSTM / BLSTM sentence encoder and the convolutional heading encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from .tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    gather_rows,
    matmul,
    max_over_time,
    mul,
    relu,
    reshape,
    sigmoid,
    tanh,
)


@dataclass
class LstmParams:
    """Gate blocks are laid out [input | forget | output | candidate] along the 4H axis."""

    W_x: Tensor  # (E, 4H)
    W_h: Tensor  # (H, 4H)
    b: Tensor  # (4H,)

    @property
    def hidden(self):
        return self.W_h.shape[0]


def init_lstm(rng, input_dim, hidden, forget_bias=1.0) -> dict:
    scale_x = np.sqrt(6.0 / (input_dim + 4 * hidden))
    scale_h = np.sqrt(6.0 / (5 * hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = forget_bias
    return {"W_x": rng.uniform(-scale_x, scale_x, (input_dim, 4 * hidden)),
            "W_h": rng.uniform(-scale_h, scale_h, (hidden, 4 * hidden)),
            "b": b}


def lstm_cell_step(x, h, c, params: LstmParams):
    """One LSTM step from primitive ops; returns (h', c')."""
    x, h, c = as_tensor(x), as_tensor(h), as_tensor(c)
    H = params.hidden
    if h.shape[-1] != H or c.shape[-1] != H:
        raise ShapeError(f"lstm_cell_step: state shape mismatch {h.shape} vs {c.shape} (H={H})")
    z = add(add(matmul(x, params.W_x), matmul(h, params.W_h)), params.b)
    i, f, o, g = (z[..., k * H:(k + 1) * H] for k in range(4))
    i, f, o, g = sigmoid(i), sigmoid(f), sigmoid(o), tanh(g)
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def lstm_sequence(zx, W_h, mask, reverse=False) -> Tensor:
    """Run the recurrence over pre-projected inputs.

    ``zx`` is (N, T, 4H) = x W_x + b, ``mask`` (N, T) marks real tokens.  At a
    masked position the state is carried through unchanged.  Returns all
    hidden states (N, T, H).  Backward is hand-written BPTT.
    """
    zx, W_h = as_tensor(zx), as_tensor(W_h)
    N, T, G = zx.shape
    H = W_h.shape[0]
    if G != 4 * H or W_h.shape[1] != 4 * H:
        raise ShapeError(f"lstm_sequence: shape mismatch {zx.shape} vs {W_h.shape}")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (N, T):
        raise ShapeError(f"lstm_sequence: mask shape mismatch {mask.shape} vs {(N, T)}")
    steps = range(T - 1, -1, -1) if reverse else range(T)
    Wh = W_h.data
    hs = np.zeros((N, T, H))
    cache = []
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    for t in steps:
        z = zx.data[:, t] + h @ Wh
        i = 0.5 * (1.0 + np.tanh(0.5 * z[:, :H]))
        f = 0.5 * (1.0 + np.tanh(0.5 * z[:, H:2 * H]))
        o = 0.5 * (1.0 + np.tanh(0.5 * z[:, 2 * H:3 * H]))
        g = np.tanh(z[:, 3 * H:])
        cn = f * c + i * g
        tc = np.tanh(cn)
        hn = o * tc
        m = mask[:, t:t + 1]
        cache.append((t, h, c, i, f, o, g, tc, m))
        h = m * hn + (1.0 - m) * h
        c = m * cn + (1.0 - m) * c
        hs[:, t] = h

    def back(gh):
        dzx = np.zeros_like(zx.data)
        dWh = np.zeros_like(Wh)
        dh = np.zeros((N, H))
        dc = np.zeros((N, H))
        for t, h_prev, c_prev, i, f, o, g, tc, m in reversed(cache):
            dh = dh + gh[:, t]
            dhn = m * dh
            dcn = m * dc + dhn * o * (1.0 - tc * tc)
            dz = np.concatenate([dcn * g * i * (1.0 - i), dcn * c_prev * f * (1.0 - f),
                                 dhn * tc * o * (1.0 - o), dcn * i * (1.0 - g * g)], axis=1)
            dzx[:, t] = dz
            dWh += h_prev.T @ dz
            dc = dcn * f + (1.0 - m) * dc
            dh = dz @ Wh.T + (1.0 - m) * dh
        return dzx, dWh

    return Tensor(hs, _parents=(zx, W_h), _backward=back)


def blstm_encode(ids, embeddings, forward: LstmParams, backward: LstmParams, sent_len=None,
                 pooling="final") -> Tensor:
    """Encode padded token-id rows (N, T) into (N, 2H).

    Index 0 is padding.  ``pooling='final'`` concatenates the final state of
    each direction; ``'mean'`` averages hidden states over real tokens.
    Rows that are all padding encode to zeros.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    if sent_len is not None:
        ids = ids[:, :sent_len]
    mask = ids != 0
    # trim trailing all-padding columns; they never change the result
    used = int(mask.any(axis=0).nonzero()[0].max()) + 1 if mask.any() else 1
    ids, mask = ids[:, :used], mask[:, :used]
    x = gather_rows(embeddings, ids)  # (N, T, E)
    outs = []
    for params, rev in ((forward, False), (backward, True)):
        zx = add(matmul(x, params.W_x), params.b)
        hs = lstm_sequence(zx, params.W_h, mask, reverse=rev)
        if pooling == "final":
            outs.append(hs[:, 0] if rev else hs[:, used - 1])
        elif pooling == "mean":
            counts = np.maximum(mask.sum(axis=1, keepdims=True), 1)
            weights = (mask / counts)[:, :, None]
            outs.append(_mean_time(hs, weights))
        else:
            raise ConfigError(f"unknown pooling {pooling!r}")
    return concat(outs, axis=-1)


def _mean_time(hs, weights):
    hs = as_tensor(hs)
    w = np.broadcast_to(weights, hs.shape)
    return Tensor((hs.data * w).sum(axis=1), _parents=(hs,),
                  _backward=lambda g: (g[:, None, :] * w,))


def window_index(ids, kernel):
    """(B, L) ids -> (B, L - kernel + 1, kernel) sliding windows."""
    ids = np.asarray(ids, dtype=np.int64)
    L = ids.shape[-1]
    if kernel > L:
        raise ConfigError(f"kernel {kernel} exceeds heading length {L}")
    starts = np.arange(L - kernel + 1)[:, None] + np.arange(kernel)[None, :]
    return ids[..., starts]


def conv_maxpool_encode(ids, embeddings, W, b, kernel) -> Tensor:
    """Valid 1-D convolution (stride 1) + ReLU + max over time: (B, head_len) -> (B, F)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    win = window_index(ids, kernel)  # (B, P, k)
    B, P, k = win.shape
    E = as_tensor(embeddings).shape[1]
    W = as_tensor(W)
    if W.shape[0] != k * E:
        raise ShapeError(f"conv weights shape mismatch {W.shape} vs kernel*E={k * E}")
    x = reshape(gather_rows(embeddings, win), (B, P, k * E))
    return max_over_time(relu(add(matmul(x, W), b)))
