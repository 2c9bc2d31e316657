"""Building blocks for the sequence models: embeddings, LSTM stacks,
width-preserving convolution stacks, bilinear attention, dropout.

Each layer forward is a single fused autodiff node with a hand-written
backward pass; per-op graph overhead dominates runtime otherwise, and the
online phase takes millions of single-example gradient steps.  The fused
backwards are checked against central finite differences in the test suite
for every architecture pair.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, softmax


def uniform_param(rng, shape, scale, dtype):
    return Tensor(rng.uniform(-scale, scale, shape).astype(dtype), requires_grad=True)


def apply_dropout(x, rate, rng):
    """Inverted dropout; call only in training mode with rate > 0."""
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) < keep).astype(x.data.dtype) / keep
    return x * Tensor(mask)


class Embedding:
    INIT_SCALE = 0.1

    def __init__(self, count, dim, rng, dtype):
        self.W = uniform_param(rng, (count, dim), self.INIT_SCALE, dtype)

    def __call__(self, ids):
        W = self.W
        ids = np.asarray(ids)
        data = W.data[ids]

        def vjp(g):
            # scatter-add as a one-hot GEMM; faster than np.add.at here
            flat_ids = ids.reshape(-1)
            onehot = np.zeros((flat_ids.size, W.data.shape[0]), dtype=W.data.dtype)
            onehot[np.arange(flat_ids.size), flat_ids] = 1.0
            return onehot.T @ g.reshape(flat_ids.size, -1)

        return Tensor._make(data, ((W, vjp),))

    def append_rows(self, count, rng):
        """Grow the table by `count` freshly initialized rows."""
        new = rng.uniform(-self.INIT_SCALE, self.INIT_SCALE,
                          (count, self.W.data.shape[1])).astype(self.W.data.dtype)
        self.W = Tensor(np.concatenate([self.W.data, new], axis=0), requires_grad=True)

    def params(self, prefix):
        return {f"{prefix}.W": self.W}


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _lstm_layer(x, Wx, Wh, b, h0, c0):
    """Run one LSTM layer over a full sequence as a single graph node.

    Output is packed (B, T+1, H): rows 0..T-1 are the hidden states, row T is
    the final cell state (so callers can read the final (h, c) with slices).
    """
    X, WxD, WhD, bD = x.data, Wx.data, Wh.data, b.data
    B, T, _ = X.shape
    H = WhD.shape[0]
    xp = X @ WxD + bD  # (B, T, 4H)
    hs = np.empty((B, T + 1, H), dtype=X.dtype)
    gates = np.empty((B, T, 4 * H), dtype=X.dtype)
    tcs = np.empty((B, T, H), dtype=X.dtype)
    cs = np.empty((B, T, H), dtype=X.dtype)
    h, c = h0.data, c0.data
    for t in range(T):
        g = xp[:, t] + h @ WhD
        i = _sigmoid(g[:, :H])
        f = _sigmoid(g[:, H:2 * H])
        u = np.tanh(g[:, 2 * H:3 * H])
        o = _sigmoid(g[:, 3 * H:])
        c = f * c + i * u
        tc = np.tanh(c)
        h = o * tc
        gates[:, t, :H], gates[:, t, H:2 * H] = i, f
        gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:] = u, o
        cs[:, t], tcs[:, t], hs[:, t] = c, tc, h
    hs[:, T] = c

    cache = {}

    def run_backward(g):
        # one shared BPTT sweep; per-input vjps read from the cache
        if cache:
            return
        dxp = np.empty((B, T, 4 * H), dtype=X.dtype)
        dh_next = np.zeros((B, H), dtype=X.dtype)
        dc_next = g[:, T].astype(X.dtype, copy=True)
        WhT = WhD.T
        for t in range(T - 1, -1, -1):
            i, f = gates[:, t, :H], gates[:, t, H:2 * H]
            u, o = gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:]
            tc = tcs[:, t]
            c_prev = cs[:, t - 1] if t > 0 else c0.data
            dh = g[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dxp[:, t, :H] = dc * u * i * (1.0 - i)
            dxp[:, t, H:2 * H] = dc * c_prev * f * (1.0 - f)
            dxp[:, t, 2 * H:3 * H] = dc * i * (1.0 - u * u)
            dxp[:, t, 3 * H:] = dh * tc * o * (1.0 - o)
            dg = dxp[:, t]
            dh_next = dg @ WhT
            dc_next = dc * f
        cache["dxp"] = dxp
        cache["dh0"] = dh_next
        cache["dc0"] = dc_next

    def vjp_x(g):
        run_backward(g)
        return cache["dxp"] @ WxD.T

    def vjp_Wx(g):
        run_backward(g)
        return X.reshape(B * T, -1).T @ cache["dxp"].reshape(B * T, 4 * H)

    def vjp_Wh(g):
        run_backward(g)
        h_prev = np.concatenate([h0.data[:, None, :], hs[:, :T - 1]], axis=1)
        return h_prev.reshape(B * T, H).T @ cache["dxp"].reshape(B * T, 4 * H)

    def vjp_b(g):
        run_backward(g)
        return cache["dxp"].sum(axis=(0, 1))

    def vjp_h0(g):
        run_backward(g)
        return cache["dh0"]

    def vjp_c0(g):
        run_backward(g)
        return cache["dc0"]

    return Tensor._make(
        hs,
        ((x, vjp_x), (Wx, vjp_Wx), (Wh, vjp_Wh), (b, vjp_b),
         (h0, vjp_h0), (c0, vjp_c0)),
    )


class LSTM:
    """Unidirectional stacked LSTM; gate packing is (input, forget, cell, output)."""

    INIT_SCALE = 0.08

    def __init__(self, input_dim, hidden, layers, rng, dtype):
        self.hidden = hidden
        self.cells = []
        for layer in range(layers):
            din = input_dim if layer == 0 else hidden
            Wx = uniform_param(rng, (din, 4 * hidden), self.INIT_SCALE, dtype)
            Wh = uniform_param(rng, (hidden, 4 * hidden), self.INIT_SCALE, dtype)
            b = np.zeros(4 * hidden, dtype=dtype)
            b[hidden:2 * hidden] = 1.0  # forget-gate bias
            self.cells.append((Wx, Wh, Tensor(b, requires_grad=True)))

    def __call__(self, x, init=None, dropout=0.0, rng=None):
        """x: (B, T, D_in) -> (top-layer outputs (B, T, H), per-layer final (h, c))."""
        B, T = x.data.shape[0], x.data.shape[1]
        dtype = self.cells[0][0].data.dtype
        finals = []
        for layer, (Wx, Wh, b) in enumerate(self.cells):
            if dropout > 0.0 and layer > 0:
                x = apply_dropout(x, dropout, rng)
            if init is not None:
                h0, c0 = init[min(layer, len(init) - 1)]
            else:
                zeros = np.zeros((B, self.hidden), dtype=dtype)
                h0, c0 = Tensor(zeros), Tensor(zeros.copy())
            packed = _lstm_layer(x, Wx, Wh, b, h0, c0)
            x = packed[:, :T]
            finals.append((packed[:, T - 1], packed[:, T]))
        return x, finals

    def params(self, prefix):
        out = {}
        for layer, (Wx, Wh, b) in enumerate(self.cells):
            out[f"{prefix}.l{layer}.Wx"] = Wx
            out[f"{prefix}.l{layer}.Wh"] = Wh
            out[f"{prefix}.l{layer}.b"] = b
        return out


def _conv_layer(x, W, b):
    """Kernel-3 same-padding convolution + tanh as a single graph node."""
    X, WD = x.data, W.data
    B, T, C = X.shape
    padded = np.zeros((B, T + 2, C), dtype=X.dtype)
    padded[:, 1:T + 1] = X
    windows = np.concatenate([padded[:, 0:T], padded[:, 1:T + 1], padded[:, 2:T + 2]],
                             axis=2)  # (B, T, 3C)
    y = np.tanh(windows @ WD + b.data)

    cache = {}

    def dz(g):
        if "dz" not in cache:
            cache["dz"] = g * (1.0 - y * y)
        return cache["dz"]

    def vjp_x(g):
        dwin = dz(g) @ WD.T  # (B, T, 3C)
        dx = dwin[:, :, C:2 * C].copy()
        dx[:, :T - 1] += dwin[:, 1:, :C]
        dx[:, 1:] += dwin[:, :T - 1, 2 * C:]
        return dx

    def vjp_W(g):
        return windows.reshape(B * T, 3 * C).T @ dz(g).reshape(B * T, -1)

    def vjp_b(g):
        return dz(g).sum(axis=(0, 1))

    return Tensor._make(y, ((x, vjp_x), (W, vjp_W), (b, vjp_b)))


class ConvStack:
    """Stack of kernel-3 convolutions with same padding, tanh activations.

    Output length always equals input length, so the decoder can emit one
    token distribution per input position.
    """

    INIT_SCALE = 0.08
    KERNEL = 3

    def __init__(self, input_dim, hidden, layers, rng, dtype):
        self.filters = []
        for layer in range(layers):
            din = input_dim if layer == 0 else hidden
            W = uniform_param(rng, (self.KERNEL * din, hidden), self.INIT_SCALE, dtype)
            b = Tensor(np.zeros(hidden, dtype=dtype), requires_grad=True)
            self.filters.append((W, b))

    def __call__(self, x, dropout=0.0, rng=None):
        for layer, (W, b) in enumerate(self.filters):
            if dropout > 0.0 and layer > 0:
                x = apply_dropout(x, dropout, rng)
            x = _conv_layer(x, W, b)
        return x

    def params(self, prefix):
        out = {}
        for layer, (W, b) in enumerate(self.filters):
            out[f"{prefix}.l{layer}.W"] = W
            out[f"{prefix}.l{layer}.b"] = b
        return out


class BilinearAttention:
    """context_q = sum_i softmax_i(q^T W k_i) k_i  -- a convex combination."""

    INIT_SCALE = 0.08

    def __init__(self, dim, rng, dtype):
        self.W = uniform_param(rng, (dim, dim), self.INIT_SCALE, dtype)

    def __call__(self, queries, keys):
        """queries (B, Q, D), keys (B, M, D) -> context (B, Q, D)."""
        W = self.W
        Q, K = queries.data, keys.data
        qw = Q @ W.data  # (B, Q, D)
        scores = qw @ np.swapaxes(K, -1, -2)  # (B, Q, M)
        scores -= scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        alphas = e / e.sum(axis=-1, keepdims=True)
        ctx = alphas @ K

        cache = {}

        def dparts(g):
            if not cache:
                dalphas = g @ np.swapaxes(K, -1, -2)  # (B, Q, M)
                dscores = alphas * (dalphas - (dalphas * alphas).sum(-1, keepdims=True))
                cache["dscores"] = dscores
                cache["dqw"] = dscores @ K
            return cache

        def vjp_q(g):
            return dparts(g)["dqw"] @ W.data.T

        def vjp_W(g):
            dqw = dparts(g)["dqw"]
            B, Qn, D = Q.shape
            return Q.reshape(B * Qn, D).T @ dqw.reshape(B * Qn, D)

        def vjp_k(g):
            dscores = dparts(g)["dscores"]
            return (np.swapaxes(alphas, -1, -2) @ g
                    + np.swapaxes(dscores, -1, -2) @ qw)

        return Tensor._make(ctx, ((queries, vjp_q), (W, vjp_W), (keys, vjp_k)))

    def weights(self, queries, keys):
        """Attention distributions (B, Q, M), via the generic graph ops."""
        scores = (queries @ self.W) @ keys.swap()
        return softmax(scores)

    def params(self, prefix):
        return {f"{prefix}.W": self.W}


class Linear:
    INIT_SCALE = 0.08

    def __init__(self, input_dim, output_dim, rng, dtype):
        self.W = uniform_param(rng, (input_dim, output_dim), self.INIT_SCALE, dtype)
        self.b = Tensor(np.zeros(output_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        W, b = self.W, self.b
        data = x.data @ W.data + b.data

        def vjp_x(g):
            return g @ W.data.T

        def vjp_W(g):
            flat = x.data.reshape(-1, x.data.shape[-1])
            return flat.T @ g.reshape(-1, g.shape[-1])

        def vjp_b(g):
            return g.reshape(-1, g.shape[-1]).sum(axis=0)

        return Tensor._make(data, ((x, vjp_x), (W, vjp_W), (b, vjp_b)))

    def params(self, prefix):
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


def cross_entropy(logits, target_ids):
    """Mean negative log-likelihood over all positions; a single fused node."""
    z = logits.data
    ids = np.asarray(target_ids)
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    denom = e.sum(axis=-1, keepdims=True)
    probs = e / denom
    logp = (z - zmax) - np.log(denom)
    picked = np.take_along_axis(logp, ids[..., None], axis=-1)[..., 0]
    n = picked.size
    loss = -picked.sum() / n

    def vjp(g):
        d = probs.copy()
        flat = d.reshape(-1, d.shape[-1])
        flat[np.arange(flat.shape[0]), ids.reshape(-1)] -= 1.0
        d *= g / n
        return d

    return Tensor._make(np.asarray(loss), ((logits, vjp),))


def per_example_nll(logits_data, target_ids):
    """Per-example mean NLL from raw logits (no graph); shape (B,)."""
    z = logits_data
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    logp = (z - zmax) - np.log(e.sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, np.asarray(target_ids)[..., None], axis=-1)[..., 0]
    return -picked.mean(axis=-1)


def l2_penalty(tensors, row_ids=None):
    """sum of squares over the given parameters, as one node.

    row_ids restricts the FIRST tensor to the given rows (used to penalize
    only newly added embedding rows).
    """
    parts = []
    for idx, p in enumerate(tensors):
        if idx == 0 and row_ids is not None:
            parts.append(p.data[row_ids])
        else:
            parts.append(p.data)
    total = np.asarray(sum(float(np.square(part).sum()) for part in parts))

    vjps = []
    for idx, p in enumerate(tensors):
        def vjp(g, idx=idx, p=p):
            if idx == 0 and row_ids is not None:
                z = np.zeros_like(p.data)
                z[row_ids] = 2.0 * g * p.data[row_ids]
                return z
            return 2.0 * g * p.data
        vjps.append((p, vjp))
    return Tensor._make(total.astype(tensors[0].data.dtype), vjps)
