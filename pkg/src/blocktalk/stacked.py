"""Ensemble-stacked execution: train k model copies in one fused pass.

Online adaptation trains k independent copies of the same architecture for S
gradient steps per interaction; on a CPU the per-copy Python overhead
dominates.  Here every parameter carries a leading copy axis (k, ...) and the
layer forwards/backwards are batched over it, so one step updates all copies.
Copies never mix: every op is block-diagonal over the copy axis, which keeps
the result equal to training the copies one at a time (per-copy loss means
are summed, so each copy's gradient is exactly its own).

Single copies are exposed as view models whose parameter arrays are numpy
views into the stack, so prediction and checkpointing reuse the plain model
code with zero copying.
"""

from __future__ import annotations

import numpy as np

from .models import Model
from .nn import per_example_nll
from .tensor import Tensor, concat, tanh


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# -- stacked fused layers ------------------------------------------------
# activations are (k, B, T, C); weights are (k, ...)


def _emb(table, ids):
    """table (k, V, D), ids (k, B, T) -> (k, B, T, D)."""
    ids = np.asarray(ids)
    k = table.data.shape[0]
    data = table.data[np.arange(k)[:, None, None], ids]

    def vjp(g):
        V = table.data.shape[1]
        flat_ids = ids.reshape(k, -1)
        onehot = np.zeros((k, flat_ids.shape[1], V), dtype=table.data.dtype)
        np.put_along_axis(onehot, flat_ids[:, :, None], 1.0, axis=2)
        return np.matmul(onehot.transpose(0, 2, 1), g.reshape(k, -1, g.shape[-1]))

    return Tensor._make(data, ((table, vjp),))


def _lstm_layer(x, Wx, Wh, b, h0, c0):
    """One LSTM layer over the sequence; output packed (k, B, T+1, H)."""
    X, WxD, WhD, bD = x.data, Wx.data, Wh.data, b.data
    k, B, T, Din = X.shape
    H = WhD.shape[1]
    xp = np.matmul(X.reshape(k, B * T, Din), WxD).reshape(k, B, T, 4 * H)
    xp += bD[:, None, None, :]
    hs = np.empty((k, B, T + 1, H), dtype=X.dtype)
    gates = np.empty((k, B, T, 4 * H), dtype=X.dtype)
    tcs = np.empty((k, B, T, H), dtype=X.dtype)
    cs = np.empty((k, B, T, H), dtype=X.dtype)
    h, c = h0.data, c0.data  # (k, B, H)
    for t in range(T):
        g = xp[:, :, t] + np.matmul(h, WhD)
        i = _sigmoid(g[:, :, :H])
        f = _sigmoid(g[:, :, H:2 * H])
        u = np.tanh(g[:, :, 2 * H:3 * H])
        o = _sigmoid(g[:, :, 3 * H:])
        c = f * c + i * u
        tc = np.tanh(c)
        h = o * tc
        gates[:, :, t, :H], gates[:, :, t, H:2 * H] = i, f
        gates[:, :, t, 2 * H:3 * H], gates[:, :, t, 3 * H:] = u, o
        cs[:, :, t], tcs[:, :, t], hs[:, :, t] = c, tc, h
    hs[:, :, T] = c

    cache = {}

    def run_backward(g):
        if cache:
            return
        dxp = np.empty((k, B, T, 4 * H), dtype=X.dtype)
        dh_next = np.zeros((k, B, H), dtype=X.dtype)
        dc_next = g[:, :, T].astype(X.dtype, copy=True)
        WhT = WhD.transpose(0, 2, 1)
        for t in range(T - 1, -1, -1):
            i, f = gates[:, :, t, :H], gates[:, :, t, H:2 * H]
            u, o = gates[:, :, t, 2 * H:3 * H], gates[:, :, t, 3 * H:]
            tc = tcs[:, :, t]
            c_prev = cs[:, :, t - 1] if t > 0 else c0.data
            dh = g[:, :, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dxp[:, :, t, :H] = dc * u * i * (1.0 - i)
            dxp[:, :, t, H:2 * H] = dc * c_prev * f * (1.0 - f)
            dxp[:, :, t, 2 * H:3 * H] = dc * i * (1.0 - u * u)
            dxp[:, :, t, 3 * H:] = dh * tc * o * (1.0 - o)
            dh_next = np.matmul(dxp[:, :, t], WhT)
            dc_next = dc * f
        cache["dxp"] = dxp
        cache["dh0"] = dh_next
        cache["dc0"] = dc_next

    def vjp_x(g):
        run_backward(g)
        flat = cache["dxp"].reshape(k, B * T, 4 * H)
        return np.matmul(flat, WxD.transpose(0, 2, 1)).reshape(X.shape)

    def vjp_Wx(g):
        run_backward(g)
        return np.matmul(X.reshape(k, B * T, Din).transpose(0, 2, 1),
                         cache["dxp"].reshape(k, B * T, 4 * H))

    def vjp_Wh(g):
        run_backward(g)
        h_prev = np.concatenate([h0.data[:, :, None, :], hs[:, :, :T - 1]], axis=2)
        return np.matmul(h_prev.reshape(k, B * T, H).transpose(0, 2, 1),
                         cache["dxp"].reshape(k, B * T, 4 * H))

    def vjp_b(g):
        run_backward(g)
        return cache["dxp"].sum(axis=(1, 2))

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


def _conv_layer(x, W, b):
    X, WD = x.data, W.data
    k, B, T, C = X.shape
    padded = np.zeros((k, B, T + 2, C), dtype=X.dtype)
    padded[:, :, 1:T + 1] = X
    windows = np.concatenate(
        [padded[:, :, 0:T], padded[:, :, 1:T + 1], padded[:, :, 2:T + 2]], axis=3)
    H = WD.shape[-1]
    y = np.tanh(np.matmul(windows.reshape(k, B * T, 3 * C), WD).reshape(k, B, T, H)
                + b.data[:, None, None, :])

    cache = {}

    def dz(g):
        if "dz" not in cache:
            cache["dz"] = g * (1.0 - y * y)
        return cache["dz"]

    def vjp_x(g):
        flat = dz(g).reshape(k, B * T, H)
        dwin = np.matmul(flat, WD.transpose(0, 2, 1)).reshape(k, B, T, 3 * C)
        dx = dwin[:, :, :, C:2 * C].copy()
        dx[:, :, :T - 1] += dwin[:, :, 1:, :C]
        dx[:, :, 1:] += dwin[:, :, :T - 1, 2 * C:]
        return dx

    def vjp_W(g):
        return np.matmul(windows.reshape(k, B * T, 3 * C).transpose(0, 2, 1),
                         dz(g).reshape(k, B * T, H))

    def vjp_b(g):
        return dz(g).sum(axis=(1, 2))

    return Tensor._make(y, ((x, vjp_x), (W, vjp_W), (b, vjp_b)))


def _attention(queries, keys, W):
    Q, K = queries.data, keys.data  # (k, B, Q, D), (k, B, M, D)
    k = Q.shape[0]
    D = Q.shape[-1]
    qw = np.matmul(Q, W.data[:, None, :, :])
    scores = np.matmul(qw, np.swapaxes(K, -1, -2))
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    alphas = e / e.sum(axis=-1, keepdims=True)
    ctx = np.matmul(alphas, K)

    cache = {}

    def dparts(g):
        if not cache:
            dalphas = np.matmul(g, np.swapaxes(K, -1, -2))
            dscores = alphas * (dalphas - (dalphas * alphas).sum(-1, keepdims=True))
            cache["dscores"] = dscores
            cache["dqw"] = np.matmul(dscores, K)
        return cache

    def vjp_q(g):
        return np.matmul(dparts(g)["dqw"], W.data.transpose(0, 2, 1)[:, None])

    def vjp_W(g):
        dqw = dparts(g)["dqw"].reshape(k, -1, D)
        return np.matmul(Q.reshape(k, -1, D).transpose(0, 2, 1), dqw)

    def vjp_k(g):
        dscores = dparts(g)["dscores"]
        return (np.matmul(np.swapaxes(alphas, -1, -2), g)
                + np.matmul(np.swapaxes(dscores, -1, -2), qw))

    return Tensor._make(ctx, ((queries, vjp_q), (W, vjp_W), (keys, vjp_k)))


def _linear(x, W, b):
    X = x.data
    k = X.shape[0]
    Din, Dout = W.data.shape[1], W.data.shape[2]
    data = (np.matmul(X.reshape(k, -1, Din), W.data).reshape(X.shape[:-1] + (Dout,))
            + b.data[:, None, None, :])

    def vjp_x(g):
        flat = np.matmul(g.reshape(k, -1, Dout), W.data.transpose(0, 2, 1))
        return flat.reshape(X.shape)

    def vjp_W(g):
        return np.matmul(X.reshape(k, -1, Din).transpose(0, 2, 1),
                         g.reshape(k, -1, Dout))

    def vjp_b(g):
        return g.reshape(k, -1, Dout).sum(axis=1)

    return Tensor._make(data, ((x, vjp_x), (W, vjp_W), (b, vjp_b)))


def _cross_entropy_per_copy(logits, target_ids):
    """Sum over copies of the per-copy mean NLL; also returns per-copy values.

    Summing (not averaging) over the copy axis keeps each copy's gradient
    identical to what it would get when trained alone.
    """
    z = logits.data
    ids = np.asarray(target_ids)
    k = z.shape[0]
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    denom = e.sum(axis=-1, keepdims=True)
    probs = e / denom
    logp = (z - zmax) - np.log(denom)
    picked = np.take_along_axis(logp, ids[..., None], axis=-1)[..., 0]
    per_copy = -picked.reshape(k, -1).mean(axis=1)
    n = picked.size // k
    loss = np.asarray(per_copy.sum())

    def vjp(g):
        d = probs.copy()
        flat = d.reshape(-1, d.shape[-1])
        flat[np.arange(flat.shape[0]), ids.reshape(-1)] -= 1.0
        d *= g / n
        return d

    return Tensor._make(loss, ((logits, vjp),)), per_copy


def _l2_penalty(tensors, row_ids=None):
    """Sum of squares across all copies (first tensor optionally row-restricted)."""
    total = 0.0
    for idx, p in enumerate(tensors):
        part = p.data[:, row_ids] if (idx == 0 and row_ids is not None) else p.data
        total += float(np.square(part).sum())

    vjps = []
    for idx, p in enumerate(tensors):
        def vjp(g, idx=idx, p=p):
            if idx == 0 and row_ids is not None:
                z = np.zeros_like(p.data)
                z[:, row_ids] = 2.0 * g * p.data[:, row_ids]
                return z
            return 2.0 * g * p.data
        vjps.append((p, vjp))
    return Tensor._make(np.asarray(total, dtype=tensors[0].data.dtype), vjps)


class StackedModel:
    """k same-architecture copies with parameters stacked on a leading axis."""

    def __init__(self, copies):
        base = copies[0]
        self.k = len(copies)
        self.config = base.config
        self.vocab = base.vocab  # shared: words register in lockstep
        self.params = {}
        for name in base.parameters():
            stackd = np.stack([m.parameters()[name].data for m in copies])
            self.params[name] = Tensor(stackd, requires_grad=True)
        self._views = None

    # -- per-copy views ------------------------------------------------------

    def view(self, i) -> Model:
        """Model whose parameter arrays are views into copy i of the stack."""
        if self._views is None:
            self._views = [None] * self.k
        if self._views[i] is None:
            model = Model(self.config, self.vocab, rng=np.random.default_rng(0))
            for name, p in model.parameters().items():
                p.data = self.params[name].data[i]
            self._views[i] = model
        return self._views[i]

    def grow_vocab(self, words, copy_rngs):
        """Register new words on all copies, each with its own init stream."""
        from .nn import Embedding

        for w in words:
            self.vocab.add(w)
        W = self.params["enc_emb.W"]
        k, V, D = W.data.shape
        n = len(words)
        grown = np.empty((k, V + n, D), dtype=W.data.dtype)
        grown[:, :V] = W.data
        for i in range(k):
            grown[i, V:] = copy_rngs[i].uniform(
                -Embedding.INIT_SCALE, Embedding.INIT_SCALE, (n, D)
            ).astype(W.data.dtype)
        W.data = grown
        self._views = None  # embedding views are stale

    # -- forward ---------------------------------------------------------

    def forward(self, utt_ids, state_ids):
        """utt_ids (k, B, M), state_ids (k, B, 23) -> logits Tensor (k, B, 23, 6)."""
        cfg = self.config
        P = self.params
        E = _emb(P["enc_emb.W"], utt_ids)
        if "encoder.pos.W" in P:
            m = np.asarray(utt_ids).shape[-1]
            pos = P["encoder.pos.W"][:, :m]
            E = E + pos.reshape(pos.data.shape[0], 1, m, pos.data.shape[-1])
        enc_finals = None
        if cfg.encoder == "lstm":
            H, enc_finals = self._lstm(E, "encoder", cfg.enc_layers, None)
        elif cfg.encoder == "conv":
            H = self._conv(E, "encoder", cfg.enc_layers)
        else:
            H = E.mean(axis=-2, keepdims=True)
        S = _emb(P["dec_emb.W"], state_ids)
        if "decoder.pos.W" in P:
            n = np.asarray(state_ids).shape[-1]
            pos = P["decoder.pos.W"][:, :n]
            S = S + pos.reshape(pos.data.shape[0], 1, n, pos.data.shape[-1])
        if cfg.decoder == "lstm":
            F, _ = self._lstm(S, "decoder", cfg.dec_layers, enc_finals)
        else:
            F = self._conv(S, "decoder", cfg.dec_layers)
        ctx = _attention(F, H, P["attn.W"])
        if cfg.fusion == "tanh":
            fused = tanh(_linear(concat([F, ctx], axis=-1),
                                 P["fuse.W"], P["fuse.b"]))
            return _linear(fused, P["out.W"], P["out.b"])
        if cfg.fusion == "gated":
            return _linear(concat([F, ctx, F * ctx], axis=-1),
                           P["out.W"], P["out.b"])
        return _linear(concat([F, ctx], axis=-1), P["out.W"], P["out.b"])

    def _lstm(self, x, prefix, layers, init):
        P = self.params
        k, B, T = x.data.shape[0], x.data.shape[1], x.data.shape[2]
        hidden = P[f"{prefix}.l0.Wh"].data.shape[1]
        finals = []
        for layer in range(layers):
            if init is not None:
                h0, c0 = init[min(layer, len(init) - 1)]
            else:
                zeros = np.zeros((k, B, hidden), dtype=x.data.dtype)
                h0, c0 = Tensor(zeros), Tensor(zeros.copy())
            packed = _lstm_layer(x, P[f"{prefix}.l{layer}.Wx"],
                                 P[f"{prefix}.l{layer}.Wh"],
                                 P[f"{prefix}.l{layer}.b"], h0, c0)
            x = packed[:, :, :T]
            finals.append((packed[:, :, T - 1], packed[:, :, T]))
        return x, finals

    def _conv(self, x, prefix, layers):
        for layer in range(layers):
            x = _conv_layer(x, self.params[f"{prefix}.l{layer}.W"],
                            self.params[f"{prefix}.l{layer}.b"])
        return x

    def loss(self, utt_ids, state_ids, target_ids, l2=0.0, l2_params=None,
             l2_rows=None):
        """Total loss (copy-sum) plus the per-copy NLL values."""
        logits = self.forward(utt_ids, state_ids)
        loss, per_copy = _cross_entropy_per_copy(logits, target_ids)
        if l2 > 0.0 and l2_params:
            loss = loss + float(l2) * _l2_penalty(l2_params, l2_rows)
        return loss, per_copy

    def per_copy_example_nll(self, utt_ids, state_ids, target_ids):
        """(k, B) matrix of per-example losses, no graph kept."""
        logits = self.forward(utt_ids, state_ids)
        return per_example_nll(logits.data, np.asarray(target_ids))


class StackedAdam:
    """Adam over stacked parameters with an externally supplied step count.

    `active` masks which copies get updated; grads of inactive copies must
    already be zero, the mask only protects their moment buffers from decay
    when a logical step is split into per-length groups.
    """

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {}
        self._v = {}

    def _state(self, name, p):
        m = self._m.get(name)
        if m is None or m.shape != p.data.shape:
            fresh_m = np.zeros_like(p.data)
            fresh_v = np.zeros_like(p.data)
            if m is not None:  # embedding table grew
                old = tuple(slice(0, s) for s in m.shape)
                fresh_m[old] = m
                fresh_v[old] = self._v[name]
            self._m[name], self._v[name] = fresh_m, fresh_v
        return self._m[name], self._v[name]

    def step(self, params, t, active=None):
        b1, b2 = self.beta1, self.beta2
        num_scale = self.lr / (1.0 - b1 ** t)
        den_scale = np.sqrt(1.0 / (1.0 - b2 ** t))
        for name, p in params.items():
            g = p.grad
            if g is None:
                continue
            m, v = self._state(name, p)
            if active is None:
                np.multiply(m, b1, out=m)
                m += (1.0 - b1) * g
                np.multiply(v, b2, out=v)
                v += (1.0 - b2) * np.square(g)
                p.data -= num_scale * m / (den_scale * np.sqrt(v) + self.eps)
            else:
                ma = b1 * m[active] + (1.0 - b1) * g[active]
                va = b2 * v[active] + (1.0 - b2) * np.square(g[active])
                m[active] = ma
                v[active] = va
                p.data[active] -= num_scale * ma / (den_scale * np.sqrt(va) + self.eps)


class StackedSGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, t, active=None):
        for p in params.values():
            if p.grad is None:
                continue
            if active is None:
                p.data -= self.lr * p.grad
            else:
                p.data[active] -= self.lr * p.grad[active]


def make_stacked_optimizer(kind, lr):
    if kind == "sgd":
        return StackedSGD(lr)
    if kind == "adam":
        return StackedAdam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")
