"""Network blocks with hand-written backward passes.

Each block keeps only parameter names; values live in a :class:`ParamStore`.
``backward`` methods add parameter gradients into a caller-supplied dict,
so several workers can accumulate into separate buffers.
"""
import numpy as np

from ..tensor_core import log_softmax


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def log_softmax_backward(dlogp, logp):
    return dlogp - np.exp(logp) * dlogp.sum(axis=-1, keepdims=True)


def time_mask(lengths, T):
    return (np.arange(T)[None, :] < np.asarray(lengths)[:, None]).astype(np.float64)


class Linear:
    def __init__(self, store, name, n_in, n_out):
        self.store = store
        self.W = store.add(f"{name}.W", (n_in, n_out))
        self.b = store.add(f"{name}.b", (n_out,), init="zeros")

    def __call__(self, x):
        return x @ self.store[self.W] + self.store[self.b]

    def backward(self, dy, x, grads):
        n_in, n_out = self.store[self.W].shape
        grads[self.W] += x.reshape(-1, n_in).T @ dy.reshape(-1, n_out)
        grads[self.b] += dy.reshape(-1, n_out).sum(axis=0)
        return dy @ self.store[self.W].T


def _pad_for(causal):
    # frames of left/right zero padding for a width-3 window
    return (2, 0) if causal else (1, 1)


def _context(h, causal=False):
    """(N, T, D) -> (N, T, 3D): a three-frame window, zero padded.

    Centered uses frames t-1, t, t+1; causal uses t-2, t-1, t.
    """
    p = np.pad(h, ((0, 0), _pad_for(causal), (0, 0)))
    return np.concatenate([p[:, :-2], p[:, 1:-1], p[:, 2:]], axis=-1)


def _context_backward(dc, causal=False):
    D = dc.shape[-1] // 3
    dp = np.zeros((dc.shape[0], dc.shape[1] + 2, D))
    dp[:, :-2] += dc[..., :D]
    dp[:, 1:-1] += dc[..., D : 2 * D]
    dp[:, 2:] += dc[..., 2 * D :]
    left, _ = _pad_for(causal)
    return dp[:, left : left + dc.shape[1]]


class Encoder:
    """Frame stacking (stride), a tanh input projection, then residual width-3 tanh convolutions.

    Frames past each length are zeroed after every layer, so a padded item
    sees exactly what it would see alone. ``causal`` restricts every window
    to the current and past frames.
    """

    def __init__(self, store, feat_dim, hidden, layers=2, stride=1, causal=False):
        self.stride = stride
        self.causal = causal
        self.inp = Linear(store, "enc.in", feat_dim * stride, hidden)
        self.convs = [Linear(store, f"enc.conv{k}", 3 * hidden, hidden) for k in range(layers)]

    def out_lengths(self, lengths):
        return (np.asarray(lengths, dtype=np.int64) + self.stride - 1) // self.stride

    def _stack(self, x):
        s = self.stride
        if s == 1:
            return x
        N, T, F = x.shape
        T_out = -(-T // s)
        x = np.pad(x, ((0, 0), (0, T_out * s - T), (0, 0)))
        return x.reshape(N, T_out, s * F)

    def forward(self, x, lengths):
        x = self._stack(np.asarray(x, dtype=np.float64))
        lens = self.out_lengths(lengths)
        mask = time_mask(lens, x.shape[1])[..., None]
        h = np.tanh(self.inp(x)) * mask
        cache = {"x": x, "mask": mask, "h0": h, "layers": []}
        for conv in self.convs:
            c = _context(h, self.causal)
            z = np.tanh(conv(c))
            cache["layers"].append((c, z))
            h = (h + z) * mask
        return h, lens, cache

    def backward(self, dh, cache, grads):
        mask = cache["mask"]
        for conv, (c, z) in zip(reversed(self.convs), reversed(cache["layers"])):
            dh = dh * mask
            dpre = dh * (1.0 - z * z)
            dh = dh + _context_backward(conv.backward(dpre, c, grads), self.causal)
        dh = dh * mask
        h0 = cache["h0"]
        self.inp.backward(dh * (1.0 - h0 * h0), cache["x"], grads)


class Decoder:
    """Prediction network: token embedding into a single tanh recurrent cell.

    State 0 is produced from the blank id acting as start symbol; state u has
    consumed labels 1..u.
    """

    def __init__(self, store, vocab_size, hidden, blank=0):
        self.store = store
        self.blank = blank
        self.hidden = hidden
        self.emb = store.add("dec.emb", (vocab_size, hidden), scale=0.5)
        self.Wh = store.add("dec.Wh", (hidden, hidden))
        self.b = store.add("dec.b", (hidden,), init="zeros")

    def inputs(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        y = np.where(labels >= 0, labels, self.blank)
        return np.concatenate([np.full((y.shape[0], 1), self.blank), y], axis=1)

    def step(self, prev, tokens):
        s = self.store
        return np.tanh(s[self.emb][tokens] + prev @ s[self.Wh] + s[self.b])

    def initial(self, n):
        return self.step(np.zeros((n, self.hidden)), np.full(n, self.blank))

    def forward(self, y_in):
        N, U1 = y_in.shape
        g = np.empty((N, U1, self.hidden))
        prev = np.zeros((N, self.hidden))
        for u in range(U1):
            prev = g[:, u] = self.step(prev, y_in[:, u])
        return g

    def backward(self, dg, y_in, g, grads):
        Wh = self.store[self.Wh]
        carry = np.zeros_like(dg[:, 0])
        for u in range(y_in.shape[1] - 1, -1, -1):
            dpre = (dg[:, u] + carry) * (1.0 - g[:, u] ** 2)
            np.add.at(grads[self.emb], y_in[:, u], dpre)
            grads[self.b] += dpre.sum(axis=0)
            if u > 0:
                grads[self.Wh] += g[:, u - 1].T @ dpre
                carry = dpre @ Wh.T


class JointNet:
    """``out(tanh(h + g))`` for any matching leading shapes of h and g."""

    def __init__(self, store, hidden, n_out, name="joint"):
        self.out = Linear(store, f"{name}.out", hidden, n_out)

    def forward(self, h, g):
        j = np.tanh(h + g)
        return self.out(j), j

    def backward(self, dlogits, j, grads):
        """Gradient w.r.t. the pre-activation sum, i.e. both h and g."""
        return self.out.backward(dlogits, j, grads) * (1.0 - j * j)


class BlankNet:
    """Binary blank classifier: linear-tanh-linear-sigmoid.

    Inputs are the current frame, the paired language state and, when
    ``enhanced``, the frame of the last emission (a learned vector stands in
    before anything has been emitted).
    """

    def __init__(self, store, hidden, blank_hidden, enhanced=True):
        self.store = store
        self.enhanced = enhanced
        self.hidden = hidden
        n_in = (3 if enhanced else 2) * hidden
        self.l1 = Linear(store, "blank.l1", n_in, blank_hidden)
        self.l2 = Linear(store, "blank.l2", blank_hidden, 1)
        self.init = store.add("blank.init", (hidden,), scale=0.5) if enhanced else None

    def last_frame_input(self, h_last, sentinel):
        """Swap in the learned initial vector where no emission has happened yet."""
        return np.where(sentinel[..., None], self.store[self.init], h_last)

    def forward(self, h, g, h_last=None):
        parts = [h, g] + ([h_last] if self.enhanced else [])
        x = np.concatenate(parts, axis=-1)
        z = np.tanh(self.l1(x))
        logit = self.l2(z)[..., 0]
        return logit, (x, z)

    def backward(self, dlogit, cache, grads):
        """Returns input gradients ``[dh, dg]`` (+ ``dh_last`` when enhanced)."""
        x, z = cache
        dz = self.l2.backward(dlogit[..., None], z, grads)
        dx = self.l1.backward(dz * (1.0 - z * z), x, grads)
        D = self.hidden
        return [dx[..., k * D : (k + 1) * D] for k in range(dx.shape[-1] // D)]

    def init_backward(self, dh_last, sentinel, grads):
        grads[self.init] += dh_last[sentinel].sum(axis=0)


class CtcHead:
    def __init__(self, store, hidden, vocab_size):
        self.lin = Linear(store, "ctc.out", hidden, vocab_size)

    def forward(self, h):
        return log_softmax(self.lin(h), axis=-1)

    def backward(self, dlogp, logp, h, grads):
        return self.lin.backward(log_softmax_backward(dlogp, logp), h, grads)
