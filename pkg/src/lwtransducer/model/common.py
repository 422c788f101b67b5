"""Pieces shared by the lightweight model and the full-lattice baseline."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..frame_criterion import CompositeLoss
from .blocks import CtcHead, Decoder, Encoder
from .params import ParamStore

ALL_TERMS = frozenset({"ctc", "nb", "b"})


@dataclass
class Batch:
    feats: np.ndarray  # N x T x F, zero padded
    lengths: np.ndarray  # N
    labels: np.ndarray  # N x U_max, -1 padded
    ids: tuple = ()

    @classmethod
    def from_arrays(cls, feats, labels, ids=()):
        """Pad lists of T_i x F feature matrices and label lists."""
        N = len(feats)
        T = max(f.shape[0] for f in feats)
        F = feats[0].shape[1]
        x = np.zeros((N, T, F))
        for n, f in enumerate(feats):
            x[n, : f.shape[0]] = f
        U = max((len(y) for y in labels), default=0)
        y = np.full((N, U), -1, dtype=np.int64)
        for n, lab in enumerate(labels):
            y[n, : len(lab)] = lab
        lens = np.array([f.shape[0] for f in feats], dtype=np.int64)
        return cls(x, lens, y, tuple(ids) if ids else tuple(range(N)))

    @property
    def N(self):
        return self.feats.shape[0]

    def label_lists(self):
        return [[int(t) for t in row if t >= 0] for row in self.labels]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        lens = self.lengths[idx]
        labels = self.labels[idx]
        U = int((labels >= 0).sum(axis=1).max(initial=0))
        T = int(lens.max())
        ids = tuple(self.ids[i] for i in idx) if self.ids else ()
        return Batch(self.feats[idx, :T], lens, labels[:, :U], ids)

    def split(self, k):
        return [self.subset(part) for part in np.array_split(np.arange(self.N), k) if part.size]


@dataclass
class StepSums:
    """Per-utterance quantities summed over the feasible items of a (sub)batch."""

    total: float = 0.0
    ctc: float = 0.0
    blank: float = 0.0
    nonblank: float = 0.0
    n_feasible: int = 0
    n_infeasible: int = 0
    n_gated: int = 0
    n_degenerate: int = 0
    joint_activations: int = 0
    frame_labels: list = field(default_factory=list)

    def merge(self, other):
        for name in ("total", "ctc", "blank", "nonblank", "n_feasible", "n_infeasible",
                     "n_gated", "n_degenerate", "joint_activations"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.frame_labels.extend(other.frame_labels)
        return self


@dataclass
class StepResult:
    loss: CompositeLoss
    gated_frac: float
    n_feasible: int
    n_infeasible: int
    n_degenerate: int
    joint_activations: int
    frame_labels: list


class Backbone:
    """Encoder, CTC head and prediction network, built in a fixed order from the seed."""

    def __init__(self, config):
        self.config = config
        self.store = ParamStore(config.seed)
        self.encoder = Encoder(self.store, config.feat_dim, config.hidden, config.conv_layers,
                               config.stride, config.causal_encoder)
        self.ctc = CtcHead(self.store, config.hidden, config.vocab_size)
        self.decoder = Decoder(self.store, config.vocab_size, config.hidden, config.blank)
        self.peak_joint_activations = 0

    def ctc_log_probs(self, feats, lengths):
        h, lens, _ = self.encoder.forward(feats, lengths)
        return self.ctc.forward(h), lens

    def group_names(self):
        """Parameter names by network part."""
        groups = {}
        for name in self.store:
            groups.setdefault(name.split(".")[0], []).append(name)
        return groups

    def _accumulate(self, batch, grads, terms, epoch):
        raise NotImplementedError

    def forward_backward(self, batch, terms=ALL_TERMS, epoch=0, workers=None):
        return forward_backward_step(self, batch, terms=terms, epoch=epoch, workers=workers)


def forward_backward_step(model, batch, terms=ALL_TERMS, epoch=0, workers=None):
    """One training step's loss and gradients (left in ``model.store.grads``).

    Losses are means over the feasible utterances of the batch. With
    ``workers > 1`` the batch is sharded across threads, each accumulating
    into its own buffers, and the shards are summed in order.
    """
    store = model.store
    store.zero_grad()
    workers = model.config.workers if workers is None else workers
    terms = frozenset(terms)
    if workers <= 1 or batch.N < 2:
        sums = model._accumulate(batch, store.grads, terms, epoch)
    else:
        shards = batch.split(workers)
        buffers = [store.new_grads() for _ in shards]
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            parts = list(pool.map(lambda sb: model._accumulate(sb[0], sb[1], terms, epoch),
                                  zip(shards, buffers)))
        sums = StepSums()
        for part, buf in zip(parts, buffers):
            sums.merge(part)
            for name, g in buf.items():
                store.grads[name] += g
    n = max(sums.n_feasible, 1)
    for g in store.grads.values():
        g /= n
    model.peak_joint_activations = max(model.peak_joint_activations, sums.joint_activations)
    loss = CompositeLoss(sums.total / n, sums.ctc / n, sums.blank / n, sums.nonblank / n,
                         sums.n_gated == sums.n_feasible and sums.n_feasible > 0)
    return StepResult(loss, sums.n_gated / n, sums.n_feasible, sums.n_infeasible,
                      sums.n_degenerate, sums.joint_activations, sums.frame_labels)
