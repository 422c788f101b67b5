"""The lightweight transducer: frame-level training against CTC forced alignments."""
import numpy as np

from ..ctc import ctc_loss_batch
from ..forced_align import forced_align_batch
from ..frame_criterion import (
    SENTINEL,
    StopGradient,
    composite_loss,
    nonblank_classes,
    nonblank_tokens,
    pair_frames,
)
from ..labels import collapse_alignment
from ..tensor_core import BatchGrid, log_softmax
from .blocks import BlankNet, JointNet, log_softmax_backward, sigmoid, softplus, time_mask
from .common import ALL_TERMS, Backbone, StepSums


class LightweightTransducer(Backbone):
    """Encoder + CTC head + prediction network, joined only at aligned frame pairs.

    With ``decouple_blank`` the joint predicts the V-1 non-blank tokens and a
    separate :class:`BlankNet` predicts blank; otherwise one V-way joint is
    trained with frame cross-entropy (the undecoupled ablation).
    """

    def __init__(self, config):
        super().__init__(config)
        n_out = config.vocab_size - 1 if config.decouple_blank else config.vocab_size
        self.joint = JointNet(self.store, config.hidden, n_out)
        self.blank_net = (
            BlankNet(self.store, config.hidden, config.blank_hidden, config.enhanced_blank)
            if config.decouple_blank
            else None
        )
        self.loss_config = config.loss_config()
        self._align_cache = {}

    # -- targets ---------------------------------------------------------

    def frame_targets(self, logp, lens, batch, feasible, epoch=0):
        """Frame labels (N x T, blank where nothing fires) from forced alignment.

        Alignment works on a detached copy of the CTC posteriors.
        """
        cfg = self.config
        N, T, _ = logp.shape
        out = np.full((N, T), cfg.blank, dtype=np.int64)
        labels = batch.label_lists()
        todo = []
        for n in np.flatnonzero(feasible):
            key = batch.ids[n] if batch.ids else None
            hit = self._align_cache.get(key) if cfg.freeze_align_every > 0 else None
            if hit is not None and epoch - hit[0] < cfg.freeze_align_every:
                out[n, : lens[n]] = hit[1]
            else:
                todo.append(n)
        if todo:
            todo = np.asarray(todo)
            grid = BatchGrid(logp[todo], lens[todo])
            align = forced_align_batch(grid, batch.labels[todo], cfg.blank, cfg.align_mode)
            for k, n in enumerate(todo):
                U = len(labels[n])
                fl = collapse_alignment(align[k, :U, : lens[n]], labels[n], int(lens[n]), cfg.blank)
                out[n, : lens[n]] = fl
                if cfg.freeze_align_every > 0 and batch.ids:
                    self._align_cache[batch.ids[n]] = (epoch, np.array(fl))
        return out

    # -- training --------------------------------------------------------

    def _accumulate(self, batch, grads, terms=ALL_TERMS, epoch=0):
        cfg = self.config
        blank, lam = cfg.blank, cfg.lambda_
        h, lens, enc_cache = self.encoder.forward(batch.feats, batch.lengths)
        N, T, D = h.shape
        rows = np.arange(N)[:, None]

        logp = self.ctc.forward(h)
        ctc_raw, ctc_grad, feasible = ctc_loss_batch(logp, lens, batch.labels, blank)
        n_tokens = np.maximum((batch.labels >= 0).sum(axis=1), 1)
        l_ctc = np.where(feasible, ctc_raw, 0.0) / n_tokens

        frame_labels = self.frame_targets(logp, lens, batch, feasible, epoch)
        valid = time_mask(lens, T).astype(bool) & feasible[:, None]
        dec_idx = np.zeros((N, T), dtype=np.int64)
        last = np.full((N, T), SENTINEL, dtype=np.int64)
        for n in np.flatnonzero(feasible):
            pf = pair_frames(frame_labels[n, : lens[n]], blank)
            dec_idx[n, : lens[n]] = pf.dec
            last[n, : lens[n]] = pf.last

        y_in = self.decoder.inputs(batch.labels)
        g = self.decoder.forward(y_in)
        g_pair = g[rows, dec_idx]

        logits, j = self.joint.forward(h, g_pair)
        logp_j = log_softmax(logits)
        is_blank = frame_labels == blank
        if cfg.decouple_blank:
            emit = ~is_blank & valid
            targets = np.where(emit, nonblank_classes(frame_labels, blank), 0)
            ce = -np.take_along_axis(logp_j, targets[..., None], axis=-1)[..., 0]
            n_emit = emit.sum(axis=1)
            l_nb = np.where(emit, ce, 0.0).sum(axis=1) / np.maximum(n_emit, 1)

            stop = StopGradient(cfg.truncate_gradient)
            h_b, g_b = stop.forward(h), stop.forward(g_pair)
            sentinel = last < 0
            h_last = None
            if cfg.enhanced_blank:
                h_last = self.blank_net.last_frame_input(stop.forward(h[rows, np.maximum(last, 0)]), sentinel)
            b_logit, b_cache = self.blank_net.forward(h_b, g_b, h_last)
            bce = softplus(b_logit) - is_blank * b_logit
            l_b = np.where(valid, bce, 0.0).sum(axis=1) / lens
            degenerate = feasible & (n_emit == 0)
        else:
            frame_mask = valid
            targets = frame_labels
            ce = -np.take_along_axis(logp_j, targets[..., None], axis=-1)[..., 0]
            l_nb = np.where(frame_mask, ce, 0.0).sum(axis=1) / lens
            l_b = np.zeros(N)
            degenerate = np.zeros(N, dtype=bool)

        sums = StepSums(n_infeasible=int((~feasible).sum()), n_degenerate=int(degenerate.sum()))
        ungated = np.zeros(N, dtype=bool)
        for n in np.flatnonzero(feasible):
            c = composite_loss(l_ctc[n], l_b[n], l_nb[n], self.loss_config)
            ungated[n] = not c.gated
            sums.total += c.total
            sums.ctc += c.ctc
            sums.blank += c.blank
            sums.nonblank += c.nonblank
            sums.n_feasible += 1
            sums.n_gated += int(c.gated)
            sums.frame_labels.append(frame_labels[n, : lens[n]].copy())
        sums.joint_activations = int(N * T * cfg.vocab_size)

        # backward; every coefficient is the per-utterance weight before the batch mean
        dh = np.zeros_like(h)
        dg_pair = np.zeros_like(g_pair)
        if "ctc" in terms:
            w_ctc = np.where(ungated, lam, 1.0) * feasible / n_tokens
            dh += self.ctc.backward(ctc_grad * w_ctc[:, None, None], logp, h, grads)
        if "nb" in terms:
            if cfg.decouple_blank:
                w = np.where(ungated, 1.0 - lam, 0.0) / np.maximum(n_emit, 1)
                mask = emit
            else:
                w = np.where(ungated, 1.0 - lam, 0.0) / lens
                mask = frame_mask
            dlogp_j = np.zeros_like(logp_j)
            np.put_along_axis(dlogp_j, targets[..., None], (-w[:, None] * mask)[..., None], axis=-1)
            dpre = self.joint.backward(log_softmax_backward(dlogp_j, logp_j), j, grads)
            dh += dpre
            dg_pair += dpre
        if "b" in terms and cfg.decouple_blank:
            w = np.where(ungated, 1.0, 0.0) / lens
            d_logit = w[:, None] * (sigmoid(b_logit) - is_blank) * valid
            parts = self.blank_net.backward(d_logit, b_cache, grads)
            dh += stop.backward(parts[0])
            dg_pair += stop.backward(parts[1])
            if cfg.enhanced_blank:
                self.blank_net.init_backward(parts[2], sentinel, grads)
                d_src = stop.backward(np.where(sentinel[..., None], 0.0, parts[2]))
                np.add.at(dh, (np.broadcast_to(rows, last.shape), np.maximum(last, 0)), d_src)

        dg = np.zeros_like(g)
        np.add.at(dg, (np.broadcast_to(rows, dec_idx.shape), dec_idx), dg_pair)
        self.decoder.backward(dg, y_in, g, grads)
        self.encoder.backward(dh, enc_cache, grads)
        return sums

    # -- decoding --------------------------------------------------------

    def frame_posteriors(self, h_t, g, h_last, sentinel):
        """p_blank (N,) and the non-blank distribution (N, V-1) for one frame."""
        logits, _ = self.joint.forward(h_t, g)
        p = np.exp(log_softmax(logits))
        if not self.config.decouple_blank:
            return None, p
        hl = self.blank_net.last_frame_input(h_last, sentinel) if self.config.enhanced_blank else None
        b_logit, _ = self.blank_net.forward(h_t, g, hl)
        return sigmoid(b_logit), p

    def greedy_decode(self, feats, lengths):
        """Frame-synchronous decoding: at most one token per encoder frame."""
        cfg = self.config
        h, lens, _ = self.encoder.forward(feats, lengths)
        N, T, D = h.shape
        g = self.decoder.initial(N)
        h_last = np.zeros((N, D))
        sentinel = np.ones(N, dtype=bool)
        out = [[] for _ in range(N)]
        for t in range(T):
            active = t < lens
            if not active.any():
                break
            h_t = h[:, t]
            p_blank, p = self.frame_posteriors(h_t, g, h_last, sentinel)
            best = np.argmax(p, axis=-1)
            if p_blank is None:
                emit = best != cfg.blank
                tokens = best
            else:
                if cfg.blank_decision == "threshold":
                    emit = p_blank < cfg.blank_threshold
                else:
                    emit = p_blank < p[np.arange(N), best] * (1.0 - p_blank)
                tokens = nonblank_tokens(best, cfg.blank)
            emit &= active
            if emit.any():
                for n in np.flatnonzero(emit):
                    out[n].append(int(tokens[n]))
                g = np.where(emit[:, None], self.decoder.step(g, np.where(emit, tokens, cfg.blank)), g)
                h_last = np.where(emit[:, None], h_t, h_last)
                sentinel &= ~emit
        return out
