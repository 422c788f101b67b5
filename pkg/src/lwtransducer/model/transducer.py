"""Full-lattice transducer baseline sharing the lightweight model's backbone."""
import numpy as np

from ..ctc import ctc_loss_batch
from ..tensor_core import log_softmax
from ..transducer_ref import transducer_loss_grad
from .blocks import JointNet, log_softmax_backward
from .common import ALL_TERMS, Backbone, StepSums


class FullTransducer(Backbone):
    """Joint evaluated at every (t, u) pair: ``lambda * CTC + (1 - lambda) * transducer``."""

    def __init__(self, config):
        super().__init__(config)
        self.joint = JointNet(self.store, config.hidden, config.vocab_size)

    def _accumulate(self, batch, grads, terms=ALL_TERMS, epoch=0):
        cfg = self.config
        lam = cfg.lambda_
        h, lens, enc_cache = self.encoder.forward(batch.feats, batch.lengths)
        N, T, D = h.shape
        logp = self.ctc.forward(h)
        ctc_raw, ctc_grad, feasible = ctc_loss_batch(logp, lens, batch.labels, cfg.blank)
        labels = batch.label_lists()
        n_tokens = np.maximum((batch.labels >= 0).sum(axis=1), 1)

        y_in = self.decoder.inputs(batch.labels)
        g = self.decoder.forward(y_in)
        U1 = g.shape[1]
        logits, j = self.joint.forward(h[:, :, None, :], g[:, None, :, :])
        logp_j = log_softmax(logits)

        sums = StepSums(n_infeasible=int((~feasible).sum()))
        sums.joint_activations = int(N * T * U1 * cfg.vocab_size)
        dlogp_j = np.zeros_like(logp_j)
        for n in np.flatnonzero(feasible):
            Tn, Un = int(lens[n]), len(labels[n])
            l_rnnt, gr = transducer_loss_grad(logp_j[n, :Tn, : Un + 1], labels[n], cfg.blank)
            l_rnnt /= n_tokens[n]
            l_ctc = ctc_raw[n] / n_tokens[n]
            sums.total += lam * l_ctc + (1.0 - lam) * l_rnnt
            sums.ctc += l_ctc
            sums.nonblank += l_rnnt
            sums.n_feasible += 1
            dlogp_j[n, :Tn, : Un + 1] = gr * ((1.0 - lam) / n_tokens[n])

        dh = np.zeros_like(h)
        if "ctc" in terms:
            w = lam * feasible / n_tokens
            dh += self.ctc.backward(ctc_grad * w[:, None, None], logp, h, grads)
        dg = np.zeros_like(g)
        if "nb" in terms:
            dpre = self.joint.backward(log_softmax_backward(dlogp_j, logp_j), j, grads)
            dh += dpre.sum(axis=2)
            dg += dpre.sum(axis=1)
        self.decoder.backward(dg, y_in, g, grads)
        self.encoder.backward(dh, enc_cache, grads)
        return sums

    def greedy_decode(self, feats, lengths):
        """Standard transducer greedy search, at most ``max_symbols_per_frame`` per frame."""
        cfg = self.config
        h, lens, _ = self.encoder.forward(feats, lengths)
        out = []
        for n in range(h.shape[0]):
            g = self.decoder.initial(1)
            hyp = []
            for t in range(lens[n]):
                for _ in range(cfg.max_symbols_per_frame):
                    logits, _ = self.joint.forward(h[n, t][None], g)
                    k = int(np.argmax(logits[0]))
                    if k == cfg.blank:
                        break
                    hyp.append(k)
                    g = self.decoder.step(g, np.array([k]))
            out.append(hyp)
        return out
