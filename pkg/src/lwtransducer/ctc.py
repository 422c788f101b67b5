"""CTC forward loss, its gradient, and an enumeration oracle."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InfeasibleLabel, OracleLimit
from .labels import BLANK, ctc_collapse, expand_with_blanks, min_frames, unpad
from .tensor_core import log_sum_exp

ORACLE_MAX_SEQUENCES = 10**7


@dataclass(frozen=True)
class CtcTrellis:
    """Forward variable ``c`` (T x 2U+1) and the two-predecessor sum ``c_prime``."""

    c: np.ndarray
    c_prime: np.ndarray
    ext: tuple


def _as_logp(grid):
    return np.ascontiguousarray(getattr(grid, "data", grid), dtype=np.float64)


def _check(logp, y, blank):
    T, V = logp.shape
    for tok in y:
        if not 0 <= tok < V or tok == blank:
            raise ValueError(f"token {tok} is not a non-blank id for V={V}")
    need = min_frames(y)
    if T < need:
        raise InfeasibleLabel(f"T={T}, needs at least {need} frames")


def ctc_forward(grid, y, blank=BLANK):
    """Negative log-likelihood of ``y`` under a T x V log-prob grid."""
    logp = _as_logp(grid)
    y = [int(t) for t in y]
    _check(logp, y, blank)
    ext = np.asarray(expand_with_blanks(y, blank), dtype=np.int64)
    c = kernels.ctc_alpha(logp, ext)
    S = ext.size
    finals = [c[-1, S - 1]] + ([c[-1, S - 2]] if S > 1 else [])
    loss = -log_sum_exp(finals)
    c_prime = np.full_like(c, -np.inf)
    c_prime[1:] = c[:-1]
    c_prime[1:, 1:] = np.logaddexp(c[:-1, 1:], c[:-1, :-1])
    return loss, CtcTrellis(c, c_prime, tuple(int(e) for e in ext))


def ctc_grad(grid, y, blank=BLANK):
    """d(loss) / d(log-prob entry), shape T x V."""
    logp = _as_logp(grid)
    y = [int(t) for t in y]
    _check(logp, y, blank)
    ext = np.asarray(expand_with_blanks(y, blank), dtype=np.int64)
    _, grad = kernels.ctc_loss_grad(logp, ext)
    return grad


def expand_batch(labels, blank=BLANK):
    """Padded N x U_max labels -> padded N x (2U_max+1) expanded labels and lengths."""
    rows = [unpad(r) for r in np.asarray(labels)]
    S = 2 * max((len(r) for r in rows), default=0) + 1
    ext = np.full((len(rows), S), blank, dtype=np.int64)
    s_lens = np.empty(len(rows), dtype=np.int64)
    for n, r in enumerate(rows):
        e = expand_with_blanks(r, blank)
        ext[n, : len(e)] = e
        s_lens[n] = len(e)
    return rows, ext, s_lens


def ctc_loss_batch(logp, t_lens, labels, blank=BLANK):
    """Per-item losses and gradients for a padded batch.

    Infeasible items get ``inf`` loss and a zero gradient instead of raising,
    so a training step can drop them and keep going.
    """
    logp = np.ascontiguousarray(logp, dtype=np.float64)
    rows, ext, s_lens = expand_batch(labels, blank)
    t_lens = np.asarray(t_lens, dtype=np.int64)
    feasible = np.array([t_lens[n] >= min_frames(r) for n, r in enumerate(rows)])
    losses, grads = kernels.ctc_loss_grad_batch(logp, ext, t_lens, s_lens)
    losses = np.where(feasible, losses, np.inf)
    grads[~feasible] = 0.0
    return losses, grads, feasible


def brute_force_ctc(grid, y, blank=BLANK):
    """Sum over every length-T symbol sequence whose CTC collapse equals ``y``.

    Sequences are generated frame by frame; a prefix is abandoned as soon as
    its collapse stops being a prefix of ``y``, since no extension can repair it.
    """
    logp = _as_logp(grid)
    T, V = logp.shape
    if V**T > ORACLE_MAX_SEQUENCES:
        raise OracleLimit(f"V^T = {V}^{T} sequences")
    y = [int(t) for t in y]
    scores = []

    def visit(t, emitted, last, score):
        if t == T:
            if emitted == len(y):
                scores.append(score)
            return
        for v in range(V):
            n = emitted
            if v != blank and v != last:
                if n == len(y) or y[n] != v:
                    continue
                n += 1
            visit(t + 1, n, v, score + logp[t, v])

    visit(0, 0, None, 0.0)
    if not scores:
        raise InfeasibleLabel("no symbol sequence collapses to the label")
    return -log_sum_exp(scores)

