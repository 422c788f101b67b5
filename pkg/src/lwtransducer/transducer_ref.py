"""Full-lattice transducer loss: the reference the frame-level criterion is judged against.

The joint output is a T x (U+1) x V tensor of log-probabilities. A path starts
at (0, 0), moves right with blank (t -> t+1) or up with the next label
(u -> u+1), and must finish with the blank leaving (T-1, U).
"""
import itertools
import math
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import OracleLimit
from .labels import BLANK
from .tensor_core import log_sum_exp

ORACLE_MAX_PATHS = 10**6


def lattice_slices(joint, y, blank=BLANK):
    """Split the joint tensor into blank (T x U+1) and emit (T x U) log-probs."""
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 3 or joint.shape[0] == 0:
        raise ValueError("empty input")
    y = np.asarray(y, dtype=np.int64)
    T, U1, V = joint.shape
    if U1 != y.size + 1:
        raise ValueError(f"joint has {U1} label positions, label needs {y.size + 1}")
    blank_lp = np.ascontiguousarray(joint[:, :, blank])
    emit_lp = np.ascontiguousarray(joint[:, np.arange(y.size), y]) if y.size else np.zeros((T, 0))
    return blank_lp, emit_lp


def transducer_forward(joint, y, blank=BLANK):
    """Negative log-likelihood of ``y``; also returns the forward lattice."""
    blank_lp, emit_lp = lattice_slices(joint, y, blank)
    alpha = kernels.rnnt_alpha(blank_lp, emit_lp)
    return -(alpha[-1, -1] + blank_lp[-1, -1]), alpha


def transducer_loss_grad(joint, y, blank=BLANK):
    """Loss and its gradient w.r.t. every joint log-probability."""
    joint = np.asarray(joint, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    blank_lp, emit_lp = lattice_slices(joint, y, blank)
    alpha = kernels.rnnt_alpha(blank_lp, emit_lp)
    beta = kernels.rnnt_beta(blank_lp, emit_lp)
    log_like = beta[0, 0]
    T, U1, _ = joint.shape
    grad = np.zeros_like(joint)
    after_blank = np.full((T, U1), -np.inf)
    after_blank[:-1] = beta[1:]
    after_blank[-1, -1] = 0.0
    grad[:, :, blank] = -np.exp(alpha + blank_lp + after_blank - log_like)
    if y.size:
        occ = -np.exp(alpha[:, :-1] + emit_lp + beta[:, 1:] - log_like)
        grad[:, np.arange(y.size), y] += occ
    return -log_like, grad


def brute_force_transducer(joint, y, blank=BLANK):
    """Sum the probabilities of every monotone lattice path."""
    blank_lp, emit_lp = lattice_slices(joint, y, blank)
    T, U1 = blank_lp.shape
    U = U1 - 1
    n_paths = math.comb(T - 1 + U, U)
    if math.comb(T + U, U) > ORACLE_MAX_PATHS:
        raise OracleLimit(f"C({T + U}, {U}) paths")
    scores = []
    # the last move is always the final blank; choose where the U emits go
    # among the first T - 1 + U moves
    for emit_at in itertools.combinations(range(T - 1 + U), U):
        emit_at = set(emit_at)
        t = u = 0
        score = 0.0
        for move in range(T - 1 + U):
            if move in emit_at:
                score += emit_lp[t, u]
                u += 1
            else:
                score += blank_lp[t, u]
                t += 1
        scores.append(score + blank_lp[T - 1, U])
    assert len(scores) == n_paths
    return -log_sum_exp(scores)


class MemoryReport(NamedTuple):
    full_activations: int
    frame_activations: int
    ratio: int

    def csv(self):
        return f"{self.full_activations},{self.frame_activations},{self.ratio}"


def memory_footprint_report(N, T, U, V):
    """Joint-output sizes: full lattice N*T*(U+1)*V against frame-level N*T*V."""
    dims = (N, T, U + 1, V)
    if any(int(d) != d or d < 1 for d in dims):
        raise ValueError("dimensions must be positive integers (U >= 0)")
    full = N * T * (U + 1) * V
    frame = N * T * V
    return MemoryReport(full, frame, full // frame)
