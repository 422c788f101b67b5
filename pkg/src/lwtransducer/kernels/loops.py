"""Explicit-loop dynamic-programming kernels, compiled with numba when available.

Every function here has a vectorized twin in :mod:`.vectorized` with the
same signature; :mod:`lwtransducer.kernels` picks one at import time.

Conventions shared by all kernels:

* ``ext`` is an expanded label (blank, y1, blank, y2, ..., blank) of length S.
* Log-probabilities are float64 natural logs; ``-inf`` marks impossible states.
* Paths may skip from state s-2 to s only when ``ext[s] != ext[s-2]``; this
  also rules out skipping into a blank state.
"""
import math

import numpy as np

from .._accel import njit

NEG_INF = -np.inf
MINV = np.finfo(np.float64).min


@njit(cache=True)
def lse2(a, b):
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


@njit(cache=True)
def ctc_alpha(logp, ext):
    T = logp.shape[0]
    S = ext.shape[0]
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            v = alpha[t - 1, s]
            if s >= 1:
                v = lse2(v, alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != ext[s - 2]:
                v = lse2(v, alpha[t - 1, s - 2])
            alpha[t, s] = v + logp[t, ext[s]]
    return alpha


@njit(cache=True)
def ctc_beta(logp, ext):
    """Backward variable; ``beta[t, s]`` includes the emission at frame t."""
    T = logp.shape[0]
    S = ext.shape[0]
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = logp[T - 1, ext[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = logp[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(S):
            v = beta[t + 1, s]
            if s + 1 < S:
                v = lse2(v, beta[t + 1, s + 1])
            if s + 2 < S and ext[s + 2] != ext[s]:
                v = lse2(v, beta[t + 1, s + 2])
            beta[t, s] = v + logp[t, ext[s]]
    return beta


@njit(cache=True)
def ctc_loss_grad(logp, ext):
    """Negative log-likelihood and its gradient w.r.t. every entry of ``logp``."""
    T, V = logp.shape
    S = ext.shape[0]
    alpha = ctc_alpha(logp, ext)
    beta = ctc_beta(logp, ext)
    log_like = alpha[T - 1, S - 1]
    if S > 1:
        log_like = lse2(log_like, alpha[T - 1, S - 2])
    grad = np.zeros((T, V))
    if log_like == NEG_INF:
        return np.inf, grad
    for t in range(T):
        for s in range(S):
            a = alpha[t, s]
            b = beta[t, s]
            if a == NEG_INF or b == NEG_INF:
                continue
            grad[t, ext[s]] -= math.exp(a + b - logp[t, ext[s]] - log_like)
    return -log_like, grad


@njit(cache=True)
def ctc_loss_grad_batch(logp, ext, t_lens, s_lens):
    N, T, V = logp.shape
    losses = np.zeros(N)
    grads = np.zeros((N, T, V))
    for n in range(N):
        loss, g = ctc_loss_grad(logp[n, : t_lens[n]], ext[n, : s_lens[n]])
        losses[n] = loss
        grads[n, : t_lens[n]] = g
    return losses, grads


@njit(cache=True)
def _lse_terms(c0, c1, c2, three):
    m = c0
    if c1 > m:
        m = c1
    if three and c2 > m:
        m = c2
    if m == NEG_INF:
        return NEG_INF
    acc = math.exp(c0 - m) + math.exp(c1 - m)
    if three:
        acc += math.exp(c2 - m)
    return m + math.log(acc)


@njit(cache=True)
def best_path(logp, ext, replica):
    """Best CTC path over the expanded-label trellis.

    ``replica=False`` is max-product Viterbi. ``replica=True`` accumulates the
    forward score with log-sum-exp while the backpointers still take the
    argmax over predecessors, with impossible states held at the most
    negative float instead of -inf.

    Blank states and repeated labels look back over two predecessors, every
    other state over three (missing ones padded with the impossible value).
    Ties go to the first candidate: stay, then advance by one, then by two.

    Returns (states per frame, summed log-prob of that path, dp, backpointers).
    """
    T = logp.shape[0]
    S = ext.shape[0]
    neg = MINV if replica else NEG_INF
    dp = np.full((T, S), neg)
    bp = np.empty((T, S), dtype=np.int64)
    for s in range(S):
        bp[0, s] = s
    dp[0, 0] = logp[0, ext[0]]
    if S > 1:
        dp[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            three = not (s % 2 == 0 or (s >= 2 and ext[s] == ext[s - 2]))
            c0 = dp[t - 1, s]
            c1 = dp[t - 1, s - 1] if s >= 1 else neg
            c2 = dp[t - 1, s - 2] if s >= 2 else neg
            best = c0
            step = 0
            if c1 > best:
                best = c1
                step = 1
            if three and c2 > best:
                best = c2
                step = 2
            acc = _lse_terms(c0, c1, c2, three) if replica else best
            dp[t, s] = logp[t, ext[s]] + acc
            bp[t, s] = s - step
    if S == 1:
        final = 0
    elif dp[T - 1, S - 1] > dp[T - 1, S - 2]:
        final = S - 1
    else:
        final = S - 2
    states = np.empty(T, dtype=np.int64)
    states[T - 1] = final
    for t in range(T - 1, 0, -1):
        states[t - 1] = bp[t, states[t]]
    score = 0.0
    for t in range(T):
        score += logp[t, ext[states[t]]]
    return states, score, dp, bp


@njit(cache=True)
def best_path_batch(logp, ext, t_lens, s_lens, replica):
    N, T, _ = logp.shape
    states = np.full((N, T), -1, dtype=np.int64)
    scores = np.zeros(N)
    for n in range(N):
        st, sc, _, _ = best_path(logp[n, : t_lens[n]], ext[n, : s_lens[n]], replica)
        states[n, : t_lens[n]] = st
        scores[n] = sc
    return states, scores


@njit(cache=True)
def rnnt_alpha(blank_lp, emit_lp):
    """Forward variable over the T x (U+1) lattice.

    ``blank_lp[t, u]`` is log Pr(blank | t, u); ``emit_lp[t, u]`` is the
    log-probability of emitting label u+1 at (t, u).
    """
    T, U1 = blank_lp.shape
    alpha = np.full((T, U1), NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(T):
        for u in range(U1):
            if t == 0 and u == 0:
                continue
            v = NEG_INF
            if t > 0:
                v = alpha[t - 1, u] + blank_lp[t - 1, u]
            if u > 0:
                v = lse2(v, alpha[t, u - 1] + emit_lp[t, u - 1])
            alpha[t, u] = v
    return alpha


@njit(cache=True)
def rnnt_beta(blank_lp, emit_lp):
    """Backward variable; ``beta[0, 0]`` is the total log-likelihood."""
    T, U1 = blank_lp.shape
    U = U1 - 1
    beta = np.full((T, U1), NEG_INF)
    beta[T - 1, U] = blank_lp[T - 1, U]
    for t in range(T - 1, -1, -1):
        for u in range(U, -1, -1):
            if t == T - 1 and u == U:
                continue
            v = NEG_INF
            if t < T - 1:
                v = beta[t + 1, u] + blank_lp[t, u]
            if u < U:
                v = lse2(v, beta[t, u + 1] + emit_lp[t, u])
            beta[t, u] = v
    return beta
