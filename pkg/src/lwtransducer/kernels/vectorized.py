"""Pure-numpy kernels: loop over time, vectorize over trellis states.

Same signatures and return conventions as :mod:`.loops`.
"""
import numpy as np

NEG_INF = -np.inf
MINV = np.finfo(np.float64).min


def _shift(row, k, fill):
    out = np.empty_like(row)
    out[:k] = fill
    out[k:] = row[: row.shape[0] - k]
    return out


def _skip_allowed(ext):
    allow = np.zeros(ext.shape[0], dtype=bool)
    allow[2:] = ext[2:] != ext[:-2]
    return allow


def _lse2(a, b):
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    with np.errstate(invalid="ignore"):
        out = hi + np.log1p(np.exp(lo - hi))
    return np.where(lo == NEG_INF, hi, out)


def _lse_rows(c):
    m = c.max(axis=1)
    with np.errstate(invalid="ignore"):
        acc = np.exp(c[:, 0] - m)
        for k in range(1, c.shape[1]):
            acc = acc + np.exp(c[:, k] - m)
        out = m + np.log(acc)
    return np.where(m == NEG_INF, NEG_INF, out)


def ctc_alpha(logp, ext):
    T = logp.shape[0]
    S = ext.shape[0]
    allow = _skip_allowed(ext)
    emit = logp[:, ext]
    alpha = np.full((T, S), NEG_INF)
    alpha[0, : min(S, 2)] = emit[0, : min(S, 2)]
    for t in range(1, T):
        prev = alpha[t - 1]
        v = _lse2(prev, _shift(prev, 1, NEG_INF))
        v = np.where(allow, _lse2(v, _shift(prev, 2, NEG_INF)), v)
        alpha[t] = v + emit[t]
    return alpha


def ctc_beta(logp, ext):
    T = logp.shape[0]
    S = ext.shape[0]
    allow_fwd = np.zeros(S, dtype=bool)
    allow_fwd[:-2] = ext[2:] != ext[:-2]
    emit = logp[:, ext]
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, max(S - 2, 0):] = emit[T - 1, max(S - 2, 0):]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        v = _lse2(nxt, _shift(nxt[::-1], 1, NEG_INF)[::-1])
        v = np.where(allow_fwd, _lse2(v, _shift(nxt[::-1], 2, NEG_INF)[::-1]), v)
        beta[t] = v + emit[t]
    return beta


def ctc_loss_grad(logp, ext):
    T, V = logp.shape
    S = ext.shape[0]
    alpha = ctc_alpha(logp, ext)
    beta = ctc_beta(logp, ext)
    log_like = alpha[T - 1, S - 1]
    if S > 1:
        log_like = float(_lse2(np.array(log_like), np.array(alpha[T - 1, S - 2])))
    grad = np.zeros((T, V))
    if log_like == NEG_INF:
        return np.inf, grad
    with np.errstate(invalid="ignore"):
        occ = np.exp(alpha + beta - logp[:, ext] - log_like)
    occ = np.nan_to_num(occ, nan=0.0)
    for s in range(S):
        grad[:, ext[s]] -= occ[:, s]
    return -log_like, grad


def ctc_loss_grad_batch(logp, ext, t_lens, s_lens):
    N, T, V = logp.shape
    losses = np.zeros(N)
    grads = np.zeros((N, T, V))
    for n in range(N):
        loss, g = ctc_loss_grad(logp[n, : t_lens[n]], ext[n, : s_lens[n]])
        losses[n] = loss
        grads[n, : t_lens[n]] = g
    return losses, grads


def best_path(logp, ext, replica):
    T = logp.shape[0]
    S = ext.shape[0]
    neg = MINV if replica else NEG_INF
    idx = np.arange(S)
    con = idx % 2 == 0
    con[2:] |= ext[2:] == ext[:-2]
    emit = logp[:, ext]
    dp = np.full((T, S), neg)
    bp = np.empty((T, S), dtype=np.int64)
    bp[0] = idx
    dp[0, : min(S, 2)] = emit[0, : min(S, 2)]
    for t in range(1, T):
        prev = dp[t - 1]
        cand = np.stack([prev, _shift(prev, 1, neg), _shift(prev, 2, neg)], axis=1)
        two = cand[:, :2]
        step = np.where(con, np.argmax(two, axis=1), np.argmax(cand, axis=1))
        if replica:
            acc = np.where(con, _lse_rows(two), _lse_rows(cand))
        else:
            acc = cand[idx, step]
        dp[t] = emit[t] + acc
        bp[t] = idx - step
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
    score = float(emit[np.arange(T), states].sum())
    return states, score, dp, bp


def best_path_batch(logp, ext, t_lens, s_lens, replica):
    N, T, _ = logp.shape
    states = np.full((N, T), -1, dtype=np.int64)
    scores = np.zeros(N)
    for n in range(N):
        st, sc, _, _ = best_path(logp[n, : t_lens[n]], ext[n, : s_lens[n]], replica)
        states[n, : t_lens[n]] = st
        scores[n] = sc
    return states, scores


def _log_cumsum_exp(x):
    return np.logaddexp.accumulate(x)


def rnnt_alpha(blank_lp, emit_lp):
    # Within a row, alpha[t, u] = C[u] + logcumsumexp(a[k] - C[k]) with C the
    # running sum of emission log-probs along u.
    T, U1 = blank_lp.shape
    alpha = np.full((T, U1), NEG_INF)
    entry = np.full(U1, NEG_INF)
    entry[0] = 0.0
    for t in range(T):
        if t > 0:
            entry = alpha[t - 1] + blank_lp[t - 1]
        csum = np.concatenate(([0.0], np.cumsum(emit_lp[t])))
        alpha[t] = csum + _log_cumsum_exp(entry - csum)
    return alpha


def rnnt_beta(blank_lp, emit_lp):
    T, U1 = blank_lp.shape
    beta = np.full((T, U1), NEG_INF)
    for t in range(T - 1, -1, -1):
        if t == T - 1:
            exit_ = np.full(U1, NEG_INF)
            exit_[U1 - 1] = blank_lp[T - 1, U1 - 1]
        else:
            exit_ = beta[t + 1] + blank_lp[t]
        csum = np.concatenate(([0.0], np.cumsum(emit_lp[t])))
        beta[t] = -csum + _log_cumsum_exp((exit_ + csum)[::-1])[::-1]
    return beta
