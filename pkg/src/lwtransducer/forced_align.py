"""Batched CTC forced alignment with backpointers, plus an exhaustive oracle.

Two modes share one trellis walk:

``viterbi``
    max-product best path.
``paper_replica``
    forward scores accumulate with log-sum-exp (impossible states held at the
    most negative float), backpointers take the argmax predecessor, and the
    final state is picked by a strict comparison. Equal-length batches give
    exactly the same alignments as the batched tensor implementation this
    mode mirrors.

Both return only the label rows (odd trellis states) as an N x U x T 0/1 array.
"""
import numpy as np

from . import kernels
from .ctc import expand_batch
from .errors import InfeasibleLabel, OracleLimit
from .labels import BLANK, alignment_runs, expand_with_blanks, min_frames

MODES = ("viterbi", "paper_replica")
ORACLE_MAX_PATHS = 10**6


def backtrack_choose_final(last_scores, S):
    """Final trellis state: 2U if it strictly beats 2U-1, otherwise 2U-1.

    The state before the last label (2U-2) is never a legal end.
    """
    if S == 1:
        return 0
    return S - 1 if last_scores[S - 1] > last_scores[S - 2] else S - 2


def states_to_alignment(states, U):
    """Trellis state per frame -> U x T label occupancy."""
    states = np.asarray(states)
    a = np.zeros((U, states.size), dtype=np.int8)
    for u in range(U):
        a[u] = states == 2 * u + 1
    return a


def _validate_batch(batch, labels, blank):
    logp = np.ascontiguousarray(batch.data, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(batch.N, -1)
    rows, ext, s_lens = expand_batch(labels, blank)
    V = logp.shape[2]
    for n, r in enumerate(rows):
        if any(tok == blank or not 0 <= tok < V for tok in r):
            raise ValueError(f"item {n}: label holds blank or out-of-range ids")
        need = min_frames(r)
        if batch.lengths[n] < need:
            raise InfeasibleLabel(f"T={batch.lengths[n]}, needs {need}", item=n)
    return logp, labels, rows, ext, s_lens


def forced_align_states(batch, labels, blank=BLANK, mode="viterbi"):
    """Best trellis state per frame (N x T_max, -1 past each length) and path scores."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    logp, _, _, ext, s_lens = _validate_batch(batch, labels, blank)
    t_lens = np.asarray(batch.lengths, dtype=np.int64)
    return kernels.best_path_batch(logp, ext, t_lens, s_lens, mode == "paper_replica")


def forced_align_batch(batch, labels, blank=BLANK, mode="viterbi"):
    """Align a padded batch; ``labels`` is N x U_max with -1 padding.

    Returns an int8 array of shape (N, U_max, T_max); ``a[n, u, t] == 1`` iff
    label u of item n occupies frame t.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(batch.N, -1)
    states, _ = forced_align_states(batch, labels, blank, mode)
    N, U_max = labels.shape
    T_max = batch.data.shape[1]
    out = np.zeros((N, U_max, T_max), dtype=np.int8)
    for n in range(N):
        U = int(np.sum(labels[n] >= 0))
        T = int(batch.lengths[n])
        a = states_to_alignment(states[n, :T], U)
        alignment_runs(a)  # every label row must be a non-empty run
        out[n, :U, :T] = a
    return out


def count_paths(T, y, blank=BLANK):
    ext = expand_with_blanks(y, blank)
    S = len(ext)
    ways = np.zeros(S, dtype=object)
    ways[: min(S, 2)] = 1
    for _ in range(1, T):
        nxt = ways.copy()
        nxt[1:] += ways[:-1]
        for s in range(2, S):
            if ext[s] != ext[s - 2]:
                nxt[s] += ways[s - 2]
        ways = nxt
    return int(ways[S - 1] + (ways[S - 2] if S > 1 else 0))


def brute_force_best_path(grid, y, blank=BLANK):
    """Enumerate every legal trellis path and return the best ``(alignment, score)``.

    Exact score ties go to the path the kernel's backtrack would produce:
    end on the last label rather than the trailing blank, then, walking
    backwards, prefer the highest predecessor state (staying over advancing).
    """
    logp = np.asarray(getattr(grid, "data", grid), dtype=np.float64)
    T = logp.shape[0]
    y = [int(t) for t in y]
    if T < min_frames(y):
        raise InfeasibleLabel(f"T={T}, needs {min_frames(y)}")
    if count_paths(T, y, blank) > ORACLE_MAX_PATHS:
        raise OracleLimit(f"more than {ORACLE_MAX_PATHS} paths")
    ext = expand_with_blanks(y, blank)
    S = len(ext)
    finals = {S - 1, S - 2} if S > 1 else {0}
    best_key = None
    best = None

    def visit(path, score):
        nonlocal best_key, best
        t = len(path)
        if t == T:
            if path[-1] in finals:
                key = (score, -path[-1], tuple(reversed(path[:-1])))
                if best_key is None or key > best_key:
                    best_key, best = key, (list(path), score)
            return
        s = path[-1]
        for nxt in (s, s + 1, s + 2):
            if nxt >= S or (nxt == s + 2 and ext[nxt] == ext[s]):
                continue
            path.append(nxt)
            visit(path, score + logp[t, ext[nxt]])
            path.pop()

    for start in range(min(S, 2)):
        visit([start], 0.0 + logp[0, ext[start]])
    path, score = best
    return states_to_alignment(path, len(y)), score


def format_alignment(a):
    """Human-readable dump, one ``token u: frames [s..e]`` line per label."""
    lines = []
    for u, (s, e) in enumerate(alignment_runs(a)):
        lines.append(f"token {u}: frames [{s}..{e}]")
    return "\n".join(lines)
