"""Label-sequence transforms: blank interleaving, alignment collapse, scoring."""
from typing import NamedTuple

import numpy as np

from .errors import InvalidAlignment

BLANK = 0


def expand_with_blanks(y, blank=BLANK):
    """``[A, B] -> [b, A, b, B, b]``."""
    y = [int(t) for t in y]
    if blank in y:
        raise ValueError("blank inside label")
    out = [blank] * (2 * len(y) + 1)
    out[1::2] = y
    return out


def strip_blanks(seq, blank=BLANK):
    return [int(t) for t in seq if t != blank]


def ctc_collapse(seq, blank=BLANK):
    """Merge repeated symbols, then drop blanks."""
    out = []
    prev = None
    for s in seq:
        s = int(s)
        if s != prev and s != blank:
            out.append(s)
        prev = s
    return out


def min_frames(y):
    """Fewest frames a CTC path needs to emit ``y``."""
    y = list(y)
    return len(y) + sum(1 for a, b in zip(y, y[1:]) if a == b)


def unpad(row):
    """Drop ``-1`` padding from one row of a padded label matrix."""
    return [int(t) for t in row if t >= 0]


def alignment_runs(a):
    """Per label row of a U x T 0/1 matrix, the ``(first, last)`` occupied frame.

    Raises :class:`InvalidAlignment` unless every row is a non-empty block of
    consecutive frames and the blocks are disjoint and in label order.
    """
    a = np.asarray(a)
    runs = []
    prev_end = -1
    for u, row in enumerate(a):
        frames = np.flatnonzero(row)
        if frames.size == 0:
            raise InvalidAlignment(f"label {u} occupies no frame")
        start, end = int(frames[0]), int(frames[-1])
        if end - start + 1 != frames.size:
            raise InvalidAlignment(f"label {u} frames are not consecutive")
        if start <= prev_end:
            raise InvalidAlignment(f"label {u} overlaps or precedes label {u - 1}")
        runs.append((start, end))
        prev_end = end
    return runs


def collapse_alignment(a, y, T, blank=BLANK):
    """Frame labels from an alignment: each label fires on the first frame of its run."""
    y = [int(t) for t in y]
    a = np.asarray(a)
    if a.shape != (len(y), T):
        raise InvalidAlignment(f"alignment shape {a.shape} != ({len(y)}, {T})")
    labels = [blank] * T
    for tok, (start, _) in zip(y, alignment_runs(a)):
        labels[start] = tok
    return labels


def runs_to_matrix(runs, T):
    a = np.zeros((len(runs), T), dtype=np.int64)
    for u, (s, e) in enumerate(runs):
        a[u, s : e + 1] = 1
    return a


class EditCounts(NamedTuple):
    ins: int
    dele: int
    sub: int

    @property
    def errors(self):
        return self.ins + self.dele + self.sub


def edit_distance(ref, hyp):
    """Levenshtein alignment counts ``(ins, del, sub)``.

    Among minimum-cost alignments the one with the most substitutions wins,
    so ``A B`` vs ``B A`` scores two substitutions rather than an insertion
    plus a deletion.
    """
    ref = list(ref)
    hyp = list(hyp)
    n, m = len(ref), len(hyp)
    # cell: (cost, -sub, ins, dele, sub); tuple order gives the tie-break
    prev = [(j, 0, j, 0, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0, 0, i, 0)]
        for j in range(1, m + 1):
            c, ns, ins, dele, sub = prev[j - 1]
            if ref[i - 1] == hyp[j - 1]:
                best = (c, ns, ins, dele, sub)
            else:
                best = (c + 1, ns - 1, ins, dele, sub + 1)
            c, ns, ins, dele, sub = prev[j]
            cand = (c + 1, ns, ins, dele + 1, sub)
            if cand[:2] < best[:2]:
                best = cand
            c, ns, ins, dele, sub = cur[j - 1]
            cand = (c + 1, ns, ins + 1, dele, sub)
            if cand[:2] < best[:2]:
                best = cand
            cur.append(best)
        prev = cur
    _, _, ins, dele, sub = prev[m]
    return EditCounts(ins, dele, sub)


def error_rate(counts, ref_len):
    return counts.errors / ref_len if ref_len else float(counts.errors)
