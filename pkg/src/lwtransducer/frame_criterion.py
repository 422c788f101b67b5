"""Frame-level criterion: pairing frames with decoder states, blank/non-blank
decoupling, the CTC-gated composite loss, and the gradient stop in front of
the blank classifier.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .labels import BLANK

SENTINEL = -1
BLANK_DECISIONS = ("threshold", "combined_argmax")


@dataclass(frozen=True)
class PairedFrames:
    """Per frame t: decoder state index ``dec[t]`` and last emitting frame ``last[t]``."""

    dec: np.ndarray
    last: np.ndarray


def pair_frames(frame_labels, blank=BLANK):
    """Decoder state stays put on blank frames and advances after each emission.

    ``dec[t]`` counts the non-blank frames strictly before t; ``last[t]`` is
    the most recent such frame, or ``SENTINEL``.
    """
    labels = np.asarray(frame_labels, dtype=np.int64)
    emit = labels != blank
    dec = np.concatenate(([0], np.cumsum(emit)[:-1])) if labels.size else np.zeros(0, np.int64)
    last = np.full(labels.size, SENTINEL, dtype=np.int64)
    prev = SENTINEL
    for t in range(labels.size):
        last[t] = prev
        if emit[t]:
            prev = t
    return PairedFrames(dec.astype(np.int64), last)


def nonblank_classes(tokens, blank=BLANK):
    """Token ids -> indices into the (V-1)-way non-blank classifier."""
    tokens = np.asarray(tokens, dtype=np.int64)
    return np.where(tokens > blank, tokens - 1, tokens)


def nonblank_tokens(classes, blank=BLANK):
    classes = np.asarray(classes, dtype=np.int64)
    return np.where(classes >= blank, classes + 1, classes)


def combine_distribution(p_blank, p_nonblank, blank=BLANK, tol=1e-6):
    """Blank probability plus the non-blank distribution scaled by ``1 - p_blank``.

    Works on a single frame or on any leading batch shape.
    """
    p_blank = np.asarray(p_blank, dtype=np.float64)
    p_nonblank = np.asarray(p_nonblank, dtype=np.float64)
    if np.any((p_blank < 0) | (p_blank > 1)):
        raise ValueError("p_blank outside [0, 1]")
    if np.any(np.abs(p_nonblank.sum(axis=-1) - 1.0) > tol) or np.any(p_nonblank < 0):
        raise ValueError("p_nonblank is not a normalized distribution")
    scaled = p_nonblank * (1.0 - p_blank)[..., None]
    return np.insert(scaled, blank, p_blank, axis=-1)


def _bce_terms(p_blank, target):
    p = np.asarray(p_blank, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(target, -np.log(p), -np.log1p(-p))


def blank_loss(p_blank, frame_labels, blank=BLANK):
    """Mean binary cross-entropy over all frames; target is 1 on blank frames."""
    target = np.asarray(frame_labels) == blank
    if target.size == 0:
        return 0.0
    return float(np.mean(_bce_terms(p_blank, target)))


def nonblank_loss(p_nonblank, frame_labels, blank=BLANK):
    """Mean cross-entropy over non-blank frames only.

    Returns ``(loss, degenerate)``; an utterance with no non-blank frame
    scores 0 and is flagged.
    """
    labels = np.asarray(frame_labels, dtype=np.int64)
    frames = np.flatnonzero(labels != blank)
    if frames.size == 0:
        return 0.0, True
    p = np.asarray(p_nonblank, dtype=np.float64)[frames, nonblank_classes(labels[frames], blank)]
    with np.errstate(divide="ignore"):
        return float(np.mean(-np.log(p))), False


@dataclass(frozen=True)
class LossConfig:
    lambda_: float = 0.3
    ctc_gate: float = 2.0
    blank_threshold: float = 0.5
    blank_decision: str = "threshold"

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not 0.0 <= self.blank_threshold <= 1.0:
            raise ValueError("blank_threshold must lie in [0, 1]")
        if self.blank_decision not in BLANK_DECISIONS:
            raise ValueError(f"blank_decision must be one of {BLANK_DECISIONS}")


class CompositeLoss(NamedTuple):
    total: float
    ctc: float
    blank: float
    nonblank: float
    gated: bool


def composite_loss(l_ctc, l_blank, l_nonblank, config=LossConfig()):
    """CTC alone while ``l_ctc >= ctc_gate``; afterwards the weighted mix."""
    if l_ctc < config.ctc_gate:
        lam = config.lambda_
        total = lam * l_ctc + (1.0 - lam) * l_nonblank + l_blank
        return CompositeLoss(total, l_ctc, l_blank, l_nonblank, False)
    return CompositeLoss(l_ctc, l_ctc, l_blank, l_nonblank, True)


class StopGradient:
    """Identity in the forward pass; blocks the gradient on the way back when active."""

    def __init__(self, active=True):
        self.active = active

    def forward(self, x):
        return np.array(x, copy=True)

    def backward(self, dx):
        return np.zeros_like(dx) if self.active else dx


def stop_gradient_boundary(x, active=True):
    """Returns ``(values, backward)`` where ``backward`` maps upstream grads to zeros."""
    gate = StopGradient(active)
    return gate.forward(x), gate.backward


def blank_decision(p_blank, p_nonblank, config=LossConfig(), blank=BLANK):
    """Frame-synchronous decision: ``None`` for blank, else the emitted token id."""
    best = int(np.argmax(p_nonblank))
    if config.blank_decision == "threshold":
        if p_blank >= config.blank_threshold:
            return None
    else:
        if p_blank >= p_nonblank[best] * (1.0 - p_blank):
            return None
    return int(nonblank_tokens(best, blank))
