"""Synthetic sequence-labelling corpus with known frame alignments.

Each token owns a random embedding; an utterance is a run of token segments
(optionally separated by silence) rendered frame by frame as the segment's
embedding plus Gaussian noise. Silence renders as the zero vector plus noise.
"""
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..labels import collapse_alignment, runs_to_matrix, strip_blanks
from ..tensor_core import load_array, save_array

SPLITS = ("train", "dev", "test")


@dataclass
class SynthConfig:
    vocab_size: int = 12
    feat_dim: int = 16
    dur_min: int = 2
    dur_max: int = 4
    silence_prob: float = 0.3
    silence_min: int = 1
    silence_max: int = 2
    noise_std: float = 0.7
    min_tokens: int = 1
    max_tokens: int = 7
    n_train: int = 500
    n_dev: int = 100
    n_test: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.dur_min < 1 or self.dur_max < self.dur_min:
            raise ValueError("need 1 <= dur_min <= dur_max")
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3")
        if self.silence_min < 1 or self.silence_max < self.silence_min:
            raise ValueError("need 1 <= silence_min <= silence_max")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ValueError("need 1 <= min_tokens <= max_tokens")

    @property
    def max_frames(self):
        return self.max_tokens * (self.dur_max + self.silence_max) + self.silence_max

    def sizes(self):
        return {"train": self.n_train, "dev": self.n_dev, "test": self.n_test}


@dataclass
class Utterance:
    id: str
    features: np.ndarray  # T x F
    transcript: list
    alignment: list  # (first, last) frame per token

    @property
    def frames(self):
        return self.features.shape[0]

    def alignment_matrix(self):
        return runs_to_matrix(self.alignment, self.frames)


def token_embeddings(cfg):
    rng = np.random.default_rng([cfg.seed, 0])
    emb = rng.normal(size=(cfg.vocab_size, cfg.feat_dim))
    emb[0] = 0.0
    return emb


def _sample(rng, cfg, emb, uid):
    n_tok = int(rng.integers(cfg.min_tokens, cfg.max_tokens + 1))
    transcript = []
    for _ in range(n_tok):
        choices = [v for v in range(1, cfg.vocab_size) if not transcript or v != transcript[-1]]
        transcript.append(int(rng.choice(choices)))
    segments = []  # (symbol or 0 for silence, duration)
    runs = []
    t = 0
    for tok in transcript:
        if rng.random() < cfg.silence_prob:
            d = int(rng.integers(cfg.silence_min, cfg.silence_max + 1))
            segments.append((0, d))
            t += d
        d = int(rng.integers(cfg.dur_min, cfg.dur_max + 1))
        segments.append((tok, d))
        runs.append((t, t + d - 1))
        t += d
    if rng.random() < cfg.silence_prob:
        segments.append((0, int(rng.integers(cfg.silence_min, cfg.silence_max + 1))))
    symbols = np.concatenate([np.full(d, s) for s, d in segments])
    feats = emb[symbols] + cfg.noise_std * rng.normal(size=(symbols.size, cfg.feat_dim))
    return Utterance(uid, feats, transcript, runs)


def gen_synth(cfg):
    """``{"train": [...], "dev": [...], "test": [...]}``, deterministic per seed."""
    emb = token_embeddings(cfg)
    data = {}
    for k, (split, n) in enumerate(cfg.sizes().items()):
        rng = np.random.default_rng([cfg.seed, k + 1])
        data[split] = [_sample(rng, cfg, emb, f"{split}_{i:05d}") for i in range(n)]
    return data


def check_utterance(utt, blank=0):
    """The recorded alignment must collapse back to the transcript."""
    fl = collapse_alignment(utt.alignment_matrix(), utt.transcript, utt.frames, blank)
    return strip_blanks(fl, blank) == list(utt.transcript)


def write_dataset(directory, data, cfg=None):
    """JSONL manifest per split plus one tensor file per utterance."""
    os.makedirs(os.path.join(directory, "feats"), exist_ok=True)
    for split, utts in data.items():
        with open(os.path.join(directory, f"{split}.jsonl"), "w") as fh:
            for u in utts:
                rel = os.path.join("feats", f"{u.id}.ltt")
                save_array(os.path.join(directory, rel), u.features)
                row = {
                    "id": u.id,
                    "transcript": u.transcript,
                    "features": rel,
                    "frames": u.frames,
                    "alignment": [list(r) for r in u.alignment],
                }
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    if cfg is not None:
        with open(os.path.join(directory, "synth.json"), "w") as fh:
            json.dump(asdict(cfg), fh, indent=2, sort_keys=True)


def read_split(directory, split):
    utts = []
    with open(os.path.join(directory, f"{split}.jsonl")) as fh:
        for line in fh:
            row = json.loads(line)
            feats, _ = load_array(os.path.join(directory, row["features"]))
            utts.append(Utterance(row["id"], feats, row["transcript"], [tuple(r) for r in row["alignment"]]))
    return utts


def read_dataset(directory):
    return {s: read_split(directory, s) for s in SPLITS if os.path.exists(os.path.join(directory, f"{s}.jsonl"))}
