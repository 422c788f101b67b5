"""Training loop, evaluation and the concatenated-utterance robustness run."""
import csv
import io
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..labels import edit_distance
from ..model import Adam, Batch, build_model, forward_backward_step, load_checkpoint, save_checkpoint
from ..config import Config

log = logging.getLogger(__name__)

METRICS_HEADER = ["step", "epoch", "L", "L_ctc", "L_b", "L_nb", "gated_frac", "ter", "ins", "del", "sub"]


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Scores:
    ins: int = 0
    dele: int = 0
    sub: int = 0
    ref_len: int = 0
    max_tokens_per_frame: float = 0.0
    n_utts: int = 0

    @property
    def errors(self):
        return self.ins + self.dele + self.sub

    @property
    def ter(self):
        return self.errors / self.ref_len if self.ref_len else float(self.errors)

    def rates(self):
        n = self.ref_len or 1
        return self.ins / n, self.dele / n, self.sub / n


@dataclass
class MetricsRow:
    step: int
    epoch: int
    L: float
    L_ctc: float
    L_b: float
    L_nb: float
    gated_frac: float
    ter: float
    ins: float
    dele: float
    sub: float

    def cells(self):
        return [str(self.step), str(self.epoch)] + [
            repr(float(v)) for v in (self.L, self.L_ctc, self.L_b, self.L_nb, self.gated_frac,
                                     self.ter, self.ins, self.dele, self.sub)
        ]


def write_metrics(path, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        w.writerow(r.cells())
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_metrics(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def make_batch(utts):
    return Batch.from_arrays([u.features for u in utts], [u.transcript for u in utts], [u.id for u in utts])


def decode(model, utts, batch_size=64):
    hyps = []
    for i in range(0, len(utts), batch_size):
        b = make_batch(utts[i : i + batch_size])
        hyps.extend(model.greedy_decode(b.feats, b.lengths))
    return hyps


def score(refs, hyps, frames):
    s = Scores()
    for ref, hyp, T in zip(refs, hyps, frames):
        c = edit_distance(ref, hyp)
        s.ins += c.ins
        s.dele += c.dele
        s.sub += c.sub
        s.ref_len += len(ref)
        s.n_utts += 1
        s.max_tokens_per_frame = max(s.max_tokens_per_frame, len(hyp) / int(T))
    return s


def evaluate(model, utts, batch_size=64):
    hyps = decode(model, utts, batch_size)
    frames = model.encoder.out_lengths([u.frames for u in utts])
    return score([u.transcript for u in utts], hyps, frames), hyps


@dataclass
class TrainResult:
    model: object
    rows: list
    test: Scores = None
    seconds: float = 0.0
    peak_joint_activations: int = 0
    infeasible: int = 0
    extra: dict = field(default_factory=dict)


def run_training(config, data, out_dir=None, eval_split="dev", progress=None):
    """Train for ``config.epochs`` epochs, decoding ``eval_split`` after each.

    ``data`` maps split names to utterance lists. When ``out_dir`` is given,
    ``metrics.csv``, ``config.json`` and ``checkpoint/`` are written there.
    """
    start = time.perf_counter()
    model = build_model(config)
    opt = Adam(model.store, config.lr, (config.beta1, config.beta2), config.adam_eps,
               config.clip, config.warmup_steps)
    train = data["train"]
    rows = []
    infeasible = 0
    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train))
        sums = np.zeros(5)
        n_steps = 0
        for i in range(0, len(order), config.batch_size):
            batch = make_batch([train[k] for k in order[i : i + config.batch_size]])
            res = forward_backward_step(model, batch, epoch=epoch)
            loss = res.loss
            if not all(math.isfinite(v) for v in loss[:4]):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {opt.step_count}: {loss}")
            opt.step()
            infeasible += res.n_infeasible
            sums += (loss.total, loss.ctc, loss.blank, loss.nonblank, res.gated_frac)
            n_steps += 1
        means = sums / max(n_steps, 1)
        sc, _ = evaluate(model, data[eval_split])
        ins, dele, sub = sc.rates()
        row = MetricsRow(opt.step_count, epoch, *means, sc.ter, ins, dele, sub)
        rows.append(row)
        log.info("epoch %d L=%.4f ctc=%.4f gated=%.2f ter=%.4f", epoch, row.L, row.L_ctc, row.gated_frac, row.ter)
        if progress is not None:
            progress(row)
    result = TrainResult(model, rows, seconds=time.perf_counter() - start,
                         peak_joint_activations=model.peak_joint_activations, infeasible=infeasible)
    if "test" in data:
        result.test, _ = evaluate(model, data["test"])
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics(os.path.join(out_dir, "metrics.csv"), rows)
        config.save(os.path.join(out_dir, "config.json"))
        save_checkpoint(os.path.join(out_dir, "checkpoint"), model.store, opt, config.to_dict())
    return result


def load_model(checkpoint_dir, config=None):
    import json

    with open(os.path.join(checkpoint_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    config = config or Config.from_dict(manifest["config"])
    model = build_model(config)
    load_checkpoint(checkpoint_dir, model.store)
    return model


def concat_utterances(utts, cat, gap_frames=0):
    """Splice each run of ``cat`` adjacent utterances into one (trailing remainder dropped)."""
    from .synth import Utterance

    out = []
    for i in range(0, len(utts) - cat + 1, cat):
        group = utts[i : i + cat]
        F = group[0].features.shape[1]
        gap = np.zeros((gap_frames, F))
        feats, transcript, runs = [], [], []
        offset = 0
        for k, u in enumerate(group):
            if k and gap_frames:
                feats.append(gap)
                offset += gap_frames
            feats.append(u.features)
            transcript.extend(u.transcript)
            runs.extend((s + offset, e + offset) for s, e in u.alignment)
            offset += u.frames
        out.append(Utterance("+".join(u.id for u in group), np.concatenate(feats), transcript, runs))
    return out


def run_concat_eval(model, utts, cats=(2, 4, 8), gap_frames=0):
    """Per splice factor: ``(cat, Scores)``."""
    results = []
    for cat in cats:
        joined = utts if cat == 1 else concat_utterances(utts, cat, gap_frames)
        sc, _ = evaluate(model, joined, batch_size=32)
        results.append((cat, sc))
    return results
