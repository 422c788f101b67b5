"""``lwt`` command line: data generation, training, alignment and evaluation."""
import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from .. import kernels
from ..config import Config, json_key
from ..ctc import ctc_forward
from ..errors import LwtError
from ..forced_align import MODES, forced_align_batch, format_alignment
from ..labels import unpad
from ..tensor_core import read_tensor, save_array
from ..transducer_ref import memory_footprint_report
from .synth import SynthConfig, gen_synth, read_dataset, read_split, write_dataset
from .train import (
    load_model,
    run_concat_eval,
    run_training,
    evaluate,
    decode,
)

log = logging.getLogger("lwtransducer")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _flag(name):
    return "--" + json_key(name).replace("_", "-")


def _add_dataclass_flags(parser, cls, group_title):
    group = parser.add_argument_group(group_title)
    for f in dataclasses.fields(cls):
        kwargs = {"dest": f.name, "default": None, "help": f"(default: {f.default})"}
        if f.type in (bool, "bool"):
            kwargs["action"] = argparse.BooleanOptionalAction
        else:
            kwargs["type"] = {"int": int, "float": float, "str": str}.get(
                getattr(f.type, "__name__", f.type), str
            )
        group.add_argument(_flag(f.name), **kwargs)


def _overrides(args, cls):
    return {f.name: getattr(args, f.name) for f in dataclasses.fields(cls) if getattr(args, f.name, None) is not None}


def _read_labels(path):
    with open(path) as fh:
        rows = json.load(fh)
    if rows and isinstance(rows[0], int):
        rows = [rows]
    U = max((len(r) for r in rows), default=0)
    out = np.full((len(rows), U), -1, dtype=np.int64)
    for n, r in enumerate(rows):
        out[n, : len(r)] = r
    return out


def cmd_gen_data(args):
    cfg = SynthConfig(**_overrides(args, SynthConfig))
    data = gen_synth(cfg)
    write_dataset(args.out, data, cfg)
    print(f"wrote {sum(len(v) for v in data.values())} utterances to {args.out}")


def _train_config(args):
    base = Config.load(args.config) if args.config else Config()
    return dataclasses.replace(base, **_overrides(args, Config))


def cmd_train(args):
    cfg = _train_config(args)
    data = read_dataset(args.data)
    result = run_training(cfg, data, out_dir=args.out, eval_split=args.eval_split)
    last = result.rows[-1]
    print(f"epochs={cfg.epochs} {args.eval_split}_ter={last.ter:.4f} seconds={result.seconds:.1f}")
    if result.test is not None:
        print(f"test_ter={result.test.ter:.4f}")
    print(f"metrics: {os.path.join(args.out, 'metrics.csv')}")


def cmd_align(args):
    grid = read_tensor(args.grid)
    labels = _read_labels(args.labels)
    a = forced_align_batch(grid, labels, args.blank, args.mode)
    if args.out:
        save_array(args.out, a.astype(np.float64), grid.lengths)
    for n in range(grid.N):
        U = len(unpad(labels[n]))
        print(f"# item {n}")
        text = format_alignment(a[n, :U, : grid.lengths[n]])
        if text:
            print(text)


def cmd_ctc_loss(args):
    grid = read_tensor(args.grid)
    labels = _read_labels(args.labels)
    for n in range(grid.N):
        loss, _ = ctc_forward(grid.item(n), unpad(labels[n]), args.blank)
        print(f"{n},{loss!r}")


def _load(args):
    model = load_model(args.checkpoint)
    utts = read_split(args.data, args.split)
    return model, utts


def cmd_decode(args):
    model, utts = _load(args)
    for u, hyp in zip(utts, decode(model, utts)):
        print(json.dumps({"id": u.id, "hyp": hyp, "ref": u.transcript}))


def cmd_eval(args):
    model, utts = _load(args)
    sc, _ = evaluate(model, utts)
    ins, dele, sub = sc.rates()
    print("ter,ins,del,sub")
    print(f"{sc.ter!r},{ins!r},{dele!r},{sub!r}")


def cmd_concat_eval(args):
    model, utts = _load(args)
    cats = [int(c) for c in args.cats.split(",")]
    print("cat,ins,del,sub,wer,max_tokens_per_frame")
    for cat, sc in run_concat_eval(model, utts, cats, args.gap_frames):
        ins, dele, sub = sc.rates()
        print(f"{cat},{ins!r},{dele!r},{sub!r},{sc.ter!r},{sc.max_tokens_per_frame!r}")


def cmd_memreport(args):
    rep = memory_footprint_report(args.n, args.t, args.u, args.v)
    print("full_activations,frame_activations,ratio")
    print(rep.csv())


def build_parser():
    p = _Parser(prog="lwt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("gen-data", help="generate the synthetic corpus")
    s.add_argument("--out", required=True, help="output directory")
    _add_dataclass_flags(s, SynthConfig, "corpus")
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", help="train a model; writes metrics.csv and checkpoint/")
    s.add_argument("--data", required=True, help="dataset directory from gen-data")
    s.add_argument("--config", help="JSON config; flags override its keys")
    s.add_argument("--out", default="run", help="run directory (default: run)")
    s.add_argument("--eval-split", default="dev", help="split decoded after each epoch")
    _add_dataclass_flags(s, Config, "model and training")
    s.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("align", cmd_align, "CTC forced alignment of a log-prob grid"),
        ("ctc-loss", cmd_ctc_loss, "CTC loss per batch item"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--grid", required=True, help="N x T x V log-prob tensor file")
        s.add_argument("--labels", required=True, help="JSON list of token-id lists")
        s.add_argument("--blank", type=int, default=0)
        if name == "align":
            s.add_argument("--mode", choices=MODES, default="viterbi")
            s.add_argument("--out", help="also write the N x U x T alignment tensor here")
        s.set_defaults(func=func)

    for name, func, helptext in (
        ("decode", cmd_decode, "greedy-decode a split, one JSON line per utterance"),
        ("eval", cmd_eval, "token error rate with insertion/deletion/substitution rates"),
        ("concat-eval", cmd_concat_eval, "decode spliced runs of adjacent utterances"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--checkpoint", required=True, help="checkpoint directory")
        s.add_argument("--data", required=True, help="dataset directory")
        s.add_argument("--split", default="test")
        if name == "concat-eval":
            s.add_argument("--cats", default="2,4,8", help="comma-separated splice counts")
            s.add_argument("--gap-frames", type=int, default=0, help="zero frames between spliced clips")
        s.set_defaults(func=func)

    s = sub.add_parser("memreport", help="joint-output sizes, full lattice vs frame level")
    for dim in ("n", "t", "u", "v"):
        s.add_argument(f"--{dim}", type=int, required=True)
    s.set_defaults(func=cmd_memreport)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    log.debug("kernel backend: %s", kernels.backend_name())
    try:
        args.func(args)
    except (LwtError, ValueError, OSError, KeyError) as exc:
        print(f"lwt {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
