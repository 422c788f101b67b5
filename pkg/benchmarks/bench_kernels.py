"""Numba loops vs numpy-vectorized kernels on training-sized batches.

Usage: python3 benchmarks/bench_kernels.py [--n 16] [--t 44] [--u 7] [--v 12] [--repeat 20]

Both kernel modules are imported directly, so the LWT_NUMBA flag does not
matter here. The first numba call per kernel (JIT compile, or cache load)
is excluded from timings. For an end-to-end comparison run training twice:
``lwt train ...`` and ``LWT_NUMBA=0 lwt train ...``.
"""
import argparse
import time

import numpy as np

from lwtransducer.kernels import loops, vectorized
from lwtransducer.labels import expand_with_blanks
from lwtransducer.tensor_core import log_softmax


def make_inputs(n, t, u, v, seed=0):
    rng = np.random.default_rng(seed)
    logp = log_softmax(rng.normal(size=(n, t, v)) * 2.0, axis=-1)
    t_lens = rng.integers(max(2 * u, 1), t + 1, size=n)
    s_max = 2 * u + 1
    ext = np.zeros((n, s_max), dtype=np.int64)
    s_lens = np.empty(n, dtype=np.int64)
    for i in range(n):
        k = int(rng.integers(1, u + 1))
        y = []
        while len(y) < k:
            tok = int(rng.integers(1, v))
            if not y or tok != y[-1]:
                y.append(tok)
        e = expand_with_blanks(y, 0)
        ext[i, : len(e)] = e
        s_lens[i] = len(e)
    blank_lp = np.log(rng.uniform(0.05, 0.95, size=(t, u + 1)))
    emit_lp = np.log(rng.uniform(0.05, 0.95, size=(t, u)))
    return logp, ext, t_lens, s_lens, blank_lp, emit_lp


def cases(mod, inputs):
    logp, ext, t_lens, s_lens, blank_lp, emit_lp = inputs
    return {
        "ctc loss+grad (batch)": lambda: mod.ctc_loss_grad_batch(logp, ext, t_lens, s_lens),
        "viterbi align (batch)": lambda: mod.best_path_batch(logp, ext, t_lens, s_lens, False),
        "replica align (batch)": lambda: mod.best_path_batch(logp, ext, t_lens, s_lens, True),
        "transducer alpha+beta": lambda: (mod.rnnt_alpha(blank_lp, emit_lp), mod.rnnt_beta(blank_lp, emit_lp)),
    }


def best_of(fn, repeat):
    fn()  # warm-up: JIT compile / cache load for numba
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16, help="batch size")
    ap.add_argument("--t", type=int, default=44, help="frames")
    ap.add_argument("--u", type=int, default=7, help="max label length")
    ap.add_argument("--v", type=int, default=12, help="vocabulary incl. blank")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    inputs = make_inputs(args.n, args.t, args.u, args.v)
    fast = cases(loops, inputs)
    slow = cases(vectorized, inputs)
    print(f"N={args.n} T={args.t} U<={args.u} V={args.v}, best of {args.repeat}")
    print(f"{'kernel':<24}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name in fast:
        a = best_of(fast[name], args.repeat)
        b = best_of(slow[name], args.repeat)
        print(f"{name:<24}{a * 1e3:>10.3f}{b * 1e3:>10.3f}{b / a:>8.1f}x")


if __name__ == "__main__":
    main()
