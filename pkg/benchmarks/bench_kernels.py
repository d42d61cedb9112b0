#!/usr/bin/env python3
"""Times the compiled attention kernels against the numpy fallback.

Two sections: a microbenchmark of attn_forward/attn_backward over typical
shapes, and (with --train) one full training step per backend run in a
subprocess so the import-time PINYINLM_KERNELS selection applies end to end.

Usage: python benchmarks/bench_kernels.py [--train] [--repeats N]
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pinyinlm import kernels

SHAPES = (
    (2, 16, 16),
    (4, 32, 32),
    (4, 64, 32),
    (8, 128, 64),
)

TRAIN_SNIPPET = """
import time
from pinyinlm import kernels
from pinyinlm.lexicon import load_lexicon, default_lexicon_path
from pinyinlm.model import ModelConfig
from pinyinlm.training import TrainConfig, build_vocab, read_corpus, train

corpus = read_corpus("tests/data/toy/overfit_200.txt")
lex = load_lexicon(default_lexicon_path())
vocab = build_vocab(lex, corpus)
mc = ModelConfig(n_layers=2, d_model=128, n_heads=4, d_ff=512,
                 n_tokens=vocab.n_tokens, head_size=vocab.head_size,
                 variant="concat", max_positions=64, seed=0)
tc = TrainConfig(steps=5, batch_size_tokens=2048, learning_rate=3e-4, seed=0)
t0 = time.perf_counter()
train(corpus, lex, mc, tc)
dt = (time.perf_counter() - t0) / 5
print(f"{kernels.backend_name()}\t{dt * 1000:.1f}")
"""


def backends():
    pairs = [("numpy", kernels._NumpyBackend())]
    try:
        from pinyinlm import _attnkernels
    except ImportError:
        return pairs
    return [("ext", kernels._ExtBackend(_attnkernels))] + pairs


def bench_micro(repeats: int) -> None:
    rng = np.random.default_rng(0)
    rows = []
    for heads, t, d in SHAPES:
        q, k, v = (rng.standard_normal((heads, t, d)) for _ in range(3))
        dout = rng.standard_normal((heads, t, d))
        per_backend = {}
        for name, backend in backends():
            out, probs = backend.attn_forward(q, k, v)  # warm + correctness input
            start = time.perf_counter()
            for _ in range(repeats):
                backend.attn_forward(q, k, v)
                backend.attn_backward(q, k, v, probs, dout)
            per_backend[name] = (time.perf_counter() - start) / repeats * 1e6
        rows.append(((heads, t, d), per_backend))

    names = [name for name, _ in backends()]
    header = "shape (h,T,d)".ljust(16) + "".join(f"{n + ' us':>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for shape, per_backend in rows:
        line = f"{str(shape):<16}" + "".join(f"{per_backend[n]:>12.1f}" for n in names)
        if len(names) == 2:
            line += f"{per_backend['numpy'] / per_backend['ext']:>9.2f}x"
        print(line)


def bench_train() -> None:
    print("\nfull training step (2L d128 concat, ms/step):")
    for choice in ("ext", "numpy"):
        if choice == "ext" and "ext" not in kernels.available_backends():
            print("ext\tunavailable")
            continue
        env = dict(os.environ, PINYINLM_KERNELS=choice)
        result = subprocess.run(
            [sys.executable, "-c", TRAIN_SNIPPET],
            env=env, capture_output=True, text=True,
            cwd=Path(__file__).resolve().parents[1],
        )
        print(result.stdout.strip() or f"{choice}\tfailed: {result.stderr.strip()[-200:]}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--train", action="store_true",
                        help="also time one full training step per backend")
    args = parser.parse_args()
    print(f"active backend: {kernels.backend_name()}")
    bench_micro(args.repeats)
    if args.train:
        bench_train()
    return 0


if __name__ == "__main__":
    sys.exit(main())
