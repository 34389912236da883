"""Benchmark: compiled Hopfield recall kernel vs the pure-numpy fallback.

Builds a 225-unit memory holding 20 sparse codes, then times batches of
recalls from corrupted cues through both implementations and checks that
they agree on every final state.

Run:  python benchmarks/bench_hopfield.py [n_recalls]
"""

import sys
import time

import numpy as np

from aha._kernels import USING_COMPILED, hopfield_py
from aha.hippocampus import HopfieldMemory

if USING_COMPILED:
    from aha._kernels import hopfield_cy
else:
    hopfield_cy = None


def build_memory(n=225, k=10, patterns=20, seed=0):
    bias = (2.0 * k - n) / n
    theta = -bias * (1.0 - bias * bias)
    mem = HopfieldMemory(n, activity_bias=bias, threshold=theta)
    rng = np.random.default_rng(seed)
    pats = []
    for _ in range(patterns):
        p = -np.ones(n)
        p[rng.choice(n, size=k, replace=False)] = 1.0
        mem.store(p)
        pats.append(p)
    return mem, np.array(pats), rng


def make_cues(pats, rng, n_recalls, flip=25):
    n = pats.shape[1]
    cues = []
    for i in range(n_recalls):
        cue = pats[i % len(pats)].copy()
        cue[rng.choice(n, size=flip, replace=False)] *= -1.0
        cues.append(cue)
    return cues


def time_impl(impl, mem, cues, order):
    weights = np.ascontiguousarray(mem.weights)
    offset = mem.activity_bias * mem.weights.sum(axis=1) + mem.threshold
    finals = []
    start = time.perf_counter()
    for cue in cues:
        state = cue.copy()
        impl.hopfield_recall(weights, state, order, 50, offset)
        finals.append(state)
    return time.perf_counter() - start, finals


def main():
    n_recalls = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    mem, pats, rng = build_memory()
    cues = make_cues(pats, rng, n_recalls)
    order = rng.permutation(mem.n).astype(np.int64)

    t_py, finals_py = time_impl(hopfield_py, mem, cues, order)
    print(f"numpy fallback : {n_recalls} recalls in {t_py:.3f}s "
          f"({t_py / n_recalls * 1e6:.0f} us/recall)")

    if hopfield_cy is None:
        print("compiled kernel: not built (install with the extension to compare)")
        return
    t_cy, finals_cy = time_impl(hopfield_cy, mem, cues, order)
    print(f"compiled kernel: {n_recalls} recalls in {t_cy:.3f}s "
          f"({t_cy / n_recalls * 1e6:.0f} us/recall)")
    print(f"speedup        : {t_py / t_cy:.1f}x")

    agree = sum(np.array_equal(a, b) for a, b in zip(finals_py, finals_cy))
    print(f"agreement      : {agree}/{n_recalls} identical final states")


if __name__ == "__main__":
    main()
