#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy twins.

Covers the three hot paths: Bessel evaluation, block loss+gradient, and
full-dyad network sampling. Run as:

    python benchmarks/bench_kernels.py [--nodes 2000] [--block 1000] [--k 8]

The active production backend is chosen by SLDM_BACKEND; this script always
loads both explicitly.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sldm.backend import available_backends, load_kernels  # noqa: E402
from sldm.graph import SignedGraph, adjacency_csr  # noqa: E402


def build_graph(n, p_edge, rng):
    m = int(p_edge * n * (n - 1) / 2)
    ii = rng.integers(0, n, size=3 * m)
    jj = rng.integers(0, n, size=3 * m)
    keep = ii < jj
    pairs = {}
    for a, b in zip(ii[keep][:m].tolist(), jj[keep][:m].tolist()):
        pairs[(a, b)] = int(rng.integers(1, 4)) * (1 if rng.random() < 0.8 else -1)
    src = np.array([p[0] for p in pairs], np.int64)
    dst = np.array([p[1] for p in pairs], np.int64)
    wgt = np.array(list(pairs.values()), np.int64)
    return SignedGraph(n, src, dst, wgt, False)


def timeit(fn, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=2000)
    ap.add_argument("--block", type=int, default=1000)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--density", type=float, default=0.01)
    args = ap.parse_args()

    if "numba" not in available_backends():
        print("numba not importable; nothing to compare")
        return

    knp = load_kernels("numpy")
    knb = load_kernels("numba")
    rng = np.random.default_rng(0)

    n, k = args.nodes, args.k
    graph = build_graph(n, args.density, rng)
    indptr, indices, weights = adjacency_csr(graph)
    E = np.ascontiguousarray(0.5 * rng.standard_normal((k, n)))
    ep = 0.1 * rng.standard_normal(n) - 1.0
    en = 0.1 * rng.standard_normal(n) - 2.0
    block = np.unique(rng.integers(0, n, size=args.block))

    orders = np.repeat(np.arange(0, 40, dtype=np.int64), 2500)
    xs = np.tile(np.linspace(0.01, 25.0, 2500), 40)

    rows = []

    # warm up the jit before timing
    knb.log_bessel_i_arr(orders[:10], xs[:10])
    knb.und_loss_grad(E, ep, en, block[:8], indptr, indices, weights)
    knb.sample_dyads_und(E[:, :20], ep[:20], en[:20], np.random.default_rng(1))

    t_np, _ = timeit(lambda: knp.log_bessel_i_arr(orders, xs))
    t_nb, _ = timeit(lambda: knb.log_bessel_i_arr(orders, xs))
    rows.append((f"log_bessel_i ({orders.size:,} evals)", t_np, t_nb))

    t_np, r1 = timeit(lambda: knp.und_loss_grad(E, ep, en, block, indptr, indices, weights), 1)
    t_nb, r2 = timeit(lambda: knb.und_loss_grad(E, ep, en, block, indptr, indices, weights), 1)
    n_dyads = block.size * (block.size - 1) // 2
    assert abs(r1[0] - r2[0]) <= 1e-6 * max(1.0, abs(r1[0]))
    rows.append((f"block loss+grad ({n_dyads:,} dyads)", t_np, t_nb))

    t_np, _ = timeit(lambda: knp.sample_dyads_und(E, ep, en, np.random.default_rng(2)), 1)
    t_nb, _ = timeit(lambda: knb.sample_dyads_und(E, ep, en, np.random.default_rng(2)), 1)
    rows.append((f"network sampling ({n*(n-1)//2:,} dyads)", t_np, t_nb))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(f"{name:<{width}} {t_np:>9.3f}s {t_nb:>9.3f}s {t_np/t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
