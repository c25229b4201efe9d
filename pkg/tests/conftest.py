"""Shared fixtures: small deterministic graphs and parameter containers."""

import numpy as np
import pytest

from sldm.graph import SignedGraph
from sldm import model as model_mod


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance criterion at the end of the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, desc, elapsed, outcome, note in sorted(RESULTS):
        line = f"[{cid}] {outcome:<4} {desc} ({elapsed:.1f}s)"
        if note and outcome != "PASS":
            line += f" -- {note}"
        terminalreporter.write_line(line)


def random_signed_graph(n, directed, p_edge, seed, w_lo=-3, w_hi=3):
    """Erdos-Renyi-style signed graph with nonzero integer weights."""
    rng = np.random.default_rng(seed)
    src, dst, wgt = [], [], []
    for i in range(n):
        for j in range(n):
            take = (i != j) if directed else (i < j)
            if take and rng.random() < p_edge:
                w = 0
                while w == 0:
                    w = int(rng.integers(w_lo, w_hi + 1))
                src.append(i)
                dst.append(j)
                wgt.append(w)
    return SignedGraph(n, np.array(src, np.int64), np.array(dst, np.int64),
                       np.array(wgt, np.int64), directed)


def two_camp_graph(n=40, seed=0, p_in=0.35, p_out=0.15):
    """Two clusters, positive inside, negative across; connected by construction."""
    rng = np.random.default_rng(seed)
    half = n // 2
    src, dst, wgt = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            same = (i < half) == (j < half)
            if same and rng.random() < p_in:
                src.append(i); dst.append(j); wgt.append(int(rng.integers(1, 4)))
            elif not same and rng.random() < p_out:
                src.append(i); dst.append(j); wgt.append(-int(rng.integers(1, 4)))
    # spanning chain keeps it connected regardless of the draw
    have = set(zip(src, dst))
    for i in range(n - 1):
        if (i, i + 1) not in have:
            src.append(i); dst.append(i + 1)
            same = (i < half) == (i + 1 < half)
            wgt.append(1 if same else -1)
    order = np.lexsort((dst, src))
    return SignedGraph(n, np.array(src)[order], np.array(dst)[order],
                       np.array(wgt)[order], False)


def random_params(model, mode, k, n, seed, scale=0.4):
    rng = np.random.default_rng(seed)

    def mat(*shape):
        return scale * rng.standard_normal(shape)

    if mode == "undirected":
        if model == "sldm":
            return model_mod.SldmParams(mat(k, n), mat(n), mat(n))
        return model_mod.SlimParams(mat(k, k), mat(k, n), mat(k, n), mat(n), mat(n))
    expressive = mode == "directed-expressive"
    if model == "sldm":
        return model_mod.DirectedParams(
            mat(k, n), mat(k, n), mat(k, n) if expressive else None,
            mat(n), mat(n), mat(n), mat(n))
    segs = 3 if expressive else 2
    return model_mod.DirectedSlimParams(
        mat(k, k), mat(k, n), mat(k, n), mat(k, n) if expressive else None,
        mat(k, segs * n), mat(n), mat(n), mat(n), mat(n))


ALL_VARIANTS = [
    ("sldm", "undirected"),
    ("slim", "undirected"),
    ("sldm", "directed"),
    ("sldm", "directed-expressive"),
    ("slim", "directed"),
    ("slim", "directed-expressive"),
]


@pytest.fixture(scope="session")
def camp_graph():
    return two_camp_graph(n=40, seed=0)


@pytest.fixture(scope="session")
def camp_graph_large():
    return two_camp_graph(n=120, seed=1)
