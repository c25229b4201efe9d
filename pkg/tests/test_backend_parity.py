"""The numba kernels and their pure-numpy twins must agree numerically."""

import numpy as np
import pytest

from sldm.backend import available_backends, load_kernels
from sldm.graph import adjacency_csr

from conftest import random_signed_graph

pytestmark = pytest.mark.skipif(
    "numba" not in available_backends(), reason="numba not importable")


@pytest.fixture(scope="module")
def both():
    return load_kernels("numpy"), load_kernels("numba")


def test_bessel_parity(both):
    knp, knb = both
    orders = np.repeat(np.arange(0, 61, dtype=np.int64), 25)
    xs = np.tile(np.linspace(0.0, 40.0, 25), 61)
    v1, t1 = knp.log_bessel_i_arr(orders, xs)
    v2, t2 = knb.log_bessel_i_arr(orders, xs)
    finite = np.isfinite(v1)
    assert np.array_equal(np.isinf(v1), np.isinf(v2))
    assert np.max(np.abs(v1[finite] - v2[finite])) < 1e-12
    r1 = knp.bessel_ratio_arr(orders, xs)
    r2 = knb.bessel_ratio_arr(orders, xs)
    assert np.max(np.abs(r1 - r2)) < 1e-12


def test_undirected_loss_grad_parity(both):
    knp, knb = both
    rng = np.random.default_rng(0)
    n, k = 50, 4
    g = random_signed_graph(n, False, 0.25, seed=31)
    indptr, indices, weights = adjacency_csr(g)
    E = np.ascontiguousarray(0.5 * rng.standard_normal((k, n)))
    ep = 0.3 * rng.standard_normal(n)
    en = 0.3 * rng.standard_normal(n)
    members = np.arange(n, dtype=np.int64)
    a = knp.und_loss_grad(E, ep, en, members, indptr, indices, weights)
    b = knb.und_loss_grad(E, ep, en, members, indptr, indices, weights)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    for idx in (1, 2, 3):
        assert np.max(np.abs(a[idx] - b[idx])) < 1e-10
    assert a[6] == b[6]  # non-convergence counts agree


def test_directed_loss_grad_parity(both):
    knp, knb = both
    rng = np.random.default_rng(1)
    n, k = 40, 3
    g = random_signed_graph(n, True, 0.15, seed=32)
    indptr, indices, weights = adjacency_csr(g)
    Es = np.ascontiguousarray(0.5 * rng.standard_normal((k, n)))
    Et = np.ascontiguousarray(0.5 * rng.standard_normal((k, n)))
    En = np.ascontiguousarray(0.5 * rng.standard_normal((k, n)))
    effs = [0.2 * rng.standard_normal(n) for _ in range(4)]
    members = np.arange(n, dtype=np.int64)
    for neg_sign, use_neg in ((1.0, False), (-1.0, True), (1.0, True)):
        a = knp.dir_loss_grad(Es, En, Et, *effs, neg_sign, use_neg,
                              members, indptr, indices, weights)
        b = knb.dir_loss_grad(Es, En, Et, *effs, neg_sign, use_neg,
                              members, indptr, indices, weights)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        for idx in range(1, 8):
            assert np.max(np.abs(a[idx] - b[idx])) < 1e-10


def test_loss_only_matches_loss_grad(both):
    for kern in both:
        rng = np.random.default_rng(2)
        n, k = 30, 3
        g = random_signed_graph(n, False, 0.3, seed=33)
        indptr, indices, weights = adjacency_csr(g)
        E = np.ascontiguousarray(0.4 * rng.standard_normal((k, n)))
        ep = 0.2 * rng.standard_normal(n)
        en = 0.2 * rng.standard_normal(n)
        members = np.arange(n, dtype=np.int64)
        l1 = kern.und_loss(E, ep, en, members, indptr, indices, weights)[0]
        l2 = kern.und_loss_grad(E, ep, en, members, indptr, indices, weights)[0]
        assert l1 == pytest.approx(l2, rel=1e-12)


def test_rate_sums_parity(both):
    knp, knb = both
    rng = np.random.default_rng(3)
    k, n = 3, 60
    E = np.ascontiguousarray(rng.standard_normal((k, n)))
    gv = rng.standard_normal(n) - 2.0
    dv = rng.standard_normal(n) - 3.0
    a = knp.dyad_rate_sums(E, gv, dv, 0.3, -0.2)
    b = knb.dyad_rate_sums(E, gv, dv, 0.3, -0.2)
    for x, y in zip(a, b):
        assert x == pytest.approx(y, rel=1e-10)


def test_sampler_distributions_agree(both):
    # different uniform-consumption order means different streams; compare
    # moments instead of exact draws
    knp, knb = both
    lam = np.full(200_000, 7.5)
    s1 = knp.poisson_sample_arr(lam, np.random.default_rng(4))
    s2 = knb.poisson_sample_arr(lam, np.random.default_rng(4))
    assert abs(s1.mean() - s2.mean()) < 0.05
    assert abs(s1.var() - s2.var()) < 0.2


def test_generation_kernels_same_expected_density(both):
    knp, knb = both
    rng1 = np.random.default_rng(5)
    rng2 = np.random.default_rng(5)
    k, n = 2, 150
    base = np.random.default_rng(6)
    E = np.ascontiguousarray(base.standard_normal((k, n)))
    gv = base.standard_normal(n) - 2.0
    dv = base.standard_normal(n) - 2.5
    i1, j1, y1 = knp.sample_dyads_und(E, gv, dv, rng1)
    i2, j2, y2 = knb.sample_dyads_und(E, gv, dv, rng2)
    assert np.all(i1 < j1) and np.all(i2 < j2)
    assert np.all(y1 != 0) and np.all(y2 != 0)
    # both draw from identical rates: edge counts within a joint 6-sigma band
    s_edge, _, _, nd = knp.dyad_rate_sums(E, gv, dv, 0.0, 0.0)
    sd = np.sqrt(s_edge)
    assert abs(y1.size - s_edge) < 6 * sd + 1
    assert abs(y2.size - s_edge) < 6 * sd + 1
