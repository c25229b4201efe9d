"""Synthetic polarized networks and regeneration from fitted parameters.

The generative process draws per-node social/anti-social effects from
normals, archetype locations from a normal, simplex mixtures from a
Dirichlet, and then samples every dyad's integer weight from a Skellam
distribution whose rates decay/grow with the distance between the mixtures
mapped through the archetype matrix. Zero weights are omitted from the edge
set.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from .backend import kernels
from .errors import DataError
from .graph import SignedGraph

_THINNING_MIN_NODES = 10_000
_EVENT_CHUNK = 2_000_000


@dataclass
class GenerativeConfig:
    n_nodes: int
    k_archetypes: int
    alpha: object = 1.0          # scalar or length-K Dirichlet concentration
    mu_gamma: float = -2.0
    sigma_gamma: float = 0.1
    mu_delta: float = -2.0
    sigma_delta: float = 0.1
    mu_a: object = 0.0           # scalar or length-K mean of archetype columns
    sigma_a: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_gamma <= 0 or self.sigma_delta <= 0 or self.sigma_a <= 0:
            raise ValueError("sigmas must be positive")
        if np.any(np.asarray(self.alpha, np.float64) <= 0):
            raise ValueError("alpha entries must be positive")

    def alpha_vector(self):
        a = np.asarray(self.alpha, np.float64)
        if a.ndim == 0:
            return np.full(self.k_archetypes, float(a))
        if a.shape != (self.k_archetypes,):
            raise ValueError("alpha must be scalar or length-K")
        return a

    def mu_a_vector(self):
        m = np.asarray(self.mu_a, np.float64)
        if m.ndim == 0:
            return np.full(self.k_archetypes, float(m))
        if m.shape != (self.k_archetypes,):
            raise ValueError("mu_a must be scalar or length-K")
        return m


@dataclass
class GroundTruth:
    A: np.ndarray       # (K, K) archetype positions
    Z: np.ndarray       # (K, N) simplex mixtures
    gamma: np.ndarray
    delta: np.ndarray

    def to_json(self):
        return json.dumps({
            "A": self.A.tolist(), "Z": self.Z.tolist(),
            "gamma": self.gamma.tolist(), "delta": self.delta.tolist()})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(*(np.asarray(d[k], np.float64) for k in ("A", "Z", "gamma", "delta")))


def draw_ground_truth(config, rng=None):
    rng = rng or np.random.default_rng(config.seed)
    k, n = config.k_archetypes, config.n_nodes
    gamma = rng.normal(config.mu_gamma, config.sigma_gamma, size=n)
    delta = rng.normal(config.mu_delta, config.sigma_delta, size=n)
    A = rng.normal(0.0, config.sigma_a, size=(k, k)) + config.mu_a_vector()[:, None]
    Z = rng.dirichlet(config.alpha_vector(), size=n).T
    return GroundTruth(A, np.ascontiguousarray(Z), gamma, delta)


def sample_network(config, ground_truth=None, method=None):
    """Draw (graph, ground truth) from the generative process; undirected.

    ``method`` is "exact" (every dyad sampled directly), "thinned" (Poisson
    superposition with rejection, linear in the number of candidate events),
    or None to pick thinned automatically above 10_000 nodes. Both methods
    sample the same distribution.
    """
    rng = np.random.default_rng(config.seed)
    gt = ground_truth or draw_ground_truth(config, rng)
    E = np.ascontiguousarray(gt.A @ gt.Z)
    if method is None:
        # thinning pays off when the candidate-event mass is far below the
        # dyad count; otherwise the compiled exact sweep is cheaper
        n = config.n_nodes
        if n > _THINNING_MIN_NODES:
            events = _thinning_event_mass(E, gt.gamma, gt.delta)
            method = "thinned" if events < 0.25 * n * (n - 1) / 2 else "exact"
        else:
            method = "exact"
    if method == "exact":
        i, j, y = kernels.sample_dyads_und(
            E, np.ascontiguousarray(gt.gamma), np.ascontiguousarray(gt.delta), rng)
    elif method == "thinned":
        i, j, y = _sample_dyads_thinned(E, gt.gamma, gt.delta, rng)
    else:
        raise ValueError("method must be 'exact', 'thinned', or None")
    graph = SignedGraph(config.n_nodes, i, j, y, False, None)
    return graph, gt


def _log_pair_mass(log_w):
    w = np.exp(log_w - log_w.max())
    s1 = float(w.sum())
    s2 = float((w * w).sum())
    return math.log((s1 * s1 - s2) / 2.0) + 2.0 * float(log_w.max())


def _thinning_event_mass(E, gamma, delta):
    """Expected number of candidate events the thinned sampler would draw."""
    centroid = E.mean(axis=1, keepdims=True)
    dmax = 2.0 * float(np.linalg.norm(E - centroid, axis=0).max())
    return math.exp(_log_pair_mass(gamma)) + math.exp(_log_pair_mass(delta) + dmax)


def _sample_dyads_thinned(E, gamma, delta, rng):
    """Exact dyad weights by thinned Poisson superposition.

    Positive events: a Poisson number of candidate (i, j) pairs drawn with
    probability proportional to e^{gamma_i} e^{gamma_j} (the distance-free
    rate bound), each kept with probability e^{-d_ij}. Negative events use
    the bound e^{delta_i + delta_j + dmax} and keep probability
    e^{d_ij - dmax}. Kept event counts per dyad are exactly
    Pois(lambda+) and Pois(lambda-).
    """
    n = gamma.size
    centroid = E.mean(axis=1, keepdims=True)
    dmax = 2.0 * float(np.linalg.norm(E - centroid, axis=0).max())

    def one_sign(log_w, log_shift, keep_log_prob):
        total = math.exp(_log_pair_mass(log_w) + log_shift)
        n_events = int(rng.poisson(total))
        w = np.exp(log_w - log_w.max())
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        keys = []
        remaining = n_events
        while remaining > 0:
            m = min(remaining, _EVENT_CHUNK)
            i = np.searchsorted(cdf, rng.random(m), side="right")
            j = np.searchsorted(cdf, rng.random(m), side="right")
            diag = i == j
            while diag.any():  # events live on off-diagonal pairs only
                i[diag] = np.searchsorted(cdf, rng.random(int(diag.sum())), side="right")
                j[diag] = np.searchsorted(cdf, rng.random(int(diag.sum())), side="right")
                diag = i == j
            d = np.linalg.norm(E[:, i] - E[:, j], axis=0)
            kept = rng.random(m) < np.exp(keep_log_prob(d))
            i, j = i[kept], j[kept]
            lo = np.minimum(i, j)
            hi = np.maximum(i, j)
            keys.append(lo.astype(np.int64) * n + hi)
            remaining -= m
        if not keys:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        uniq, counts = np.unique(np.concatenate(keys), return_counts=True)
        return uniq, counts.astype(np.int64)

    pos_keys, pos_counts = one_sign(gamma, 0.0, lambda d: -d)
    neg_keys, neg_counts = one_sign(delta, dmax, lambda d: d - dmax)

    all_keys = np.union1d(pos_keys, neg_keys)
    y = np.zeros(all_keys.size, np.int64)
    y[np.searchsorted(all_keys, pos_keys)] += pos_counts
    y[np.searchsorted(all_keys, neg_keys)] -= neg_counts
    nz = y != 0
    keys = all_keys[nz]
    return keys // n, keys % n, y[nz]


def regenerate_from_params(params, seed=0, plus_distance=False):
    """Sample a full network from the Skellam rates of a fitted checkpoint."""
    rng = np.random.default_rng(seed)
    n = params.n_nodes
    if isinstance(params, model_mod.SldmParams):
        E = np.ascontiguousarray(params.Z, np.float64)
        i, j, y = kernels.sample_dyads_und(
            E, np.ascontiguousarray(params.gamma, np.float64),
            np.ascontiguousarray(params.delta, np.float64), rng)
        return SignedGraph(n, i, j, y, False, None)
    if isinstance(params, model_mod.SlimParams):
        E = np.ascontiguousarray(model_mod._slim_forward(params)[6])
        i, j, y = kernels.sample_dyads_und(
            E, np.ascontiguousarray(params.gamma, np.float64),
            np.ascontiguousarray(params.delta, np.float64), rng)
        return SignedGraph(n, i, j, y, False, None)
    if isinstance(params, model_mod.DirectedParams):
        expressive = params.U is not None
        esrc = np.ascontiguousarray(params.Z, np.float64)
        etgt = np.ascontiguousarray(params.W, np.float64)
        eneg = np.ascontiguousarray(params.U, np.float64) if expressive else esrc
    elif isinstance(params, model_mod.DirectedSlimParams):
        fwd = model_mod._dslim_forward(params)
        expressive = params.Utilde is not None
        esrc = np.ascontiguousarray(fwd[9])
        etgt = np.ascontiguousarray(fwd[10])
        eneg = np.ascontiguousarray(fwd[11])
    else:
        raise TypeError(f"not a parameter container: {type(params)!r}")
    neg_sign = 1.0 if not expressive else (1.0 if plus_distance else -1.0)
    i, j, y = kernels.sample_dyads_dir(
        esrc, eneg, etgt,
        np.ascontiguousarray(params.beta, np.float64),
        np.ascontiguousarray(params.gamma, np.float64),
        np.ascontiguousarray(params.delta, np.float64),
        np.ascontiguousarray(params.epsilon, np.float64),
        neg_sign, expressive, rng)
    return SignedGraph(n, i, j, y, True, None)


def reorder_by_membership(Z):
    """Permutation grouping nodes by argmax archetype, strongest membership first.

    Ties break deterministically by node index; the result is a bijection on
    [0, N).
    """
    Z = np.asarray(Z, np.float64)
    groups = np.argmax(Z, axis=0)
    strength = Z[groups, np.arange(Z.shape[1])]
    # sort by (group asc, strength desc, index asc)
    return np.lexsort((np.arange(Z.shape[1]), -strength, groups)).astype(np.int64)


def expected_stats(ground_truth, shift_pos=0.0, shift_neg=0.0):
    """Expected density and event-rate split implied by the rates.

    Returns (expected_density, pos_rate_share) where the share is
    sum(lambda+)/(sum(lambda+) + sum(lambda-)).
    """
    E = np.ascontiguousarray(ground_truth.A @ ground_truth.Z)
    s_edge, s_lp, s_ln, n_dyads = kernels.dyad_rate_sums(
        E, np.ascontiguousarray(ground_truth.gamma),
        np.ascontiguousarray(ground_truth.delta),
        float(shift_pos), float(shift_neg))
    return s_edge / n_dyads, s_lp / (s_lp + s_ln)


def calibrate_effect_means(config, target_density, target_neg_share,
                           tol=1e-5, max_iter=80):
    """Choose mu_gamma/mu_delta to hit a target density and sign split.

    Draws the remaining parameters at zero effect means, fixes the
    lambda+:lambda- mass ratio analytically from the target split, then
    bisects a common log shift until the exact expected density
    mean(1 - exp(-(lambda+ + lambda-))) matches the target. Returns a new
    config with the calibrated means.
    """
    if not 0 < target_neg_share < 1:
        raise DataError("target_neg_share must be in (0, 1)")
    base = GenerativeConfig(**{**config.__dict__, "mu_gamma": 0.0, "mu_delta": 0.0})
    gt = draw_ground_truth(base)
    E = np.ascontiguousarray(gt.A @ gt.Z)
    gam = np.ascontiguousarray(gt.gamma)
    del_ = np.ascontiguousarray(gt.delta)

    _, s_lp0, s_ln0, n_dyads = kernels.dyad_rate_sums(E, gam, del_, 0.0, 0.0)
    # shift_neg - shift_pos controls the event-mass split independently of level
    c = float(np.log(target_neg_share / (1.0 - target_neg_share) * (s_lp0 / s_ln0)))

    def density(x):
        s_edge, _, _, _ = kernels.dyad_rate_sums(E, gam, del_, x, x + c)
        return s_edge / n_dyads

    lo, hi = -30.0, 10.0
    if density(lo) > target_density or density(hi) < target_density:
        raise DataError("target density outside calibratable range")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if density(mid) < target_density:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    x = 0.5 * (lo + hi)
    return GenerativeConfig(**{**config.__dict__,
                               "mu_gamma": x / 2.0, "mu_delta": (x + c) / 2.0})
