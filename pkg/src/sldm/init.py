"""Deterministic initialization from the signed normalized Laplacian.

The embedding comes from the K smallest eigenpairs of
L = I - D^{-1/2} A D^{-1/2} with A the signed weighted adjacency and
D_ii = sum_j |A_ij| (absolute signed degree). Archetypal variants seed the
basis R with the spectral coordinates of furthest-sum nodes and open the
matching gates so the initial C picks those nodes up; all other gates start
at -(3 + log #columns), which keeps roughly 95% of each C column's mass on
its seed node regardless of graph size while leaving every gate trainable.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from . import model as model_mod
from .errors import DataError
from .graph import EdgeRecord, SignedGraph, symmetrize

_DENSE_EIG_MAX = 3000
_GATE_ON = 3.0


@dataclass(frozen=True)
class SpectralEmbedding:
    coords: np.ndarray       # (K, N), rows ordered by eigenvalue
    eigenvalues: np.ndarray  # (K,), ascending


def _undirected_view(graph):
    """Symmetrized copy used for initialization only."""
    if not graph.directed:
        return graph
    records = [EdgeRecord(str(i), str(j), int(w)) for i, j, w in graph.edges()]
    merged = symmetrize(records)
    src = np.array([int(r.src) for r in merged], np.int64)
    dst = np.array([int(r.dst) for r in merged], np.int64)
    wgt = np.array([r.weight for r in merged], np.int64)
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    return SignedGraph(graph.n_nodes, lo, hi, wgt, False, None)


def signed_normalized_laplacian(graph):
    """L = I - D^{-1/2} A D^{-1/2} with absolute-degree normalization (sparse CSR)."""
    g = _undirected_view(graph)
    n = g.n_nodes
    rows = np.concatenate([g.src, g.dst])
    cols = np.concatenate([g.dst, g.src])
    vals = np.concatenate([g.weight, g.weight]).astype(np.float64)
    adj = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    deg = np.asarray(np.abs(adj).sum(axis=1)).ravel()
    if np.any(deg <= 0):
        bad = int(np.flatnonzero(deg <= 0)[0])
        raise DataError(f"isolated node {bad} has zero signed degree")
    dinv = sparse.diags(1.0 / np.sqrt(deg))
    lap = sparse.identity(n, format="csr") - dinv @ adj @ dinv
    # exact symmetry as stored
    return ((lap + lap.T) * 0.5).tocsr()


def spectral_embedding(graph, k):
    """K eigenvectors of the smallest eigenvalues, unit norm, sign-fixed."""
    n = graph.n_nodes
    if not 1 <= k < n:
        raise DataError(f"need 1 <= k < n_nodes, got k={k}, n={n}")
    lap = signed_normalized_laplacian(graph)
    if n <= _DENSE_EIG_MAX:
        vals, vecs = np.linalg.eigh(lap.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        # eigenvalues of L lie in [0, 2]; largest of 2I - L are the smallest of L
        shifted = (sparse.identity(n, format="csr") * 2.0) - lap
        v0 = np.full(n, 1.0 / np.sqrt(n))  # fixed start vector keeps runs deterministic
        sv, vecs = eigsh(shifted, k=k, which="LA", v0=v0)
        vals = 2.0 - sv
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    norms = np.linalg.norm(vecs, axis=0)
    vecs = vecs / np.where(norms == 0, 1.0, norms)
    for c in range(k):
        lead = np.argmax(np.abs(vecs[:, c]))
        if vecs[lead, c] < 0:
            vecs[:, c] = -vecs[:, c]
    return SpectralEmbedding(np.ascontiguousarray(vecs.T), vals)


def furthest_sum(points, k, seed, start=None):
    """Greedy max-distance-sum selection of k distinct column indices.

    Starts from a random point, repeatedly adds the point with the largest
    summed Euclidean distance to the current selection, then removes the
    initial point and re-selects it by the same criterion.
    """
    pts = np.asarray(points, np.float64)
    n = pts.shape[1]
    if k > n:
        raise ValueError(f"cannot select {k} of {n} points")
    if k == n:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n)) if start is None else int(start)

    def dists_to(idx):
        diff = pts - pts[:, [idx]]
        return np.sqrt((diff * diff).sum(axis=0))

    selected = [first]
    dist_rows = [dists_to(first)]
    sum_dist = dist_rows[0].copy()
    sum_dist[first] = -np.inf
    for _ in range(k - 1):
        nxt = int(np.argmax(sum_dist))
        selected.append(nxt)
        dist_rows.append(dists_to(nxt))
        sum_dist += dist_rows[-1]
        sum_dist[nxt] = -np.inf
    if k > 1:
        # drop the arbitrary starting point and re-select by the same criterion
        rest = selected[1:]
        sum_rest = np.zeros(n)
        for row in dist_rows[1:]:
            sum_rest += row
        sum_rest[rest] = -np.inf
        replacement = int(np.argmax(sum_rest))
        selected = rest + [replacement]
    return np.array(selected, np.int64)


def _gate_init(k, n_cols, hot_cols):
    g = np.full((k, n_cols), -(_GATE_ON + np.log(n_cols)))
    for d, cols in enumerate(hot_cols):
        for c in cols:
            g[d, c] = _GATE_ON
    return g


def init_params(graph, config):
    """Initial parameters for the configured variant; deterministic given seed."""
    k = config.k
    n = graph.n_nodes
    if config.init == "random":
        rng = np.random.default_rng(config.seed)
        coords = 0.1 * rng.standard_normal((k, n))
    else:
        coords = spectral_embedding(graph, k).coords.copy()
    zeros = np.zeros(n)

    if config.mode == "undirected":
        if config.model == "sldm":
            return model_mod.SldmParams(coords, zeros.copy(), zeros.copy())
        idx = furthest_sum(coords, k, config.seed)
        r_basis = np.ascontiguousarray(coords[:, idx])
        gates = _gate_init(k, n, [[int(i)] for i in idx])
        return model_mod.SlimParams(r_basis, np.zeros((k, n)), gates,
                                    zeros.copy(), zeros.copy())

    expressive = config.mode == "directed-expressive"
    if config.model == "sldm":
        return model_mod.DirectedParams(
            coords.copy(), coords.copy(), coords.copy() if expressive else None,
            zeros.copy(), zeros.copy(), zeros.copy(), zeros.copy())
    idx = furthest_sum(coords, k, config.seed)
    r_basis = np.ascontiguousarray(coords[:, idx])
    n_seg = 3 if expressive else 2
    hot = [[int(i) + s * n for s in range(n_seg)] for i in idx]
    gates = _gate_init(k, n_seg * n, hot)
    return model_mod.DirectedSlimParams(
        r_basis, np.zeros((k, n)), np.zeros((k, n)),
        np.zeros((k, n)) if expressive else None, gates,
        zeros.copy(), zeros.copy(), zeros.copy(), zeros.copy())
