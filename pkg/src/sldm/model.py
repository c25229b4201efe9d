"""Model state, Skellam rates, MAP loss, and analytic gradients.

Four parameterizations share one loss. With d(i,j) a latent distance,

    lambda+ = exp(social_i + social_j - d),   lambda- = exp(anti_i + anti_j + d),

and the block loss is the negative Skellam log-likelihood over every dyad of
a node block plus Gaussian-prior regularizers. Distances are plain Euclidean
(SLDM) or measured through the archetype matrix A = R Z C (SLIM), with
source/target (and optionally separate negative-source) embeddings in the
directed variants.

Gradients are analytic. The Bessel factor uses
d/dx log I_nu(x) = I_{nu+1}(x)/I_nu(x) + nu/x with the ratio taken from the
same truncated series; everything else is chain-ruled through the rates,
distances, gate normalization, and column softmax. Finite differences are a
test oracle only.
"""

import json
import warnings
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .backend import kernels
from .errors import DataError, NumericError, SeriesTruncationWarning
from .graph import adjacency_csr

RATE_LOG_FLOOR = kernels.RATE_LOG_FLOOR

MODELS = ("sldm", "slim")
MODES = ("undirected", "directed", "directed-expressive")

CHECKPOINT_MAGIC = b"SLDMCKPT1\n"


# ---------------------------------------------------------------------------
# configuration and parameter containers
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    k: int = 8
    rho: float = 1.0
    lr: float = 0.05
    iters: int = 5000
    sample_size: int = 3000
    seed: int = 0
    model: str = "sldm"
    mode: str = "undirected"
    deterministic: bool = True
    trace_every: int = 0
    block_rescale: bool = False
    expressive_plus_distance: bool = False
    init: str = "spectral"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.init not in ("spectral", "random"):
            raise ValueError("init must be 'spectral' or 'random'")


def _f(x):
    return np.ascontiguousarray(x, np.float64)


@dataclass
class SldmParams:
    """Undirected positions Z (K x N) with social/anti-social effects."""

    Z: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray

    def tensors(self):
        return {"Z": self.Z, "gamma": self.gamma, "delta": self.delta}

    @property
    def n_nodes(self):
        return self.Z.shape[1]


@dataclass
class SlimParams:
    """Archetypal parameterization: basis R, pre-softmax mixtures, gates."""

    R: np.ndarray       # (K, K)
    Ztilde: np.ndarray  # (K, N)
    G: np.ndarray       # (K, N)
    gamma: np.ndarray
    delta: np.ndarray

    def tensors(self):
        return {"R": self.R, "Ztilde": self.Ztilde, "G": self.G,
                "gamma": self.gamma, "delta": self.delta}

    @property
    def n_nodes(self):
        return self.Ztilde.shape[1]


@dataclass
class DirectedParams:
    """Directed positions: source Z, target W, optional negative-source U."""

    Z: np.ndarray
    W: np.ndarray
    U: Optional[np.ndarray]
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    epsilon: np.ndarray

    def tensors(self):
        out = {"Z": self.Z, "W": self.W}
        if self.U is not None:
            out["U"] = self.U
        out.update({"beta": self.beta, "gamma": self.gamma,
                    "delta": self.delta, "epsilon": self.epsilon})
        return out

    @property
    def n_nodes(self):
        return self.Z.shape[1]


@dataclass
class DirectedSlimParams:
    """Directed archetypal parameterization with gates over [Z;(U;)W]."""

    R: np.ndarray
    Ztilde: np.ndarray
    Wtilde: np.ndarray
    Utilde: Optional[np.ndarray]
    G: np.ndarray       # (K, 2N) or (K, 3N)
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    epsilon: np.ndarray

    def tensors(self):
        out = {"R": self.R, "Ztilde": self.Ztilde, "Wtilde": self.Wtilde}
        if self.Utilde is not None:
            out["Utilde"] = self.Utilde
        out.update({"G": self.G, "beta": self.beta, "gamma": self.gamma,
                    "delta": self.delta, "epsilon": self.epsilon})
        return out

    @property
    def n_nodes(self):
        return self.Ztilde.shape[1]


def variant_of(params):
    """(model, mode) strings for a parameter container."""
    if isinstance(params, SldmParams):
        return "sldm", "undirected"
    if isinstance(params, SlimParams):
        return "slim", "undirected"
    if isinstance(params, DirectedParams):
        return "sldm", "directed-expressive" if params.U is not None else "directed"
    if isinstance(params, DirectedSlimParams):
        return "slim", "directed-expressive" if params.Utilde is not None else "directed"
    raise TypeError(f"not a parameter container: {type(params)!r}")


# ---------------------------------------------------------------------------
# simplex machinery
# ---------------------------------------------------------------------------

def softmax_cols(M):
    """Columnwise softmax with max subtraction; columns land on the simplex."""
    M = np.asarray(M, np.float64)
    e = np.exp(M - M.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def sigmoid(x):
    x = np.asarray(x, np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def mixture_weights(Ztilde):
    """Z = columnwise softmax of the pre-softmax mixtures."""
    return softmax_cols(Ztilde)


def gate_matrix(Z, G):
    """Gated, column-normalized version of Z: C[n, d] on the simplex per column.

    C[n, d] = (Z o sigmoid(G))[d, n] / sum_n' (Z o sigmoid(G))[d, n'].
    """
    Z = np.asarray(Z, np.float64)
    G = np.asarray(G, np.float64)
    if Z.shape != G.shape:
        raise ValueError("Z and G shapes differ")
    M = Z * sigmoid(G)
    r = M.sum(axis=1)
    if np.any(r <= 0.0) or not np.all(np.isfinite(r)):
        bad = int(np.flatnonzero(~(r > 0.0))[0])
        raise NumericError(f"gate normalization underflow in column {bad}")
    return (M / r[:, None]).T


def compose_archetypes(R, Z, C):
    """Archetype positions A = R Z C (K x K)."""
    R = np.asarray(R, np.float64)
    Z = np.asarray(Z, np.float64)
    C = np.asarray(C, np.float64)
    k = R.shape[0]
    if R.shape != (k, k) or Z.shape[0] != k or C.shape != (Z.shape[1], k):
        raise ValueError(f"shape mismatch: R{R.shape} Z{Z.shape} C{C.shape}")
    return R @ Z @ C


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def _slim_forward(p: SlimParams):
    Zmix = softmax_cols(p.Ztilde)
    S = sigmoid(p.G)
    M = Zmix * S
    r = M.sum(axis=1)
    if np.any(r <= 0.0):
        bad = int(np.flatnonzero(~(r > 0.0))[0])
        raise NumericError(f"gate normalization underflow in column {bad}")
    C = (M / r[:, None]).T
    P = Zmix @ C
    A = p.R @ P
    E = A @ Zmix
    return Zmix, S, r, C, P, A, E


def _dslim_forward(p: DirectedSlimParams):
    Zmix = softmax_cols(p.Ztilde)
    Wmix = softmax_cols(p.Wtilde)
    Umix = softmax_cols(p.Utilde) if p.Utilde is not None else None
    segs = [Zmix, Umix, Wmix] if Umix is not None else [Zmix, Wmix]
    Mcat = np.concatenate(segs, axis=1)
    S = sigmoid(p.G)
    if S.shape != Mcat.shape:
        raise ValueError("gate matrix shape does not match concatenated mixtures")
    M = Mcat * S
    r = M.sum(axis=1)
    if np.any(r <= 0.0):
        bad = int(np.flatnonzero(~(r > 0.0))[0])
        raise NumericError(f"gate normalization underflow in column {bad}")
    C = (M / r[:, None]).T
    P = Mcat @ C
    A = p.R @ P
    Esrc = A @ Zmix
    Etgt = A @ Wmix
    Eneg = A @ Umix if Umix is not None else Esrc
    return Zmix, Wmix, Umix, Mcat, S, r, C, P, A, Esrc, Etgt, Eneg


def archetype_matrix(params):
    """A = R Z C for either SLIM parameterization."""
    if isinstance(params, SlimParams):
        return _slim_forward(params)[5]
    if isinstance(params, DirectedSlimParams):
        return _dslim_forward(params)[8]
    raise TypeError("archetype matrix only defined for SLIM parameterizations")


# ---------------------------------------------------------------------------
# rates for explicit dyad lists (evaluation/features; not the training path)
# ---------------------------------------------------------------------------

def _pairs_arrays(pairs):
    if isinstance(pairs, tuple) and len(pairs) == 2:
        return np.asarray(pairs[0], np.int64), np.asarray(pairs[1], np.int64)
    p = np.asarray(pairs, np.int64)
    if p.ndim == 2 and p.shape[1] == 2:
        return p[:, 0], p[:, 1]
    raise ValueError("pairs must be an (m, 2) array or a tuple of index arrays")


def _finite_or_raise(lp, ln, i, j):
    bad = ~(np.isfinite(lp) & np.isfinite(ln))
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NumericError(f"non-finite rate at dyad ({int(i[k])}, {int(j[k])})")


def _rates_from_embedding(Ei, Ej, pos_eff, neg_eff, neg_sign=1.0, Eni=None, Enj=None):
    d = np.sqrt(((Ei - Ej) ** 2).sum(axis=0))
    if Eni is not None:
        dn = np.sqrt(((Eni - Enj) ** 2).sum(axis=0))
    else:
        dn = d
    lp = np.exp(np.maximum(pos_eff - d, RATE_LOG_FLOOR))
    ln = np.exp(np.maximum(neg_eff + neg_sign * dn, RATE_LOG_FLOOR))
    return lp, ln


def rates_sldm(params: SldmParams, pairs):
    """Skellam rates for undirected dyads under plain Euclidean distance."""
    i, j = _pairs_arrays(pairs)
    lp, ln = _rates_from_embedding(
        params.Z[:, i], params.Z[:, j],
        params.gamma[i] + params.gamma[j], params.delta[i] + params.delta[j])
    _finite_or_raise(lp, ln, i, j)
    return lp, ln


def rates_slim(params: SlimParams, pairs):
    """Skellam rates with distances measured through A = R Z C."""
    i, j = _pairs_arrays(pairs)
    E = _slim_forward(params)[6]
    lp, ln = _rates_from_embedding(
        E[:, i], E[:, j],
        params.gamma[i] + params.gamma[j], params.delta[i] + params.delta[j])
    _finite_or_raise(lp, ln, i, j)
    return lp, ln


def rates_directed(params, pairs, plus_distance=False):
    """Skellam rates for ordered dyads (directed SLDM/SLIM, both variants)."""
    i, j = _pairs_arrays(pairs)
    if isinstance(params, DirectedParams):
        Esrc, Etgt = params.Z, params.W
        Eneg = params.U
    elif isinstance(params, DirectedSlimParams):
        fwd = _dslim_forward(params)
        Esrc, Etgt = fwd[9], fwd[10]
        Eneg = fwd[11] if fwd[2] is not None else None
    else:
        raise TypeError("rates_directed expects a directed parameter container")
    expressive = Eneg is not None
    neg_sign = 1.0 if not expressive else (1.0 if plus_distance else -1.0)
    lp, ln = _rates_from_embedding(
        Esrc[:, i], Etgt[:, j],
        params.beta[i] + params.gamma[j], params.delta[i] + params.epsilon[j],
        neg_sign=neg_sign,
        Eni=Eneg[:, i] if expressive else None,
        Enj=Etgt[:, j] if expressive else None)
    _finite_or_raise(lp, ln, i, j)
    return lp, ln


def pair_rates(params, pairs, plus_distance=False):
    """Dispatch to the variant's rate function."""
    if isinstance(params, SldmParams):
        return rates_sldm(params, pairs)
    if isinstance(params, SlimParams):
        return rates_slim(params, pairs)
    return rates_directed(params, pairs, plus_distance=plus_distance)


# ---------------------------------------------------------------------------
# loss and gradient over node blocks
# ---------------------------------------------------------------------------

def _sq(x):
    return float((np.asarray(x) ** 2).sum())


def _members(graph, block):
    if block is None:
        return np.arange(graph.n_nodes, dtype=np.int64)
    return np.unique(np.asarray(block, np.int64))


def _softmax_backprop(Zmix, gZmix):
    return Zmix * (gZmix - (Zmix * gZmix).sum(axis=0, keepdims=True))


def _gate_backprop(G_C, C, r, Mcat, S):
    """Gradients through C = normalize_rows(Mcat o S).T.

    Returns (grad wrt Mcat, grad wrt gate logits G).
    """
    s = (G_C * C).sum(axis=0)
    G_M = (G_C.T - s[:, None]) / r[:, None]
    return G_M * S, G_M * Mcat * S * (1.0 - S)


def _check_failure(loss, bad_i, bad_j):
    if bad_i >= 0:
        raise NumericError(f"non-finite loss contribution at dyad ({bad_i}, {bad_j})")
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")


def _warn_truncation(n_noconv):
    # constant message so the default warning filter dedupes per call site
    if n_noconv:
        warnings.warn(
            "Bessel series not converged for some dyads; weights or rates are "
            "outside the accurate range of the 50-term series",
            SeriesTruncationWarning, stacklevel=3)


def _loss_grad_impl(params, graph, rho, block, plus_distance, rescale, want_grad):
    directed_params = isinstance(params, (DirectedParams, DirectedSlimParams))
    if directed_params != graph.directed:
        raise DataError(
            "parameter variant and graph directedness do not match "
            f"(directed params: {directed_params}, directed graph: {graph.directed})")
    indptr, indices, weights = adjacency_csr(graph)
    members = _members(graph, block)
    N = graph.n_nodes
    scale = (N / members.size) ** 2 if (rescale and members.size) else 1.0

    if isinstance(params, SldmParams):
        E = _f(params.Z)
        g, d = _f(params.gamma), _f(params.delta)
        if want_grad:
            loss_d, gE, gp, gn, bi, bj, nc = kernels.und_loss_grad(
                E, g, d, members, indptr, indices, weights)
        else:
            loss_d, bi, bj, nc = kernels.und_loss(E, g, d, members, indptr, indices, weights)
        _check_failure(loss_d, bi, bj)
        _warn_truncation(nc)
        loss = scale * loss_d + 0.5 * rho * (_sq(params.Z) + _sq(g) + _sq(d))
        if not want_grad:
            return loss, None
        grads = {"Z": scale * gE + rho * params.Z,
                 "gamma": scale * gp + rho * g,
                 "delta": scale * gn + rho * d}
        return loss, grads

    if isinstance(params, SlimParams):
        Zmix, S, r, C, P, A, E = _slim_forward(params)
        g, d = _f(params.gamma), _f(params.delta)
        E = _f(E)
        if want_grad:
            loss_d, gE, gp, gn, bi, bj, nc = kernels.und_loss_grad(
                E, g, d, members, indptr, indices, weights)
        else:
            loss_d, bi, bj, nc = kernels.und_loss(E, g, d, members, indptr, indices, weights)
        _check_failure(loss_d, bi, bj)
        _warn_truncation(nc)
        loss = scale * loss_d + 0.5 * rho * (_sq(A) + _sq(g) + _sq(d))
        if not want_grad:
            return loss, None
        gE = scale * gE
        G_A = gE @ Zmix.T + rho * A
        gZmix = A.T @ gE
        gR = G_A @ P.T
        G_P = params.R.T @ G_A
        gZmix += G_P @ C.T
        G_C = Zmix.T @ G_P
        gM, gG = _gate_backprop(G_C, C, r, Zmix, S)
        gZmix += gM
        grads = {"R": gR,
                 "Ztilde": _softmax_backprop(Zmix, gZmix),
                 "G": gG,
                 "gamma": scale * gp + rho * g,
                 "delta": scale * gn + rho * d}
        return loss, grads

    if isinstance(params, DirectedParams):
        expressive = params.U is not None
        neg_sign = 1.0 if not expressive else (1.0 if plus_distance else -1.0)
        Esrc, Etgt = _f(params.Z), _f(params.W)
        Eneg = _f(params.U) if expressive else Esrc
        b, g, d, e = (_f(params.beta), _f(params.gamma),
                      _f(params.delta), _f(params.epsilon))
        if want_grad:
            loss_d, gS, gU, gT, gb, gg, gd, ge, bi, bj, nc = kernels.dir_loss_grad(
                Esrc, Eneg, Etgt, b, g, d, e, neg_sign, expressive,
                members, indptr, indices, weights)
        else:
            loss_d, bi, bj, nc = kernels.dir_loss(
                Esrc, Eneg, Etgt, b, g, d, e, neg_sign, expressive,
                members, indptr, indices, weights)
        _check_failure(loss_d, bi, bj)
        _warn_truncation(nc)
        reg = _sq(params.Z) + _sq(params.W) + _sq(b) + _sq(g) + _sq(d) + _sq(e)
        if expressive:
            reg += _sq(params.U)
        loss = scale * loss_d + 0.5 * rho * reg
        if not want_grad:
            return loss, None
        grads = {"Z": scale * gS + rho * params.Z,
                 "W": scale * gT + rho * params.W,
                 "beta": scale * gb + rho * b,
                 "gamma": scale * gg + rho * g,
                 "delta": scale * gd + rho * d,
                 "epsilon": scale * ge + rho * e}
        if expressive:
            grads["U"] = scale * gU + rho * params.U
        return loss, grads

    if isinstance(params, DirectedSlimParams):
        expressive = params.Utilde is not None
        neg_sign = 1.0 if not expressive else (1.0 if plus_distance else -1.0)
        Zmix, Wmix, Umix, Mcat, S, r, C, P, A, Esrc, Etgt, Eneg = _dslim_forward(params)
        Esrc, Etgt, Eneg = _f(Esrc), _f(Etgt), _f(Eneg)
        b, g, d, e = (_f(params.beta), _f(params.gamma),
                      _f(params.delta), _f(params.epsilon))
        if want_grad:
            loss_d, gS, gU, gT, gb, gg, gd, ge, bi, bj, nc = kernels.dir_loss_grad(
                Esrc, Eneg, Etgt, b, g, d, e, neg_sign, expressive,
                members, indptr, indices, weights)
        else:
            loss_d, bi, bj, nc = kernels.dir_loss(
                Esrc, Eneg, Etgt, b, g, d, e, neg_sign, expressive,
                members, indptr, indices, weights)
        _check_failure(loss_d, bi, bj)
        _warn_truncation(nc)
        loss = scale * loss_d + 0.5 * rho * (
            _sq(A) + _sq(b) + _sq(g) + _sq(d) + _sq(e))
        if not want_grad:
            return loss, None
        gS, gT, gU = scale * gS, scale * gT, scale * gU
        N_nodes = Zmix.shape[1]
        G_A = gS @ Zmix.T + gT @ Wmix.T + rho * A
        if expressive:
            G_A += gU @ Umix.T
        gZmix = A.T @ gS
        gWmix = A.T @ gT
        gUmix = A.T @ gU if expressive else None
        gR = G_A @ P.T
        G_P = params.R.T @ G_A
        gMcat = G_P @ C.T
        G_C = Mcat.T @ G_P
        gM, gG = _gate_backprop(G_C, C, r, Mcat, S)
        gMcat += gM
        gZmix += gMcat[:, :N_nodes]
        if expressive:
            gUmix += gMcat[:, N_nodes:2 * N_nodes]
            gWmix += gMcat[:, 2 * N_nodes:]
        else:
            gWmix += gMcat[:, N_nodes:]
        grads = {"R": gR,
                 "Ztilde": _softmax_backprop(Zmix, gZmix),
                 "Wtilde": _softmax_backprop(Wmix, gWmix),
                 "G": gG,
                 "beta": scale * gb + rho * b,
                 "gamma": scale * gg + rho * g,
                 "delta": scale * gd + rho * d,
                 "epsilon": scale * ge + rho * e}
        if expressive:
            grads["Utilde"] = _softmax_backprop(Umix, gUmix)
        return loss, grads

    raise TypeError(f"not a parameter container: {type(params)!r}")


def negative_log_posterior(params, graph, config=None, block=None):
    """MAP loss over all dyads of a node block (whole graph when block=None)."""
    cfg = config or TrainConfig(model=variant_of(params)[0], mode=variant_of(params)[1])
    loss, _ = _loss_grad_impl(params, graph, cfg.rho, block,
                              cfg.expressive_plus_distance, cfg.block_rescale, False)
    return loss


def loss_and_gradient(params, graph, config=None, block=None):
    """MAP loss and its exact gradient, keyed by tensor name."""
    cfg = config or TrainConfig(model=variant_of(params)[0], mode=variant_of(params)[1])
    return _loss_grad_impl(params, graph, cfg.rho, block,
                           cfg.expressive_plus_distance, cfg.block_rescale, True)


def gradient(params, graph, config=None, block=None):
    """Gradient of :func:`negative_log_posterior`, congruent to params.tensors()."""
    return loss_and_gradient(params, graph, config, block)[1]


# ---------------------------------------------------------------------------
# checkpoints: deterministic self-describing container
# ---------------------------------------------------------------------------

def save_checkpoint(path, params, config, extra=None):
    """Write a versioned container: JSON header line + raw little-endian tensors."""
    model, mode = variant_of(params)
    tensors = params.tensors()
    header = {
        "format": 1,
        "model": model,
        "mode": mode,
        "seed": config.seed,
        "config": asdict(config),
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in tensors.items()],
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for v in tensors.values():
            fh.write(np.ascontiguousarray(v, "<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (params, TrainConfig, extra dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataError("not a checkpoint file (bad magic)")
        header = json.loads(fh.readline().decode("utf-8"))
        tensors = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise DataError("truncated checkpoint")
            tensors[spec["name"]] = np.frombuffer(buf, "<f8").reshape(shape).copy()
    config = TrainConfig(**header["config"])
    params = make_params(header["model"], header["mode"], tensors)
    return params, config, header.get("extra", {})


def make_params(model, mode, tensors):
    """Assemble the right parameter container from named tensors."""
    t = tensors
    if mode == "undirected":
        if model == "sldm":
            return SldmParams(t["Z"], t["gamma"], t["delta"])
        return SlimParams(t["R"], t["Ztilde"], t["G"], t["gamma"], t["delta"])
    if model == "sldm":
        return DirectedParams(t["Z"], t["W"], t.get("U"),
                              t["beta"], t["gamma"], t["delta"], t["epsilon"])
    return DirectedSlimParams(t["R"], t["Ztilde"], t["Wtilde"], t.get("Utilde"),
                              t["G"], t["beta"], t["gamma"], t["delta"], t["epsilon"])
