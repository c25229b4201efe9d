"""Link-prediction benchmark: rate features, logistic scoring, AUC metrics.

Three tasks over a holdout split: p@n (sign of removed links), p@z (removed
positive links vs sampled non-edges), n@z (removed negative links vs non-edges).
Each task trains an L2-regularized logistic regression on the dyad features
[lambda+, lambda-, log lambda+, log lambda-] with 5-fold cross-validation
over the test dyads and scores every dyad out of fold, so the classifier
never trains on a dyad it scores.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import graph as graph_mod
from . import model as model_mod
from . import optim as optim_mod
from .errors import DataError

TASKS = ("p@n", "p@z", "n@z")


@dataclass(frozen=True)
class TaskScores:
    auc_roc: float
    auc_pr: float
    n_class1: int
    n_class0: int


@dataclass
class EvalReport:
    tasks: dict
    seed: int
    model: str
    mode: str
    k: int
    n_test_edges: int
    n_test_zeros: int
    params: Optional[object] = field(default=None, repr=False, compare=False)

    def to_json(self):
        return json.dumps({
            "seed": self.seed, "model": self.model, "mode": self.mode, "k": self.k,
            "n_test_edges": self.n_test_edges, "n_test_zeros": self.n_test_zeros,
            "tasks": {t: vars(s) for t, s in self.tasks.items()},
        }, indent=2, sort_keys=True)

    def csv_row(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        header = ["model", "mode", "k", "seed"]
        row = [self.model, self.mode, self.k, self.seed]
        for task in TASKS:
            for metric in ("auc_roc", "auc_pr"):
                header.append(f"{task}_{metric}")
                row.append(f"{getattr(self.tasks[task], metric):.6f}" if task in self.tasks else "")
        writer.writerow(header)
        writer.writerow(row)
        return buf.getvalue()

    def summary_table(self):
        lines = [f"{self.model} (mode={self.mode}, k={self.k}, seed={self.seed})"]
        lines.append(f"{'task':>6} {'AUC-ROC':>9} {'AUC-PR':>9}")
        for task in TASKS:
            if task in self.tasks:
                s = self.tasks[task]
                lines.append(f"{task:>6} {s.auc_roc:>9.3f} {s.auc_pr:>9.3f}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def dyad_features(params, dyads, plus_distance=False):
    """Per-dyad feature rows [lambda+, lambda-, log lambda+, log lambda-].

    Rates are floored before the log so every entry is finite.
    """
    lp, ln = model_mod.pair_rates(params, dyads, plus_distance=plus_distance)
    return np.stack([lp, ln, np.log(lp), np.log(ln)], axis=1)


# ---------------------------------------------------------------------------
# logistic regression (Newton with unpenalized intercept)
# ---------------------------------------------------------------------------

@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    n_iter: int
    grad_norm: float

    def decision(self, X):
        Xs = (np.asarray(X, np.float64) - self.feat_mean) / self.feat_scale
        return Xs @ self.weights + self.bias


def logistic_fit(features, labels, l2=1.0, tol=1e-6, max_iter=10_000):
    """L2-regularized logistic regression on standardized features.

    Newton iterations until the gradient norm is <= tol (or max_iter).
    The regularizer is (l2/2)||w||^2; the intercept is not penalized.
    """
    X = np.asarray(features, np.float64)
    y = np.asarray(labels, np.float64).ravel()
    if X.ndim == 1:
        X = X[:, None]
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("logistic_fit needs both classes present")
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise DataError("labels must be 0/1")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    Xs = (X - mean) / scale
    A = np.hstack([Xs, np.ones((Xs.shape[0], 1))])
    dim = A.shape[1]
    reg = l2 * np.ones(dim)
    reg[-1] = 0.0
    w = np.zeros(dim)
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        z = A @ w
        p = model_mod.sigmoid(z)
        grad = A.T @ (p - y) + reg * w
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        s = np.maximum(p * (1.0 - p), 1e-12)
        hess = (A * s[:, None]).T @ A + np.diag(reg) + 1e-12 * np.eye(dim)
        w = w - np.linalg.solve(hess, grad)
    return LogisticModel(w[:-1], float(w[-1]), mean, scale, it, gnorm)


# ---------------------------------------------------------------------------
# AUC metrics
# ---------------------------------------------------------------------------

def auc_roc(scores, labels):
    """Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie)."""
    s = np.asarray(scores, np.float64)
    y = np.asarray(labels)
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise DataError("auc_roc needs both classes present")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    _, inv, counts = np.unique(s_sorted, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    avg_rank = (cum - counts + 1 + cum) / 2.0
    ranks = np.empty(s.size)
    ranks[order] = avg_rank[inv]
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def auc_pr(scores, labels):
    """Average precision: sum (R_k - R_{k-1}) P_k over a descending-score sweep.

    Tied scores are grouped into a single operating point.
    """
    s = np.asarray(scores, np.float64)
    y = np.asarray(labels)
    n1 = int((y == 1).sum())
    if n1 == 0:
        raise DataError("auc_pr needs positive examples")
    order = np.argsort(-s, kind="mergesort")
    y_desc = (y[order] == 1).astype(np.float64)
    s_desc = s[order]
    group_end = np.flatnonzero(np.diff(s_desc) != 0.0)
    group_end = np.concatenate([group_end, [s.size - 1]])
    tp = np.cumsum(y_desc)[group_end]
    fp = np.cumsum(1.0 - y_desc)[group_end]
    precision = tp / (tp + fp)
    recall = tp / n1
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev_recall) * precision).sum())


# ---------------------------------------------------------------------------
# cross-validated task scoring
# ---------------------------------------------------------------------------

def _stratified_folds(labels, n_folds, rng):
    folds = [[] for _ in range(n_folds)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        for pos, i in enumerate(idx):
            folds[pos % n_folds].append(int(i))
    return [np.array(sorted(f), np.int64) for f in folds]


def crossval_scores(features, labels, n_folds=5, seed=0, l2=1.0):
    """Pooled out-of-fold decision scores; never scores a training dyad."""
    y = np.asarray(labels)
    if min(int((y == 1).sum()), int((y == 0).sum())) < n_folds:
        raise DataError(f"need at least {n_folds} examples of each class")
    rng = np.random.default_rng(seed)
    folds = _stratified_folds(y, n_folds, rng)
    scores = np.empty(y.size)
    for f, test_idx in enumerate(folds):
        train_mask = np.ones(y.size, bool)
        train_mask[test_idx] = False
        clf = logistic_fit(features[train_mask], y[train_mask], l2=l2)
        scores[test_idx] = clf.decision(features[test_idx])
    return scores


def _task_scores(features, labels, seed):
    scores = crossval_scores(features, labels, seed=seed)
    return TaskScores(auc_roc(scores, labels), auc_pr(scores, labels),
                      int((labels == 1).sum()), int((labels == 0).sum()))


def score_split(params, split, seed=0, plus_distance=False):
    """Fit-free evaluation of a holdout split given fitted parameters."""
    edges = split.test_edges
    zeros = split.test_zeros
    feat_edges = dyad_features(params, edges[:, :2], plus_distance)
    feat_zeros = dyad_features(params, zeros, plus_distance)
    pos_mask = edges[:, 2] > 0
    tasks = {}
    labels_pn = pos_mask.astype(np.int64)
    tasks["p@n"] = _task_scores(feat_edges, labels_pn, seed)
    feats_pz = np.vstack([feat_edges[pos_mask], feat_zeros])
    labels_pz = np.concatenate([np.ones(int(pos_mask.sum()), np.int64),
                                np.zeros(zeros.shape[0], np.int64)])
    tasks["p@z"] = _task_scores(feats_pz, labels_pz, seed)
    feats_nz = np.vstack([feat_edges[~pos_mask], feat_zeros])
    labels_nz = np.concatenate([np.ones(int((~pos_mask).sum()), np.int64),
                                np.zeros(zeros.shape[0], np.int64)])
    tasks["n@z"] = _task_scores(feats_nz, labels_nz, seed)
    return tasks


def run_benchmark(graph, config, holdout=0.2, seed=None):
    """Split, fit on the residual graph, and score all three tasks."""
    seed = config.seed if seed is None else seed
    if (config.mode != "undirected") != graph.directed:
        raise DataError(f"variant {config.mode!r} does not match graph directedness")
    if not graph_mod.is_connected(graph):
        raise DataError("benchmark needs a connected graph")
    split = graph_mod.split_train_test(graph, holdout, seed)
    result = optim_mod.fit(split.train, config)
    tasks = score_split(result.params, split, seed=seed,
                        plus_distance=config.expressive_plus_distance)
    return EvalReport(tasks, seed, config.model, config.mode, config.k,
                      split.test_edges.shape[0], split.test_zeros.shape[0],
                      params=result.params)
