"""Figure-ready layout exports: PCA projection and circular archetype plots.

Output is data (JSON/CSV), not rendered images. The JSON schema is
``{mode, nodes: [{id, x, y}], archetypes: [{k, x, y}], edges: [{i, j, sign}]}``.
"""

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class LayoutExport:
    mode: str                      # "pca" or "circular"
    node_xy: np.ndarray            # (N, 2)
    archetype_xy: Optional[np.ndarray]  # (K, 2) or None
    edges: np.ndarray              # (m, 3): i, j, sign

    def to_json(self):
        doc = {
            "mode": self.mode,
            "nodes": [{"id": i, "x": float(x), "y": float(y)}
                      for i, (x, y) in enumerate(self.node_xy)],
            "archetypes": ([{"k": k, "x": float(x), "y": float(y)}
                            for k, (x, y) in enumerate(self.archetype_xy)]
                           if self.archetype_xy is not None else []),
            "edges": [{"i": int(i), "j": int(j), "sign": int(s)}
                      for i, j, s in self.edges],
        }
        return json.dumps(doc, indent=2)

    def nodes_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(self.node_xy):
            w.writerow([i, repr(float(x)), repr(float(y))])
        return buf.getvalue()

    def edges_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["i", "j", "sign"])
        for i, j, s in self.edges:
            w.writerow([int(i), int(j), int(s)])
        return buf.getvalue()


def pca_project(embedding, dims=2, extra_points=None, edges=None):
    """Project a (K, N) embedding onto its top principal directions.

    Columns are centered and projected onto the leading right-singular
    structure of the centered matrix; components are ordered by variance and
    sign-fixed so each direction's largest-magnitude loading is positive.
    ``extra_points`` (K, m), e.g. archetype positions, are mapped through the
    same centering and rotation.
    """
    X = np.asarray(embedding, np.float64)
    if X.shape[0] < dims:
        raise ValueError(f"need at least {dims} embedding dimensions, got {X.shape[0]}")
    center = X.mean(axis=1, keepdims=True)
    Xc = X - center
    u, s, _ = np.linalg.svd(Xc, full_matrices=False)
    basis = u[:, :dims]
    for c in range(dims):
        lead = int(np.argmax(np.abs(basis[:, c])))
        if basis[lead, c] < 0:
            basis[:, c] = -basis[:, c]
    node_xy = (basis.T @ Xc).T
    arch_xy = None
    if extra_points is not None:
        arch_xy = (basis.T @ (np.asarray(extra_points, np.float64) - center)).T
    return LayoutExport("pca", node_xy, arch_xy, _edge_array(edges))


def circular_layout(Z, edges=None):
    """Archetypes on the unit circle at angles 2 pi k / K; nodes at their convex mix."""
    Z = np.asarray(Z, np.float64)
    k = Z.shape[0]
    angles = 2.0 * np.pi * np.arange(k) / k
    anchors = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (K, 2)
    node_xy = Z.T @ anchors
    return LayoutExport("circular", node_xy, anchors, _edge_array(edges))


def edge_overlay(graph, sign_filter="all"):
    """(i, j, sign) rows for plotting, filtered to '+', '-', or 'all'."""
    sign = np.sign(graph.weight)
    if sign_filter == "+":
        mask = sign > 0
    elif sign_filter == "-":
        mask = sign < 0
    elif sign_filter == "all":
        mask = np.ones(sign.size, bool)
    else:
        raise ValueError("sign_filter must be '+', '-', or 'all'")
    return np.stack([graph.src[mask], graph.dst[mask], sign[mask]], axis=1)


def _edge_array(edges):
    if edges is None:
        return np.empty((0, 3), np.int64)
    return np.asarray(edges, np.int64).reshape(-1, 3)
