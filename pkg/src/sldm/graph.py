"""Signed weighted graphs: parsing, normalization, splits, and statistics.

The on-disk format is a plain UTF-8 edge list, one record per line:
``source target weight [timestamp]``, whitespace- or comma-separated, with
``#`` comment lines. Files written by :func:`write_graph` carry the node
order and directedness in comment headers so they round-trip exactly,
including isolated nodes.

Weights are integers; a weight of zero means "no edge", so pairs whose
aggregated weight cancels to zero are dropped.
"""

import io
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DataError


class EdgeRecord(NamedTuple):
    src: str
    dst: str
    weight: int
    timestamp: Optional[float] = None


@dataclass(frozen=True)
class SignedGraph:
    """Immutable integer-weighted signed graph with dense node indices.

    ``src``/``dst``/``weight`` are parallel int64 arrays. Undirected graphs
    store each pair once with src < dst and no self-loops; node indices are
    dense in [0, n_nodes).
    """

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    directed: bool
    node_labels: Optional[list] = None

    def __post_init__(self):
        for name in ("src", "dst", "weight"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), np.int64))
        if np.any(self.weight == 0):
            raise DataError("zero-weight edge in graph")
        if self.src.size:
            if self.src.min() < 0 or max(self.src.max(), self.dst.max()) >= self.n_nodes:
                raise DataError("edge endpoint outside [0, n_nodes)")
        if not self.directed:
            if np.any(self.src >= self.dst):
                raise DataError("undirected edges must satisfy src < dst")
        elif np.any(self.src == self.dst):
            raise DataError("self-loop in directed graph")
        if self.node_labels is not None and len(self.node_labels) != self.n_nodes:
            raise DataError("node_labels length does not match n_nodes")

    @property
    def n_edges(self):
        return int(self.src.size)

    def edges(self):
        """Iterate (i, j, weight) tuples."""
        return zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())

    def edge_set(self):
        """Set of stored index pairs (src < dst when undirected)."""
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def label(self, i):
        return self.node_labels[i] if self.node_labels is not None else str(i)


@dataclass(frozen=True)
class NetworkStats:
    n_nodes: int
    n_pos: int
    n_neg: int
    density: float
    pct_pos: float
    pct_neg: float

    def as_dict(self):
        return {
            "n_nodes": self.n_nodes, "n_pos": self.n_pos, "n_neg": self.n_neg,
            "density": self.density, "pct_pos": self.pct_pos, "pct_neg": self.pct_neg,
        }


@dataclass(frozen=True)
class HoldoutSplit:
    """Residual training graph plus held-out edges and sampled non-edges."""

    train: SignedGraph
    test_edges: np.ndarray   # (m, 3): i, j, sign in {+1, -1}
    test_zeros: np.ndarray   # (m, 2): i, j non-edges of the original graph
    seed: int


# ---------------------------------------------------------------------------
# parsing and record-level preprocessing
# ---------------------------------------------------------------------------

def parse_edge_list(source, comment="#"):
    """Parse an edge-list text into records, preserving duplicates.

    ``source`` may be a string of text or any iterable of lines. Each record
    is ``source target weight [timestamp]``; separators are whitespace and/or
    commas. Raises :class:`DataError` with the line number on malformed input.
    """
    if isinstance(source, str):
        lines = io.StringIO(source)
    else:
        lines = source
    records = []
    n_lines = 0
    for lineno, raw in enumerate(lines, start=1):
        n_lines += 1
        line = raw.strip()
        if not line or line.startswith(comment):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) < 3 or len(parts) > 4:
            raise DataError(f"line {lineno}: expected 'src dst weight [timestamp]', got {line!r}")
        try:
            w = int(parts[2])
        except ValueError:
            raise DataError(f"line {lineno}: non-integer weight {parts[2]!r}") from None
        ts = None
        if len(parts) == 4:
            try:
                ts = float(parts[3])
            except ValueError:
                raise DataError(f"line {lineno}: bad timestamp {parts[3]!r}") from None
        records.append(EdgeRecord(parts[0], parts[1], w, ts))
    if n_lines == 0:
        raise DataError("empty input")
    return records


def aggregate_temporal(records):
    """Sum weights over repeated ordered pairs; pairs summing to zero are dropped.

    Timestamps are discarded (static analysis only). Output keeps the first
    appearance order of each ordered pair.
    """
    sums = {}
    for r in records:
        key = (r.src, r.dst)
        sums[key] = sums.get(key, 0) + r.weight
    return [EdgeRecord(s, d, w) for (s, d), w in sums.items() if w != 0]


def symmetrize(records):
    """Combine directed records into undirected ones: w(i,j) = w(i->j) + w(j->i).

    Pairs are canonicalized to (min, max) label order; zero-sum pairs dropped.
    """
    sums = {}
    for r in records:
        key = (r.src, r.dst) if r.src <= r.dst else (r.dst, r.src)
        sums[key] = sums.get(key, 0) + r.weight
    return [EdgeRecord(s, d, w) for (s, d), w in sums.items() if w != 0]


def build_graph(records, directed):
    """Index labels densely (first appearance order) and build a SignedGraph.

    Records must already be aggregated: one record per (ordered or unordered)
    pair and no zero weights. Self-loops are dropped.
    """
    index = {}
    for r in records:
        for lab in (r.src, r.dst):
            if lab not in index:
                index[lab] = len(index)
    labels = list(index)
    seen = set()
    src, dst, wgt = [], [], []
    for r in records:
        if r.weight == 0:
            raise DataError(f"zero-weight record {r.src}->{r.dst}; aggregate first")
        i, j = index[r.src], index[r.dst]
        if i == j:
            continue
        key = (i, j) if directed else (min(i, j), max(i, j))
        if key in seen:
            raise DataError(f"duplicate pair {r.src},{r.dst}; aggregate/symmetrize first")
        seen.add(key)
        src.append(key[0])
        dst.append(key[1])
        wgt.append(r.weight)
    return SignedGraph(len(labels), np.array(src, np.int64), np.array(dst, np.int64),
                       np.array(wgt, np.int64), directed, labels)


# ---------------------------------------------------------------------------
# structural operations
# ---------------------------------------------------------------------------

def _undirected_adjacency(graph):
    """Adjacency sets over the undirected support (signs ignored)."""
    adj = [set() for _ in range(graph.n_nodes)]
    for i, j in zip(graph.src.tolist(), graph.dst.tolist()):
        adj[i].add(j)
        adj[j].add(i)
    return adj


def largest_connected_component(graph):
    """Induced subgraph on the largest weakly connected component.

    Ties are broken toward the component containing the smallest node index.
    Node indices are re-densified preserving relative order.
    """
    if graph.n_nodes == 0:
        raise DataError("empty graph")
    adj = _undirected_adjacency(graph)
    comp = np.full(graph.n_nodes, -1, np.int64)
    n_comp = 0
    for start in range(graph.n_nodes):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = n_comp
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = n_comp
                    stack.append(v)
        n_comp += 1
    sizes = np.bincount(comp, minlength=n_comp)
    best = int(np.flatnonzero(sizes == sizes.max())[0])  # first = smallest min index
    keep = np.flatnonzero(comp == best)
    remap = np.full(graph.n_nodes, -1, np.int64)
    remap[keep] = np.arange(keep.size)
    mask = (comp[graph.src] == best) & (comp[graph.dst] == best)
    labels = None
    if graph.node_labels is not None:
        labels = [graph.node_labels[i] for i in keep.tolist()]
    return SignedGraph(int(keep.size), remap[graph.src[mask]], remap[graph.dst[mask]],
                       graph.weight[mask], graph.directed, labels)


def is_connected(graph):
    if graph.n_nodes == 0:
        return False
    adj = _undirected_adjacency(graph)
    seen = np.zeros(graph.n_nodes, bool)
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == graph.n_nodes


def _still_connected(adj, i, j):
    """Bidirectional BFS between i and j (edge i-j already removed from adj)."""
    if i in adj[j]:
        return True
    front_a, front_b = {i}, {j}
    seen_a, seen_b = {i}, {j}
    while front_a and front_b:
        if len(front_a) > len(front_b):
            front_a, front_b = front_b, front_a
            seen_a, seen_b = seen_b, seen_a
        nxt = set()
        for u in front_a:
            for v in adj[u]:
                if v in seen_b:
                    return True
                if v not in seen_a:
                    seen_a.add(v)
                    nxt.add(v)
        front_a = nxt
    return False


def split_train_test(graph, holdout_fraction, seed):
    """Remove round(fraction * |E|) edges while keeping the residual connected.

    Candidate edges are visited in a random order; removals that would
    disconnect the residual graph (bridges of the undirected support) are
    skipped and other candidates drawn instead. An equal number of uniform
    non-edges of the original graph is sampled as zero instances. If the
    target cannot be reached (near-tree graphs) a warning reports the
    achieved count.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise DataError("holdout fraction must be in (0, 1)")
    if not is_connected(graph):
        raise DataError("graph must be connected before splitting")
    rng = np.random.default_rng(seed)
    m = graph.n_edges
    target = int(round(holdout_fraction * m))
    adj = _undirected_adjacency(graph)
    # undirected support multiplicity: for directed graphs both (i,j),(j,i) may exist
    support = {}
    for i, j in zip(graph.src.tolist(), graph.dst.tolist()):
        key = (min(i, j), max(i, j))
        support[key] = support.get(key, 0) + 1

    removed = []
    order = rng.permutation(m)
    for e in order.tolist():
        if len(removed) == target:
            break
        i, j = int(graph.src[e]), int(graph.dst[e])
        key = (min(i, j), max(i, j))
        if support[key] > 1:
            support[key] -= 1
            removed.append(e)
            continue
        adj[i].discard(j)
        adj[j].discard(i)
        if _still_connected(adj, i, j):
            support[key] = 0
            removed.append(e)
        else:
            adj[i].add(j)
            adj[j].add(i)
    if len(removed) < target:
        warnings.warn(
            f"holdout target {target} not reachable while preserving connectivity; "
            f"achieved {len(removed)}", stacklevel=2)

    removed_idx = np.array(sorted(removed), np.int64)
    keep_mask = np.ones(m, bool)
    keep_mask[removed_idx] = False
    labels = list(graph.node_labels) if graph.node_labels is not None else None
    train = SignedGraph(graph.n_nodes, graph.src[keep_mask], graph.dst[keep_mask],
                        graph.weight[keep_mask], graph.directed, labels)

    test_edges = np.stack([
        graph.src[removed_idx], graph.dst[removed_idx],
        np.sign(graph.weight[removed_idx])], axis=1).astype(np.int64)

    n = graph.n_nodes
    possible = n * (n - 1) if graph.directed else n * (n - 1) // 2
    existing = set(zip(graph.src.tolist(), graph.dst.tolist()))
    n_zero = min(len(removed), possible - len(existing))
    if n_zero < len(removed):
        warnings.warn(
            f"only {n_zero} non-edges exist; test_zeros smaller than test_edges",
            stacklevel=2)
    zeros = set()
    if possible <= 200_000:
        # dense/small graphs: enumerate and sample without replacement
        if graph.directed:
            candidates = [(i, j) for i in range(n) for j in range(n)
                          if i != j and (i, j) not in existing]
        else:
            candidates = [(i, j) for i in range(n) for j in range(i + 1, n)
                          if (i, j) not in existing]
        pick = rng.choice(len(candidates), size=n_zero, replace=False) if n_zero else []
        zeros = {candidates[int(p)] for p in pick}
    else:
        while len(zeros) < n_zero:
            i = int(rng.integers(n))
            j = int(rng.integers(n))
            if i == j:
                continue
            if not graph.directed and i > j:
                i, j = j, i
            if (i, j) in existing or (i, j) in zeros:
                continue
            zeros.add((i, j))
    test_zeros = np.array(sorted(zeros), np.int64).reshape(len(zeros), 2)
    return HoldoutSplit(train, test_edges, test_zeros, int(seed))


def degree_stats(graph):
    """Edge counts and density; density uses ordered dyads when directed."""
    n_pos = int((graph.weight > 0).sum())
    n_neg = int((graph.weight < 0).sum())
    n = graph.n_nodes
    possible = n * (n - 1) if graph.directed else n * (n - 1) // 2
    density = (n_pos + n_neg) / possible if possible else 0.0
    total = n_pos + n_neg
    pct_pos = 100.0 * n_pos / total if total else 0.0
    pct_neg = 100.0 * n_neg / total if total else 0.0
    return NetworkStats(n, n_pos, n_neg, density, pct_pos, pct_neg)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_graph(path_or_file, graph):
    """Canonical edge-list serialization with node-order headers."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        fh.write("# sldm-graph v1\n")
        fh.write(f"# directed: {int(graph.directed)}\n")
        fh.write(f"# n_nodes: {graph.n_nodes}\n")
        labels = [str(graph.label(i)) for i in range(graph.n_nodes)]
        if any(not lab or any(c.isspace() for c in lab) for lab in labels):
            raise DataError("node labels must be non-empty and whitespace-free "
                            "for edge-list serialization")
        fh.write("# nodes: " + " ".join(labels) + "\n")
        for i, j, w in graph.edges():
            fh.write(f"{labels[i]} {labels[j]} {w}\n")
    finally:
        if own:
            fh.close()


def read_graph(path_or_file):
    """Read a file written by :func:`write_graph` (plain edge lists also work)."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        text = fh.read()
    finally:
        if own:
            fh.close()
    directed = None
    labels = None
    for line in text.splitlines():
        if line.startswith("# directed:"):
            directed = bool(int(line.split(":", 1)[1]))
        elif line.startswith("# nodes:"):
            labels = line.split(":", 1)[1].split()
    records = parse_edge_list(text)
    if directed is None:
        directed = True
    if labels is None:
        return build_graph(records, directed)
    index = {lab: i for i, lab in enumerate(labels)}
    src = np.array([index[r.src] for r in records], np.int64)
    dst = np.array([index[r.dst] for r in records], np.int64)
    wgt = np.array([r.weight for r in records], np.int64)
    return SignedGraph(len(labels), src, dst, wgt, directed, labels)


def adjacency_csr(graph):
    """CSR arrays (indptr, indices, weights) with sorted columns per row.

    Undirected graphs are expanded to both directions so every row holds the
    full neighborhood. Cached on the graph instance.
    """
    cached = getattr(graph, "_csr_cache", None)
    if cached is not None:
        return cached
    if graph.directed:
        rows = graph.src
        cols = graph.dst
        vals = graph.weight.astype(np.float64)
    else:
        rows = np.concatenate([graph.src, graph.dst])
        cols = np.concatenate([graph.dst, graph.src])
        vals = np.concatenate([graph.weight, graph.weight]).astype(np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(graph.n_nodes + 1, np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    csr = (indptr.astype(np.int64), np.ascontiguousarray(cols),
           np.ascontiguousarray(vals))
    object.__setattr__(graph, "_csr_cache", csr)
    return csr
