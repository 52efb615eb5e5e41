"""Graph container, text-format loaders, splits, synthetic trees, and the
four-point hyperbolicity estimator.

On-disk format (one directory per dataset):

* ``edges.txt``    - two whitespace-separated integer ids per line, undirected;
  duplicate lines and self-loops are dropped;
* ``features.csv`` - node id, then the feature values, comma-separated;
* ``labels.csv``   - node id, integer label;
* ``splits.json``  - optional ``{"train": [...], "val": [...], "test": [...]}``.

Node ids must be contiguous 0..n-1.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import kernels


class DataError(ValueError):
    pass


@dataclass
class Graph:
    n_nodes: int
    edges: np.ndarray            # (E, 2) int64, unique, i < j
    features: np.ndarray         # (n, d) float64
    labels: np.ndarray           # (n,) int64
    train_mask: np.ndarray | None = None
    val_mask: np.ndarray | None = None
    test_mask: np.ndarray | None = None
    _neighbors: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.n_nodes or self.labels.shape[0] != self.n_nodes:
            raise DataError("features/labels row count does not match n_nodes")
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n_nodes):
            raise DataError("edge endpoint out of range")
        masks = [m for m in (self.train_mask, self.val_mask, self.test_mask) if m is not None]
        for m in masks:
            if m.shape != (self.n_nodes,):
                raise DataError("mask length mismatch")
        if len(masks) > 1:
            total = sum(m.astype(int) for m in masks)
            if np.any(total > 1):
                raise DataError("masks overlap")
        if self.train_mask is not None:
            present = set(np.unique(self.labels).tolist())
            in_train = set(np.unique(self.labels[self.train_mask]).tolist())
            if present - in_train:
                raise DataError(f"classes missing from train mask: {sorted(present - in_train)}")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbor_lists(self) -> list[np.ndarray]:
        if self._neighbors is None:
            nbrs = [[] for _ in range(self.n_nodes)]
            for i, j in self.edges:
                nbrs[i].append(j)
                nbrs[j].append(i)
            self._neighbors = [np.array(sorted(a), dtype=np.int64) for a in nbrs]
        return self._neighbors

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def csr_adjacency(self) -> sparse.csr_matrix:
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(rows.size)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))


def _dedupe_edges(pairs, n_hint=None):
    seen = set()
    out = []
    for i, j in pairs:
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen.add(key)
            out.append(key)
    return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)


def load_graph(directory, split_fractions=(0.6, 0.2, 0.2), split_seed: int = 0) -> Graph:
    """Load the text-format dataset; generate a stratified split when
    splits.json is absent."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"no such dataset directory: {d}")

    pairs = []
    with open(d / "edges.txt") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                i, j = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise DataError(f"edges.txt line {ln}: expected two integer ids, got {line!r}")
            pairs.append((i, j))

    feat_rows = {}
    with open(d / "features.csv") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                nid = int(parts[0])
                vals = [float(v) for v in parts[1:]]
            except ValueError:
                raise DataError(f"features.csv line {ln}: malformed row {line!r}")
            if nid in feat_rows:
                raise DataError(f"features.csv line {ln}: duplicate id {nid}")
            feat_rows[nid] = vals

    label_rows = {}
    with open(d / "labels.csv") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                nid, lab = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise DataError(f"labels.csv line {ln}: malformed row {line!r}")
            label_rows[nid] = lab

    n = len(feat_rows)
    ids = sorted(feat_rows)
    if ids != list(range(n)):
        raise DataError("node ids must be contiguous 0..n-1 (gap or stray id found)")
    if sorted(label_rows) != ids:
        raise DataError("labels.csv ids do not match features.csv ids")
    widths = {len(v) for v in feat_rows.values()}
    if len(widths) != 1:
        raise DataError(f"inconsistent feature widths: {sorted(widths)}")

    features = np.array([feat_rows[i] for i in range(n)], dtype=np.float64)
    labels = np.array([label_rows[i] for i in range(n)], dtype=np.int64)
    edges = _dedupe_edges(pairs)
    if edges.size and edges.max() >= n:
        raise DataError(f"edge endpoint {edges.max()} out of range for n={n}")

    graph = Graph(n, edges, features, labels)
    split_file = d / "splits.json"
    if split_file.exists():
        with open(split_file) as fh:
            spl = json.load(fh)
        masks = {}
        for name in ("train", "val", "test"):
            m = np.zeros(n, dtype=bool)
            idx = np.asarray(spl.get(name, []), dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise DataError(f"splits.json: {name} id out of range")
            m[idx] = True
            masks[name] = m
        graph = Graph(n, edges, features, labels,
                      masks["train"], masks["val"], masks["test"])
    else:
        tr, va, te = split(graph, split_fractions, split_seed)
        graph = Graph(n, edges, features, labels, tr, va, te)
    return graph


def save_graph(directory, graph: Graph) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "edges.txt", "w") as fh:
        for i, j in graph.edges:
            fh.write(f"{i} {j}\n")
    with open(d / "features.csv", "w") as fh:
        for i in range(graph.n_nodes):
            vals = ",".join(repr(float(v)) for v in graph.features[i])
            fh.write(f"{i},{vals}\n")
    with open(d / "labels.csv", "w") as fh:
        for i in range(graph.n_nodes):
            fh.write(f"{i},{int(graph.labels[i])}\n")
    if graph.train_mask is not None:
        spl = {
            "train": np.flatnonzero(graph.train_mask).tolist(),
            "val": np.flatnonzero(graph.val_mask).tolist(),
            "test": np.flatnonzero(graph.test_mask).tolist(),
        }
        with open(d / "splits.json", "w") as fh:
            json.dump(spl, fh)


def split(graph: Graph, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Stratified train/val/test masks; per-class counts are rounded to the
    nearest node of the requested fractions."""
    if sum(fractions) > 1.0 + 1e-9:
        raise DataError(f"fractions sum to {sum(fractions)} > 1")
    rng = np.random.default_rng(seed)
    train = np.zeros(graph.n_nodes, dtype=bool)
    val = np.zeros(graph.n_nodes, dtype=bool)
    test = np.zeros(graph.n_nodes, dtype=bool)
    for c in np.unique(graph.labels):
        ids = np.flatnonzero(graph.labels == c)
        rng.shuffle(ids)
        n_c = ids.size
        n_tr = int(round(fractions[0] * n_c))
        n_va = int(round(fractions[1] * n_c))
        n_te = int(round(fractions[2] * n_c))
        if n_tr < 1:
            raise DataError(f"class {c} has {n_c} nodes; train fraction rounds to zero")
        if n_tr + n_va + n_te > n_c:
            n_te = n_c - n_tr - n_va
            if n_te < 0:
                raise DataError(f"class {c} has too few nodes for the requested fractions")
        train[ids[:n_tr]] = True
        val[ids[n_tr:n_tr + n_va]] = True
        test[ids[n_tr + n_va:n_tr + n_va + n_te]] = True
    return train, val, test


def normalize_adjacency(graph: Graph) -> sparse.csr_matrix:
    """(A + I) with symmetric 1/sqrt(deg_i * deg_j) normalization."""
    a = graph.csr_adjacency() + sparse.identity(graph.n_nodes, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d_half = sparse.diags(inv_sqrt)
    return (d_half @ a @ d_half).tocsr()


def synthetic_tree(branching: int, depth: int, d_feat: int = 16, noise: float = 0.1,
                   seed: int = 0) -> Graph:
    """Complete b-ary tree with `depth` levels below the root.

    The label of a node is the index of the depth-1 subtree containing it
    (the root gets class 0); features are the class one-hot plus Gaussian
    noise, so structure and features carry the same signal at noise=0.
    """
    if branching < 2 or depth < 2:
        raise DataError("need branching >= 2 and depth >= 2")
    n = (branching ** (depth + 1) - 1) // (branching - 1)
    if d_feat < branching:
        raise DataError(f"d_feat={d_feat} cannot one-hot encode {branching} classes")
    edges = []
    labels = np.zeros(n, dtype=np.int64)
    for child in range(1, n):
        parent = (child - 1) // branching
        edges.append((parent, child))
        if parent == 0:
            labels[child] = child - 1  # depth-1 nodes seed the classes
        else:
            labels[child] = labels[parent]
    rng = np.random.default_rng(seed)
    features = rng.normal(0.0, noise, size=(n, d_feat))
    features[np.arange(n), labels] += 1.0
    return Graph(n, np.array(edges, dtype=np.int64), features, labels)


# ---------------------------------------------------------------------------
# Gromov hyperbolicity (four-point condition)
# ---------------------------------------------------------------------------

def _largest_component(graph: Graph) -> np.ndarray:
    n_comp, comp = csgraph.connected_components(graph.csr_adjacency(), directed=False)
    if n_comp == 1:
        return np.arange(graph.n_nodes)
    warnings.warn(f"graph has {n_comp} components; using the largest", stacklevel=3)
    sizes = np.bincount(comp)
    return np.flatnonzero(comp == np.argmax(sizes))


def _distance_matrix(graph: Graph, nodes: np.ndarray) -> np.ndarray:
    sub = graph.csr_adjacency()[nodes][:, nodes].tocsr()
    d = kernels.bfs_all_pairs(sub.indptr.astype(np.int64), sub.indices.astype(np.int64),
                              len(nodes))
    return d.astype(np.float64)

EXACT_LIMIT = 60


def sample_quadruples(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, 4) rows of distinct indices in [0, n)."""
    if n < 4:
        raise DataError("need at least 4 nodes to form a quadruple")
    out = np.empty((count, 4), dtype=np.int64)
    filled = 0
    while filled < count:
        cand = rng.integers(0, n, size=(count - filled, 4))
        ok = (
            (cand[:, 0] != cand[:, 1]) & (cand[:, 0] != cand[:, 2]) & (cand[:, 0] != cand[:, 3])
            & (cand[:, 1] != cand[:, 2]) & (cand[:, 1] != cand[:, 3]) & (cand[:, 2] != cand[:, 3])
        )
        good = cand[ok]
        out[filled:filled + len(good)] = good
        filled += len(good)
    return out


def gromov_delta(graph: Graph, num_quadruples: int | None = None, seed: int = 0,
                 exact: bool | None = None) -> float:
    """Max (S1 - S2)/2 over quadruple pairwise-distance sums, on BFS shortest
    paths of the largest component. Exact enumeration for n <= 60 (or on
    request), otherwise a sampled lower bound."""
    nodes = _largest_component(graph)
    n = len(nodes)
    if n < 4:
        raise DataError(f"need at least 4 connected nodes, have {n}")
    if exact is None:
        exact = num_quadruples is None and n <= EXACT_LIMIT
    if exact and n > EXACT_LIMIT:
        raise DataError(
            f"exact enumeration is limited to n <= {EXACT_LIMIT} (got {n}); "
            "use sampling (num_quadruples)"
        )
    d = _distance_matrix(graph, nodes)
    if exact:
        return float(kernels.four_point_delta_exact(d))
    count = 50_000 if num_quadruples is None else int(num_quadruples)
    rng = np.random.default_rng(seed)
    quads = sample_quadruples(n, count, rng)
    return float(kernels.four_point_delta_quads(d, quads))
