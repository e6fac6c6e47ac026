"""Graph representation and preprocessing.

Graphs are stored in CSR form (row offsets + flat neighbor array) and are
immutable after construction.  Undirected graphs keep both orientations of
every edge, so "degree" is always the out-neighbor count.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class EdgeListParseError(ValueError):
    """Raised for malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class SplitError(ValueError):
    """Raised when an edge split cannot satisfy its connectivity constraint."""


@dataclass(frozen=True)
class Graph:
    num_nodes: int
    row_offsets: np.ndarray  # int64, length num_nodes + 1
    neighbors: np.ndarray  # int64, sorted within each row
    undirected: bool = True
    # Original node ids when the graph was relabeled at load time (else None).
    orig_ids: np.ndarray | None = None

    def __post_init__(self):
        self.row_offsets.setflags(write=False)
        self.neighbors.setflags(write=False)

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: np.ndarray,
        undirected: bool = True,
        orig_ids: np.ndarray | None = None,
    ) -> "Graph":
        """Build a CSR graph from a (M, 2) array of directed edges.

        Self-loops are dropped and duplicates removed.  When `undirected`,
        both orientations of every edge are stored.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise ValueError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
        if undirected and len(edges):
            edges = np.concatenate([edges, edges[:, ::-1]], axis=0)
        if len(edges):
            edges = np.unique(edges, axis=0)  # sorts by (u, v) and dedups
        srcs, dsts = edges[:, 0], edges[:, 1]
        counts = np.bincount(srcs, minlength=num_nodes)
        row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=row_offsets[1:])
        return cls(num_nodes, row_offsets, dsts.copy(), undirected, orig_ids)

    # -- basic accessors ---------------------------------------------------

    @property
    def num_directed_edges(self) -> int:
        return len(self.neighbors)

    @property
    def num_undirected_edges(self) -> int:
        if not self.undirected:
            raise ValueError("undirected edge count on a directed graph")
        return len(self.neighbors) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.row_offsets[u] : self.row_offsets[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors_of(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def edge_array(self) -> np.ndarray:
        """All directed edges as an (M, 2) array, sorted by (u, v)."""
        srcs = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        return np.stack([srcs, self.neighbors], axis=1)

    def undirected_edges(self) -> np.ndarray:
        """Canonical (u < v) undirected edge pairs."""
        e = self.edge_array()
        return e[e[:, 0] < e[:, 1]]

    def edge_key_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.undirected_edges()}


# -- ingestion -------------------------------------------------------------


def load_edge_list(text: str, undirected: bool = True) -> Graph:
    """Parse a line-based edge list ("u v" per line, '#' comments allowed).

    Node ids need not be contiguous; they are relabeled densely and the
    original ids recorded in Graph.orig_ids.
    """
    edges = []
    saw_line = False
    for line_no, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise EdgeListParseError(f"expected 'u v', got {stripped!r}", line_no)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(f"non-integer id in {stripped!r}", line_no) from None
        if u < 0 or v < 0:
            raise EdgeListParseError("negative node id", line_no)
        edges.append((u, v))
        saw_line = True
    if not saw_line:
        raise EdgeListParseError("empty edge list")
    arr = np.array(edges, dtype=np.int64)
    ids = np.unique(arr)
    remap = {int(x): i for i, x in enumerate(ids)}
    arr = np.vectorize(remap.__getitem__, otypes=[np.int64])(arr)
    return Graph.from_edges(len(ids), arr, undirected=undirected, orig_ids=ids)


def to_edge_list_text(g: Graph) -> str:
    """Serialize as canonical undirected (or all directed) edge lines."""
    edges = g.undirected_edges() if g.undirected else g.edge_array()
    return "".join(f"{u} {v}\n" for u, v in edges)


# -- preprocessing ---------------------------------------------------------


def connected_components(g: Graph) -> np.ndarray:
    """Component label per node (BFS flood fill)."""
    labels = np.full(g.num_nodes, -1, dtype=np.int64)
    comp = 0
    for s in range(g.num_nodes):
        if labels[s] != -1:
            continue
        frontier = np.array([s], dtype=np.int64)
        labels[s] = comp
        while len(frontier):
            nxt = []
            for u in frontier:
                nbrs = g.neighbors_of(int(u))
                fresh = nbrs[labels[nbrs] == -1]
                labels[fresh] = comp
                nxt.append(fresh)
            frontier = np.concatenate(nxt) if nxt else np.array([], dtype=np.int64)
        comp += 1
    return labels


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on the largest component plus old-id map.

    Returned map m satisfies m[new_id] = old_id.
    """
    if not g.undirected:
        raise ValueError("LCC requires an undirected graph")
    labels = connected_components(g)
    sizes = np.bincount(labels)
    keep = labels == sizes.argmax()
    old_ids = np.nonzero(keep)[0]
    new_of_old = np.full(g.num_nodes, -1, dtype=np.int64)
    new_of_old[old_ids] = np.arange(len(old_ids))
    edges = g.edge_array()
    edges = edges[keep[edges[:, 0]] & keep[edges[:, 1]]]
    sub = Graph.from_edges(len(old_ids), new_of_old[edges], undirected=True)
    return sub, old_ids


def is_connected(num_nodes: int, edges: np.ndarray) -> bool:
    if num_nodes == 0:
        return True
    g = Graph.from_edges(num_nodes, edges, undirected=True)
    labels = connected_components(g)
    return bool((labels == 0).all())


@dataclass(frozen=True)
class EdgeSplit:
    """Disjoint train/val/test undirected edge sets covering a source graph."""

    num_nodes: int
    train_edges: np.ndarray  # (m, 2) canonical u < v
    val_edges: np.ndarray
    test_edges: np.ndarray
    seed: int

    def train_graph(self) -> Graph:
        return Graph.from_edges(self.num_nodes, self.train_edges, undirected=True)


def _random_spanning_tree(g: Graph, rng: np.random.Generator) -> set[tuple[int, int]]:
    """Spanning-tree edges via randomized BFS from a random root."""
    tree: set[tuple[int, int]] = set()
    visited = np.zeros(g.num_nodes, dtype=bool)
    root = int(rng.integers(g.num_nodes))
    visited[root] = True
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            nbrs = g.neighbors_of(u).copy()
            rng.shuffle(nbrs)
            for v in nbrs:
                v = int(v)
                if not visited[v]:
                    visited[v] = True
                    tree.add((min(u, v), max(u, v)))
                    nxt.append(v)
        frontier = nxt
    return tree


def split_edges(g: Graph, val_frac: float, test_frac: float, seed: int) -> EdgeSplit:
    """Split undirected edges into train/val/test, keeping train connected.

    Held-out edges are drawn uniformly from the edges left over after
    protecting a random spanning tree, so the training graph stays connected
    over all nodes by construction.
    """
    if not g.undirected:
        raise ValueError("split requires an undirected graph")
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac >= 1:
        raise ValueError("need 0 <= val_frac + test_frac < 1")
    labels = connected_components(g)
    if g.num_nodes and labels.max() != 0:
        raise ValueError("split requires a connected graph")
    rng = np.random.default_rng(seed)
    edges = g.undirected_edges()
    m = len(edges)
    n_val = int(val_frac * m)
    n_test = int(test_frac * m)
    tree = _random_spanning_tree(g, rng)
    removable_mask = np.array([(int(u), int(v)) not in tree for u, v in edges])
    n_removable = int(removable_mask.sum())
    if n_val + n_test > n_removable:
        raise SplitError(
            f"cannot hold out {n_val + n_test} edges; only {n_removable} "
            f"non-spanning-tree edges are removable"
        )
    removable = np.nonzero(removable_mask)[0]
    chosen = rng.choice(removable, size=n_val + n_test, replace=False)
    val_idx = chosen[:n_val]
    test_idx = chosen[n_val:]
    held = np.zeros(m, dtype=bool)
    held[chosen] = True
    return EdgeSplit(
        num_nodes=g.num_nodes,
        train_edges=edges[~held],
        val_edges=edges[np.sort(val_idx)],
        test_edges=edges[np.sort(test_idx)],
        seed=seed,
    )


@dataclass(frozen=True)
class PerturbedGraph:
    """A graph with some original edges deleted and fake non-edges inserted.

    `labels[i]` is 1 when `edges[i]` comes from the source graph, 0 when it
    was inserted as a fake edge.
    """

    graph: Graph
    edges: np.ndarray  # (k, 2) canonical u < v
    labels: np.ndarray  # (k,) in {0, 1}


def sample_non_edges(
    g: Graph, count: int, rng: np.random.Generator, max_tries: int = 200
) -> np.ndarray:
    """Uniformly sample `count` distinct non-edges (canonical u < v)."""
    n = g.num_nodes
    total_pairs = n * (n - 1) // 2
    if count > total_pairs - g.num_undirected_edges:
        raise ValueError(
            f"requested {count} non-edges but only "
            f"{total_pairs - g.num_undirected_edges} exist"
        )
    found: set[tuple[int, int]] = set()
    for _ in range(max_tries):
        if len(found) >= count:
            break
        batch = rng.integers(0, n, size=(max(4 * count, 64), 2))
        for u, v in batch:
            if len(found) >= count:
                break
            u, v = int(min(u, v)), int(max(u, v))
            if u == v or (u, v) in found or g.has_edge(u, v):
                continue
            found.add((u, v))
    else:
        raise RuntimeError("non-edge rejection sampling did not converge")
    return np.array(sorted(found), dtype=np.int64)


def perturb_graph(
    g: Graph, delete_frac: float, fake_frac: float, seed: int
) -> PerturbedGraph:
    """Delete a fraction of edges and insert fake non-edges.

    `fake_frac` is relative to the number of kept edges, so fake_frac=1.0
    yields balanced classes.
    """
    if not (0 <= delete_frac < 1 and 0 <= fake_frac):
        raise ValueError("delete_frac in [0,1), fake_frac >= 0")
    rng = np.random.default_rng(seed)
    edges = g.undirected_edges()
    m = len(edges)
    n_delete = int(delete_frac * m)
    keep_idx = rng.choice(m, size=m - n_delete, replace=False)
    kept = edges[np.sort(keep_idx)]
    n_fake = int(round(fake_frac * len(kept)))
    fakes = (
        sample_non_edges(g, n_fake, rng)
        if n_fake
        else np.zeros((0, 2), dtype=np.int64)
    )
    all_edges = np.concatenate([kept, fakes], axis=0)
    labels = np.concatenate(
        [np.ones(len(kept), dtype=np.int64), np.zeros(len(fakes), dtype=np.int64)]
    )
    order = np.lexsort((all_edges[:, 1], all_edges[:, 0]))
    pg = Graph.from_edges(g.num_nodes, all_edges, undirected=True)
    return PerturbedGraph(graph=pg, edges=all_edges[order], labels=labels[order])


# -- synthetic graphs ------------------------------------------------------


def sbm_generate(
    block_sizes: list[int], p_in: float, p_out: float, seed: int
) -> Graph:
    """Stochastic block model: intra-block pairs with p_in, inter with p_out."""
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    sizes = np.asarray(block_sizes, dtype=np.int64)
    n = int(sizes.sum())
    starts = np.concatenate([[0], np.cumsum(sizes)])
    block_of = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    edges = []
    iu, iv = np.triu_indices(n, k=1)
    same = block_of[iu] == block_of[iv]
    probs = np.where(same, p_in, p_out)
    mask = rng.random(len(iu)) < probs
    edges = np.stack([iu[mask], iv[mask]], axis=1)
    g = Graph.from_edges(n, edges, undirected=True)
    return g


def sbm_block_of(block_sizes: list[int]) -> np.ndarray:
    return np.repeat(np.arange(len(block_sizes)), block_sizes)


def positional_encodings(n: int, dim: int) -> np.ndarray:
    """Sinusoidal position features: alternating sin/cos, base 10000."""
    if dim % 2 != 0:
        raise ValueError("dim must be even")
    pos = np.arange(n, dtype=np.float64)[:, None]
    freqs = np.power(10000.0, -np.arange(0, dim, 2, dtype=np.float64) / dim)
    x = np.zeros((n, dim))
    x[:, 0::2] = np.sin(pos * freqs)
    x[:, 1::2] = np.cos(pos * freqs)
    return x


# -- file formats ----------------------------------------------------------


def save_features(x: np.ndarray) -> str:
    n, f = x.shape
    lines = [f"{n} {f}"]
    for row in x:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def load_features(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty feature file")
    n, f = (int(tok) for tok in lines[0].split())
    if len(lines) - 1 != n:
        raise ValueError(f"feature file declares {n} rows, has {len(lines) - 1}")
    x = np.array([[float(tok) for tok in ln.split()] for ln in lines[1:]])
    if x.shape != (n, f):
        raise ValueError("feature row width mismatch")
    if not np.isfinite(x).all():
        raise ValueError("non-finite feature value")
    return x


def save_split(split: EdgeSplit) -> str:
    out = [f"seed={split.seed}", f"num_nodes={split.num_nodes}"]
    for name, edges in (
        ("train", split.train_edges),
        ("val", split.val_edges),
        ("test", split.test_edges),
    ):
        out.append(f"[{name}]")
        out.extend(f"{u} {v}" for u, v in edges)
    return "\n".join(out) + "\n"


def load_split(text: str) -> EdgeSplit:
    seed = None
    num_nodes = None
    sections: dict[str, list[tuple[int, int]]] = {"train": [], "val": [], "test": []}
    current: list[tuple[int, int]] | None = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("seed="):
            seed = int(line[5:])
        elif line.startswith("num_nodes="):
            num_nodes = int(line[10:])
        elif line.startswith("[") and line.endswith("]"):
            current = sections[line[1:-1]]
        else:
            u, v = line.split()
            assert current is not None, "edge line before section header"
            current.append((int(u), int(v)))
    if seed is None or num_nodes is None:
        raise ValueError("split file missing seed= or num_nodes= line")

    def arr(rows):
        return (
            np.array(rows, dtype=np.int64)
            if rows
            else np.zeros((0, 2), dtype=np.int64)
        )

    return EdgeSplit(
        num_nodes=num_nodes,
        train_edges=arr(sections["train"]),
        val_edges=arr(sections["val"]),
        test_edges=arr(sections["test"]),
        seed=seed,
    )
