import os
from pathlib import Path

import numpy as np
import pytest

from arrowgen.graph import Graph

DATA_DIR = Path(os.environ.get("ARROWGEN_DATA_DIR", Path(__file__).parent.parent / "data"))

# one-line verdicts recorded by tests/test_acceptance.py, echoed at the end
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


def dataset_path(name: str) -> Path:
    """Path to a real dataset edge list; tests skip when it is absent."""
    p = DATA_DIR / name
    if not p.exists():
        pytest.skip(
            f"dataset file {p} not available in this environment "
            "(place the LCC edge list there to run this check)"
        )
    return p


def random_er_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, iv = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < p
    edges = np.stack([iu[mask], iv[mask]], axis=1)
    return Graph.from_edges(n, edges, undirected=True)


def random_connected_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """ER graph plus a random spanning path to force connectivity."""
    g = random_er_graph(n, p, rng)
    perm = rng.permutation(n)
    chain = np.stack([perm[:-1], perm[1:]], axis=1)
    edges = np.concatenate([g.undirected_edges(), chain], axis=0)
    return Graph.from_edges(n, edges, undirected=True)


# -- brute-force metric oracles (independent of the metrics module) --------


def adjacency(g: Graph) -> np.ndarray:
    a = np.zeros((g.num_nodes, g.num_nodes), dtype=np.int64)
    for u, v in g.edge_array():
        a[u, v] = 1
    return a


def brute_triangles(g: Graph) -> int:
    a = adjacency(g)
    n = g.num_nodes
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                if a[i, j] and a[j, k] and a[i, k]:
                    count += 1
    return count


def brute_clustering(g: Graph) -> tuple[float, float]:
    a = adjacency(g)
    n = g.num_nodes
    local = np.zeros(n)
    closed = 0
    wedges = 0
    for i in range(n):
        nbrs = np.nonzero(a[i])[0]
        d = len(nbrs)
        if d >= 2:
            links = sum(
                a[u, v] for ai, u in enumerate(nbrs) for v in nbrs[ai + 1 :]
            )
            local[i] = 2.0 * links / (d * (d - 1))
            wedges += d * (d - 1) // 2
            closed += links
    avg_local = float(local.mean()) if n else 0.0
    global_cc = closed / wedges if wedges else 0.0
    return avg_local, float(global_cc)


def brute_assortativity(g: Graph) -> float | None:
    deg = g.degrees()
    xs, ys = [], []
    for u, v in g.edge_array():
        xs.append(deg[u])
        ys.append(deg[v])
    xs = np.array(xs, dtype=float)
    ys = np.array(ys, dtype=float)
    if len(xs) == 0 or xs.std() == 0 or ys.std() == 0:
        return None
    return float(np.corrcoef(xs, ys)[0, 1])
