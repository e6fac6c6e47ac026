"""Deterministic graph statistics and generated-vs-original comparison.

All statistics are computed directly on the CSR structure; the test suite
checks them against brute-force enumerations on small random graphs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, asdict

import numpy as np

from .graph import Graph


@dataclass
class MetricsReport:
    max_degree: float
    assortativity: float | None  # None when endpoint degree variance is 0
    triangle_count: float
    power_law_exp: float
    avg_clustering: float
    global_clustering: float
    edge_overlap: float | None = None
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def triangle_count(g: Graph) -> int:
    """Unordered node triples forming 3-cycles (degree-ordered intersection)."""
    deg = g.degrees()
    # orient each edge from the "smaller" endpoint under (degree, id) order
    rank = np.lexsort((np.arange(g.num_nodes), deg))
    order = np.empty(g.num_nodes, dtype=np.int64)
    order[rank] = np.arange(g.num_nodes)
    fwd: list[np.ndarray] = []
    for u in range(g.num_nodes):
        nbrs = g.neighbors_of(u)
        fwd.append(np.sort(nbrs[order[nbrs] > order[u]]))
    count = 0
    for u in range(g.num_nodes):
        for v in fwd[u]:
            count += len(np.intersect1d(fwd[u], fwd[int(v)], assume_unique=True))
    return count


def _triangles_per_node(g: Graph) -> np.ndarray:
    tri = np.zeros(g.num_nodes, dtype=np.int64)
    for u in range(g.num_nodes):
        nbrs = g.neighbors_of(u)
        higher = nbrs[nbrs > u]
        for v in higher:
            common = np.intersect1d(
                higher, g.neighbors_of(int(v)), assume_unique=True
            )
            common = common[common > v]
            for w in common:
                tri[u] += 1
                tri[int(v)] += 1
                tri[int(w)] += 1
    return tri


def clustering_coefficients(g: Graph) -> tuple[float, float]:
    """(average local clustering, global transitivity)."""
    deg = g.degrees()
    tri = _triangles_per_node(g)
    wedges = deg * (deg - 1) // 2
    local = np.zeros(g.num_nodes)
    nz = wedges > 0
    local[nz] = tri[nz] / wedges[nz]
    avg_local = float(local.mean()) if g.num_nodes else 0.0
    total_wedges = int(wedges.sum())
    global_cc = float(tri.sum() / total_wedges) if total_wedges else 0.0
    return avg_local, global_cc


def assortativity(g: Graph) -> float | None:
    """Pearson correlation of endpoint degrees over all directed edges."""
    edges = g.edge_array()
    if len(edges) == 0:
        return None
    deg = g.degrees()
    du = deg[edges[:, 0]].astype(np.float64)
    dv = deg[edges[:, 1]].astype(np.float64)
    su, sv = du.std(), dv.std()
    if su == 0 or sv == 0:
        return None
    return float(((du - du.mean()) * (dv - dv.mean())).mean() / (su * sv))


def power_law_exponent(degrees: np.ndarray, d_min: int = 1) -> float:
    """Discrete MLE approximation: alpha = 1 + n / sum ln(d_i / (d_min - 0.5))."""
    degrees = np.asarray(degrees)
    degrees = degrees[degrees >= d_min]
    if len(degrees) == 0:
        raise ValueError(f"no degrees >= d_min={d_min}")
    logs = np.log(degrees / (d_min - 0.5))
    return float(1.0 + len(degrees) / logs.sum())


def edge_overlap(
    generated: Graph, original: Graph, denominator: str = "original"
) -> float:
    """|E_gen intersect E_orig| / |E_orig| over undirected edge sets.

    denominator="generated" divides by the generated edge count instead.
    """
    if generated.num_nodes != original.num_nodes:
        raise ValueError("node count mismatch")
    inter = len(generated.edge_key_set() & original.edge_key_set())
    if denominator == "original":
        denom = original.num_undirected_edges
    elif denominator == "generated":
        denom = generated.num_undirected_edges
    else:
        raise ValueError("denominator must be 'original' or 'generated'")
    return inter / denom if denom else 0.0


def compute_report(g: Graph, original: Graph | None = None) -> MetricsReport:
    t0 = time.perf_counter()
    deg = g.degrees()
    avg_local, global_cc = clustering_coefficients(g)
    report = MetricsReport(
        max_degree=float(deg.max()) if len(deg) else 0.0,
        assortativity=assortativity(g),
        triangle_count=float(triangle_count(g)),
        power_law_exp=power_law_exponent(deg[deg > 0]) if (deg > 0).any() else math.nan,
        avg_clustering=avg_local,
        global_clustering=global_cc,
        edge_overlap=edge_overlap(g, original) if original is not None else None,
        wall_time_s=time.perf_counter() - t0,
    )
    return report


def evaluate_runs(
    graphs: list[Graph], original: Graph
) -> tuple[MetricsReport, MetricsReport]:
    """Per-metric mean and sample standard deviation across generated runs."""
    if not graphs:
        raise ValueError("need at least one generated graph")
    reports = [compute_report(g, original) for g in graphs]
    fields = [
        "max_degree",
        "assortativity",
        "triangle_count",
        "power_law_exp",
        "avg_clustering",
        "global_clustering",
        "edge_overlap",
        "wall_time_s",
    ]
    means = {}
    stds = {}
    for f in fields:
        vals = [getattr(r, f) for r in reports]
        if any(v is None for v in vals):
            means[f] = None
            stds[f] = None
            continue
        arr = np.array(vals, dtype=np.float64)
        means[f] = float(arr.mean())
        stds[f] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return MetricsReport(**means), MetricsReport(**stds)


def degree_histogram(g: Graph) -> np.ndarray:
    """Counts per degree value, index = degree."""
    return np.bincount(g.degrees())


def log_binned_histogram(g: Graph, bins_per_decade: int = 10) -> list[tuple[float, float, int]]:
    """(lo, hi, count) per logarithmic degree bin, zero-degree nodes excluded."""
    deg = g.degrees()
    deg = deg[deg > 0]
    if len(deg) == 0:
        return []
    top = deg.max()
    n_bins = max(1, int(np.ceil(np.log10(top + 1) * bins_per_decade)))
    edges = np.logspace(0, np.log10(top + 1), n_bins + 1)
    counts, _ = np.histogram(deg, bins=edges)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)
    ]
