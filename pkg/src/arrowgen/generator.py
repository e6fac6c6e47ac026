"""Iterative propose-filter-resample graph generation.

Each iteration samples one denoised walk per start node, turns consecutive
node pairs into edge proposals, lets the GCN score the union of current and
proposed edges, keeps each undirected pair by a Bernoulli draw on its score,
then resamples start nodes proportional to remaining degree deficits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import denoiser as dn
from .diffusion import sample_walk_conditioned_batch
from .gnn import GcnParams, edge_probability, gcn_forward
from .graph import Graph


@dataclass
class GenerationState:
    edge_set: set[tuple[int, int]]  # both orientations when undirected
    d_target: np.ndarray
    iteration: int
    v_start: np.ndarray


def propose_edges(walks: list[np.ndarray], undirected: bool = True) -> set[tuple[int, int]]:
    """Consecutive node pairs from all walks; self-pairs dropped, deduped."""
    proposals: set[tuple[int, int]] = set()
    for w in walks:
        for a, b in zip(w[:-1], w[1:]):
            a, b = int(a), int(b)
            if a == b:
                continue
            proposals.add((a, b))
            if undirected:
                proposals.add((b, a))
    return proposals


def filter_edges(
    gnn: GcnParams,
    x: np.ndarray,
    current: set[tuple[int, int]],
    proposals: set[tuple[int, int]],
    rng: np.random.Generator,
) -> set[tuple[int, int]]:
    """Keep each undirected candidate pair with probability sigmoid(z_u.z_v).

    Embeddings are computed on the graph built from current + proposals; one
    Bernoulli draw decides both orientations of a pair.
    """
    union = current | proposals
    if not union:
        return set()
    pairs = sorted({(min(u, v), max(u, v)) for u, v in union})
    edges = np.array(pairs, dtype=np.int64)
    g = Graph.from_edges(x.shape[0], edges, undirected=True)
    z = gcn_forward(g, x, gnn)
    probs = edge_probability(z, edges)
    kept = edges[rng.random(len(edges)) < probs]
    out: set[tuple[int, int]] = set()
    for u, v in kept:
        out.add((int(u), int(v)))
        out.add((int(v), int(u)))
    return out


def resample_start_nodes(
    d_target: np.ndarray, d_current: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Independent Bernoulli per node with p = deficit / max deficit."""
    deficit = np.maximum(0, d_target - d_current)
    top = deficit.max()
    if top == 0:
        return np.array([], dtype=np.int64)
    p = deficit / top
    return np.nonzero(rng.random(len(p)) < p)[0]


def _degrees_from_edge_set(edge_set: set[tuple[int, int]], n: int) -> np.ndarray:
    deg = np.zeros(n, dtype=np.int64)
    for u, _ in edge_set:
        deg[u] += 1
    return deg


def generate(
    denoiser_params: dn.DenoiserParams,
    gnn_params: GcnParams,
    x: np.ndarray,
    d_target: np.ndarray,
    num_iterations: int,
    walk_len: int | None = None,
    seed: int = 0,
) -> tuple[Graph, dict]:
    """Run the full iterative generation loop; returns (graph, manifest)."""
    if num_iterations < 1:
        raise ValueError("need at least one iteration")
    n = denoiser_params.num_nodes
    d = walk_len or denoiser_params.walk_len
    rng = np.random.default_rng(seed)
    state = GenerationState(
        edge_set=set(),
        d_target=np.asarray(d_target),
        iteration=0,
        v_start=np.arange(n, dtype=np.int64),
    )

    def f_rows(tokens, t, positions):
        return dn.forward_rows(denoiser_params, tokens, t, positions)

    edge_counts: list[int] = []
    stage_times: list[dict[str, float]] = []
    t_start = time.perf_counter()
    for l in range(1, num_iterations + 1):
        state.iteration = l
        if len(state.v_start) == 0:
            break
        t0 = time.perf_counter()
        tokens = sample_walk_conditioned_batch(f_rows, state.v_start, d, n, rng)
        t1 = time.perf_counter()
        proposals = propose_edges(list(tokens), undirected=True)
        t2 = time.perf_counter()
        state.edge_set = filter_edges(gnn_params, x, state.edge_set, proposals, rng)
        t3 = time.perf_counter()
        edge_counts.append(len(state.edge_set) // 2)
        if l < num_iterations:
            d_cur = _degrees_from_edge_set(state.edge_set, n)
            state.v_start = resample_start_nodes(state.d_target, d_cur, rng)
        stage_times.append(
            {
                "walk_sampling_s": t1 - t0,
                "proposal_s": t2 - t1,
                "gnn_filter_s": t3 - t2,
            }
        )
    edges = np.array(sorted(state.edge_set), dtype=np.int64).reshape(-1, 2)
    graph = Graph.from_edges(n, edges, undirected=True)
    manifest = {
        "seed": seed,
        "num_iterations": num_iterations,
        "walk_len": d,
        "num_nodes": n,
        "edge_counts_per_iteration": edge_counts,
        "stage_times": stage_times,
        "total_wall_s": time.perf_counter() - t_start,
    }
    return graph, manifest
