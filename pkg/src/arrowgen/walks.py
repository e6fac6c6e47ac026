"""Uniform random-walk sampling on CSR graphs.

Batch sampling derives an independent Philox substream per walk from
(seed, walk index), so results are deterministic given the seed and the
order of the start nodes, no matter how the batch is scheduled.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph


def sample_walk(g: Graph, start: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Walk of length d from `start`; each step uniform over neighbors."""
    if d < 2:
        raise ValueError("walk length must be at least 2")
    offsets, nbrs = g.row_offsets, g.neighbors
    if offsets[start + 1] == offsets[start]:
        raise ValueError(f"start node {start} has degree 0")
    walk = np.empty(d, dtype=np.int64)
    walk[0] = start
    u = rng.random(d - 1)
    cur = start
    for k in range(1, d):
        lo, hi = offsets[cur], offsets[cur + 1]
        cur = int(nbrs[lo + int(u[k - 1] * (hi - lo))])
        walk[k] = cur
    return walk


def walk_rng(seed: int, index: int) -> np.random.Generator:
    """Per-walk substream keyed by (seed, index)."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) << np.uint64(20) | np.uint64(index)))


def sample_walk_batch(
    g: Graph, starts: np.ndarray, d: int, seed: int
) -> tuple[list[np.ndarray], list[int]]:
    """One walk per start node.

    Returns (walks, skipped) where `skipped` lists the indices of starts with
    degree 0, which produce no walk.
    """
    degs = g.degrees()
    walks: list[np.ndarray] = []
    skipped: list[int] = []
    for i, s in enumerate(starts):
        s = int(s)
        if degs[s] == 0:
            skipped.append(i)
            continue
        walks.append(sample_walk(g, s, d, walk_rng(seed, i)))
    return walks, skipped
