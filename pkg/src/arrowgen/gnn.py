"""Two-layer GCN edge classifier.

Embeddings come from Z = A_hat ReLU(A_hat X W1) W2 with the symmetric
normalized self-looped adjacency; an edge (u, v) scores sigmoid(z_u . z_v).
Training minimizes binary cross-entropy on perturbed copies of the training
graph and early-stops on a validation loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .graph import EdgeSplit, Graph, perturb_graph, sample_non_edges


@dataclass
class GcnConfig:
    hidden_dim: int = 100
    out_dim: int = 10
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 2000
    eval_every: int = 20
    patience: int = 10
    delete_frac: float = 0.1
    fake_frac: float = 1.0
    seed: int = 0


@dataclass
class GcnParams:
    in_dim: int
    hidden_dim: int
    out_dim: int
    tensors: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        for name, t in self.tensors.items():
            self.adam_m.setdefault(name, np.zeros_like(t))
            self.adam_v.setdefault(name, np.zeros_like(t))


def init_gcn(in_dim: int, hidden_dim: int = 100, out_dim: int = 10, seed: int = 0) -> GcnParams:
    rng = np.random.default_rng(seed)

    def glorot(rows, cols):
        bound = 1.0 / np.sqrt(rows)
        return rng.uniform(-bound, bound, size=(rows, cols))

    tensors = {"W1": glorot(in_dim, hidden_dim), "W2": glorot(hidden_dim, out_dim)}
    return GcnParams(in_dim, hidden_dim, out_dim, tensors)


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """A_hat = D~^{-1/2} (A + I) D~^{-1/2}."""
    n = g.num_nodes
    edges = g.edge_array()
    a = sp.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)
    ) + sp.eye(n)
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d_half = sp.diags(inv_sqrt)
    return (d_half @ a @ d_half).tocsr()


def normalized_adjacency_from_edges(num_nodes: int, edges: np.ndarray) -> sp.csr_matrix:
    return normalized_adjacency(Graph.from_edges(num_nodes, edges, undirected=True))


def _embed(a_hat: sp.csr_matrix, x: ad.Tensor, p: dict[str, ad.Tensor]) -> ad.Tensor:
    h = ad.relu(ad.matmul(ad.spmm(a_hat, x), p["W1"]))
    return ad.matmul(ad.spmm(a_hat, h), p["W2"])


def gcn_forward(g: Graph, x: np.ndarray, params: GcnParams) -> np.ndarray:
    """Node embeddings Z of shape (N, out_dim)."""
    if x.shape[0] != g.num_nodes:
        raise ValueError("feature row count must equal num_nodes")
    if x.shape[1] != params.in_dim:
        raise ValueError("feature width does not match W1")
    a_hat = normalized_adjacency(g)
    p = {k: ad.Tensor(v) for k, v in params.tensors.items()}
    z = _embed(a_hat, ad.Tensor(x, requires_grad=False), p).value
    if not np.isfinite(z).all():
        raise FloatingPointError("non-finite embeddings")
    return z


def edge_probability(z: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """sigmoid(z_u . z_v) for every (u, v) row of `edges`."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    dots = np.einsum("ij,ij->i", z[edges[:, 0]], z[edges[:, 1]])
    return 1.0 / (1.0 + np.exp(-dots))


def _edge_logit_loss(
    a_hat: sp.csr_matrix,
    x: np.ndarray,
    p: dict[str, ad.Tensor],
    edges: np.ndarray,
    labels: np.ndarray,
) -> ad.Tensor:
    z = _embed(a_hat, ad.Tensor(x, requires_grad=False), p)
    zu = ad.gather_rows(z, edges[:, 0])
    zv = ad.gather_rows(z, edges[:, 1])
    logits = ad.sum_axis(ad.mul(zu, zv), axis=1)
    return ad.bce_with_logits(logits, labels)


def bce_loss_and_grads(
    params: GcnParams,
    graph: Graph,
    x: np.ndarray,
    edges: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    a_hat = normalized_adjacency(graph)
    p = {k: ad.Tensor(v) for k, v in params.tensors.items()}
    loss = _edge_logit_loss(a_hat, x, p, edges, labels)
    loss.backward()
    return float(loss.value), {k: p[k].grad for k in params.tensors}


def _adam(params: GcnParams, grads: dict[str, np.ndarray], cfg: GcnConfig):
    params.step += 1
    t = params.step
    for name, theta in params.tensors.items():
        g = grads[name]
        m, v = params.adam_m[name], params.adam_v[name]
        m *= cfg.beta1
        m += (1 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1 - cfg.beta2) * g * g
        theta -= cfg.lr * (m / (1 - cfg.beta1**t)) / (
            np.sqrt(v / (1 - cfg.beta2**t)) + cfg.eps
        )


def validation_loss(
    params: GcnParams,
    train_graph: Graph,
    x: np.ndarray,
    val_edges: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """BCE on val edges (label 1) plus as many freshly sampled non-edges."""
    negs = sample_non_edges(train_graph, len(val_edges), rng)
    edges = np.concatenate([val_edges, negs])
    labels = np.concatenate([np.ones(len(val_edges)), np.zeros(len(negs))])
    z = gcn_forward(train_graph, x, params)
    p = np.clip(edge_probability(z, edges), 1e-12, 1 - 1e-12)
    return float(-(labels * np.log(p) + (1 - labels) * np.log(1 - p)).mean())


def train_gnn(
    split: EdgeSplit, x: np.ndarray, config: GcnConfig
) -> tuple[GcnParams, list[tuple[int, float, float | None]]]:
    """Train on fresh perturbed graphs; keep the best-validation parameters.

    Returns the best parameters and a (step, train_loss, val_loss) log where
    val_loss is None on non-evaluation steps.
    """
    train_graph = split.train_graph()
    params = init_gcn(x.shape[1], config.hidden_dim, config.out_dim, seed=config.seed)
    rng = np.random.default_rng(config.seed + 7)
    best = {k: v.copy() for k, v in params.tensors.items()}
    best_val = np.inf
    bad_evals = 0
    log: list[tuple[int, float, float | None]] = []
    for step in range(1, config.steps + 1):
        pg = perturb_graph(
            train_graph,
            config.delete_frac,
            config.fake_frac,
            seed=int(rng.integers(2**63)),
        )
        loss, grads = bce_loss_and_grads(params, pg.graph, x, pg.edges, pg.labels)
        _adam(params, grads, config)
        val = None
        if step % config.eval_every == 0 and len(split.val_edges):
            val = validation_loss(params, train_graph, x, split.val_edges, rng)
            if val < best_val:
                best_val = val
                best = {k: v.copy() for k, v in params.tensors.items()}
                bad_evals = 0
            else:
                bad_evals += 1
            if bad_evals >= config.patience:
                log.append((step, loss, val))
                break
        log.append((step, loss, val))
    if best_val < np.inf:
        params.tensors.update(best)
    return params, log
