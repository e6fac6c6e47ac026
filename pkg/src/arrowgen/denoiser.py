"""Trainable sequence denoiser f(tokens, t) -> per-position logits.

Backbone: learned token/time/position embeddings feeding a small 1-D
convolutional U-Net (two levels, stride-2 down/upsampling, one residual
block of two kernel-3 convolutions per level, skip connection by channel
concatenation), then a 1x1 projection to the node classes.  Gradients come
from the package's reverse-mode tape; optimization is plain Adam.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graph import Graph
from .walks import sample_walk_batch
from .diffusion import sample_t_sigma

MASK_OFFSET = 1  # token table has one extra row for the absorbing state


@dataclass
class DenoiserConfig:
    walk_len: int = 16
    embed_dim: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    steps: int = 20000
    time_budget_s: float | None = None
    seed: int = 0
    log_every: int = 50


@dataclass
class DenoiserParams:
    num_nodes: int
    walk_len: int
    embed_dim: int
    tensors: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        for name, t in self.tensors.items():
            self.adam_m.setdefault(name, np.zeros_like(t))
            self.adam_v.setdefault(name, np.zeros_like(t))


def init_denoiser(
    num_nodes: int, walk_len: int, embed_dim: int = 64, seed: int = 0
) -> DenoiserParams:
    if walk_len % 2 != 0 or walk_len < 4:
        raise ValueError("walk_len must be even and >= 4")
    rng = np.random.default_rng(seed)
    c = embed_dim

    def conv_w(in_ch, out_ch, k=3):
        bound = 1.0 / np.sqrt(in_ch * k)
        return rng.uniform(-bound, bound, size=(k, in_ch, out_ch))

    def proj_w(rows, cols):
        bound = 1.0 / np.sqrt(rows)
        return rng.uniform(-bound, bound, size=(rows, cols))

    tensors = {
        "tok_emb": rng.normal(0.0, 0.02, size=(num_nodes + MASK_OFFSET, c)),
        "time_emb": rng.normal(0.0, 0.02, size=(walk_len, c)),
        "pos_emb": rng.normal(0.0, 0.02, size=(walk_len, c)),
        "conv1a_w": conv_w(c, c), "conv1a_b": np.zeros(c),
        "conv1b_w": conv_w(c, c), "conv1b_b": np.zeros(c),
        "down_w": conv_w(c, c), "down_b": np.zeros(c),
        "conv2a_w": conv_w(c, c), "conv2a_b": np.zeros(c),
        "conv2b_w": conv_w(c, c), "conv2b_b": np.zeros(c),
        "up_w": conv_w(c, c), "up_b": np.zeros(c),
        "merge_w": conv_w(2 * c, c), "merge_b": np.zeros(c),
        "out_w": proj_w(c, num_nodes),
        "out_b": np.zeros(num_nodes),
    }
    return DenoiserParams(num_nodes, walk_len, c, tensors)


def _as_tensors(params: DenoiserParams) -> dict[str, ad.Tensor]:
    return {k: ad.Tensor(v) for k, v in params.tensors.items()}


def _hidden(p: dict[str, ad.Tensor], tokens: np.ndarray, ts: np.ndarray) -> ad.Tensor:
    """Shared trunk: (B, D) token ids + per-walk timesteps -> (B, D, C)."""
    tok = ad.gather_rows(p["tok_emb"], tokens)  # (B, D, C)
    tim = ad.reshape(ad.gather_rows(p["time_emb"], ts - 1), (len(ts), 1, -1))
    x = ad.add(ad.add(tok, tim), p["pos_emb"])

    h = ad.relu(ad.conv1d(x, p["conv1a_w"], p["conv1a_b"]))
    h = ad.conv1d(h, p["conv1b_w"], p["conv1b_b"])
    e1 = ad.relu(ad.add(x, h))

    d1 = ad.relu(ad.conv1d(e1, p["down_w"], p["down_b"], stride=2))
    h = ad.relu(ad.conv1d(d1, p["conv2a_w"], p["conv2a_b"]))
    h = ad.conv1d(h, p["conv2b_w"], p["conv2b_b"])
    e2 = ad.relu(ad.add(d1, h))

    u1 = ad.relu(ad.conv1d(ad.upsample2(e2), p["up_w"], p["up_b"]))
    merged = ad.relu(ad.conv1d(ad.concat_channels(u1, e1), p["merge_w"], p["merge_b"]))
    return merged  # (B, D, C)


def _check_tokens(params: DenoiserParams, tokens: np.ndarray):
    if tokens.min() < 0 or tokens.max() > params.num_nodes:
        raise ValueError("token id out of range (alphabet is 0..N with MASK = N)")


def forward(params: DenoiserParams, tokens: np.ndarray, t: int) -> np.ndarray:
    """Full (D, N) logit matrix for a single masked walk."""
    tokens = np.asarray(tokens, dtype=np.int64)
    _check_tokens(params, tokens)
    if not (1 <= t <= params.walk_len):
        raise ValueError("t out of range")
    p = _as_tensors(params)
    hid = _hidden(p, tokens[None, :], np.array([t]))
    logits = hid.value[0] @ params.tensors["out_w"] + params.tensors["out_b"]
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite logits")
    return logits


def forward_rows(
    params: DenoiserParams, tokens: np.ndarray, t: int, positions: np.ndarray
) -> np.ndarray:
    """Logits (B, N) for one position per walk; used by conditional sampling."""
    _check_tokens(params, tokens)
    p = _as_tensors(params)
    hid = _hidden(p, tokens, np.full(len(tokens), t)).value
    rows = hid[np.arange(len(tokens)), positions]
    return rows @ params.tensors["out_w"] + params.tensors["out_b"]


def batch_loss_and_grads(
    params: DenoiserParams,
    walks: np.ndarray,
    tokens: np.ndarray,
    ts: np.ndarray,
    masks: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean masked-position loss over a batch plus gradients for every tensor.

    walks/tokens/masks: (B, D); ts: (B,).  Only the masked rows are projected
    to the N classes, which keeps the output layer cost proportional to the
    number of scored positions.
    """
    b, d = walks.shape
    p = _as_tensors(params)
    hid = _hidden(p, tokens, ts)  # (B, D, C)
    flat = ad.reshape(hid, (b * d, -1))
    walk_idx, pos_idx = np.nonzero(~masks)
    rows = ad.gather_rows(flat, walk_idx * d + pos_idx)
    logits = ad.add(ad.matmul(rows, p["out_w"]), p["out_b"])
    targets = walks[walk_idx, pos_idx]
    weights = (d / (d - ts[walk_idx] + 1)) / b
    loss = ad.cross_entropy(logits, targets, weights)
    loss.backward()
    grads = {k: p[k].grad for k in params.tensors}
    return float(loss.value), grads


def backward(
    params: DenoiserParams,
    tokens: np.ndarray,
    t: int,
    walk: np.ndarray,
    mask: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradient of the single-walk loss w.r.t. every parameter tensor."""
    _, grads = batch_loss_and_grads(
        params,
        np.asarray(walk)[None, :],
        np.asarray(tokens)[None, :],
        np.array([t]),
        np.asarray(mask)[None, :],
    )
    return grads


def adam_step(
    params: DenoiserParams,
    grads: dict[str, np.ndarray],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> DenoiserParams:
    """Standard Adam update with bias correction; mutates and returns params."""
    params.step += 1
    t = params.step
    for name, theta in params.tensors.items():
        g = grads[name]
        m = params.adam_m[name]
        v = params.adam_v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


def train_denoiser(
    g_train: Graph, config: DenoiserConfig
) -> tuple[DenoiserParams, list[tuple[int, float, float]]]:
    """Optimize the denoiser on walks drawn fresh from the training graph.

    Returns the trained parameters and a (step, loss, wall_ms) log.
    """
    n = g_train.num_nodes
    d = config.walk_len
    params = init_denoiser(n, d, config.embed_dim, seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)
    eligible = np.nonzero(g_train.degrees() > 0)[0]
    if len(eligible) == 0:
        raise ValueError("training graph has no edges")
    log: list[tuple[int, float, float]] = []
    t0 = time.perf_counter()
    for step in range(1, config.steps + 1):
        starts = rng.choice(eligible, size=config.batch_size)
        walks_list, _ = sample_walk_batch(g_train, starts, d, seed=config.seed * 1_000_003 + step)
        walks = np.stack(walks_list)
        ts = np.empty(len(walks), dtype=np.int64)
        masks = np.empty_like(walks, dtype=bool)
        tokens = np.empty_like(walks)
        for i, w in enumerate(walks):
            t, sigma = sample_t_sigma(d, rng)
            ts[i] = t
            masks[i] = sigma < t
            tokens[i] = np.where(masks[i], w, n)
        loss, grads = batch_loss_and_grads(params, walks, tokens, ts, masks)
        adam_step(params, grads, config.lr, config.beta1, config.beta2, config.eps)
        wall_ms = (time.perf_counter() - t0) * 1e3
        if step % config.log_every == 0 or step == 1 or step == config.steps:
            log.append((step, loss, wall_ms))
        if config.time_budget_s is not None and wall_ms / 1e3 > config.time_budget_s:
            log.append((step, loss, wall_ms))
            break
    return params, log
