"""Order-agnostic autoregressive diffusion over fixed-length node sequences.

The forward process masks positions with an absorbing token (id = num_nodes);
training draws one (t, sigma) per walk and scores the masked positions.
Conditional sampling keeps the first position fixed and denoises the rest in
the order given by a permutation that fixes position 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def mask_token(num_nodes: int) -> int:
    return num_nodes


@dataclass(frozen=True)
class MaskedWalk:
    tokens: np.ndarray  # length D over {0..N-1} plus the absorbing id N
    t: int  # timestep in 1..D
    sigma: np.ndarray  # permutation ranks, values 1..D; sigma[k] is position k's rank
    mask: np.ndarray  # bool; True where the original token is visible


def sample_t_sigma(d: int, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """t uniform on 1..d, sigma uniform over all d! rank assignments."""
    if d < 1:
        raise ValueError("d must be >= 1")
    t = int(rng.integers(1, d + 1))
    sigma = rng.permutation(d) + 1
    return t, sigma


def sample_sigma_fixed_first(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform over permutations with sigma[0] = 1 (position 1 decoded first)."""
    sigma = np.empty(d, dtype=np.int64)
    sigma[0] = 1
    sigma[1:] = rng.permutation(d - 1) + 2
    return sigma


def apply_mask(walk: np.ndarray, sigma: np.ndarray, t: int, num_nodes: int) -> MaskedWalk:
    """Mask every position whose rank is >= t with the absorbing token."""
    d = len(walk)
    if not (1 <= t <= d):
        raise ValueError("t out of range")
    mask = sigma < t
    tokens = np.where(mask, walk, mask_token(num_nodes))
    return MaskedWalk(tokens=tokens, t=t, sigma=np.asarray(sigma), mask=mask)


def elbo_loss(walk: np.ndarray, masked: MaskedWalk, logits: np.ndarray) -> float:
    """Negative per-walk likelihood bound contribution.

    loss = D / (D - t + 1) * sum over masked positions of NLL of the true
    node under softmax(logits[k]).
    """
    if not np.isfinite(logits).all():
        raise ValueError("non-finite logits")
    d = len(walk)
    hidden = ~masked.mask
    z = logits[hidden]
    zmax = z.max(axis=1, keepdims=True)
    log_probs = z - zmax - np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))
    nll = -log_probs[np.arange(len(z)), walk[hidden]].sum()
    return float(d / (d - masked.t + 1) * nll)


def enumerate_expected_loss(
    walk: np.ndarray, num_nodes: int, logits_fn: Callable[[np.ndarray, int], np.ndarray]
) -> float:
    """Exact expectation of elbo_loss over all (t, sigma): enumeration oracle.

    Only feasible for tiny D; used to validate the Monte-Carlo estimate.
    """
    from itertools import permutations

    d = len(walk)
    total = 0.0
    count = 0
    for perm in permutations(range(1, d + 1)):
        sigma = np.array(perm)
        for t in range(1, d + 1):
            masked = apply_mask(walk, sigma, t, num_nodes)
            total += elbo_loss(walk, masked, logits_fn(masked.tokens, t))
            count += 1
    return total / count


def sample_walk_conditioned(
    f: Callable[[np.ndarray, int], np.ndarray],
    start: int,
    d: int,
    num_nodes: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Denoise [start, MASK, ..., MASK] in a random order fixing position 1.

    f(tokens, t) must return a (d, num_nodes) logit matrix.
    """
    sigma = sample_sigma_fixed_first(d, rng)
    tokens = np.full(d, mask_token(num_nodes), dtype=np.int64)
    tokens[0] = start
    pos_of_rank = np.argsort(sigma)  # pos_of_rank[r-1] has rank r
    for t in range(2, d + 1):
        k = int(pos_of_rank[t - 1])
        logits = f(tokens, t)[k]
        tokens[k] = _sample_categorical(logits, rng)
    return tokens


def sample_walk_conditioned_batch(
    f_rows: Callable[[np.ndarray, int, np.ndarray], np.ndarray],
    starts: np.ndarray,
    d: int,
    num_nodes: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Batched conditional sampling; all walks advance t = 2..d in lockstep.

    f_rows(tokens, t, positions) must return logits of shape (B, num_nodes)
    for the single position being denoised in each walk.
    """
    b = len(starts)
    tokens = np.full((b, d), mask_token(num_nodes), dtype=np.int64)
    tokens[:, 0] = starts
    sigmas = np.stack([sample_sigma_fixed_first(d, rng) for _ in range(b)])
    pos_of_rank = np.argsort(sigmas, axis=1)
    for t in range(2, d + 1):
        ks = pos_of_rank[:, t - 1]
        logits = f_rows(tokens, t, ks)  # (B, num_nodes)
        # Gumbel-max: one categorical draw per row without normalizing
        gumbel = -np.log(-np.log(rng.random(logits.shape)))
        tokens[np.arange(b), ks] = np.argmax(logits + gumbel, axis=1)
    return tokens


def _sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> int:
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))
