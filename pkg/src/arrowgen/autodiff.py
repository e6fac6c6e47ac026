"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery to train the sequence denoiser and the GCN: a Tensor
wrapping an ndarray, a handful of ops with hand-written VJPs, and a
topological-order backward pass.  Everything is float64.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, value, parents=(), backward=None, requires_grad=True):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def backward(self):
        """Accumulate gradients of this (scalar) tensor into the graph."""
        assert self.value.ndim == 0 or self.value.size == 1, "backward needs a scalar"
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value + b.value

    def bwd(g):
        a.grad += _unbroadcast(g, a.shape)
        b.grad += _unbroadcast(g, b.shape)

    return Tensor(out_val, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value * b.value

    def bwd(g):
        a.grad += _unbroadcast(g * b.value, a.shape)
        b.grad += _unbroadcast(g * a.value, b.shape)

    return Tensor(out_val, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value @ b.value

    def bwd(g):
        a.grad += g @ b.value.swapaxes(-1, -2)
        b.grad += a.value.swapaxes(-1, -2) @ g

    return Tensor(out_val, (a, b), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def bwd(g):
        a.grad += g * mask

    return Tensor(a.value * mask, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    def bwd(g):
        a.grad += g.reshape(a.shape)

    return Tensor(a.value.reshape(shape), (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)

    def bwd(g):
        a.grad += g.transpose(inv)

    return Tensor(a.value.transpose(axes), (a,), bwd)


def sum_axis(a: Tensor, axis: int) -> Tensor:
    def bwd(g):
        a.grad += np.expand_dims(g, axis)

    return Tensor(a.value.sum(axis=axis), (a,), bwd)


def gather_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """out[...] = table[idx[...]]; scatter-add on the way back."""
    idx = np.asarray(idx)

    def bwd(g):
        np.add.at(table.grad, idx, g)

    return Tensor(table.value[idx], (table,), bwd)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate (B, L, C) tensors along the channel axis."""
    ca = a.shape[2]

    def bwd(g):
        a.grad += g[:, :, :ca]
        b.grad += g[:, :, ca:]

    return Tensor(np.concatenate([a.value, b.value], axis=2), (a, b), bwd)


def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """1-D convolution, same zero padding, as K shifted matmuls.

    x: (B, L, C_in); w: (K, C_in, C_out); b: (C_out,).  Output length is
    ceil(L / stride).
    """
    bsz, length, c_in = x.shape
    k, c2, c_out = w.shape
    assert c_in == c2, "channel mismatch"
    pad = k // 2
    xp = np.zeros((bsz, length + 2 * pad, c_in))
    xp[:, pad : pad + length] = x.value
    l_out = (length + stride - 1) // stride
    span = (l_out - 1) * stride + 1
    out = np.tile(b.value, (bsz, l_out, 1))
    for kk in range(k):
        out += xp[:, kk : kk + span : stride] @ w.value[kk]

    def bwd(g):
        b.grad += g.sum(axis=(0, 1))
        g2 = g.reshape(bsz * l_out, c_out)
        dxp = np.zeros_like(xp)
        for kk in range(k):
            seg = xp[:, kk : kk + span : stride]
            w.grad[kk] += seg.reshape(bsz * l_out, c_in).T @ g2
            dxp[:, kk : kk + span : stride] += g @ w.value[kk].T
        x.grad += dxp[:, pad : pad + length]

    return Tensor(out, (x, w, b), bwd)


def upsample2(x: Tensor) -> Tensor:
    """Nearest-neighbor doubling along the length axis of (B, L, C)."""

    def bwd(g):
        x.grad += g[:, 0::2] + g[:, 1::2]

    return Tensor(np.repeat(x.value, 2, axis=1), (x,), bwd)


def spmm(a_csr, x: Tensor) -> Tensor:
    """Sparse (constant) @ dense (trainable): out = A x, dX = A^T g."""
    at = a_csr.T.tocsr()

    def bwd(g):
        x.grad += at @ g

    return Tensor(a_csr @ x.value, (x,), bwd)


def cross_entropy(logits: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
    """Weighted categorical NLL: sum_i w_i * (logsumexp(l_i) - l_i[y_i])."""
    z = logits.value
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=1, keepdims=True)
    log_probs = z - zmax - np.log(sez)
    rows = np.arange(len(targets))
    loss = -(weights * log_probs[rows, targets]).sum()

    def bwd(g):
        soft = ez / sez
        soft[rows, targets] -= 1.0
        logits.grad += g * weights[:, None] * soft

    return Tensor(loss, (logits,), bwd)


def bce_with_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy on logits (numerically stable)."""
    s = logits.value
    y = np.asarray(labels, dtype=np.float64)
    n = s.size
    loss = (np.maximum(s, 0) - s * y + np.log1p(np.exp(-np.abs(s)))).sum() / n

    def bwd(g):
        sig = 1.0 / (1.0 + np.exp(-s))
        logits.grad += g * (sig - y) / n

    return Tensor(loss, (logits,), bwd)
