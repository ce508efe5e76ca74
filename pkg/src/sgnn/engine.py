"""Reverse-mode differentiation tape over float64 numpy arrays.

Only the operations the two-layer graph convolution needs are provided:
dense matmul, propagation through a (constant, self-adjoint) sparse
operator, ReLU, broadcast bias addition, elementwise scaling by a constant
mask, and a fused masked softmax cross-entropy.  Every operation checks
its output for non-finite values and raises :class:`NumericFault` on the
first one, so faults surface at the op that produced them.
"""

from __future__ import annotations

import numpy as np

from .clocks import NodeMask
from .errors import GraphValidationError, NumericFault


def _finite(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericFault(f"non-finite value produced by {op}")
    return value


class _quiet(np.errstate):
    """Overflow inside an op is reported through NumericFault, not a warning."""

    def __init__(self):
        super().__init__(over="ignore", invalid="ignore")


class Var:
    """A tape node: value, accumulated gradient, and parent pullbacks."""

    __slots__ = ("value", "grad", "_parents")

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents

    @property
    def shape(self):
        return self.value.shape

    def backward(self) -> None:
        """Reverse sweep seeding this (scalar) variable's gradient with 1."""
        if self.value.size != 1:
            raise GraphValidationError("backward() must start from a scalar")
        order: list[Var] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.grad is None:
                continue
            for parent, pullback in node._parents:
                contribution = pullback(node.grad)
                if parent.grad is None:
                    parent.grad = contribution
                else:
                    parent.grad = parent.grad + contribution


def param(value: np.ndarray) -> Var:
    return Var(value)


def matmul(a: Var, b: Var) -> Var:
    if a.value.shape[1] != b.value.shape[0]:
        raise GraphValidationError(
            f"matmul shapes {a.value.shape} and {b.value.shape} do not align"
        )
    with _quiet():
        value = a.value @ b.value
    out = Var(_finite(value, "matmul"), parents=(
        (a, lambda g, b=b: g @ b.value.T),
        (b, lambda g, a=a: a.value.T @ g),
    ))
    return out


def propagate(op, x: Var) -> Var:
    """Apply a constant self-adjoint sparse operator; pullback reuses it."""
    with _quiet():
        value = op.apply(x.value)
    out = Var(_finite(value, "propagate"), parents=(
        (x, lambda g, op=op: op.apply(g)),
    ))
    return out


def relu(x: Var) -> Var:
    keep = x.value > 0.0
    out = Var(np.where(keep, x.value, 0.0), parents=(
        (x, lambda g, keep=keep: g * keep),
    ))
    return out


def add_bias(x: Var, b: Var) -> Var:
    if x.value.shape[1] != b.value.shape[0]:
        raise GraphValidationError(
            f"bias of length {b.value.shape[0]} does not fit {x.value.shape}"
        )
    with _quiet():
        value = x.value + b.value
    out = Var(_finite(value, "add_bias"), parents=(
        (x, lambda g: g),
        (b, lambda g: g.sum(axis=0)),
    ))
    return out


def scale_by(x: Var, factor: np.ndarray) -> Var:
    """Elementwise product with a constant (mask or rescale) array."""
    with _quiet():
        value = x.value * factor
    out = Var(_finite(value, "scale_by"), parents=(
        (x, lambda g, factor=factor: g * factor),
    ))
    return out


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-stable softmax; rows sum to 1 within float64 rounding."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def masked_cross_entropy(logits: Var, labels: np.ndarray, mask) -> Var:
    """Mean negative log softmax probability of the label over masked rows.

    Raises GraphValidationError on an empty mask: the caller decides
    whether that means a skipped step or a bug.
    """
    values = mask.values if isinstance(mask, NodeMask) else np.asarray(mask, dtype=bool)
    if len(values) != logits.value.shape[0]:
        raise GraphValidationError(
            f"loss mask length {len(values)} does not match {logits.value.shape[0]} rows"
        )
    idx = np.flatnonzero(values)
    if len(idx) == 0:
        raise GraphValidationError("loss mask is empty")
    rows = logits.value[idx]
    shifted = rows - rows.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(idx)), labels[idx]]
    loss = float((logsumexp - picked).mean())

    def pullback(g, idx=idx, rows=rows, labels=labels):
        probs = softmax_rows(rows)
        probs[np.arange(len(idx)), labels[idx]] -= 1.0
        full = np.zeros_like(logits.value)
        full[idx] = probs / len(idx)
        return g * full

    return Var(_finite(np.float64(loss), "masked_cross_entropy"),
               parents=((logits, pullback),))
