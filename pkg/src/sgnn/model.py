"""Two-layer graph convolution model and the Adam optimizer.

The forward pass is

    h = relu(op(x @ W1) + b1)        # optionally feature-dropped
    logits = op(h @ W2) + b2

where ``op`` is any propagation operator from :mod:`sgnn.graph`.  Rows of
fully masked nodes are zero before the bias is added.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import ConfigError, GraphValidationError, NumericFault
from .rng import Rng


@dataclass
class GCNModel:
    """Parameters of the two-layer network; all float64."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "GCNModel":
        return GCNModel(
            self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy()
        )


def _glorot(rng: Rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_range(-limit, limit, fan_in * fan_out).reshape(fan_in, fan_out)


def init_model(feature_dim: int, hidden: int, num_classes: int, rng: Rng) -> GCNModel:
    """Glorot-uniform weights, zero biases; draws consumed W1 then W2."""
    if hidden < 1:
        raise ConfigError(f"hidden size must be positive, got {hidden}")
    return GCNModel(
        W1=_glorot(rng, feature_dim, hidden),
        b1=np.zeros(hidden),
        W2=_glorot(rng, hidden, num_classes),
        b2=np.zeros(num_classes),
    )


def forward(model: GCNModel, op, x: np.ndarray, hidden_dropout=None):
    """Run the two-layer convolution on the tape.

    ``hidden_dropout`` is an optional (mask, scale) pair applied to the
    post-ReLU activations; the mask is a constant for the tape.  Returns
    (logits Var, dict of parameter Vars) so callers can read gradients
    after ``loss.backward()``.
    """
    if x.shape[1] != model.W1.shape[0]:
        raise GraphValidationError(
            f"features have dim {x.shape[1]} but W1 expects {model.W1.shape[0]}"
        )
    params = {name: engine.param(value) for name, value in model.params().items()}
    xv = engine.Var(x)
    h = engine.propagate(op, engine.matmul(xv, params["W1"]))
    h = engine.relu(engine.add_bias(h, params["b1"]))
    if hidden_dropout is not None:
        mask, scale = hidden_dropout
        h = engine.scale_by(h, mask * scale)
    logits = engine.add_bias(engine.propagate(op, engine.matmul(h, params["W2"])),
                             params["b2"])
    return logits, params


def predict_logits(model: GCNModel, op, x: np.ndarray) -> np.ndarray:
    """Forward pass values only; no tape, no stochastic plan."""
    with np.errstate(over="ignore", invalid="ignore"):
        h = op.apply(x @ model.W1) + model.b1
        np.maximum(h, 0.0, out=h)
        logits = op.apply(h @ model.W2) + model.b2
    if not np.all(np.isfinite(logits)):
        raise NumericFault("non-finite logits in evaluation forward pass")
    return logits


@dataclass
class OptimizerState:
    """Adam accumulators plus the scalar hyperparameters."""

    lr: float = 0.01
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    # L2 decay is applied to these parameters only.
    decay_params: tuple[str, ...] = ("W1",)


def optimizer_step(model: GCNModel, grads: dict[str, np.ndarray],
                   state: OptimizerState) -> None:
    """One Adam update with bias correction, in place on the model."""
    state.step_count += 1
    t = state.step_count
    for name, value in model.params().items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != value.shape:
            raise GraphValidationError(
                f"gradient for {name} has shape {g.shape}, expected {value.shape}"
            )
        if state.weight_decay and name in state.decay_params:
            g = g + state.weight_decay * value
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / (1.0 - state.beta1 ** t)
        v_hat = state.v[name] / (1.0 - state.beta2 ** t)
        value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
