"""Training-time stochastic schemes: dropout, edge drop, node drop, and
clock-based node selection.

All four produce a :class:`StochasticPlan` for one epoch.  A plan turns
into an (effective operator, effective features) pair via :func:`apply`;
at inference no plan is used and evaluation is deterministic.

The clock-based scheme draws a fresh exponential ring time per node each
epoch and keeps the nodes that ring before the cutoff, so the expected
active fraction is ``1 - exp(-lambda * t_cut)``.  Surviving activations
are not rescaled; dropped training nodes are instead excluded from the
loss.  With uniform rates and ``p = exp(-lambda * t_cut)`` the scheme is
distributionally identical to node drop; per-degree rates are where the
two part ways.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import clocks as clk
from .clocks import NodeMask
from .errors import ConfigError, GraphValidationError
from .graph import (
    EdgeMaskedOperator,
    Graph,
    MaskedOperator,
    NormalizedAdjacency,
    induce,
)
from .rng import Rng

KINDS = ("none", "dropout", "drop_edge", "drop_node", "sgnn")
RATE_MODES = ("uniform", "degree")


@dataclass(frozen=True)
class RegularizerConfig:
    """Which scheme runs during training and with what parameters."""

    kind: str = "none"
    p: float = 0.5
    lam: float = 1.0
    t_cut: float = 1.0
    rate_mode: str = "uniform"
    seed: int | None = None

    def validate(self) -> "RegularizerConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown regularizer kind {self.kind!r}")
        if self.kind in ("dropout", "drop_edge", "drop_node"):
            if not (0.0 <= self.p < 1.0):
                raise ConfigError(f"drop probability must be in [0, 1), got {self.p}")
        if self.kind == "sgnn":
            if not (self.lam > 0.0):
                raise ConfigError(f"lambda must be positive, got {self.lam}")
            if not (self.t_cut > 0.0):
                raise ConfigError(f"t_cut must be positive, got {self.t_cut}")
            if self.rate_mode not in RATE_MODES:
                raise ConfigError(f"unknown rate_mode {self.rate_mode!r}")
        return self


@dataclass
class StochasticPlan:
    """One epoch's sampled masks; identity when every field is None."""

    kind: str
    epoch: int
    feature_mask: np.ndarray | None = None
    feature_scale: float = 1.0
    edge_keep: np.ndarray | None = None
    node_mask: NodeMask | None = None
    _hidden_rng: Rng | None = None
    _hidden_cache: dict | None = None

    @property
    def is_identity(self) -> bool:
        return (self.feature_mask is None and self.edge_keep is None
                and self.node_mask is None)

    @property
    def active_fraction(self) -> float:
        """Fraction of nodes participating this epoch (1.0 unless nodes drop)."""
        return self.node_mask.fraction if self.node_mask is not None else 1.0

    def hidden_dropout(self, dim: int):
        """Dropout mask for the hidden activations, drawn lazily.

        The mask shape is (num feature rows, dim), so it is materialized
        once the hidden width is known; repeated calls return the same
        draw.
        """
        if self.kind != "dropout" or self.feature_mask is None:
            return None
        if self._hidden_cache is None:
            n = self.feature_mask.shape[0]
            u = self._hidden_rng.uniform(n * dim).reshape(n, dim)
            keep_prob = 1.0 / self.feature_scale
            mask = (u <= keep_prob).astype(np.float64)
            self._hidden_cache = {"mask": mask, "scale": self.feature_scale}
        return self._hidden_cache["mask"], self._hidden_cache["scale"]


def node_rates(g: Graph, cfg: RegularizerConfig) -> np.ndarray:
    """Per-node clock rates: uniform, or scaled by (deg+1)/mean(deg+1)."""
    if cfg.rate_mode == "uniform":
        return np.full(g.num_nodes, cfg.lam)
    weights = g.degrees() + 1.0
    return cfg.lam * weights / weights.mean()


def plan_epoch(cfg: RegularizerConfig, g: Graph, epoch: int, rng: Rng) -> StochasticPlan:
    """Sample one epoch's plan; pure given the stream state."""
    cfg.validate()
    n = g.num_nodes
    if cfg.kind == "none" or (cfg.kind == "dropout" and cfg.p == 0.0):
        return StochasticPlan(kind=cfg.kind, epoch=epoch)

    if cfg.kind == "dropout":
        keep_prob = 1.0 - cfg.p
        u = rng.uniform(n * g.feature_dim).reshape(n, g.feature_dim)
        mask = (u <= keep_prob).astype(np.float64)
        return StochasticPlan(
            kind="dropout",
            epoch=epoch,
            feature_mask=mask,
            feature_scale=1.0 / keep_prob,
            _hidden_rng=rng.child(f"hidden-{epoch}"),
        )

    if cfg.kind == "drop_edge":
        m = g.num_undirected_edges
        keep = rng.uniform(m) <= (1.0 - cfg.p) if m else np.zeros(0, dtype=bool)
        return StochasticPlan(kind="drop_edge", epoch=epoch, edge_keep=keep)

    if cfg.kind == "drop_node":
        keep = rng.uniform(n) <= (1.0 - cfg.p)
        return StochasticPlan(kind="drop_node", epoch=epoch, node_mask=NodeMask(keep))

    # clock-based selection: fresh ring times, active iff rung by the cutoff
    state = clk.init_clocks(n, node_rates(g, cfg), rng)
    mask = clk.active_set(state, cfg.t_cut)
    return StochasticPlan(kind="sgnn", epoch=epoch, node_mask=mask)


def _edge_masked_operator(g: Graph, adj: NormalizedAdjacency,
                          keep: np.ndarray) -> EdgeMaskedOperator:
    """Zero both directions of dropped edges in the normalized operator.

    The diagonal (self-loop) entries always survive, and symmetry is
    preserved because each undirected edge is kept or dropped as a unit.
    """
    edges = g.undirected_edges()
    kept = edges[keep]
    n = g.num_nodes
    rows = np.concatenate([kept[:, 0], kept[:, 1], np.arange(n)])
    cols = np.concatenate([kept[:, 1], kept[:, 0], np.arange(n)])
    pattern = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    masked = adj.matrix.multiply(pattern).tocsr()
    masked.sort_indices()
    return EdgeMaskedOperator(masked)


def apply(plan: StochasticPlan, adj: NormalizedAdjacency, x: np.ndarray,
          g: Graph | None = None, renormalize: bool = False):
    """Turn a plan into the (operator, features) pair the forward pass uses.

    Identity plans return their inputs by value unchanged.  Node plans
    mask the operator so a forward pass equals one on the explicitly
    induced subgraph; edge plans zero the dropped entries of the operator.
    """
    if x.shape[0] != adj.shape[0]:
        raise GraphValidationError(
            f"features have {x.shape[0]} rows but operator is {adj.shape}"
        )
    if plan.is_identity:
        return adj, x

    if plan.kind == "dropout":
        return adj, x * plan.feature_mask * plan.feature_scale

    if plan.kind == "drop_edge":
        if g is None:
            raise ConfigError("edge plans need the graph to locate edges")
        return _edge_masked_operator(g, adj, plan.edge_keep), x

    # node-dropping plans (drop_node / sgnn)
    if g is not None and renormalize:
        return induce(g, plan.node_mask).operator(renormalize=True), x
    return MaskedOperator(adj, plan.node_mask), x
