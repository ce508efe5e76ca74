"""Per-node exponential clocks and renewal resampling.

Each node carries an independent clock whose next ring time is an
exponential draw at that node's rate.  The active set at time ``t`` is the
set of nodes whose ring time has been reached.  Advancing a rung clock by a
fresh exponential draw makes each node's ring sequence a renewal process,
so ring counts over a horizon are Poisson distributed and merging clocks
adds their rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GraphValidationError
from .rng import Rng


class NodeMask:
    """Boolean per-node indicator with a cached active count."""

    __slots__ = ("values", "_count")

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=bool)
        self.values = values
        self._count = int(values.sum())

    @property
    def count(self) -> int:
        return self._count

    def __len__(self) -> int:
        return len(self.values)

    @property
    def fraction(self) -> float:
        return self._count / len(self.values) if len(self.values) else 0.0

    @classmethod
    def full(cls, n: int) -> "NodeMask":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> "NodeMask":
        return cls(np.zeros(n, dtype=bool))


@dataclass
class ClockState:
    """Next ring time and rate per node, plus the stream that feeds draws.

    ``next_event`` and ``rate`` are float64 arrays of equal length; all
    rates are strictly positive and all times finite and non-negative.
    """

    next_event: np.ndarray
    rate: np.ndarray
    rng: Rng

    @property
    def num_nodes(self) -> int:
        return len(self.next_event)


def _check_rates(rates: np.ndarray) -> np.ndarray:
    rates = np.asarray(rates, dtype=np.float64)
    if rates.ndim != 1:
        raise ConfigError("rates must be a 1-d array")
    if not np.all(np.isfinite(rates)) or np.any(rates <= 0.0):
        bad = int(np.argmin(np.where(np.isfinite(rates), rates, -np.inf)))
        raise ConfigError(f"rate for node {bad} is not strictly positive")
    return rates


def sample_exponential(rate: float, rng: Rng, size: int | None = None):
    """Exponential draw(s) at ``rate`` via the inverse CDF.

    Draws are ``-ln(U)/rate`` with U on (0, 1); they are strictly positive
    and bounded by ``53 ln 2 / rate``.
    """
    if not (rate > 0.0) or not np.isfinite(rate):
        raise ConfigError(f"rate must be strictly positive, got {rate}")
    out = rng.exponential(rate, 1 if size is None else size)
    return float(out[0]) if size is None else out


def init_clocks(num_nodes: int, rates: float | np.ndarray, seed_or_rng) -> ClockState:
    """Fresh clocks: ``next_event[v] ~ Exp(rate[v])`` drawn in node order."""
    if num_nodes < 0:
        raise ConfigError("num_nodes must be non-negative")
    if np.isscalar(rates):
        rates = np.full(num_nodes, float(rates))
    rates = _check_rates(rates)
    if len(rates) != num_nodes:
        raise ConfigError(f"expected {num_nodes} rates, got {len(rates)}")
    rng = seed_or_rng if isinstance(seed_or_rng, Rng) else Rng(int(seed_or_rng))
    next_event = rng.exponential(rates, num_nodes) if num_nodes else np.zeros(0)
    return ClockState(next_event=next_event, rate=rates, rng=rng)


def active_set(clocks: ClockState, t: float) -> NodeMask:
    """Nodes whose ring time has been reached by ``t``; pure read."""
    if t < 0.0:
        raise ConfigError(f"time must be non-negative, got {t}")
    return NodeMask(clocks.next_event <= t)


def resample_fired(clocks: ClockState, mask: NodeMask) -> ClockState:
    """Advance each masked node's clock by a fresh exponential draw.

    Draws are consumed in node-index order over the masked nodes only, so
    the stream position after the call depends on the mask — callers must
    serialize resampling.  Unmasked nodes are untouched.
    """
    values = mask.values if isinstance(mask, NodeMask) else np.asarray(mask, dtype=bool)
    if len(values) != clocks.num_nodes:
        raise GraphValidationError(
            f"mask length {len(values)} does not match {clocks.num_nodes} clocks"
        )
    next_event = clocks.next_event.copy()
    k = int(values.sum())
    if k:
        next_event[values] += clocks.rng.exponential(clocks.rate[values], k)
    return ClockState(next_event=next_event, rate=clocks.rate, rng=clocks.rng)


def merged_event_count(clocks: ClockState, horizon: float) -> int:
    """Total rings across all clocks up to ``horizon``, resampling as they fire.

    Starting from freshly initialized clocks this is one draw from a
    Poisson distribution with mean ``sum(rate) * horizon``.  Diagnostic
    operation; mutates the state's stream like repeated resampling would.
    """
    if not horizon > 0.0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    times = clocks.next_event.copy()
    total = 0
    pending = times <= horizon
    while pending.any():
        total += int(pending.sum())
        times[pending] += clocks.rng.exponential(clocks.rate[pending], int(pending.sum()))
        pending = times <= horizon
    return total
