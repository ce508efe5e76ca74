"""Timing harness for the clock kernels.

Measures one init + active-set + resample cycle at a range of node counts
and fits the scaling exponent of a log-log least-squares line.  The
kernels are vectorized elementwise passes, so the fitted exponent should
sit close to 1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import clocks as clk
from .rng import Rng


@dataclass
class BenchPoint:
    size: int
    seconds: float          # best-of-repeats for one full cycle
    per_node_ns: float


@dataclass
class BenchReport:
    points: list[BenchPoint]
    exponent: float

    def to_csv(self) -> str:
        lines = ["size,seconds,per_node_ns"]
        lines += [f"{p.size},{p.seconds!r},{p.per_node_ns!r}" for p in self.points]
        return "\n".join(lines) + "\n"


def _one_cycle(n: int, lam: float, seed: int) -> float:
    rng = Rng(seed)
    start = time.perf_counter()
    state = clk.init_clocks(n, lam, rng)
    mask = clk.active_set(state, 1.0 / lam)
    clk.resample_fired(state, mask)
    return time.perf_counter() - start


def run_bench(sizes, lam: float = 1.0, repeats: int = 3, seed: int = 1) -> BenchReport:
    points = []
    for n in sizes:
        if n == 0:
            points.append(BenchPoint(size=0, seconds=0.0, per_node_ns=0.0))
            continue
        best = min(_one_cycle(int(n), lam, seed + r) for r in range(repeats))
        points.append(BenchPoint(
            size=int(n), seconds=best, per_node_ns=best / n * 1e9))
    timed = [p for p in points if p.size > 0]
    if len(timed) >= 2:
        xs = np.log([p.size for p in timed])
        ys = np.log([max(p.seconds, 1e-12) for p in timed])
        exponent = float(np.polyfit(xs, ys, 1)[0])
    else:
        exponent = float("nan")
    return BenchReport(points=points, exponent=exponent)
