"""Training regimes: per-epoch regularized training and continuous-time
renewal subgraph training, plus deterministic evaluation and run records.

Evaluation always runs on the full graph with no stochastic plan, so
val/test curves are deterministic functions of the parameters.  In the
continuous-time regime the model is global: only the propagation support
and the loss support change from step to step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import clocks as clk
from . import engine, regularizers
from .clocks import NodeMask
from .data import DatasetBundle
from .errors import ConfigError, GraphValidationError
from .graph import Graph, MaskedOperator, induce
from .model import GCNModel, OptimizerState, forward, init_model, optimizer_step, predict_logits
from .regularizers import RegularizerConfig, node_rates
from .rng import Rng

CSV_HEADER = "step,t,loss,val_acc,test_acc,active_frac,ms"
CSV_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one training run."""

    reg: RegularizerConfig = field(default_factory=RegularizerConfig)
    regime: str = "epoch"           # "epoch" | "poisson_dynamic"
    epochs: int = 200
    total_time: float = 100.0       # continuous-time horizon
    dt: float = 0.5                 # continuous-time step
    lam: float = 1.0                # clock intensity in the dynamic regime
    eval_every: int = 1
    seed: int = 1
    hidden: int = 16
    lr: float = 0.01
    weight_decay: float = 5e-4
    renormalize_subgraph: bool = False
    clock_persistence: bool = True
    best_val: bool = False
    # when True the ms column is written as 0.0 so output is byte-reproducible
    deterministic_output: bool = True

    def validate(self) -> "RunConfig":
        if self.regime not in ("epoch", "poisson_dynamic"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.regime == "epoch" and self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.regime == "poisson_dynamic":
            if not (self.dt > 0.0):
                raise ConfigError(f"dt must be positive, got {self.dt}")
            if self.total_time < 0.0:
                raise ConfigError(f"total time must be non-negative, got {self.total_time}")
            if not (self.lam > 0.0):
                raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.eval_every <= 0:
            raise ConfigError(f"eval_every must be positive, got {self.eval_every}")
        self.reg.validate()
        return self

    def to_manifest(self) -> dict[str, str]:
        return {
            "train.regime": self.regime,
            "train.epochs": str(self.epochs),
            "train.T": repr(self.total_time),
            "train.dt": repr(self.dt),
            "train.lambda": repr(self.lam),
            "train.clock_persistence": str(self.clock_persistence).lower(),
            "eval.every": str(self.eval_every),
            "seed": str(self.seed),
            "reg.kind": self.reg.kind,
            "reg.p": repr(self.reg.p),
            "reg.lambda": repr(self.reg.lam),
            "reg.t_cut": repr(self.reg.t_cut),
            "reg.rate_mode": self.reg.rate_mode,
            "model.hidden": str(self.hidden),
            "opt.lr": repr(self.lr),
            "opt.weight_decay": repr(self.weight_decay),
            "graph.renormalize_subgraph": str(self.renormalize_subgraph).lower(),
            "report.best_val": str(self.best_val).lower(),
            "output.deterministic": str(self.deterministic_output).lower(),
            "csv.schema_version": str(CSV_SCHEMA_VERSION),
        }

    @staticmethod
    def from_manifest(entries: dict[str, str]) -> "RunConfig":
        reg = RegularizerConfig(
            kind=entries["reg.kind"],
            p=float(entries["reg.p"]),
            lam=float(entries["reg.lambda"]),
            t_cut=float(entries["reg.t_cut"]),
            rate_mode=entries["reg.rate_mode"],
        )
        return RunConfig(
            reg=reg,
            regime=entries["train.regime"],
            epochs=int(entries["train.epochs"]),
            total_time=float(entries["train.T"]),
            dt=float(entries["train.dt"]),
            lam=float(entries["train.lambda"]),
            eval_every=int(entries["eval.every"]),
            seed=int(entries["seed"]),
            hidden=int(entries["model.hidden"]),
            lr=float(entries["opt.lr"]),
            weight_decay=float(entries["opt.weight_decay"]),
            renormalize_subgraph=entries["graph.renormalize_subgraph"] == "true",
            clock_persistence=entries["train.clock_persistence"] == "true",
            best_val=entries["report.best_val"] == "true",
            deterministic_output=entries["output.deterministic"] == "true",
        ).validate()


@dataclass
class RunRow:
    step: int
    t: float
    loss: float
    val_acc: float
    test_acc: float
    active_frac: float
    ms: float

    def to_csv(self) -> str:
        return ",".join([
            str(self.step), repr(self.t), repr(self.loss), repr(self.val_acc),
            repr(self.test_acc), repr(self.active_frac), repr(self.ms),
        ])


@dataclass
class RunRecord:
    rows: list[RunRow] = field(default_factory=list)
    skipped_steps: int = 0

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER, *(r.to_csv() for r in self.rows)]) + "\n"

    @property
    def final(self) -> RunRow:
        if not self.rows:
            raise GraphValidationError("run record is empty")
        return self.rows[-1]

    def best_val_row(self) -> RunRow:
        return max(self.rows, key=lambda r: (r.val_acc, -r.step))

    def mean_active_frac(self) -> float:
        return float(np.mean([r.active_frac for r in self.rows])) if self.rows else 0.0


@dataclass
class TrainResult:
    record: RunRecord
    model: GCNModel
    config: RunConfig


def evaluate(model: GCNModel, g: Graph, mask) -> float:
    """Fraction of masked nodes whose argmax logit hits the label.

    Full-graph deterministic forward; argmax ties break toward the lowest
    class index.  Never mutates the model or any stream.
    """
    values = mask.values if isinstance(mask, NodeMask) else np.asarray(mask, dtype=bool)
    if values.sum() == 0:
        raise GraphValidationError("evaluation mask is empty")
    logits = predict_logits(model, g.normalized, g.features)
    pred = np.argmax(logits[values], axis=1)
    return float(np.mean(pred == g.labels[values]))


def _train_step(model, opt, g, op_eff, x_eff, loss_mask, hidden_drop):
    logits, params = forward(model, op_eff, x_eff, hidden_dropout=hidden_drop)
    loss = engine.masked_cross_entropy(logits, g.labels, loss_mask)
    loss.backward()
    grads = {name: var.grad for name, var in params.items()}
    optimizer_step(model, grads, opt)
    return float(loss.value)


def _loss_mask(g: Graph, plan_mask: NodeMask | None) -> np.ndarray:
    if plan_mask is None:
        return g.train_mask
    return g.train_mask & plan_mask.values


def train_epoch_regime(g: Graph, cfg: RunConfig) -> TrainResult:
    """One optimizer update per epoch under the configured regularizer."""
    cfg.validate()
    root = Rng(cfg.seed)
    model = init_model(g.feature_dim, cfg.hidden, g.num_classes, root.child("init"))
    opt = OptimizerState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    reg_rng = (Rng(cfg.reg.seed) if cfg.reg.seed is not None
               else root.child("reg")).child("plans")
    adj = g.normalized
    record = RunRecord()

    for step in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        plan = regularizers.plan_epoch(cfg.reg, g, step - 1, reg_rng)
        op_eff, x_eff = regularizers.apply(
            plan, adj, g.features, g=g, renormalize=cfg.renormalize_subgraph)
        loss_mask = _loss_mask(g, plan.node_mask)
        if loss_mask.sum() == 0:
            record.skipped_steps += 1
            loss = float("nan")
        else:
            loss = _train_step(model, opt, g, op_eff, x_eff, loss_mask,
                               plan.hidden_dropout(cfg.hidden))
        if step % cfg.eval_every == 0 or step == cfg.epochs:
            ms = 0.0 if cfg.deterministic_output else (time.perf_counter() - started) * 1e3
            record.rows.append(RunRow(
                step=step, t=float(step), loss=loss,
                val_acc=evaluate(model, g, g.val_mask),
                test_acc=evaluate(model, g, g.test_mask),
                active_frac=plan.active_fraction, ms=ms,
            ))
    return TrainResult(record=record, model=model, config=cfg)


def dynamic_step_count(total_time: float, dt: float) -> int:
    return int(math.ceil(total_time / dt - 1e-12)) if total_time > 0 else 0


def train_poisson_dynamic(g: Graph, cfg: RunConfig) -> TrainResult:
    """Renewal-clock subgraph training over a continuous-time horizon.

    Clocks start at fresh exponential ring times; each step takes the
    nodes rung by the current time, updates the model on that induced
    subgraph, advances every rung clock by a fresh draw, then advances
    time by ``dt``.  Steps with no rung nodes (or no rung training nodes)
    skip the update but time and clocks move on.
    """
    cfg.validate()
    root = Rng(cfg.seed)
    model = init_model(g.feature_dim, cfg.hidden, g.num_classes, root.child("init"))
    opt = OptimizerState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    clock_rng = root.child("clocks")
    rates = node_rates(g, replace(cfg.reg, kind="sgnn", lam=cfg.lam, t_cut=1.0))
    state = clk.init_clocks(g.num_nodes, rates, clock_rng)
    adj = g.normalized
    record = RunRecord()
    steps = dynamic_step_count(cfg.total_time, cfg.dt)

    for step in range(1, steps + 1):
        started = time.perf_counter()
        t_now = (step - 1) * cfg.dt
        if cfg.clock_persistence:
            mask = clk.active_set(state, t_now)
        else:
            # fresh draws each step: rung within the step window or not at all
            fresh = clk.init_clocks(g.num_nodes, rates, clock_rng)
            mask = clk.active_set(fresh, cfg.dt)
        loss = float("nan")
        if mask.count == 0:
            record.skipped_steps += 1
        else:
            loss_mask = _loss_mask(g, mask)
            if loss_mask.sum() == 0:
                record.skipped_steps += 1
            else:
                if cfg.renormalize_subgraph:
                    op_eff = induce(g, mask).operator(renormalize=True)
                else:
                    op_eff = MaskedOperator(adj, mask)
                loss = _train_step(model, opt, g, op_eff, g.features,
                                   loss_mask, None)
            if cfg.clock_persistence:
                state = clk.resample_fired(state, mask)
        if step % cfg.eval_every == 0 or step == steps:
            ms = 0.0 if cfg.deterministic_output else (time.perf_counter() - started) * 1e3
            record.rows.append(RunRow(
                step=step, t=t_now, loss=loss,
                val_acc=evaluate(model, g, g.val_mask),
                test_acc=evaluate(model, g, g.test_mask),
                active_frac=mask.fraction, ms=ms,
            ))
    return TrainResult(record=record, model=model, config=cfg)


def train(g: Graph, cfg: RunConfig) -> TrainResult:
    if cfg.regime == "poisson_dynamic":
        return train_poisson_dynamic(g, cfg)
    return train_epoch_regime(g, cfg)


def run_on_bundle(bundle: DatasetBundle, cfg: RunConfig) -> TrainResult:
    return train(bundle.graph, cfg)
