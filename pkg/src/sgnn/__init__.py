"""Poisson-clock stochastic training engine for graph node classification."""

from .clocks import ClockState, NodeMask, active_set, init_clocks, merged_event_count, resample_fired, sample_exponential
from .data import DatasetBundle, SBMConfig, generate_sbm, load_dataset, save_dataset, standard_split
from .errors import ConfigError, DataFormatError, GraphValidationError, NumericFault, SgnnError
from .graph import Graph, NormalizedAdjacency, SubgraphView, build_graph, induce, normalize, spmm
from .model import GCNModel, OptimizerState, init_model, optimizer_step
from .regularizers import RegularizerConfig, StochasticPlan, plan_epoch
from .rng import Rng
from .trainer import RunConfig, RunRecord, TrainResult, evaluate, train, train_epoch_regime, train_poisson_dynamic

__version__ = "0.1.0"

__all__ = [
    "ClockState", "NodeMask", "active_set", "init_clocks",
    "merged_event_count", "resample_fired", "sample_exponential",
    "DatasetBundle", "SBMConfig", "generate_sbm", "load_dataset",
    "save_dataset", "standard_split",
    "ConfigError", "DataFormatError", "GraphValidationError", "NumericFault",
    "SgnnError",
    "Graph", "NormalizedAdjacency", "SubgraphView", "build_graph", "induce",
    "normalize", "spmm",
    "GCNModel", "OptimizerState", "init_model", "optimizer_step",
    "RegularizerConfig", "StochasticPlan", "plan_epoch",
    "Rng",
    "RunConfig", "RunRecord", "TrainResult", "evaluate", "train",
    "train_epoch_regime", "train_poisson_dynamic",
    "__version__",
]
