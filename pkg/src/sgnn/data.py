"""Dataset text format, loader/validator, splits, and a synthetic
block-model generator for desk-scale experiments.

A dataset is one UTF-8 text file with five sections::

    #meta       key=value stats; checksum last
    #edges      one "u v" per line, undirected, u < v, sorted
    #features   sparse triplets "node dim value", sorted by (node, dim)
    #labels     "node class", sorted by node
    #masks      "node train|val|test", sorted by node

The serialized form is canonical: saving a loaded bundle reproduces the
file byte for byte.  ``checksum`` is the SHA-256 hex digest of the whole
canonical serialization minus the checksum line itself.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .graph import Graph, build_graph
from .rng import Rng

SCHEMA_VERSION = 1

# meta keys emitted in this fixed order; unknown keys follow alphabetically
_CORE_META = (
    "schema",
    "name",
    "num_nodes",
    "num_edges_undirected",
    "num_classes",
    "feature_dim",
    "self_loops_dropped",
)


@dataclass
class DatasetBundle:
    name: str
    graph: Graph
    meta: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def checksum(self) -> str:
        return self.meta.get("checksum", "")


def _format_value(v: float) -> str:
    return repr(float(v))


def _meta_lines(bundle: DatasetBundle) -> list[str]:
    g = bundle.graph
    meta = dict(bundle.meta)
    meta.update(
        schema=str(SCHEMA_VERSION),
        name=bundle.name,
        num_nodes=str(g.num_nodes),
        num_edges_undirected=str(g.num_undirected_edges),
        num_classes=str(g.num_classes),
        feature_dim=str(g.feature_dim),
        self_loops_dropped=str(g.self_loops_dropped),
    )
    meta.pop("checksum", None)
    lines = [f"{k}={meta.pop(k)}" for k in _CORE_META if k in meta]
    lines += [f"{k}={meta[k]}" for k in sorted(meta)]
    return lines


def canonical_lines(bundle: DatasetBundle) -> list[str]:
    """Full canonical serialization, without the checksum line."""
    g = bundle.graph
    lines = ["#meta", *_meta_lines(bundle), "#edges"]
    lines += [f"{u} {v}" for u, v in g.undirected_edges()]
    lines.append("#features")
    nodes, dims = np.nonzero(g.features)
    values = g.features[nodes, dims]
    lines += [f"{n} {d} {_format_value(x)}" for n, d, x in zip(nodes, dims, values)]
    lines.append("#labels")
    lines += [
        f"{n} {g.labels[n]}" for n in range(g.num_nodes) if g.labels[n] >= 0
    ]
    lines.append("#masks")
    for n in range(g.num_nodes):
        if g.train_mask[n]:
            lines.append(f"{n} train")
        elif g.val_mask[n]:
            lines.append(f"{n} val")
        elif g.test_mask[n]:
            lines.append(f"{n} test")
    return lines


def compute_checksum(bundle: DatasetBundle) -> str:
    body = "\n".join(canonical_lines(bundle)) + "\n"
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def save_dataset(bundle: DatasetBundle, path) -> str:
    """Write the canonical form; returns the embedded checksum."""
    digest = compute_checksum(bundle)
    lines = canonical_lines(bundle)
    meta_end = lines.index("#edges")
    lines.insert(meta_end, f"checksum={digest}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return digest


def load_dataset(path) -> DatasetBundle:
    """Parse, validate, and cross-check a dataset file.

    Raises DataFormatError with the offending line number on parse
    problems, stats mismatches, or checksum mismatches.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc

    section = None
    meta: dict[str, str] = {}
    edges: list[tuple[int, int]] = []
    feats: list[tuple[int, int, float]] = []
    labels: list[tuple[int, int]] = []
    mask_rows: list[tuple[int, str]] = []
    section_starts = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            name = line[1:].strip()
            if name not in ("meta", "edges", "features", "labels", "masks"):
                raise DataFormatError(f"unknown section {line!r}", lineno)
            section = name
            section_starts[name] = lineno
            continue
        if section is None:
            raise DataFormatError("content before any #section header", lineno)
        try:
            if section == "meta":
                key, _, value = line.partition("=")
                if not _:
                    raise ValueError("expected key=value")
                meta[key.strip()] = value.strip()
            elif section == "edges":
                u, v = line.split()
                edges.append((int(u), int(v)))
            elif section == "features":
                n, d, x = line.split()
                feats.append((int(n), int(d), float(x)))
            elif section == "labels":
                n, c = line.split()
                labels.append((int(n), int(c)))
            else:
                n, which = line.split()
                if which not in ("train", "val", "test"):
                    raise ValueError(f"unknown mask kind {which!r}")
                mask_rows.append((int(n), which))
        except ValueError as exc:
            raise DataFormatError(f"cannot parse {section} entry {line!r}: {exc}",
                                  lineno) from exc

    for required in ("meta", "edges", "features", "labels", "masks"):
        if required not in section_starts:
            raise DataFormatError(f"missing #{required} section")
    for key in ("num_nodes", "num_classes", "feature_dim", "num_edges_undirected"):
        if key not in meta:
            raise DataFormatError(f"missing meta key {key!r}", section_starts["meta"])

    num_nodes = int(meta["num_nodes"])
    num_classes = int(meta["num_classes"])
    feature_dim = int(meta["feature_dim"])

    features = np.zeros((num_nodes, feature_dim))
    for n, d, x in feats:
        if not (0 <= n < num_nodes and 0 <= d < feature_dim):
            raise DataFormatError(
                f"feature entry ({n}, {d}) out of range", section_starts["features"])
        features[n, d] = x

    label_arr = np.full(num_nodes, -1, dtype=np.int64)
    for n, c in labels:
        if not 0 <= n < num_nodes:
            raise DataFormatError(f"label for node {n} out of range",
                                  section_starts["labels"])
        label_arr[n] = c

    split: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for n, which in mask_rows:
        split[which].append(n)

    graph = build_graph(
        edges,
        features,
        label_arr,
        (split["train"], split["val"], split["test"]),
        num_classes=num_classes,
    )

    name = meta.get("name", path.stem)
    extra = {k: v for k, v in meta.items() if k not in _CORE_META}
    bundle = DatasetBundle(name=name, graph=graph, meta=extra)

    if graph.num_undirected_edges != int(meta["num_edges_undirected"]):
        raise DataFormatError(
            f"meta says {meta['num_edges_undirected']} undirected edges but the "
            f"file contains {graph.num_undirected_edges}", section_starts["meta"])
    labelled = label_arr[label_arr >= 0]
    if len(labelled) and labelled.max() + 1 > num_classes:
        raise DataFormatError(
            f"labels reach class {labelled.max()} but meta says "
            f"{num_classes} classes", section_starts["meta"])
    if "checksum" in meta:
        actual = compute_checksum(bundle)
        if actual != meta["checksum"]:
            raise DataFormatError(
                f"checksum mismatch: file says {meta['checksum'][:12]}..., "
                f"content hashes to {actual[:12]}...", section_starts["meta"])

    if "isolated_test_nodes" in meta and int(meta["isolated_test_nodes"]) > 0:
        bundle.warnings.append(
            f"{meta['isolated_test_nodes']} test nodes are isolated and carry "
            "zero features (known upstream quirk)")
    isolated = int((graph.degrees() == 0).sum())
    if isolated and "isolated_test_nodes" not in meta:
        bundle.warnings.append(f"{isolated} nodes have no edges")
    return bundle


@dataclass(frozen=True)
class SBMConfig:
    """Planted-partition generator settings; class label = block id."""

    blocks: int = 3
    per_block: int = 100
    intra: float = 0.1
    inter: float = 0.005
    feature_dim: int = 16
    noise: float = 1.0
    seed: int = 42

    def validate(self) -> "SBMConfig":
        if self.blocks < 1 or self.per_block < 1:
            raise ConfigError("blocks and per_block must be positive")
        for p in (self.intra, self.inter):
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"edge probability {p} outside [0, 1]")
        if self.feature_dim < self.blocks:
            raise ConfigError(
                f"feature_dim {self.feature_dim} cannot hold {self.blocks} "
                "block centroids")
        return self


def generate_sbm(cfg: SBMConfig) -> DatasetBundle:
    """Community graph with one-hot block centroids plus Gaussian noise."""
    cfg.validate()
    rng = Rng(cfg.seed)
    n = cfg.blocks * cfg.per_block
    block = np.repeat(np.arange(cfg.blocks), cfg.per_block)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], cfg.intra, cfg.inter)
    keep = rng.child("edges").uniform(len(iu)) <= prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    features = cfg.noise * rng.child("noise").normal(n * cfg.feature_dim)
    features = features.reshape(n, cfg.feature_dim)
    features[np.arange(n), block] += 1.0

    masks = standard_split_indices(
        labels=block,
        num_classes=cfg.blocks,
        per_class_train=20,
        val_count=min(500, (n - 20 * cfg.blocks) // 2),
        rng=rng.child("split"),
    )
    name = f"sbm-{cfg.blocks}x{cfg.per_block}"
    graph = build_graph(edges, features, block, masks, num_classes=cfg.blocks)
    meta = {
        "source": "synthetic",
        "sbm_intra": _format_value(cfg.intra),
        "sbm_inter": _format_value(cfg.inter),
        "sbm_noise": _format_value(cfg.noise),
        "sbm_seed": str(cfg.seed),
    }
    return DatasetBundle(name=name, graph=graph, meta=meta)


def standard_split_indices(labels: np.ndarray, num_classes: int,
                           per_class_train: int, val_count: int, rng: Rng):
    """Planetoid-style split: fixed per-class train, then val, rest test."""
    if per_class_train < 1:
        raise ConfigError(f"per_class_train must be positive, got {per_class_train}")
    n = len(labels)
    order = rng.shuffle(np.arange(n))
    train: list[int] = []
    for c in range(num_classes):
        members = [i for i in order if labels[i] == c]
        if len(members) < per_class_train:
            raise ConfigError(
                f"class {c} has only {len(members)} nodes, "
                f"need {per_class_train} for the train split")
        train.extend(members[:per_class_train])
    taken = set(train)
    rest = [i for i in order if i not in taken]
    if val_count > len(rest):
        raise ConfigError(
            f"val split of {val_count} does not fit the {len(rest)} "
            "remaining nodes")
    val = rest[:val_count]
    test = rest[val_count:]
    return np.array(sorted(train)), np.array(sorted(val)), np.array(sorted(test))


def standard_split(g: Graph, per_class_train: int, val_count: int,
                   seed: int = 0):
    """Masks for a graph without embedded splits; deterministic in seed.

    Bundles loaded from files keep their embedded masks; this operation is
    for generated or maskless data.
    """
    return standard_split_indices(
        g.labels, g.num_classes, per_class_train, val_count, Rng(seed).child("split")
    )


def parse_synthetic_spec(spec: str) -> SBMConfig:
    """Parse "sbm:BxP" strings, e.g. sbm:3x100."""
    if not spec.startswith("sbm:"):
        raise ConfigError(f"unknown synthetic spec {spec!r}; expected sbm:BxP")
    body = spec[4:]
    try:
        blocks, per = body.split("x")
        return SBMConfig(blocks=int(blocks), per_block=int(per))
    except ValueError as exc:
        raise ConfigError(f"cannot parse synthetic spec {spec!r}: {exc}") from exc
