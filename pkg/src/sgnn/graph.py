"""Immutable sparse graph storage and the normalized propagation operator.

The adjacency is undirected, self-loop free, and stored in compressed row
form with both directions of every edge present.  The propagation operator
is the symmetric normalization with self-loops,

    A_hat = D^{-1/2} (A + I) D^{-1/2},  D = degree matrix of A + I,

so every stored entry (u, v) equals 1/sqrt((deg(u)+1)(deg(v)+1)) and the
diagonal of an isolated node is exactly 1.

Subgraph semantics are mask-as-multiply: inactive nodes keep their index
but their rows and columns (self-loop included) are zeroed in the
operator, so they emit and receive nothing.  Degrees are not recomputed on
the induced subgraph unless explicitly requested.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .clocks import NodeMask
from .errors import GraphValidationError


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _freeze_csr(mat: sp.csr_matrix) -> sp.csr_matrix:
    for part in (mat.data, mat.indices, mat.indptr):
        part.flags.writeable = False
    return mat


class Graph:
    """Validated citation-style graph: adjacency, features, labels, splits.

    Instances are immutable after construction; build through
    :func:`build_graph` rather than directly.
    """

    def __init__(
        self,
        adjacency: sp.csr_matrix,
        features: np.ndarray,
        labels: np.ndarray,
        train_mask: np.ndarray,
        val_mask: np.ndarray,
        test_mask: np.ndarray,
        num_classes: int,
        self_loops_dropped: int = 0,
    ):
        self.adjacency = _freeze_csr(adjacency)
        self.features = _freeze(features)
        self.labels = _freeze(labels)
        self.train_mask = _freeze(train_mask)
        self.val_mask = _freeze(val_mask)
        self.test_mask = _freeze(test_mask)
        self.num_classes = num_classes
        self.self_loops_dropped = self_loops_dropped

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_undirected_edges(self) -> int:
        return self.adjacency.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def undirected_edges(self) -> np.ndarray:
        """Edges as an (m, 2) array with u < v, sorted lexicographically."""
        coo = self.adjacency.tocoo()
        keep = coo.row < coo.col
        edges = np.stack([coo.row[keep], coo.col[keep]], axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    @cached_property
    def normalized(self) -> "NormalizedAdjacency":
        return normalize(self)


class NormalizedAdjacency:
    """Symmetric GCN operator ``D^{-1/2}(A+I)D^{-1/2}`` in compressed row form."""

    def __init__(self, matrix: sp.csr_matrix):
        self.matrix = _freeze_csr(matrix)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.matrix.shape[1] != x.shape[0]:
            raise GraphValidationError(
                f"operator is {self.matrix.shape} but input has {x.shape[0]} rows"
            )
        return self.matrix @ x


class MaskedOperator:
    """Node-masked propagation: ``diag(m) · A_hat · diag(m)`` applied lazily.

    Application is ``m * (A_hat @ (m * x))`` which never materializes a new
    matrix; with a full mask it is bitwise identical to the unmasked
    operator.  Self-adjoint because A_hat is symmetric and the two mask
    multiplications are symmetric.
    """

    def __init__(self, base: NormalizedAdjacency, mask: NodeMask):
        if len(mask.values) != base.shape[0]:
            raise GraphValidationError(
                f"mask length {len(mask.values)} does not match operator {base.shape}"
            )
        self.base = base
        self.mask = mask
        self._column = mask.values.astype(np.float64)[:, None]

    @property
    def shape(self):
        return self.base.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self._column * self.base.apply(self._column * x)


class EdgeMaskedOperator:
    """Propagation through an explicitly re-sparsified operator matrix."""

    def __init__(self, matrix: sp.csr_matrix):
        self.matrix = _freeze_csr(matrix)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.matrix.shape[1] != x.shape[0]:
            raise GraphValidationError(
                f"operator is {self.matrix.shape} but input has {x.shape[0]} rows"
            )
        return self.matrix @ x


class SubgraphView:
    """A node mask over a parent graph plus the induced edge set it implies.

    The induced adjacency keeps node identities (no reindexing): it is the
    parent adjacency with rows and columns of inactive nodes removed from
    the stored structure.
    """

    def __init__(self, graph: Graph, mask: NodeMask):
        if len(mask.values) != graph.num_nodes:
            raise GraphValidationError(
                f"mask length {len(mask.values)} does not match {graph.num_nodes} nodes"
            )
        self.graph = graph
        self.mask = mask

    @cached_property
    def induced_adjacency(self) -> sp.csr_matrix:
        coo = self.graph.adjacency.tocoo()
        keep = self.mask.values[coo.row] & self.mask.values[coo.col]
        out = sp.csr_matrix(
            (coo.data[keep], (coo.row[keep], coo.col[keep])),
            shape=self.graph.adjacency.shape,
        )
        out.sort_indices()
        return out

    @property
    def num_induced_edges(self) -> int:
        return self.induced_adjacency.nnz // 2

    def operator(self, renormalize: bool = False):
        """Propagation operator restricted to the active nodes.

        Default keeps the parent graph's normalization and just masks it;
        ``renormalize=True`` rebuilds degrees from the induced edge set.
        """
        if not renormalize:
            return MaskedOperator(self.graph.normalized, self.mask)
        active = self.mask.values.astype(np.float64)
        a_plus_i = self.induced_adjacency + sp.diags(active, format="csr")
        deg = np.asarray(a_plus_i.sum(axis=1)).ravel()
        with np.errstate(divide="ignore"):
            dinv = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
        mat = sp.diags(dinv) @ a_plus_i @ sp.diags(dinv)
        mat = sp.csr_matrix(mat)
        mat.sort_indices()
        return EdgeMaskedOperator(mat)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.operator().apply(x)

    @property
    def shape(self):
        return self.graph.adjacency.shape


def build_graph(
    edges,
    features: np.ndarray,
    labels: np.ndarray,
    masks,
    num_classes: int | None = None,
) -> Graph:
    """Validate, symmetrize, and deduplicate raw inputs into a Graph.

    ``edges`` is any iterable of (u, v) pairs; directions and duplicates
    collapse to one undirected edge, self-loops are dropped and counted on
    the result.  ``masks`` is the (train, val, test) triple of boolean
    arrays or index lists.
    """
    features = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    if features.ndim != 2:
        raise GraphValidationError("features must be a 2-d matrix")
    num_nodes = features.shape[0]

    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (num_nodes,):
        raise GraphValidationError(
            f"expected {num_nodes} labels, got shape {labels.shape}"
        )

    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if len(edges):
        bad = (edges < 0) | (edges >= num_nodes)
        if bad.any():
            u, v = edges[np.argmax(bad.any(axis=1))]
            raise GraphValidationError(
                f"edge ({u}, {v}) references a node outside [0, {num_nodes})"
            )

    self_loops = int((edges[:, 0] == edges[:, 1]).sum()) if len(edges) else 0
    edges = edges[edges[:, 0] != edges[:, 1]] if len(edges) else edges
    if len(edges):
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        undirected = np.unique(np.stack([lo, hi], axis=1), axis=0)
        rows = np.concatenate([undirected[:, 0], undirected[:, 1]])
        cols = np.concatenate([undirected[:, 1], undirected[:, 0]])
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
    adjacency = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(num_nodes, num_nodes)
    )
    adjacency.sort_indices()

    mask_arrays = []
    for name, raw in zip(("train", "val", "test"), masks):
        raw = np.asarray(raw)
        if raw.dtype == bool:
            if raw.shape != (num_nodes,):
                raise GraphValidationError(
                    f"{name} mask has length {len(raw)}, expected {num_nodes}"
                )
            mask_arrays.append(raw.copy())
        else:
            idx = raw.astype(np.int64)
            if len(idx) and (idx.min() < 0 or idx.max() >= num_nodes):
                bad = idx[(idx < 0) | (idx >= num_nodes)][0]
                raise GraphValidationError(
                    f"{name} mask references node {bad} outside [0, {num_nodes})"
                )
            out = np.zeros(num_nodes, dtype=bool)
            out[idx] = True
            mask_arrays.append(out)
    train, val, test = mask_arrays
    overlap = (train & val) | (train & test) | (val & test)
    if overlap.any():
        node = int(np.argmax(overlap))
        raise GraphValidationError(f"node {node} appears in more than one split mask")

    masked = train | val | test
    if num_classes is None:
        covered = labels[masked] if masked.any() else labels
        num_classes = int(covered.max()) + 1 if len(covered) else 0
    bad_label = masked & ((labels < 0) | (labels >= num_classes))
    if bad_label.any():
        node = int(np.argmax(bad_label))
        raise GraphValidationError(
            f"node {node} is masked but its label {labels[node]} is outside "
            f"[0, {num_classes})"
        )

    return Graph(
        adjacency=adjacency,
        features=features,
        labels=labels,
        train_mask=train,
        val_mask=val,
        test_mask=test,
        num_classes=num_classes,
        self_loops_dropped=self_loops,
    )


def normalize(g: Graph) -> NormalizedAdjacency:
    """Build the symmetric self-loop normalization of the adjacency."""
    n = g.num_nodes
    a_plus_i = g.adjacency + sp.identity(n, format="csr")
    deg = np.asarray(a_plus_i.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    coo = a_plus_i.tocoo()
    data = dinv[coo.row] * coo.data * dinv[coo.col]
    out = sp.csr_matrix((data, (coo.row, coo.col)), shape=(n, n))
    out.sort_indices()
    return NormalizedAdjacency(out)


def induce(g: Graph, mask) -> SubgraphView:
    """Subgraph on the masked nodes; keeps only edges with both ends active."""
    if not isinstance(mask, NodeMask):
        mask = NodeMask(mask)
    return SubgraphView(g, mask)


def spmm(adj, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product through any propagation operator.

    Accepts a NormalizedAdjacency, a SubgraphView (mask-as-multiply), or
    any object exposing ``apply``.
    """
    x = np.asarray(x, dtype=np.float64)
    return adj.apply(x)
