"""Sparse directed weighted graphs, edge-list I/O and cross-validation folds."""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

_SPLIT = re.compile(r"[,\s]+")


class EdgeListError(ValueError):
    """Raised for malformed or empty edge-list input."""


@dataclass(frozen=True)
class DirectedGraph:
    """Immutable weighted directed graph without self-loops.

    Edges are stored as three aligned arrays sorted by ``(src, dst)``.
    ``A[i, j]`` and ``A[j, i]`` lookups go through a hash index.
    """

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    node_labels: tuple[str, ...] | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.node_labels is not None and len(self.node_labels) != self.n_nodes:
            raise ValueError("node_labels must have one entry per node")
        keys = self.src * self.n_nodes + self.dst
        object.__setattr__(self, "_index", dict(zip(keys.tolist(), self.weight.tolist())))

    @classmethod
    def from_arrays(cls, n_nodes: int, src, dst, weight=None, node_labels=None) -> "DirectedGraph":
        """Build a graph from (possibly unsorted, duplicated) edge arrays.

        Duplicate ordered pairs are summed, zero weights and self-loops dropped.
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if weight is None:
            weight = np.ones(len(src), dtype=np.int64)
        weight = np.asarray(weight)
        if weight.dtype.kind == "f":
            if not np.all(weight == np.round(weight)):
                raise ValueError("edge weights must be integers")
        weight = weight.astype(np.int64)
        if np.any(weight < 0):
            raise ValueError("edge weights must be nonnegative")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n_nodes):
            raise ValueError("node index out of range")
        keep = (src != dst) & (weight > 0)
        src, dst, weight = src[keep], dst[keep], weight[keep]
        keys = src * n_nodes + dst
        uniq, inverse = np.unique(keys, return_inverse=True)
        summed = np.bincount(inverse, weights=weight, minlength=len(uniq)).astype(np.int64)
        labels = tuple(node_labels) if node_labels is not None else None
        return cls(int(n_nodes), uniq // n_nodes, uniq % n_nodes, summed, labels)

    @classmethod
    def from_dense(cls, A, node_labels=None) -> "DirectedGraph":
        A = np.asarray(A)
        src, dst = np.nonzero(A)
        return cls.from_arrays(A.shape[0], src, dst, A[src, dst], node_labels)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def total_weight(self) -> int:
        return int(self.weight.sum())

    def labels(self) -> tuple[str, ...]:
        if self.node_labels is not None:
            return self.node_labels
        return tuple(str(i) for i in range(self.n_nodes))

    def get(self, i: int, j: int) -> int:
        """Return ``A[i, j]`` (0 when absent)."""
        return self._index.get(i * self.n_nodes + j, 0)

    def lookup(self, i, j) -> np.ndarray:
        """Vectorized ``A[i, j]`` for index arrays."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        keys = self.src * self.n_nodes + self.dst
        q = i * self.n_nodes + j
        if len(keys) == 0:
            return np.zeros(q.shape, dtype=np.int64)
        pos = np.minimum(np.searchsorted(keys, q), len(keys) - 1)
        hit = keys[pos] == q
        return np.where(hit, self.weight[pos], 0)

    def reverse_weights(self) -> np.ndarray:
        """``A[j, i]`` for every stored edge ``(i, j)``, aligned with ``self.src``."""
        return self.lookup(self.dst, self.src)

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        A[self.src, self.dst] = self.weight
        return A

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.weight, (self.src, self.dst)), shape=(self.n_nodes, self.n_nodes)
        )

    def out_strength(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.weight, minlength=self.n_nodes)

    def in_strength(self) -> np.ndarray:
        return np.bincount(self.dst, weights=self.weight, minlength=self.n_nodes)


@dataclass(frozen=True)
class DegreeSummary:
    total_weight: int
    avg_degree: float
    n_edges: int


def degree_stats(g: DirectedGraph) -> DegreeSummary:
    M = g.total_weight
    avg = M / g.n_nodes if g.n_nodes else 0.0
    return DegreeSummary(total_weight=M, avg_degree=avg, n_edges=g.n_edges)


def _parse_records(lines: Iterable[str]):
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = _SPLIT.split(line)
        if len(fields) not in (2, 3):
            raise EdgeListError(f"line {lineno}: expected 2 or 3 fields, got {len(fields)}")
        weight = 1
        if len(fields) == 3:
            try:
                weight = int(fields[2])
            except ValueError:
                raise EdgeListError(
                    f"line {lineno}: weight {fields[2]!r} is not an integer"
                ) from None
            if weight <= 0:
                raise EdgeListError(f"line {lineno}: weight must be positive, got {weight}")
        yield lineno, fields[0], fields[1], weight


def load_edge_list(source: IO | str | bytes) -> DirectedGraph:
    """Read a ``src dst [weight]`` edge list.

    ``source`` may be a text or binary stream, or the raw contents. Fields are
    separated by whitespace or commas; ``#`` starts a comment line. Nodes are
    indexed densely in first-seen order and duplicate records are summed.
    Self-loop records are dropped.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    index: dict[str, int] = {}
    src, dst, wts = [], [], []
    n_loops = 0
    for _, a, b, weight in _parse_records(io.StringIO(text)):
        if a == b:
            n_loops += 1
            continue
        for lab in (a, b):
            if lab not in index:
                index[lab] = len(index)
        src.append(index[a])
        dst.append(index[b])
        wts.append(weight)
    if n_loops:
        logger.warning("dropped %d self-loop record(s)", n_loops)
    if not src:
        raise EdgeListError("edge list contains no edges")
    return DirectedGraph.from_arrays(len(index), src, dst, wts, node_labels=list(index))


def read_edge_list(path) -> DirectedGraph:
    with open(path, "rb") as fh:
        return load_edge_list(fh)


def dump_edge_list(g: DirectedGraph) -> str:
    labels = g.labels()
    lines = [
        f"{labels[i]} {labels[j]} {w}"
        for i, j, w in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist())
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_edge_list(g: DirectedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_edge_list(g))


def restrict_to_core(g: DirectedGraph) -> DirectedGraph:
    """Keep nodes with both in- and out-edges, then the largest weakly connected component.

    Dataset preparation step; not applied unless asked for.
    """
    keep = np.arange(g.n_nodes)
    sub = g
    while True:
        ok = (sub.out_strength() > 0) & (sub.in_strength() > 0)
        _, comp = connected_components(sub.to_sparse(), directed=True, connection="weak")
        if ok.any():
            sizes = np.bincount(comp[ok])
            ok &= comp == np.argmax(sizes)
        if ok.all():
            return sub
        if not ok.any():
            raise EdgeListError("no nodes survive core restriction")
        keep = keep[ok]
        sub = _induced(g, keep)


def _induced(g: DirectedGraph, nodes: np.ndarray) -> DirectedGraph:
    remap = -np.ones(g.n_nodes, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    sel = (remap[g.src] >= 0) & (remap[g.dst] >= 0)
    labels = g.labels()
    return DirectedGraph.from_arrays(
        len(nodes), remap[g.src[sel]], remap[g.dst[sel]], g.weight[sel],
        node_labels=[labels[i] for i in nodes],
    )


@dataclass(frozen=True)
class FoldMask:
    """Assignment of every ordered non-diagonal pair to one of ``fold_count`` folds.

    ``assignment`` is an ``N x N`` integer array holding the fold index of
    ``(i, j)``; the diagonal holds ``-1``.
    """

    fold_count: int
    assignment: np.ndarray
    seed: int = 0

    def test_pairs(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.assignment == fold)

    def support(self, folds: Sequence[int]) -> np.ndarray:
        """Boolean ``N x N`` matrix selecting the pairs of the given folds."""
        return np.isin(self.assignment, list(folds))

    def train_support(self, test_fold: int) -> np.ndarray:
        return (self.assignment >= 0) & (self.assignment != test_fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment[self.assignment >= 0], minlength=self.fold_count)


def make_folds(g: DirectedGraph | int, fold_count: int = 5, seed: int = 0) -> FoldMask:
    """Randomly split all ``N (N - 1)`` ordered pairs into near-equal folds."""
    N = g if isinstance(g, (int, np.integer)) else g.n_nodes
    if fold_count < 2:
        raise ValueError("fold_count must be at least 2")
    if N < 2:
        raise ValueError("need at least 2 nodes")
    n_pairs = N * (N - 1)
    if fold_count > n_pairs:
        raise ValueError(f"fold_count={fold_count} exceeds the {n_pairs} ordered pairs")
    rng = np.random.default_rng(seed)
    off = ~np.eye(N, dtype=bool)
    order = rng.permutation(n_pairs)
    folds = np.empty(n_pairs, dtype=np.int16)
    folds[order] = np.arange(n_pairs) % fold_count
    assignment = np.full((N, N), -1, dtype=np.int16)
    assignment[off] = folds
    return FoldMask(fold_count=fold_count, assignment=assignment, seed=seed)
