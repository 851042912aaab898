"""Typed heterogeneous graphs and meta-path adjacency.

A graph is built from plain node/edge tuples and frozen once; everything
downstream works on the frozen form. Edges are undirected and parallel edges
collapse into one edge with an integer multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import (
    DanglingEdge,
    DuplicateNodeId,
    GraphFormatError,
    MetaPathTooLong,
    TypeMismatch,
    UnknownType,
    WrongStartType,
)

MAX_META_PATH_LEN = 5


class Interner:
    """Bijective name <-> dense id table, ids assigned in first-seen order."""

    def __init__(self, names: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        for n in names:
            self.intern(n)

    def intern(self, name: str) -> int:
        if name not in self._ids:
            self._ids[name] = len(self._names)
            self._names.append(name)
        return self._ids[name]

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownType(name) from None

    def name(self, i: int) -> str:
        return self._names[i]

    def __contains__(self, name) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)


@dataclass(frozen=True)
class Node:
    node_id: int
    type_name: str
    label: str | None = None
    display_name: str | None = None


class HeterogeneousGraph:
    """Frozen typed graph. Build with :func:`freeze_graph`."""

    def __init__(self, nodes: list[Node], edges: dict[tuple[int, int, str], int],
                 schema: dict[str, frozenset]):
        self._nodes = nodes
        self._edges = edges  # (min_id, max_id, edge type) -> multiplicity
        self.schema = schema  # edge type -> frozenset of endpoint node types
        self.node_types = Interner(sorted({n.type_name for n in nodes}))
        self.edge_types = Interner(sorted(schema))
        labels = sorted({n.label for n in nodes if n.label is not None})
        self.labels = Interner(labels)
        self._type_of = np.array([self.node_types.id(n.type_name) for n in nodes], dtype=np.int64)
        self._csr: dict[tuple[str, str | None], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._build_index()

    def _build_index(self):
        n = len(self._nodes)
        per_type: dict[str, list[tuple[int, int, int]]] = {t: [] for t in self.schema}
        for (u, v, t), m in self._edges.items():
            per_type[t].append((u, v, m))
            if u != v:
                per_type[t].append((v, u, m))
        self._adj = {}
        for t, trip in per_type.items():
            trip.sort()
            src = np.array([a for a, _, _ in trip], dtype=np.int64)
            dst = np.array([b for _, b, _ in trip], dtype=np.int64)
            w = np.array([m for _, _, m in trip], dtype=np.int64)
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            self._adj[t] = (np.cumsum(indptr), dst, w)

    # -- basic accessors -------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(self._nodes)

    def node(self, i: int) -> Node:
        return self._nodes[i]

    def edges(self) -> list[tuple[int, int, str, int]]:
        """Collapsed edges as ``(u, v, type, multiplicity)`` with ``u <= v``, sorted."""
        return sorted((u, v, t, m) for (u, v, t), m in self._edges.items())

    def type_of(self, i: int) -> str:
        return self._nodes[i].type_name

    def nodes_of_type(self, type_name: str) -> np.ndarray:
        tid = self.node_types.id(type_name)
        return np.flatnonzero(self._type_of == tid)

    def label_id(self, i: int) -> int | None:
        lab = self._nodes[i].label
        return None if lab is None else self.labels.id(lab)

    def neighbors(self, i: int, edge_type: str) -> list[tuple[int, int]]:
        """``(neighbor, multiplicity)`` pairs of ``i`` under one edge type."""
        if edge_type not in self._adj:
            raise UnknownType(edge_type)
        indptr, dst, w = self._adj[edge_type]
        return [(int(dst[k]), int(w[k])) for k in range(indptr[i], indptr[i + 1])]

    def degree(self, i: int, edge_type: str | None = None) -> int:
        """Number of distinct neighbors (all edge types when ``edge_type`` is None)."""
        types = [edge_type] if edge_type is not None else list(self._adj)
        total = 0
        for t in types:
            indptr = self._adj[t][0]
            total += int(indptr[i + 1] - indptr[i])
        return total

    def step_csr(self, edge_type: str, dst_type: str):
        """CSR for one hop: edges of ``edge_type`` whose far end has ``dst_type``."""
        key = (edge_type, dst_type)
        if key not in self._csr:
            indptr, dst, w = self._adj[edge_type]
            keep = self._type_of[dst] == self.node_types.id(dst_type)
            counts = np.zeros(self.n_nodes + 1, dtype=np.int64)
            src = np.repeat(np.arange(self.n_nodes), np.diff(indptr))
            np.add.at(counts, src[keep] + 1, 1)
            self._csr[key] = (np.cumsum(counts), dst[keep].copy(), w[keep].copy())
        return self._csr[key]

    def edge_types_between(self, a: str, b: str) -> list[str]:
        want = frozenset((a, b))
        return sorted(t for t, ends in self.schema.items() if ends == want)

    # -- equality / raw export -------------------------------------------
    def raw(self):
        nodes = [(n.node_id, n.type_name, n.label, n.display_name) for n in self._nodes]
        edges = []
        for u, v, t, m in self.edges():
            edges.extend([(u, v, t)] * m)
        return nodes, edges

    def __eq__(self, other):
        if not isinstance(other, HeterogeneousGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __repr__(self):
        return f"HeterogeneousGraph(n_nodes={self.n_nodes}, n_edges={len(self._edges)})"


def freeze_graph(nodes, edges=(), schema: dict[str, Sequence[str]] | None = None) -> HeterogeneousGraph:
    """Validate raw node/edge lists and return an immutable graph.

    ``nodes`` holds tuples ``(node_id, type_name[, label[, display_name]])``
    (or :class:`Node`); ``edges`` holds ``(src, dst, edge_type)``. When
    ``schema`` is given it maps each edge type to its two endpoint node types;
    otherwise the first edge of each type fixes its endpoint types. Passing a
    frozen graph returns it unchanged.
    """
    if isinstance(nodes, HeterogeneousGraph):
        return nodes
    by_id: dict[int, Node] = {}
    for raw in nodes:
        node = raw if isinstance(raw, Node) else Node(*raw)
        node = Node(int(node.node_id), node.type_name,
                    node.label if node.label not in ("",) else None,
                    node.display_name if node.display_name not in ("",) else None)
        if node.node_id in by_id:
            raise DuplicateNodeId(node.node_id)
        by_id[node.node_id] = node
    n = len(by_id)
    if sorted(by_id) != list(range(n)):
        missing = sorted(set(range(n)) - set(by_id))
        raise GraphFormatError(f"node ids must be dense 0..{n - 1}; missing {missing[:5]}")
    ordered = [by_id[i] for i in range(n)]

    declared = {t: frozenset(ends) for t, ends in (schema or {}).items()}
    seen_schema: dict[str, frozenset] = dict(declared)
    collapsed: dict[tuple[int, int, str], int] = {}
    for src, dst, etype in edges:
        src, dst = int(src), int(dst)
        for end in (src, dst):
            if end not in by_id:
                raise DanglingEdge(src, dst, end)
        ends = frozenset((by_id[src].type_name, by_id[dst].type_name))
        if etype in seen_schema:
            if seen_schema[etype] != ends:
                raise TypeMismatch(
                    f"edge type {etype!r} joins {sorted(seen_schema[etype])}, got {sorted(ends)} "
                    f"on ({src}, {dst})")
        else:
            seen_schema[etype] = ends
        key = (min(src, dst), max(src, dst), etype)
        collapsed[key] = collapsed.get(key, 0) + 1
    return HeterogeneousGraph(ordered, collapsed, seen_schema)


# -- meta-paths -------------------------------------------------------------

@dataclass(frozen=True)
class MetaPath:
    node_types: tuple[str, ...]
    edge_types: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.node_types) < 2:
            raise GraphFormatError("a meta-path needs at least two node types")
        if len(self.node_types) > MAX_META_PATH_LEN:
            raise MetaPathTooLong(
                f"{len(self.node_types)} node types; the cap is {MAX_META_PATH_LEN}")
        if self.edge_types is not None and len(self.edge_types) != len(self.node_types) - 1:
            raise GraphFormatError("need exactly one edge type per hop")

    @classmethod
    def of(cls, spec) -> "MetaPath":
        """Accept a MetaPath, a list of type names, or ``{"node_types", "edge_types"}``."""
        if isinstance(spec, MetaPath):
            return spec
        if isinstance(spec, dict):
            et = spec.get("edge_types")
            return cls(tuple(spec["node_types"]), tuple(et) if et is not None else None)
        return cls(tuple(spec))

    @property
    def symmetric(self) -> bool:
        if self.node_types != self.node_types[::-1]:
            return False
        return self.edge_types is None or self.edge_types == self.edge_types[::-1]

    @property
    def start_type(self) -> str:
        return self.node_types[0]

    @property
    def end_type(self) -> str:
        return self.node_types[-1]

    @property
    def name(self) -> str:
        return "-".join(self.node_types)

    def resolve(self, g: HeterogeneousGraph) -> tuple[str, ...]:
        """Edge types for each hop, inferring them from the graph schema when omitted."""
        for t in self.node_types:
            if t not in g.node_types:
                raise UnknownType(t)
        if self.edge_types is not None:
            for a, b, e in zip(self.node_types, self.node_types[1:], self.edge_types):
                if e not in g.schema:
                    raise UnknownType(e)
                if g.schema[e] != frozenset((a, b)):
                    raise TypeMismatch(f"edge type {e!r} does not join {a!r} and {b!r}")
            return self.edge_types
        out = []
        for a, b in zip(self.node_types, self.node_types[1:]):
            cands = g.edge_types_between(a, b)
            if len(cands) != 1:
                raise UnknownType(
                    f"cannot infer edge type between {a!r} and {b!r}: candidates {cands}")
            out.append(cands[0])
        return tuple(out)


def path_instance_counts(g: HeterogeneousGraph, mp) -> sp.csr_matrix:
    """Integer walk counts ``counts[i, j]`` between start-type and end-type nodes.

    Walks follow the meta-path's type sequence, each hop weighted by edge
    multiplicity. Walks that pass back through their start node before the
    final hop are excluded, as is the diagonal.
    """
    mp = MetaPath.of(mp)
    etypes = mp.resolve(g)
    steps = [g.step_csr(e, t) for e, t in zip(etypes, mp.node_types[1:])]
    starts = g.nodes_of_type(mp.start_type)
    rows, cols, vals = kernels.count_walks(steps, starts)
    n = g.n_nodes
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.int64)


@dataclass
class MetaPathAdjacency:
    """Row-normalized path-instance vectors for one meta-path.

    ``rows[i]`` maps each start-type node to ``(cols, weights)`` arrays sorted
    by column; ``raw_counts`` is the integer count matrix in graph node ids.
    """

    meta_path: MetaPath
    start_type: str
    start_nodes: np.ndarray
    raw_counts: sp.csr_matrix
    rows: dict[int, tuple[np.ndarray, np.ndarray]] = field(repr=False)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        if i not in self.rows:
            raise WrongStartType(f"node {i} is not a {self.start_type!r} node")
        return self.rows[i]

    def neighbor_set(self, i: int) -> np.ndarray:
        return self.row(i)[0]


def meta_path_adjacency(g: HeterogeneousGraph, mp) -> MetaPathAdjacency:
    mp = MetaPath.of(mp)
    counts = path_instance_counts(g, mp)
    starts = g.nodes_of_type(mp.start_type)
    rows = {}
    for i in starts:
        lo, hi = counts.indptr[i], counts.indptr[i + 1]
        cols = counts.indices[lo:hi].astype(np.int64)
        raw = counts.data[lo:hi].astype(np.float64)
        order = np.argsort(cols, kind="stable")
        cols, raw = cols[order], raw[order]
        total = raw.sum()
        rows[int(i)] = (cols, raw / total if total > 0 else raw)
    return MetaPathAdjacency(mp, mp.start_type, starts, counts, rows)


def neighbors_via(adj: MetaPathAdjacency, i: int) -> list[tuple[int, float]]:
    """Neighbors of ``i`` by descending weight, ties by ascending node id."""
    cols, w = adj.row(i)
    return sorted(((int(j), float(x)) for j, x in zip(cols, w)), key=lambda p: (-p[1], p[0]))


# -- file format --------------------------------------------------------------

def read_graph(path) -> HeterogeneousGraph:
    """Parse the tab-separated ``N``/``E`` line format."""
    nodes, edges = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                if parts[0] == "N":
                    if len(parts) < 3 or len(parts) > 5:
                        raise ValueError("expected 3-5 fields")
                    label = parts[3] if len(parts) > 3 and parts[3] else None
                    disp = parts[4] if len(parts) > 4 and parts[4] else None
                    nodes.append((int(parts[1]), parts[2], label, disp))
                elif parts[0] == "E":
                    if len(parts) != 4:
                        raise ValueError("expected 4 fields")
                    edges.append((int(parts[1]), int(parts[2]), parts[3]))
                else:
                    raise ValueError(f"unknown record kind {parts[0]!r}")
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
    return freeze_graph(nodes, edges)


def write_graph(g: HeterogeneousGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for n in g.nodes:
            fields = ["N", str(n.node_id), n.type_name]
            if n.label is not None or n.display_name is not None:
                fields.append(n.label or "")
            if n.display_name is not None:
                fields.append(n.display_name)
            fh.write("\t".join(fields) + "\n")
        for u, v, t, m in g.edges():
            for _ in range(m):
                fh.write(f"E\t{u}\t{v}\t{t}\n")
