"""Node influence: received attention (NAC) and classical centralities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import EmptyGraph, KTooLarge
from .graph import HeterogeneousGraph, path_instance_counts

METHODS = ("NAC", "DC", "BC", "CC", "EC")


@dataclass
class InfluenceScores:
    node_ids: np.ndarray  # ascending graph ids
    scores: np.ndarray
    method: str

    def as_dict(self) -> dict[int, float]:
        return {int(n): float(s) for n, s in zip(self.node_ids, self.scores)}

    def ranking(self) -> np.ndarray:
        """Node ids by descending score, ties by ascending id."""
        order = np.lexsort((self.node_ids, -self.scores))
        return self.node_ids[order]

    def top(self, k: int) -> np.ndarray:
        if k > self.node_ids.size:
            raise KTooLarge(f"K={k} > {self.node_ids.size} nodes")
        return self.ranking()[:k]


def received_attention(att: np.ndarray) -> np.ndarray:
    """Mean coefficient each node receives from the nodes attending to it (0 if none)."""
    indeg = (att > 0).sum(axis=0)
    return np.divide(att.sum(axis=0), indeg, out=np.zeros(att.shape[0]), where=indeg > 0)


def attention_fixed_point(att: np.ndarray, tol: float = 1e-14, max_iter: int = 100000) -> np.ndarray:
    """Importance as the attention-weighted average importance of in-neighbors.

    Solves ``x = x C`` for the row-stochastic attention matrix ``C`` by a lazy
    walk ``x <- (x + x C) / 2`` started from the uniform vector, which also
    converges on bipartite components. Nodes nobody attends to get exactly 0.
    """
    n = att.shape[0]
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        y = 0.5 * (x + x @ att)
        done = np.abs(y - x).sum() < tol
        x = y
        if done:
            break
    x[(att > 0).sum(axis=0) == 0] = 0.0
    return x


def nac_influence(table, mode: str = "fixed_point") -> InfluenceScores:
    """Node influence from node-level attention, averaged over meta-paths.

    ``mode="fixed_point"`` scores a node by the stationary mass of the
    attention walk, so attention from important nodes counts for more;
    ``mode="mean"`` is the one-level mean of received coefficients.
    ``table`` is an ``EmbeddingTable`` from a full-neighborhood pass, where
    every neighbor gets a strictly positive coefficient.
    """
    if mode == "fixed_point":
        per_path = attention_fixed_point
    elif mode == "mean":
        per_path = received_attention
    else:
        raise ValueError(f"unknown NAC mode {mode!r}")
    total = np.zeros(table.node_ids.size)
    for att in table.attention:
        total += per_path(att)
    return InfluenceScores(table.node_ids.copy(), total / len(table.attention), "NAC")


@dataclass
class Projection:
    """Unweighted simple graph over ``node_ids`` in CSR form."""

    node_ids: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n(self) -> int:
        return self.node_ids.size

    @classmethod
    def from_edges(cls, node_ids, edges) -> "Projection":
        node_ids = np.asarray(sorted(int(x) for x in node_ids), dtype=np.int64)
        pos = {int(g): i for i, g in enumerate(node_ids)}
        n = node_ids.size
        m = sp.lil_matrix((n, n), dtype=np.int8)
        for u, v in edges:
            if u != v:
                m[pos[u], pos[v]] = 1
                m[pos[v], pos[u]] = 1
        csr = m.tocsr()
        csr.sort_indices()
        return cls(node_ids, csr.indptr.astype(np.int64), csr.indices.astype(np.int64))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            out[i, self.indices[self.indptr[i]:self.indptr[i + 1]]] = 1.0
        return out


def coauthor_projection(g: HeterogeneousGraph, meta_path=("author", "paper", "author")) -> Projection:
    """Author graph with an edge wherever at least one meta-path instance joins two authors."""
    counts = path_instance_counts(g, list(meta_path))
    nodes = g.nodes_of_type(meta_path[0])
    coo = counts.tocoo()
    edges = [(int(i), int(j)) for i, j in zip(coo.row, coo.col) if i < j]
    return Projection.from_edges(nodes, edges)


def centrality(proj: Projection, kind: str) -> InfluenceScores:
    """DC, BC, CC (harmonic) or EC on an unweighted projection."""
    n = proj.n
    if n == 0:
        raise EmptyGraph("projection has no nodes")
    kind = kind.upper()
    if kind == "DC":
        deg = np.diff(proj.indptr).astype(np.float64)
        s = deg / (n - 1) if n > 1 else np.zeros(n)
    elif kind in ("BC", "CC"):
        bc, harm = kernels.shortest_path_scores(proj.indptr, proj.indices, n)
        if kind == "BC":
            pairs = (n - 1) * (n - 2) / 2.0
            s = bc / pairs if pairs > 0 else np.zeros(n)
        else:
            s = harm / (n - 1) if n > 1 else np.zeros(n)
    elif kind == "EC":
        s = _eigenvector(proj)
    else:
        raise ValueError(f"unknown centrality {kind!r}")
    return InfluenceScores(proj.node_ids.copy(), np.asarray(s, dtype=np.float64), kind)


def _components(proj: Projection) -> list[np.ndarray]:
    n = proj.n
    comp = -np.ones(n, dtype=np.int64)
    out = []
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = len(out)
        stack, members = [s], [s]
        while stack:
            v = stack.pop()
            for w in proj.indices[proj.indptr[v]:proj.indptr[v + 1]]:
                if comp[w] < 0:
                    comp[w] = len(out)
                    stack.append(w)
                    members.append(w)
        out.append(np.sort(np.array(members)))
    return out


def _eigenvector(proj: Projection, tol: float = 1e-10, max_iter: int = 100000) -> np.ndarray:
    """Power iteration on the largest component; zero elsewhere.

    Iterates ``(A + I) x`` so bipartite components converge; the leading
    eigenvector is the same as ``A``'s. Stops once ``||A x - lambda x|| < tol``.
    """
    comps = _components(proj)
    big = max(comps, key=lambda c: (c.size, -c[0]))
    out = np.zeros(proj.n)
    if big.size == 1:
        out[big[0]] = 1.0
        return out
    A = proj.dense()[np.ix_(big, big)]
    x = np.full(big.size, 1.0 / np.sqrt(big.size))
    for _ in range(max_iter):
        y = A @ x + x
        x = y / np.linalg.norm(y)
        Ax = A @ x
        lam = x @ Ax
        if np.linalg.norm(Ax - lam * x) < tol:
            break
    out[big] = x
    return out


def topk_intersection(a: InfluenceScores, b: InfluenceScores, k: int) -> float:
    """``|topK(a) & topK(b)| / K``."""
    if not np.array_equal(a.node_ids, b.node_ids):
        raise ValueError("score maps cover different node sets")
    if k < 1:
        raise ValueError("K must be >= 1")
    return len(set(a.top(k).tolist()) & set(b.top(k).tolist())) / k
