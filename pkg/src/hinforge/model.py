"""AHinE: node-level and meta-path-level attention embeddings.

Per meta-path, each target node's adjacency vector is projected to ``d``
dimensions, neighbors are weighted by a softmax over cosine similarities of
those projections, and the relu-aggregated neighborhood is spliced with the
node's own projection and mixed down to ``d`` again. A second attention over
meta-paths, steered by a learned per-node preference vector, fuses the
per-path embeddings. A linear softmax classifier on the fused embedding is
trained with summed cross-entropy and plain mini-batch SGD.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import (
    CheckpointError,
    ClassMissingFromTrainingSet,
    EmptyNeighborhood,
    EmptyTrainingSet,
    ModelError,
    UnlabeledNodeInBatch,
)
from .graph import HeterogeneousGraph, MetaPath, MetaPathAdjacency, meta_path_adjacency
from .seeding import stream

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "hinforge-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Hyperparams:
    d: int = 16
    k: int = 8
    sample_cap: int | None = 10  # None: use every neighbor
    learning_rate: float = 0.01
    local_epochs: int = 50
    batch_size: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("d", "k", "local_epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ModelError(f"{name} must be >= 1")
        if self.sample_cap is not None and self.sample_cap < 1:
            raise ModelError("sample_cap must be >= 1 or None")
        if not self.learning_rate >= 0:
            raise ModelError("learning_rate must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ModelError(f"unknown hyperparameters {sorted(unknown)}")
        return cls(**d)


class ModelInputs:
    """Everything the model reads from the graph, indexed by target-node row.

    Row ``r`` corresponds to graph node ``node_ids[r]``. ``adjacency[p]`` is the
    dense row-normalized matrix for meta-path ``p`` and ``neighbors[p][r]`` the
    ascending neighbor rows of ``r``.
    """

    def __init__(self, graph: HeterogeneousGraph, meta_paths: Sequence, target_type: str = "author"):
        self.graph = graph
        self.target_type = target_type
        self.meta_paths = [MetaPath.of(m) for m in meta_paths]
        if not self.meta_paths:
            raise ModelError("at least one meta-path is required")
        for mp in self.meta_paths:
            if mp.start_type != target_type or mp.end_type != target_type:
                raise ModelError(f"meta-path {mp.name} must start and end at {target_type!r}")
        self.node_ids = graph.nodes_of_type(target_type)
        self.index = {int(g): r for r, g in enumerate(self.node_ids)}
        n = len(self.node_ids)
        self.meta_adjacency: list[MetaPathAdjacency] = []
        self.adjacency: list[np.ndarray] = []
        self.neighbors: list[list[np.ndarray]] = []
        for mp in self.meta_paths:
            adj = meta_path_adjacency(graph, mp)
            dense = np.zeros((n, n))
            nbrs = []
            for r, g in enumerate(self.node_ids):
                cols, w = adj.rows[int(g)]
                loc = np.array([self.index[int(c)] for c in cols], dtype=np.int64)
                dense[r, loc] = w
                nbrs.append(np.sort(loc))
            self.meta_adjacency.append(adj)
            self.adjacency.append(dense)
            self.neighbors.append(nbrs)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_paths(self) -> int:
        return len(self.meta_paths)

    def labels_of(self, rows) -> np.ndarray:
        out = []
        for r in rows:
            lab = self.graph.label_id(int(self.node_ids[r]))
            if lab is None:
                raise UnlabeledNodeInBatch(int(self.node_ids[r]))
            out.append(lab)
        return np.array(out, dtype=np.int64)

    def rows_of(self, node_ids) -> np.ndarray:
        return np.array([self.index[int(g)] for g in node_ids], dtype=np.int64)


def _xavier(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass
class ModelParams:
    W_f: list[Tensor]
    W_C: list[Tensor]
    W_p: Tensor
    b_p: Tensor
    P: Tensor
    cls_W: Tensor
    cls_b: Tensor
    seed: int = 0

    @classmethod
    def init(cls, n: int, n_paths: int, n_labels: int, hp: Hyperparams) -> "ModelParams":
        rng = stream(hp.rng_seed, "init")
        d, k = hp.d, hp.k
        W_f, W_C = [], []
        for p in range(n_paths):
            W_f.append(Tensor(_xavier(rng, n, d), True, f"W_f[{p}]"))
            W_C.append(Tensor(_xavier(rng, 2 * d, d), True, f"W_C[{p}]"))
        return cls(
            W_f=W_f,
            W_C=W_C,
            W_p=Tensor(_xavier(rng, d, k), True, "W_p"),
            b_p=Tensor(np.zeros((1, k)), True, "b_p"),
            P=Tensor(_xavier(rng, n, k), True, "P"),
            cls_W=Tensor(_xavier(rng, d, n_labels), True, "cls_W"),
            cls_b=Tensor(np.zeros((1, n_labels)), True, "cls_b"),
            seed=hp.rng_seed,
        )

    def tensors(self) -> list[Tensor]:
        """All learnable tensors in canonical order."""
        out = []
        for wf, wc in zip(self.W_f, self.W_C):
            out += [wf, wc]
        return out + [self.W_p, self.b_p, self.P, self.cls_W, self.cls_b]

    @property
    def dims(self) -> dict:
        return {"d": self.W_p.shape[0], "k": self.W_p.shape[1], "M": len(self.W_f),
                "N": self.P.shape[0], "L": self.cls_W.shape[1]}

    def zero_grad(self):
        for t in self.tensors():
            t.zero_grad()

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self.tensors()])

    def load_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ModelError(f"flat vector has {vec.size} entries, expected {self.size}")
        off = 0
        for t in self.tensors():
            t.data[...] = vec[off:off + t.data.size].reshape(t.shape)
            off += t.data.size

    @property
    def size(self) -> int:
        return sum(t.data.size for t in self.tensors())

    def copy(self) -> "ModelParams":
        def c(t):
            return Tensor(t.data.copy(), True, t.name)

        return ModelParams([c(t) for t in self.W_f], [c(t) for t in self.W_C], c(self.W_p),
                           c(self.b_p), c(self.P), c(self.cls_W), c(self.cls_b), self.seed)


# -- forward -----------------------------------------------------------------

@dataclass
class Forward:
    rows: np.ndarray
    h: Tensor  # fused embeddings, one row per entry of ``rows``
    h_paths: list[Tensor]
    gamma: Tensor  # rows x M
    attention: list[Tensor]  # per path: rows x len(cols[p])
    cols: list[np.ndarray]  # per path: target rows the attention columns refer to
    logits: Tensor


def full_neighborhoods(inputs: ModelInputs, rows) -> list[list[np.ndarray]]:
    return [[inputs.neighbors[p][r] for r in rows] for p in range(inputs.n_paths)]


def sample_neighbors(inputs: ModelInputs, rows, cap: int | None, rng) -> list[list[np.ndarray]]:
    """Uniform sample without replacement of at most ``cap`` neighbors per row and path."""
    out = []
    for p in range(inputs.n_paths):
        per = []
        for r in rows:
            nb = inputs.neighbors[p][r]
            if cap is None or nb.size <= cap:
                per.append(nb)
            else:
                per.append(np.sort(rng.choice(nb, size=cap, replace=False)))
        out.append(per)
    return out


def _path_embedding(params: ModelParams, inputs: ModelInputs, p: int, rows, samples):
    needed = np.unique(np.concatenate([np.asarray(rows, dtype=np.int64)] +
                                      [s for s in samples if s.size]))
    local = {int(g): i for i, g in enumerate(needed)}
    A = Tensor(inputs.adjacency[p][needed])
    Z = ad.matmul(A, params.W_f[p])  # projected adjacency vectors
    rloc = np.array([local[int(r)] for r in rows], dtype=np.int64)
    mask = np.zeros((len(rows), len(needed)), dtype=bool)
    for i, s in enumerate(samples):
        if s.size:
            mask[i, [local[int(j)] for j in s]] = True
    U = ad.l2_normalize_rows(Z)
    S = ad.matmul(ad.gather_rows(U, rloc), ad.transpose(U))
    C = ad.softmax(S, mask=mask)
    agg = ad.relu(ad.matmul(C, Z))
    own = ad.gather_rows(Z, rloc)
    h = ad.matmul(ad.concat([agg, own], axis=1), params.W_C[p])
    return h, C, needed


def semantic_fuse(params: ModelParams, rows, h_paths: list[Tensor]):
    """Meta-path attention weights ``gamma`` (rows x M) and fused embeddings."""
    pref = ad.gather_rows(params.P, rows)
    sims = []
    for hp in h_paths:
        t = ad.tanh(ad.add(ad.matmul(hp, params.W_p), params.b_p))
        sims.append(ad.cosine_similarity(pref, t))
    gamma = ad.softmax(ad.concat(sims, axis=1))
    fused = None
    for p, hp in enumerate(h_paths):
        term = ad.row_scale(hp, ad.gather_cols(gamma, [p]))
        fused = term if fused is None else ad.add(fused, term)
    return gamma, fused


def forward(params: ModelParams, inputs: ModelInputs, rows, samples=None) -> Forward:
    rows = np.asarray(rows, dtype=np.int64)
    if samples is None:
        samples = full_neighborhoods(inputs, rows)
    h_paths, att, cols = [], [], []
    for p in range(inputs.n_paths):
        h, C, needed = _path_embedding(params, inputs, p, rows, samples[p])
        h_paths.append(h)
        att.append(C)
        cols.append(needed)
    gamma, fused = semantic_fuse(params, rows, h_paths)
    logits = ad.add(ad.matmul(fused, params.cls_W), params.cls_b)
    return Forward(rows, fused, h_paths, gamma, att, cols, logits)


def batch_loss(params: ModelParams, inputs: ModelInputs, rows, labels, samples=None) -> Tensor:
    """Summed cross-entropy ``-sum ln C(h_i)[y_i]`` over ``rows``."""
    fw = forward(params, inputs, rows, samples)
    return ad.nll(ad.log_softmax(fw.logits), labels)


# -- single-node views of the same computation ---------------------------------

def node_attention(params: ModelParams, inputs: ModelInputs, path: int, row: int, sample) -> np.ndarray:
    """Attention coefficients of ``row`` over ``sample`` (rows) under one meta-path."""
    sample = np.asarray(sample, dtype=np.int64)
    if sample.size == 0:
        raise EmptyNeighborhood(int(inputs.node_ids[row]))
    _, C, needed = _path_embedding(params, inputs, path, [row], [sample])
    pos = np.searchsorted(needed, sample)
    return C.data[0, pos]


def structural_embedding(params: ModelParams, inputs: ModelInputs, path: int, row: int,
                         cap: int | None = None, rng=None) -> np.ndarray:
    if cap is None or rng is None:
        sample = inputs.neighbors[path][row]
    else:
        sample = sample_neighbors(inputs, [row], cap, rng)[path][0]
    h, _, _ = _path_embedding(params, inputs, path, [row], [sample])
    return h.data[0].copy()


def semantic_attention(params: ModelParams, row: int, h_paths: Sequence[np.ndarray]):
    gamma, fused = semantic_fuse(params, [row], [Tensor(h) for h in h_paths])
    return gamma.data[0].copy(), fused.data[0].copy()


def classify(params: ModelParams, h) -> np.ndarray:
    """Class probabilities for one or more fused embeddings."""
    h = Tensor(h)
    return ad.softmax(ad.add(ad.matmul(h, params.cls_W), params.cls_b)).data.copy()


# -- training --------------------------------------------------------------------

class Trainer:
    """Mini-batch SGD over a fixed set of labeled rows; resumable epoch by epoch."""

    def __init__(self, params: ModelParams, inputs: ModelInputs, rows, hp: Hyperparams,
                 rng: np.random.Generator, labels=None):
        self.params = params
        self.inputs = inputs
        self.rows = np.asarray(rows, dtype=np.int64)
        if self.rows.size == 0:
            raise EmptyTrainingSet("no labeled training nodes")
        self.labels = inputs.labels_of(self.rows) if labels is None else np.asarray(labels, dtype=np.int64)
        self.hp = hp
        self.rng = rng
        self.batch_size = hp.batch_size
        if self.batch_size > self.rows.size:
            log.warning("batch size %d exceeds %d labeled nodes; using full batch",
                        hp.batch_size, self.rows.size)
            self.batch_size = self.rows.size

    def step(self, rows, labels) -> float:
        samples = sample_neighbors(self.inputs, rows, self.hp.sample_cap, self.rng)
        self.params.zero_grad()
        with Tape() as tape:
            loss = batch_loss(self.params, self.inputs, rows, labels, samples)
        ad.backward(tape, loss)
        lr = self.hp.learning_rate
        for t in self.params.tensors():
            t.data -= lr * t.grad
        return loss.item()

    def run_epochs(self, epochs: int) -> list[float]:
        losses = []
        for _ in range(epochs):
            order = self.rng.permutation(self.rows.size)
            for lo in range(0, order.size, self.batch_size):
                pick = order[lo:lo + self.batch_size]
                losses.append(self.step(self.rows[pick], self.labels[pick]))
        return losses


def check_class_coverage(labels, n_labels: int, strict: bool = False):
    missing = sorted(set(range(n_labels)) - set(int(x) for x in labels))
    if missing:
        msg = f"classes {missing} have no training node"
        if strict:
            raise ClassMissingFromTrainingSet(msg)
        warnings.warn(msg, stacklevel=3)


def train(inputs: ModelInputs, train_nodes, hp: Hyperparams, n_labels: int | None = None,
          params: ModelParams | None = None, strict_classes: bool = False):
    """Train from scratch (or from ``params``). Returns ``(params, per-step losses)``.

    ``train_nodes`` are graph node ids of labeled target nodes. The shuffle
    and neighbor-sampling stream is the one worker 0 of a federated run uses,
    so a single-client simulation retraces this exactly.
    """
    rows = inputs.rows_of(train_nodes)
    if rows.size == 0:
        raise EmptyTrainingSet("no labeled training nodes")
    labels = inputs.labels_of(rows)
    if n_labels is None:
        n_labels = len(inputs.graph.labels)
    check_class_coverage(labels, n_labels, strict_classes)
    if params is None:
        params = ModelParams.init(inputs.n, inputs.n_paths, n_labels, hp)
    trainer = Trainer(params, inputs, rows, hp, training_stream(hp.rng_seed, 0), labels)
    losses = trainer.run_epochs(hp.local_epochs)
    return params, losses


def training_stream(seed: int, worker: int) -> np.random.Generator:
    return stream(seed, "sampling", worker)


# -- inference -------------------------------------------------------------------

@dataclass
class EmbeddingTable:
    node_ids: np.ndarray
    h: np.ndarray  # n x d fused
    h_paths: list[np.ndarray]  # per path n x d
    gamma: np.ndarray  # n x M
    attention: list[np.ndarray] = field(repr=False)  # per path dense n x n, row i over N_i

    def row_of(self, node_id: int) -> int:
        pos = np.searchsorted(self.node_ids, node_id)
        if pos >= self.node_ids.size or self.node_ids[pos] != node_id:
            raise KeyError(node_id)
        return int(pos)


def embed_all(params: ModelParams, inputs: ModelInputs) -> EmbeddingTable:
    """Deterministic pass over every target node using full neighborhoods."""
    rows = np.arange(inputs.n)
    fw = forward(params, inputs, rows)
    att = []
    for p in range(inputs.n_paths):
        dense = np.zeros((inputs.n, inputs.n))
        dense[:, fw.cols[p]] = fw.attention[p].data
        att.append(dense)
    return EmbeddingTable(inputs.node_ids.copy(), fw.h.data.copy(),
                          [t.data.copy() for t in fw.h_paths], fw.gamma.data.copy(), att)


def predict(params: ModelParams, inputs: ModelInputs, rows) -> np.ndarray:
    fw = forward(params, inputs, np.asarray(rows, dtype=np.int64))
    return np.argmax(fw.logits.data, axis=1)


def full_loss(params: ModelParams, inputs: ModelInputs, rows) -> float:
    rows = np.asarray(rows, dtype=np.int64)
    return batch_loss(params, inputs, rows, inputs.labels_of(rows)).item()


# -- checkpoints -----------------------------------------------------------------

def save_checkpoint(params: ModelParams, path) -> None:
    dims = params.dims
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} d={dims['d']} k={dims['k']} "
                 f"M={dims['M']} N={dims['N']} L={dims['L']} seed={params.seed}\n")
        for t in params.tensors():
            fh.write(f"tensor {t.name} {t.shape[0]} {t.shape[1]}\n")
            for row in t.data:
                fh.write(" ".join(float(x).hex() for x in row) + "\n")


def load_checkpoint(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CheckpointError("empty checkpoint")
    head = lines[0].split()
    if len(head) < 2 or head[0] != CHECKPOINT_MAGIC or head[1] != str(CHECKPOINT_VERSION):
        raise CheckpointError(f"bad header {lines[0]!r}")
    meta = dict(tok.split("=", 1) for tok in head[2:])
    M = int(meta["M"])
    tensors = {}
    order = []
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) != 4 or parts[0] != "tensor":
            raise CheckpointError(f"line {i + 1}: expected tensor header")
        name, r, c = parts[1], int(parts[2]), int(parts[3])
        rows = [[float.fromhex(x) for x in lines[i + 1 + j].split()] for j in range(r)]
        data = np.array(rows, dtype=np.float64).reshape(r, c)
        tensors[name] = Tensor(data, True, name)
        order.append(name)
        i += 1 + r
    try:
        params = ModelParams(
            [tensors[f"W_f[{p}]"] for p in range(M)], [tensors[f"W_C[{p}]"] for p in range(M)],
            tensors["W_p"], tensors["b_p"], tensors["P"], tensors["cls_W"], tensors["cls_b"],
            seed=int(meta.get("seed", 0)))
    except KeyError as exc:
        raise CheckpointError(f"missing tensor {exc}") from None
    if [t.name for t in params.tensors()] != order:
        raise CheckpointError("tensors out of canonical order")
    return params
