"""Simulated parameter server with staleness-weighted aggregation.

Workers train private copies of the model on disjoint slices of the labeled
nodes and submit flattened parameter vectors. The server keeps the latest
vector and the version it was credited against for every worker, blends them
with weights ``(gap + 1) ** -alpha`` normalized to sum to one, and bumps its
version. After each aggregation it either broadcasts to all workers (when some
worker lags by more than ``threshold`` versions) or answers the submitters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, InvalidPartition, MissingWorkerUpdate, ShapeMismatch, UnknownWorker
from .model import (
    Hyperparams,
    ModelInputs,
    ModelParams,
    Trainer,
    check_class_coverage,
    full_loss,
    predict,
    training_stream,
)
from .seeding import unit_hash

log = logging.getLogger(__name__)


@dataclass
class ClientUpdate:
    worker_id: int
    vector: np.ndarray
    trained_from: int  # server version the client started from


@dataclass(frozen=True)
class SyncDecision:
    kind: str  # "broadcast_all" or "send_to_submitter"
    worker_id: int | None = None

    @property
    def broadcast(self) -> bool:
        return self.kind == "broadcast_all"


class ServerState:
    def __init__(self, n: int, alpha: float = 0.5, threshold: int = 4, dim: int | None = None):
        if n < 1:
            raise ValueError("need at least one worker")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.n = n
        self.alpha = float(alpha)
        self.threshold = int(threshold)
        self.dim = dim
        self.version_latest = 1
        self.server_w: dict[int, np.ndarray] = {}
        self.server_ver: dict[int, int] = {}
        self.last_submitter: int | None = None

    def gaps(self) -> np.ndarray:
        return np.array([self.version_latest - self.server_ver[i] for i in range(self.n)])


def submit_update(state: ServerState, update: ClientUpdate) -> None:
    wid = update.worker_id
    if not (isinstance(wid, (int, np.integer)) and 0 <= wid < state.n):
        raise UnknownWorker(f"worker {wid!r} not registered (n={state.n})")
    vec = np.asarray(update.vector, dtype=np.float64)
    if vec.ndim != 1 or (state.dim is not None and vec.size != state.dim):
        raise ShapeMismatch(f"update of shape {vec.shape}, server expects ({state.dim},)")
    if state.dim is None:
        state.dim = vec.size
    state.server_w[int(wid)] = vec.copy()
    state.server_ver[int(wid)] = state.version_latest
    state.last_submitter = int(wid)


def staleness_coefficients(gaps, alpha: float) -> np.ndarray:
    """Normalized ``(gap + 1) ** -alpha`` weights."""
    raw = (np.asarray(gaps, dtype=np.float64) + 1.0) ** (-float(alpha))
    return raw / raw.sum()


def aggregate(state: ServerState) -> tuple[np.ndarray, int]:
    missing = [i for i in range(state.n) if i not in state.server_w]
    if missing:
        raise MissingWorkerUpdate(f"no update yet from workers {missing}")
    raw = (state.gaps().astype(np.float64) + 1.0) ** (-state.alpha)
    total = np.zeros(state.dim)
    for i in range(state.n):  # fixed ascending worker order
        total += raw[i] * state.server_w[i]
    out = total / raw.sum()
    state.version_latest += 1
    return out, state.version_latest


def post_aggregate_sync(state: ServerState) -> SyncDecision:
    if state.gaps().max() > state.threshold:
        return SyncDecision("broadcast_all")
    return SyncDecision("send_to_submitter", state.last_submitter)


# -- simulation ------------------------------------------------------------------

@dataclass
class FedConfig:
    clients: int = 3
    alpha: float = 0.5
    threshold: int = 4
    rounds: int = 10
    speeds: list[int] | None = None  # worker w is active every speeds[w] rounds
    asynchronous: bool = False

    def validate(self):
        problems = {}
        if self.clients < 1:
            problems["fed.clients"] = "must be >= 1"
        if self.alpha < 0:
            problems["fed.alpha"] = "must be >= 0"
        if self.threshold < 0:
            problems["fed.threshold"] = "must be >= 0"
        if self.rounds < 1:
            problems["fed.rounds"] = "must be >= 1"
        if self.speeds is not None:
            if len(self.speeds) != self.clients:
                problems["fed.speeds"] = f"need {self.clients} entries"
            elif any(int(s) < 1 for s in self.speeds):
                problems["fed.speeds"] = "entries must be >= 1"
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_dict(cls, d: dict) -> "FedConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError({f"fed.{k}": "unknown key" for k in sorted(unknown)})
        return cls(**d)


@dataclass
class WorkerProfile:
    worker_id: int
    nodes: np.ndarray  # graph node ids of this worker's labeled nodes
    speed: int = 1
    hp: Hyperparams | None = None

    def active(self, round_no: int) -> bool:
        return (round_no - 1) % self.speed == 0


def hash_partition(node_ids, clients: int, seed: int) -> list[np.ndarray]:
    """Split node ids into ``clients`` buckets by a seeded hash of each id."""
    buckets = [[] for _ in range(clients)]
    for nid in sorted(int(x) for x in node_ids):
        buckets[min(int(unit_hash(seed, "partition", nid) * clients), clients - 1)].append(nid)
    return [np.array(b, dtype=np.int64) for b in buckets]


def make_profiles(train_nodes, cfg: FedConfig, hp: Hyperparams) -> list[WorkerProfile]:
    speeds = cfg.speeds or [1] * cfg.clients
    if cfg.clients == 1:
        parts = [np.array(sorted(int(x) for x in train_nodes), dtype=np.int64)]
    else:
        parts = hash_partition(train_nodes, cfg.clients, hp.rng_seed)
    return [WorkerProfile(w, parts[w], int(speeds[w]), hp) for w in range(cfg.clients)]


def check_partition(profiles: list[WorkerProfile], labeled) -> None:
    seen: dict[int, int] = {}
    for p in profiles:
        if p.speed < 1:
            raise InvalidPartition(f"worker {p.worker_id} speed {p.speed} < 1")
        if p.nodes.size == 0:
            raise InvalidPartition(f"worker {p.worker_id} has no labeled nodes")
        for nid in p.nodes.tolist():
            if nid in seen:
                raise InvalidPartition(f"node {nid} given to workers {seen[nid]} and {p.worker_id}")
            seen[nid] = p.worker_id
    if set(seen) != {int(x) for x in labeled}:
        raise InvalidPartition("worker partitions do not cover the labeled nodes exactly")
    if [p.worker_id for p in profiles] != list(range(len(profiles))):
        raise InvalidPartition("worker ids must be 0..C-1 in order")


@dataclass
class RoundMetrics:
    round: int
    worker_events: str
    global_loss: float
    val_micro_f1: float


@dataclass
class SimulationResult:
    params: ModelParams
    metrics: list[RoundMetrics]
    worker_losses: dict[int, list[float]] = field(default_factory=dict)
    final_version: int = 1

    def metrics_tsv(self) -> str:
        lines = ["round\tworker_events\tglobal_loss\tval_micro_f1"]
        for m in self.metrics:
            lines.append(f"{m.round}\t{m.worker_events}\t{m.global_loss!r}\t{m.val_micro_f1!r}")
        return "\n".join(lines) + "\n"


def run_simulation(inputs: ModelInputs, profiles: list[WorkerProfile], hp: Hyperparams,
                   rounds: int, alpha: float = 0.5, threshold: int = 4, val_nodes=(),
                   asynchronous: bool = False, n_labels: int | None = None) -> SimulationResult:
    """Round-based (or per-arrival) federated training.

    Every round each active worker runs ``hp.local_epochs`` epochs on its own
    nodes and submits. In round mode the server aggregates once per round
    after all active workers have submitted; in asynchronous mode it
    aggregates after every submission once all workers have reported at
    least once. The global model is the latest aggregate.
    """
    if rounds < 1:
        raise InvalidPartition("rounds must be >= 1")
    train_nodes = np.concatenate([p.nodes for p in profiles]) if profiles else np.array([], dtype=np.int64)
    check_partition(profiles, train_nodes)
    if n_labels is None:
        n_labels = len(inputs.graph.labels)
    check_class_coverage(inputs.labels_of(inputs.rows_of(train_nodes)), n_labels)
    init = ModelParams.init(inputs.n, inputs.n_paths, n_labels, hp)
    trainers = []
    for p in profiles:
        whp = p.hp or hp
        trainers.append(Trainer(init.copy(), inputs, inputs.rows_of(p.nodes), whp,
                                training_stream(hp.rng_seed, p.worker_id)))
    state = ServerState(len(profiles), alpha, threshold, init.size)
    global_params = init.copy()
    train_rows = inputs.rows_of(np.sort(train_nodes))
    val_rows = inputs.rows_of(np.asarray(sorted(int(x) for x in val_nodes), dtype=np.int64))
    worker_losses = {p.worker_id: [] for p in profiles}
    metrics = []

    def deliver(decision: SyncDecision, vec: np.ndarray, submitters):
        targets = range(len(profiles)) if decision.broadcast else submitters
        for w in targets:
            trainers[w].params.load_flat(vec)

    for r in range(1, rounds + 1):
        active = [p.worker_id for p in profiles if p.active(r)]
        events = []
        for w in active:
            start = state.version_latest
            worker_losses[w].extend(trainers[w].run_epochs(trainers[w].hp.local_epochs))
            submit_update(state, ClientUpdate(w, trainers[w].params.flatten(), start))
            events.append(f"w{w}")
            if asynchronous and len(state.server_w) == state.n:
                vec, _ = aggregate(state)
                decision = post_aggregate_sync(state)
                deliver(decision, vec, [w])
                global_params.load_flat(vec)
                events.append("bcast" if decision.broadcast else "agg")
        if not asynchronous and active and len(state.server_w) == state.n:
            vec, _ = aggregate(state)
            decision = post_aggregate_sync(state)
            deliver(decision, vec, active)
            global_params.load_flat(vec)
            events.append("bcast" if decision.broadcast else "agg")
        loss = full_loss(global_params, inputs, train_rows)
        f1 = _micro_f1(global_params, inputs, val_rows)
        metrics.append(RoundMetrics(r, ",".join(events) or "-", loss, f1))
        log.info("round %d events=%s loss=%.6f val_f1=%.4f", r, metrics[-1].worker_events, loss, f1)
    return SimulationResult(global_params, metrics, worker_losses, state.version_latest)


def _micro_f1(params: ModelParams, inputs: ModelInputs, rows) -> float:
    if rows.size == 0:
        return float("nan")
    pred = predict(params, inputs, rows)
    # single-label micro F1 equals accuracy
    return float(np.mean(pred == inputs.labels_of(rows)))
