"""Research-team extraction, partition comparison (NMI) and F1 scores."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import (
    ConfigError,
    EmptyAfterFilter,
    LengthMismatch,
    MissingEmbedding,
    MissingInfluence,
    UniverseMismatch,
)
from .graph import HeterogeneousGraph, freeze_graph, path_instance_counts


@dataclass
class IdentificationConfig:
    K: int = 15
    K_prime: int = 10
    min_publications: int = 10
    min_coauthor_frequency: int = 5
    max_teams: int | None = None
    residual: bool = False  # keep unattached nodes out of teams instead of singleton teams

    def validate(self):
        if self.K < 1 or self.K_prime < 1:
            raise ConfigError({"identify.K": "K and K_prime must be >= 1"})
        if self.min_publications < 0 or self.min_coauthor_frequency < 0:
            raise ConfigError({"identify.min_publications": "thresholds must be >= 0"})
        if self.max_teams is not None and self.max_teams < 1:
            raise ConfigError({"identify.max_teams": "must be >= 1 when set"})

    @classmethod
    def from_dict(cls, d: dict) -> "IdentificationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError({f"identify.{k}": "unknown key" for k in unknown})
        return cls(**d)


@dataclass(frozen=True)
class Team:
    leader: int
    core: tuple[int, ...] = ()
    non_core: tuple[int, ...] = ()

    @property
    def members(self) -> tuple[int, ...]:
        return (self.leader,) + self.core + self.non_core

    def __len__(self):
        return 1 + len(self.core) + len(self.non_core)


@dataclass
class TeamPartition:
    teams: list[Team]
    residual: tuple[int, ...] = ()

    def clusters(self) -> list[list[int]]:
        """One cluster per team plus a singleton for each residual node."""
        return [sorted(t.members) for t in self.teams] + [[r] for r in self.residual]

    def assignment(self) -> dict[int, int]:
        return {n: c for c, members in enumerate(self.clusters()) for n in members}


# -- prefilter -------------------------------------------------------------------

@dataclass
class FilteredGraph:
    graph: HeterogeneousGraph
    old_to_new: dict[int, int]
    new_to_old: list[int] = field(default_factory=list)


def prefilter_graph(g: HeterogeneousGraph, cfg: IdentificationConfig, author_type: str = "author",
                    paper_type: str = "paper") -> FilteredGraph:
    """Keep prolific authors and only their strong co-authorship ties.

    Authors with at least ``min_publications`` papers are kept. Two authors
    are strongly tied when they share at least ``min_coauthor_frequency``
    papers. Each paper keeps only the largest group of its kept authors that
    is connected through strong ties (ties broken toward the smallest author
    id), and only if that group has two or more members. Papers left without
    authors, and nodes left without any neighbor, are dropped.
    """
    writes = g.edge_types_between(author_type, paper_type)
    if len(writes) != 1:
        raise ConfigError({"identify": f"need exactly one {author_type}-{paper_type} edge type"})
    writes = writes[0]
    authors = [int(a) for a in g.nodes_of_type(author_type)]
    n_pubs = {a: len(g.neighbors(a, writes)) for a in authors}
    kept_authors = {a for a in authors if n_pubs[a] >= cfg.min_publications}
    shared = path_instance_counts(g, [author_type, paper_type, author_type]).tocsr()

    def strong(a, b):
        return shared[a, b] >= cfg.min_coauthor_frequency

    dropped_edges = set()
    for p in g.nodes_of_type(paper_type):
        p = int(p)
        on_paper = sorted(a for a, _ in g.neighbors(p, writes))
        keep_here = set(on_paper) if cfg.min_coauthor_frequency <= 0 else \
            _largest_tied_group([a for a in on_paper if a in kept_authors], strong)
        for a in on_paper:
            if a not in keep_here or a not in kept_authors:
                dropped_edges.add((min(a, p), max(a, p), writes))

    removed = {a for a in authors if a not in kept_authors}
    edges = [(u, v, t, m) for u, v, t, m in g.edges() if (u, v, t) not in dropped_edges]
    authored = {v if g.type_of(u) == author_type else u for u, v, t, _ in edges if t == writes}
    removed |= {int(p) for p in g.nodes_of_type(paper_type)
                if int(p) not in authored and g.neighbors(int(p), writes)}
    # other nodes that had neighbors but lost all of them go too; repeat to fixpoint
    while True:
        alive_deg = Counter()
        for u, v, t, _ in edges:
            if u in removed or v in removed:
                continue
            alive_deg[u] += 1
            alive_deg[v] += 1
        newly = {i for i in range(g.n_nodes)
                 if i not in removed and g.type_of(i) != author_type
                 and g.degree(i) > 0 and alive_deg[i] == 0}
        if not newly:
            break
        removed |= newly
    keep = [i for i in range(g.n_nodes) if i not in removed]
    if not any(g.type_of(i) == author_type for i in keep):
        raise EmptyAfterFilter("no author passes the thresholds")
    old_to_new = {old: new for new, old in enumerate(keep)}
    nodes = []
    for old in keep:
        n = g.node(old)
        nodes.append((old_to_new[old], n.type_name, n.label, n.display_name))
    new_edges = []
    for u, v, t, m in edges:
        if u in old_to_new and v in old_to_new:
            new_edges.extend([(old_to_new[u], old_to_new[v], t)] * m)
    schema = {t: tuple(sorted(ends)) if len(ends) == 2 else (next(iter(ends)),) * 2
              for t, ends in g.schema.items()}
    return FilteredGraph(freeze_graph(nodes, new_edges, schema), old_to_new, keep)


def _largest_tied_group(authors, strong) -> set[int]:
    seen, best = set(), set()
    for s in authors:
        if s in seen:
            continue
        group, stack = {s}, [s]
        seen.add(s)
        while stack:
            a = stack.pop()
            for b in authors:
                if b not in seen and strong(a, b):
                    seen.add(b)
                    group.add(b)
                    stack.append(b)
        if len(group) > len(best):
            best = group
    return best if len(best) >= 2 else set()


# -- identification --------------------------------------------------------------

def _cos_to(h: np.ndarray, i: int) -> np.ndarray:
    norms = np.linalg.norm(h, axis=1)
    denom = norms * norms[i]
    dots = h @ h[i]
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom >= 1e-12)


def identify_teams(table, influence, neighbors, cfg: IdentificationConfig) -> TeamPartition:
    """Greedy leader / core / non-core extraction.

    ``table`` is an ``EmbeddingTable`` over target rows, ``influence`` the
    ``InfluenceScores`` of the same nodes and ``neighbors[p][r]`` the neighbor
    rows of row ``r`` under meta-path ``p``. Each round takes the most
    influential unrecognized node as leader; core members are those of its
    top-K most similar unrecognized nodes that are also among the top-K'
    unrecognized neighbors it attends to most; every other unrecognized
    neighbor becomes non-core. All ties go to the smaller node id.
    """
    cfg.validate()
    ids = np.asarray(table.node_ids)
    n = ids.size
    if table.h.shape[0] != n:
        raise MissingEmbedding("embedding table rows do not match its node ids")
    score_of = influence.as_dict()
    missing = [int(x) for x in ids if int(x) not in score_of]
    if missing:
        raise MissingInfluence(missing[:5])
    infl = np.array([score_of[int(x)] for x in ids])
    nbr_sets = [set() for _ in range(n)]
    for per_path in neighbors:
        for r, nb in enumerate(per_path):
            nbr_sets[r].update(int(j) for j in nb)
    attention = np.mean(table.attention, axis=0)

    unrec = np.ones(n, dtype=bool)
    teams, residual = [], []
    while unrec.any():
        if cfg.max_teams is not None and len(teams) >= cfg.max_teams:
            break
        cand_rows = np.flatnonzero(unrec)
        leader = int(cand_rows[np.lexsort((ids[cand_rows], -infl[cand_rows]))[0]])
        unrec[leader] = False
        open_nbrs = np.array(sorted(j for j in nbr_sets[leader] if unrec[j]), dtype=np.int64)
        if open_nbrs.size == 0 and cfg.residual:
            residual.append(int(ids[leader]))
            continue
        others = np.flatnonzero(unrec)
        sims = _cos_to(table.h, leader)[others]
        similar = set(others[np.lexsort((ids[others], -sims))][:cfg.K].tolist())
        att = attention[leader, open_nbrs]
        influential = set(open_nbrs[np.lexsort((ids[open_nbrs], -att))][:cfg.K_prime].tolist())
        core = sorted(similar & influential)
        non_core = sorted(set(open_nbrs.tolist()) - set(core))
        unrec[core] = False
        unrec[non_core] = False
        teams.append(Team(int(ids[leader]), tuple(int(ids[c]) for c in core),
                          tuple(int(ids[c]) for c in non_core)))
    residual += [int(ids[r]) for r in np.flatnonzero(unrec)]
    return TeamPartition(teams, tuple(sorted(residual)))


# -- metrics -----------------------------------------------------------------------

def _as_assignment(p) -> dict[int, int]:
    if isinstance(p, TeamPartition):
        return p.assignment()
    if isinstance(p, dict):
        return {int(k): v for k, v in p.items()}
    return {int(n): c for c, members in enumerate(p) for n in members}


def nmi(predicted, truth) -> float:
    """Normalized mutual information with natural logs.

    Either argument may be a ``TeamPartition``, a node -> cluster dict or a
    list of clusters. Both must cover the same nodes.
    """
    a, b = _as_assignment(predicted), _as_assignment(truth)
    if set(a) != set(b):
        raise UniverseMismatch(
            f"{len(set(a) ^ set(b))} nodes appear in only one partition")
    N = len(a)
    if N == 0:
        raise UniverseMismatch("empty partitions")
    joint = Counter((a[x], b[x]) for x in a)
    row = Counter(a.values())
    col = Counter(b.values())
    num = 0.0
    for (i, j), m in joint.items():
        num += m * math.log(m * N / (row[i] * col[j]))
    num *= -2.0
    den = sum(m * math.log(m / N) for m in row.values()) + sum(m * math.log(m / N) for m in col.values())
    if den == 0.0:
        # both partitions are a single cluster
        return 1.0
    return num / den


def nmi_top_k(predicted: TeamPartition, truth, k: int) -> float:
    """NMI over the nodes of the first ``k`` discovered teams only."""
    truth = _as_assignment(truth)
    sub = TeamPartition(predicted.teams[:k])
    nodes = set(sub.assignment())
    return nmi(sub, {n: truth[n] for n in nodes})


def f1_scores(predicted, true) -> tuple[float, float]:
    """(micro, macro) F1 for single-label predictions."""
    predicted = np.asarray(predicted)
    true = np.asarray(true)
    if predicted.shape != true.shape:
        raise LengthMismatch(f"{predicted.size} predictions vs {true.size} labels")
    if true.size == 0:
        raise LengthMismatch("no labels")
    tp_all = fp_all = fn_all = 0
    per_class = []
    for c in sorted(set(true.tolist()) | set(predicted.tolist())):
        tp = int(np.sum((predicted == c) & (true == c)))
        fp = int(np.sum((predicted == c) & (true != c)))
        fn = int(np.sum((predicted != c) & (true == c)))
        tp_all, fp_all, fn_all = tp_all + tp, fp_all + fp, fn_all + fn
        per_class.append(2 * tp / (2 * tp + fp + fn))
    micro = 2 * tp_all / (2 * tp_all + fp_all + fn_all)
    return micro, float(np.mean(per_class))
