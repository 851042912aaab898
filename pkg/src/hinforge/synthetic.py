"""Planted-team academic graphs with known ground truth.

Authors are split into teams. Every team owns a pool of papers; its leader
signs each of them with probability ``leader_share``, other team members sign
with ``p_in`` and each outside author with ``p_out``. Papers appear in their
team's venue. Labels are the team ids.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import InfeasibleConfig
from .graph import HeterogeneousGraph, freeze_graph
from .seeding import stream

AUTHOR, PAPER, VENUE = "author", "paper", "venue"
WRITES, PUBLISHED_IN = "writes", "published_in"


@dataclass
class PlantedConfig:
    team_count: int = 5
    team_size: tuple[int, int] = (8, 15)
    papers_per_team: tuple[int, int] = (20, 30)
    p_in: float = 0.6
    p_out: float = 0.02
    leader_share: float = 1.0
    venue_count: int | None = None  # default: one venue per team
    rng_seed: int = 0

    def __post_init__(self):
        self.team_size = tuple(self.team_size)
        self.papers_per_team = tuple(self.papers_per_team)

    def validate(self):
        a, b = self.team_size
        if self.team_count < 1:
            raise InfeasibleConfig("team_count must be >= 1")
        if a < 2 or b < a:
            raise InfeasibleConfig(f"team_size range {self.team_size} invalid (need 2 <= a <= b)")
        lo, hi = self.papers_per_team
        if lo < 1 or hi < lo:
            raise InfeasibleConfig(f"papers_per_team range {self.papers_per_team} invalid")
        if not 0.0 <= self.p_out < self.p_in <= 1.0:
            raise InfeasibleConfig("need 0 <= p_out < p_in <= 1")
        if not 0.0 <= self.leader_share <= 1.0:
            raise InfeasibleConfig("leader_share must lie in [0, 1]")
        expected = self.leader_share + self.p_in * (a - 1)
        if expected < 1.0:
            raise InfeasibleConfig(
                f"expected authors per paper from the owning team is {expected:.3f} < 1")
        if self.venue_count is not None and self.venue_count < 1:
            raise InfeasibleConfig("venue_count must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "PlantedConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InfeasibleConfig(f"unknown planted-config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class PlantedGraph:
    graph: HeterogeneousGraph
    truth: dict[int, int]  # author node id -> team index
    leaders: list[int]  # per team, the member with the most papers

    @property
    def teams(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for node, t in sorted(self.truth.items()):
            out.setdefault(t, []).append(node)
        return [out[t] for t in sorted(out)]


def team_label(t: int) -> str:
    return f"team{t:03d}"


def gen_synthetic(cfg: PlantedConfig) -> PlantedGraph:
    cfg.validate()
    rng = stream(cfg.rng_seed, "graph-gen")
    G = cfg.team_count
    sizes = rng.integers(cfg.team_size[0], cfg.team_size[1] + 1, size=G)
    n_papers = rng.integers(cfg.papers_per_team[0], cfg.papers_per_team[1] + 1, size=G)
    n_venues = cfg.venue_count or G

    members, truth = [], {}
    nid = 0
    for t in range(G):
        ids = list(range(nid, nid + int(sizes[t])))
        members.append(ids)
        for a in ids:
            truth[a] = t
        nid += int(sizes[t])
    n_authors = nid

    # paper author lists; member 0 of each team is its designated leader
    papers: list[tuple[int, list[int]]] = []
    all_authors = np.arange(n_authors)
    for t in range(G):
        team = members[t]
        own = np.zeros(n_authors, dtype=bool)
        own[team] = True
        first = len(papers)
        for _ in range(int(n_papers[t])):
            chosen = []
            if rng.random() < cfg.leader_share:
                chosen.append(team[0])
            draws = rng.random(n_authors)
            inside = all_authors[own & (draws < cfg.p_in)]
            outside = all_authors[~own & (draws < cfg.p_out)]
            chosen += [int(a) for a in inside if a != team[0]]
            chosen += [int(a) for a in outside]
            if not chosen:
                chosen.append(int(rng.choice(team)))
            papers.append((t, sorted(set(chosen))))
        # every member signs at least one paper of their own team
        signed = {a for _, auth in papers[first:] for a in auth}
        for a in team:
            if a not in signed:
                k = first + int(rng.integers(int(n_papers[t])))
                papers[k] = (t, sorted(set(papers[k][1]) | {a}))

    nodes = [(a, AUTHOR, team_label(truth[a]), f"a{a}") for a in range(n_authors)]
    edges = []
    pid0 = n_authors
    vid0 = n_authors + len(papers)
    for k, (t, auth) in enumerate(papers):
        pid = pid0 + k
        nodes.append((pid, PAPER, None, f"p{k}"))
        for a in auth:
            edges.append((a, pid, WRITES))
        edges.append((pid, vid0 + t % n_venues, PUBLISHED_IN))
    for v in range(n_venues):
        nodes.append((vid0 + v, VENUE, None, f"v{v}"))
    g = freeze_graph(nodes, edges)

    pubs = np.zeros(n_authors, dtype=np.int64)
    for _, auth in papers:
        for a in auth:
            pubs[a] += 1
    leaders = [max(team, key=lambda a: (pubs[a], -a)) for team in members]
    _check_separability(g, members, cfg)
    return PlantedGraph(g, truth, leaders)


def _check_separability(g: HeterogeneousGraph, members, cfg: PlantedConfig):
    """Each planted team must be connected through its own papers."""
    for t, team in enumerate(members):
        inside = set(team)
        seen = {team[0]}
        frontier = [team[0]]
        while frontier:
            a = frontier.pop()
            for p, _ in g.neighbors(a, WRITES):
                for b, _ in g.neighbors(p, WRITES):
                    if b in inside and b not in seen:
                        seen.add(b)
                        frontier.append(b)
        if seen != inside:
            raise InfeasibleConfig(f"planted team {t} is not internally connected")


def coauthor_components(g: HeterogeneousGraph) -> list[set[int]]:
    """Connected components of the author co-authorship projection."""
    authors = [int(a) for a in g.nodes_of_type(AUTHOR)]
    comp: dict[int, int] = {}
    out = []
    for s in authors:
        if s in comp:
            continue
        cur = {s}
        comp[s] = len(out)
        stack = [s]
        while stack:
            a = stack.pop()
            for p, _ in g.neighbors(a, WRITES):
                for b, _ in g.neighbors(p, WRITES):
                    if b not in comp:
                        comp[b] = len(out)
                        cur.add(b)
                        stack.append(b)
        out.append(cur)
    return out
