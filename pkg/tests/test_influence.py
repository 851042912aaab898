import itertools

import networkx as nx
import numpy as np
import pytest

from conftest import APA, random_hin
from hinforge.errors import EmptyGraph, KTooLarge
from hinforge.influence import (
    InfluenceScores,
    Projection,
    attention_fixed_point,
    centrality,
    coauthor_projection,
    nac_influence,
    received_attention,
    topk_intersection,
)
from hinforge.model import EmbeddingTable, Hyperparams, ModelInputs, ModelParams, embed_all
from oracles import brute_centralities
from test_model import randomize, star


def proj(n, edges):
    return Projection.from_edges(range(n), edges)


def scores(kind, n, edges):
    return centrality(proj(n, edges), kind).scores


def test_path_graph_betweenness():
    bc = scores("BC", 3, [(0, 1), (1, 2)])
    assert bc.tolist() == [0.0, 1.0, 0.0]


def test_star_degree():
    dc = scores("DC", 6, [(0, k) for k in range(1, 6)])
    assert dc[0] == 1.0 and np.allclose(dc[1:], 0.2, rtol=0, atol=1e-15)


def test_complete_graph_uniform():
    edges = list(itertools.combinations(range(4), 2))
    for kind in ("DC", "BC", "CC", "EC"):
        s = scores(kind, 4, edges)
        assert np.allclose(s, s[0], rtol=0, atol=1e-12), kind


def test_empty_projection():
    with pytest.raises(EmptyGraph):
        centrality(Projection.from_edges([], []), "DC")


def random_simple_graph(rng, n, p):
    return [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p]


@pytest.mark.parametrize("seed", range(25))
def test_centralities_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    edges = random_simple_graph(rng, n, rng.uniform(0.15, 0.7))
    ref = brute_centralities(n, edges)
    p = proj(n, edges)
    for kind in ("DC", "BC", "CC", "EC"):
        got = centrality(p, kind).scores
        assert np.max(np.abs(got - ref[kind])) < 1e-8, kind


def test_centralities_agree_with_networkx():
    rng = np.random.default_rng(99)
    n = 30
    edges = random_simple_graph(rng, n, 0.12)
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    p = proj(n, edges)
    bc = nx.betweenness_centrality(G, normalized=True)
    hc = nx.harmonic_centrality(G)
    dc = nx.degree_centrality(G)
    assert np.allclose(centrality(p, "BC").scores, [bc[i] for i in range(n)], rtol=0, atol=1e-12)
    assert np.allclose(centrality(p, "CC").scores, [hc[i] / (n - 1) for i in range(n)], rtol=0, atol=1e-12)
    assert np.allclose(centrality(p, "DC").scores, [dc[i] for i in range(n)], rtol=0, atol=1e-12)


def test_eigenvector_zero_outside_largest_component():
    edges = [(0, 1), (1, 2), (2, 0), (3, 4)]
    ec = scores("EC", 6, edges)
    assert np.all(ec[3:] == 0.0)
    assert abs(np.linalg.norm(ec) - 1.0) < 1e-12


def test_topk_intersection():
    ids = np.arange(8)
    a = InfluenceScores(ids, np.array([8, 7, 6, 5, 0, 0, 0, 0.0]), "x")
    b = InfluenceScores(ids, np.array([0, 0, 8, 7, 6, 5, 0, 0.0]), "y")
    assert topk_intersection(a, b, 4) == 0.5
    assert topk_intersection(a, a, 3) == 1.0
    c = InfluenceScores(ids, np.array([0, 0, 0, 0, 8, 7, 6, 5.0]), "z")
    assert topk_intersection(a, c, 4) == 0.0
    with pytest.raises(KTooLarge):
        a.top(9)
    assert topk_intersection(a, c, 8) == 1.0


def test_ranking_ties_by_id():
    s = InfluenceScores(np.array([4, 2, 9]), np.array([1.0, 1.0, 2.0]), "x")
    assert s.ranking().tolist() == [9, 2, 4]


def test_received_attention_oracle():
    rng = np.random.default_rng(0)
    n = 7
    att = np.zeros((n, n))
    for i in range(n - 1):  # last node attends to nobody and nobody attends to node 0
        nb = [j for j in range(1, n) if j != i and rng.random() < 0.6] or [n - 1 if i != n - 1 else 1]
        w = rng.random(len(nb))
        att[i, nb] = w / w.sum()
    got = received_attention(att)
    for j in range(n):
        incoming = [att[i, j] for i in range(n) if att[i, j] > 0]
        want = sum(incoming) / len(incoming) if incoming else 0.0
        assert abs(got[j] - want) < 1e-12
    assert got[0] == 0.0


def test_fixed_point_solves_stationary_equation():
    rng = np.random.default_rng(1)
    n = 9
    att = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
    np.fill_diagonal(att, 0.0)
    att = att + att.T  # symmetric support, like a symmetric meta-path
    att[0, :] = 0.0
    att[:, 0] = 0.0  # isolated node
    rows = att.sum(axis=1, keepdims=True)
    att = np.divide(att, rows, out=np.zeros_like(att), where=rows > 0)
    x = attention_fixed_point(att)
    assert x[0] == 0.0
    live = np.arange(1, n)
    assert np.max(np.abs((x @ att)[live] - x[live])) < 1e-10
    assert np.all(x >= 0) and np.all(x <= 1)


def test_star_hub_scores_highest():
    g = star()
    inputs = ModelInputs(g, [APA])
    params = randomize(ModelParams.init(inputs.n, 1, 2, Hyperparams(d=3, k=2)), 4)
    table = embed_all(params, inputs)
    for mode in ("fixed_point", "mean"):
        s = nac_influence(table, mode).scores
        assert s[0] >= s[1:].max()
    # every spoke's only neighbor is the hub
    assert np.allclose(table.attention[0][1:, 0], 1.0, rtol=0, atol=0)


def test_nac_isolated_node_scores_zero():
    att = np.zeros((3, 3))
    att[0, 1] = att[1, 0] = 1.0
    table = EmbeddingTable(np.arange(3), np.zeros((3, 2)), [np.zeros((3, 2))], np.ones((3, 1)), [att])
    for mode in ("fixed_point", "mean"):
        assert nac_influence(table, mode).scores[2] == 0.0


def test_nac_averages_over_paths():
    a1 = np.array([[0, 1.0], [1.0, 0]])
    a2 = np.zeros((2, 2))
    table = EmbeddingTable(np.arange(2), np.zeros((2, 1)), [np.zeros((2, 1))] * 2, np.full((2, 2), 0.5),
                           [a1, a2])
    assert nac_influence(table, "mean").scores.tolist() == [0.5, 0.5]


def test_projection_matches_coauthorship(rng):
    g = random_hin(rng, 7, 6, 2)
    p = coauthor_projection(g, APA)
    dense = p.dense()
    for a, b in itertools.combinations(range(7), 2):
        papers_a = {x for x, _ in g.neighbors(a, "writes")}
        papers_b = {x for x, _ in g.neighbors(b, "writes")}
        assert dense[a, b] == float(bool(papers_a & papers_b))
