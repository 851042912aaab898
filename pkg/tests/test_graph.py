import numpy as np
import pytest
import scipy.sparse as sp

from conftest import APA, APVPA, random_hin
from hinforge.errors import (
    DanglingEdge,
    DuplicateNodeId,
    GraphFormatError,
    MetaPathTooLong,
    TypeMismatch,
    UnknownType,
    WrongStartType,
)
from hinforge.graph import (
    MetaPath,
    freeze_graph,
    meta_path_adjacency,
    neighbors_via,
    path_instance_counts,
    read_graph,
    write_graph,
)
from oracles import dfs_walk_counts


def small():
    nodes = [(0, "author"), (1, "author"), (2, "paper")]
    return freeze_graph(nodes, [(0, 2, "writes"), (1, 2, "writes")])


def test_freeze_basic():
    g = small()
    assert g.n_nodes == 3
    assert g.degree(2) == 2
    assert g.neighbors(0, "writes") == [(2, 1)]
    assert g.neighbors(2, "writes") == [(0, 1), (1, 1)]


def test_freeze_errors():
    with pytest.raises(DanglingEdge):
        freeze_graph([(0, "author")], [(0, 99, "writes")])
    with pytest.raises(DuplicateNodeId):
        freeze_graph([(0, "author"), (0, "paper")])
    with pytest.raises(GraphFormatError):
        freeze_graph([(0, "author"), (2, "paper")])
    with pytest.raises(TypeMismatch):
        freeze_graph([(0, "author"), (1, "paper"), (2, "venue")],
                     [(0, 1, "writes"), (1, 2, "writes")])
    with pytest.raises(TypeMismatch):
        freeze_graph([(0, "author"), (1, "venue")], [(0, 1, "writes")],
                     schema={"writes": ("author", "paper")})


def test_isolated_nodes_and_idempotent_freeze():
    g = freeze_graph([(i, "author") for i in range(5)])
    assert g.n_nodes == 5 and g.edges() == []
    assert freeze_graph(g) is g
    again = freeze_graph(g.nodes, [(u, v, t) for u, v, t, m in g.edges() for _ in range(m)])
    assert again == g


def test_type_interning_dense_and_bijective():
    g = small()
    for interner in (g.node_types, g.edge_types):
        ids = [interner.id(n) for n in interner.names]
        assert ids == list(range(len(interner)))
        assert [interner.name(i) for i in ids] == list(interner.names)


def test_counts_single_paper():
    c = path_instance_counts(small(), APA)
    assert c[0, 1] == 1 and c[1, 0] == 1
    assert c[0, 0] == 0


def test_counts_two_papers():
    nodes = [(0, "author"), (1, "author"), (2, "paper"), (3, "paper"), (4, "author")]
    edges = [(0, 2, "writes"), (0, 3, "writes"), (1, 2, "writes"), (1, 3, "writes")]
    g = freeze_graph(nodes, edges)
    c = path_instance_counts(g, APA)
    assert c[0, 1] == 2
    assert c[4].nnz == 0
    adj = meta_path_adjacency(g, APA)
    cols, w = adj.row(4)
    assert cols.size == 0 and w.size == 0


def test_counts_excludes_internal_return_to_start():
    # a0 - p0 - v0 - p1 - a0 would revisit a0 only at the end; a0-p0-a0 style loops are dropped
    nodes = [(0, "author"), (1, "author"), (2, "paper"), (3, "paper"), (4, "venue")]
    edges = [(0, 2, "writes"), (1, 3, "writes"), (0, 3, "writes"),
             (2, 4, "published_in"), (3, 4, "published_in")]
    g = freeze_graph(nodes, edges)
    c = path_instance_counts(g, APVPA)
    assert c[0, 0] == 0
    # a0 -> {p0,p1} -> v0 -> p1 -> a1 : two walks
    assert c[0, 1] == 2
    ref = dfs_walk_counts(g, APVPA, ["writes", "published_in", "published_in", "writes"])
    assert dict(sp.dok_matrix(c).items()) == {k: v for k, v in ref.items()}


def test_adjacency_weights():
    nodes = [(0, "author"), (1, "author"), (2, "author"), (3, "paper"), (4, "paper"),
             (5, "paper"), (6, "paper")]
    edges = [(0, 3, "writes"), (0, 4, "writes"), (0, 5, "writes"), (0, 6, "writes"),
             (1, 3, "writes"), (1, 4, "writes"), (1, 5, "writes"), (2, 6, "writes")]
    adj = meta_path_adjacency(freeze_graph(nodes, edges), APA)
    cols, w = adj.row(0)
    assert cols.tolist() == [1, 2]
    assert w.tolist() == [0.75, 0.25]
    assert neighbors_via(adj, 0) == [(1, 0.75), (2, 0.25)]
    with pytest.raises(WrongStartType):
        adj.row(3)


def test_neighbors_via_tie_order():
    nodes = [(0, "author"), (1, "author"), (2, "author"), (3, "paper"), (4, "paper")]
    edges = [(0, 3, "writes"), (2, 3, "writes"), (0, 4, "writes"), (1, 4, "writes")]
    adj = meta_path_adjacency(freeze_graph(nodes, edges), APA)
    assert neighbors_via(adj, 0) == [(1, 0.5), (2, 0.5)]


def test_multi_edges_count_as_multiplicity():
    nodes = [(0, "author"), (1, "author"), (2, "paper")]
    g = freeze_graph(nodes, [(0, 2, "writes"), (0, 2, "writes"), (1, 2, "writes")])
    assert g.edges() == [(0, 2, "writes", 2), (1, 2, "writes", 1)]
    assert path_instance_counts(g, APA)[0, 1] == 2


def test_meta_path_validation():
    with pytest.raises(MetaPathTooLong):
        MetaPath(("author", "paper", "venue", "paper", "author", "paper"))
    with pytest.raises(GraphFormatError):
        MetaPath(("author",))
    with pytest.raises(UnknownType):
        path_instance_counts(small(), ["author", "venue", "author"])
    assert MetaPath.of(APA).symmetric
    assert not MetaPath.of(["author", "paper"]).symmetric


def test_counts_match_dfs_on_random_graphs():
    rng = np.random.default_rng(7)
    for _ in range(30):
        g = random_hin(rng, 4, 5, 2, max_mult=2)
        for mp, et in ((APA, ["writes"] * 2),
                       (APVPA, ["writes", "published_in", "published_in", "writes"]),
                       (["paper", "author", "paper"], ["writes"] * 2)):
            c = path_instance_counts(g, mp)
            ref = dfs_walk_counts(g, mp, et)
            assert dict(sp.dok_matrix(c).items()) == ref
            if MetaPath.of(mp).symmetric:
                assert (c != c.T).nnz == 0


def test_row_sums(rng):
    g = random_hin(rng, 8, 10, 3)
    adj = meta_path_adjacency(g, APVPA)
    for i, (cols, w) in adj.rows.items():
        assert np.all(w >= 0)
        assert i not in cols
        if cols.size:
            assert abs(w.sum() - 1.0) < 1e-9


def test_graph_file_round_trip(tmp_path, rng):
    g = random_hin(rng, 5, 6, 2, max_mult=2)
    nodes = [(n.node_id, n.type_name, n.label, f"name {n.node_id}") for n in g.nodes]
    g = freeze_graph(nodes, [(u, v, t) for u, v, t, m in g.edges() for _ in range(m)])
    path = tmp_path / "g.tsv"
    write_graph(g, path)
    assert read_graph(path) == g


def test_graph_file_errors(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("N\t0\tauthor\nX\t1\n")
    with pytest.raises(GraphFormatError):
        read_graph(path)
