import itertools

import networkx as nx
import pytest

from cpcsurf.graph import (
    CoveringMap,
    GraphError,
    LeafVertexError,
    SurfaceGraph,
    build_full_ternary_tree,
    invert_permutation,
    permutation_sign,
    relabel,
    tree_size,
    unroll_covering,
)
from cpcsurf import gallery


def to_nx(g: SurfaceGraph) -> nx.MultiGraph:
    G = nx.MultiGraph()
    G.add_nodes_from(g.vertices)
    G.add_edges_from(g.edges())
    return G


@pytest.mark.parametrize("depth", [1, 2, 3, 4, 5])
def test_full_tree_counts_match_closed_form(depth):
    t = build_full_ternary_tree(depth)
    G = to_nx(t)
    assert nx.is_tree(G)
    dist = nx.single_source_shortest_path_length(G, 0)
    leaves = [v for v in t.vertices if t.is_leaf(v)]
    # brute-force level counts: 1, 3, 6, 12, ...
    assert len(t) == sum(1 if d == 0 else 3 * 2 ** (d - 1) for d in range(depth + 1))
    assert len(t) == tree_size(depth)
    assert all(dist[v] == depth for v in leaves)
    assert len(leaves) == 3 * 2 ** (depth - 1)


def test_depth_zero_is_a_single_vertex():
    t = build_full_ternary_tree(0)
    assert len(t) == 1 and t.edges() == [] and t.is_tree()


def test_tree_triples_put_parent_last():
    t = build_full_ternary_tree(3)
    assert t.kind(0) == "root"
    for v in t.non_leaves():
        if v == 0:
            continue
        parent = t.triple(v)[2]
        assert v in t.triple(parent) or t.neighbors[parent] == (v,)
    assert all(t.kind(v) == "leaf" for v in t.vertices if t.is_leaf(v))


def test_leaf_has_no_triple():
    t = build_full_ternary_tree(1)
    with pytest.raises(LeafVertexError):
        t.triple(1)


@pytest.mark.parametrize(
    "rows, match",
    [
        (((1, 2),), "2 incident edges"),
        (((0, 1, 1), (0,)), "loop"),
        (((1, 2, 3), (0,), (0,), (9,)), "missing vertex"),
        (((1, 2, 3), (0,), (0,), (1,)), "symmetrically"),
    ],
)
def test_malformed_graphs_are_rejected(rows, match):
    with pytest.raises(GraphError, match=match):
        SurfaceGraph(rows)


def test_multi_edges_pair_slots_in_order():
    # theta graph: two vertices joined by three edges
    g = SurfaceGraph(((1, 1, 1), (0, 0, 0)))
    assert len(g.edges()) == 3
    assert [g.slot_partner(0, i) for i in range(3)] == [(1, 0), (1, 1), (1, 2)]
    assert not g.is_tree()


def test_paths_are_non_backtracking():
    g = SurfaceGraph(((1, 1, 1), (0, 0, 0)))
    # from 0: 3 choices, then 2 at each step
    assert len(list(g.iter_paths(0, 3))) == 3 * 2 * 2


def test_unrolled_torus_is_a_label_compatible_tree():
    torus = gallery.cpc_torus().graph
    for depth in (1, 2, 4):
        cov = unroll_covering(torus, 0, depth)
        assert cov.source.is_tree()
        assert len(cov.source) == tree_size(depth)
        assert cov.is_label_compatible()


def test_unrolling_counts_non_backtracking_walks():
    g = gallery.chiral_cylinder().graph
    depth = 3
    start = g.non_leaves()[0]
    cov = unroll_covering(g, start, 2)
    walks = list(g.iter_paths(start, 2))
    level2 = [v for v in cov.source.vertices if cov.source.is_leaf(v)]
    assert sorted(cov(v) for v in level2) == sorted(w[-1] for w in walks)
    with pytest.raises(GraphError):
        unroll_covering(g, start, depth + 10)  # runs into the open boundary


def test_covering_reports_violations():
    t = build_full_ternary_tree(1)
    target = SurfaceGraph(((1, 2, 3), (0,), (0,), (0,)))
    assert CoveringMap(t, target, (0, 1, 2, 3)).is_label_compatible()
    assert CoveringMap(t, target, (0, 2, 1, 3)).violations() == [0]


def test_relabel_moves_edges_to_new_labels():
    t = build_full_ternary_tree(1)
    assert relabel(t, 0, (2, 1, 3)).triple(0) == (2, 1, 3)
    assert relabel(t, 0, (2, 3, 1)).triple(0) == (3, 1, 2)
    with pytest.raises(GraphError):
        relabel(t, 0, (1, 1, 2))


def test_permutation_helpers():
    perms = list(itertools.permutations((1, 2, 3)))
    assert sorted(permutation_sign(p) for p in perms) == [-1, -1, -1, 1, 1, 1]
    for p in perms:
        q = invert_permutation(p)
        assert tuple(q[p[i] - 1] for i in range(3)) == (1, 2, 3)
