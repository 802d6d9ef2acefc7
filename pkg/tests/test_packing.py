"""Duplication, spanning-tree packing, and the 2/3 light-tree bound."""

from __future__ import annotations

import random as pyrandom
from fractions import Fraction

import pytest

from wiredtree.connectivity import max_edge_disjoint_paths
from wiredtree.graph import InputError, InvariantError, WeightedMultigraph
from wiredtree.oracle import OracleBudget, oracle_connected, oracle_tree_packing
from wiredtree.packing import (
    Packing,
    PackingWitness,
    duplicate_edges,
    pack_spanning_trees,
    pick_light_tree,
)

from conftest import cycle_graph, doubled_triangle, k4, triangle, unit_graph


def test_duplicate_triangle():
    assert duplicate_edges(triangle()) == doubled_triangle()


def test_duplicate_empty_edge_set():
    G = WeightedMultigraph({"a": 1}, {})
    assert duplicate_edges(G).edge_multiplicities() == {}


def test_duplicate_k4_is_6_edge_connected():
    D = duplicate_edges(k4())
    vs = sorted(D.vertices)
    for i, x in enumerate(vs):
        for y in vs[i + 1 :]:
            assert max_edge_disjoint_paths(D, x, y, cap=12) >= 6


def test_pack_doubled_triangle_three_trees():
    out = pack_spanning_trees(doubled_triangle(), 3)
    assert isinstance(out, Packing)
    assert out.k == 3
    for tree in out.trees:
        assert len(tree) == 2
        assert oracle_connected({"a", "b", "c"}, list(tree))


def test_pack_doubled_c5_infeasible_with_witness():
    out = pack_spanning_trees(cycle_graph(5, mult=2), 3)
    assert isinstance(out, PackingWitness)
    assert out.crossing < 3 * (len(out.partition) - 1)
    # the witness is a genuine partition of the vertex set
    union = set()
    for part in out.partition:
        assert not (part & union)
        union |= part
    assert union == set(cycle_graph(5).vertices)


def test_pack_doubled_k4_three_trees():
    out = pack_spanning_trees(duplicate_edges(k4()), 3)
    assert isinstance(out, Packing)


def test_pack_disconnected_rejected():
    G = unit_graph([("a", "b"), ("c", "d")])
    with pytest.raises(InputError):
        pack_spanning_trees(G, 1)


def test_pack_single_vertex():
    G = WeightedMultigraph({"a": 1}, {})
    out = pack_spanning_trees(G, 3)
    assert isinstance(out, Packing)
    assert out.trees == [frozenset()] * 3


def test_packing_validates_instance_disjointness():
    G = doubled_triangle()
    with pytest.raises(InvariantError):
        Packing(
            [
                frozenset({("a", "b"), ("b", "c")}),
                frozenset({("a", "b"), ("b", "c")}),
                frozenset({("a", "b"), ("b", "c")}),  # ("a","b") used 3x, mult 2
            ],
            G,
        )


def test_pick_light_tree_boundary_case():
    # three trees of weight 6 each against total 9: 6 <= (2/3)*9 exactly
    G = doubled_triangle()
    w = {("a", "b"): Fraction(2), ("a", "c"): Fraction(3), ("b", "c"): Fraction(4)}
    out = pack_spanning_trees(G, 3, weights=w)
    assert isinstance(out, Packing)
    weights = out.tree_weights()
    assert sorted(weights) == [5, 6, 7]  # 2+3, 2+4, 3+4
    idx = pick_light_tree(out, total=Fraction(9))
    assert weights[idx] == 5


def test_pick_light_tree_picks_minimum():
    G = doubled_triangle()
    p = Packing(
        [
            frozenset({("a", "b"), ("b", "c")}),
            frozenset({("a", "c"), ("b", "c")}),
            frozenset({("a", "b"), ("a", "c")}),
        ],
        G,
        weights={("a", "b"): Fraction(1), ("b", "c"): Fraction(1), ("a", "c"): Fraction(8)},
    )
    # weights: 2, 9, 9; total declared 9 -> bound 6 -> index 0
    assert pick_light_tree(p, total=Fraction(9)) == 0


def test_pick_light_tree_invariant_error_when_bound_unattainable():
    G = doubled_triangle()
    p = Packing(
        [frozenset({("a", "b"), ("b", "c")})],
        G,
        weights={("a", "b"): Fraction(5), ("b", "c"): Fraction(5)},
    )
    with pytest.raises(InvariantError):
        pick_light_tree(p, total=Fraction(9))  # 10 > 6


def _random_connected_multigraph(rng: pyrandom.Random, n: int) -> WeightedMultigraph:
    vs = [chr(ord("a") + i) for i in range(n)]
    edges: dict[tuple[str, str], int] = {}
    for i in range(1, n):
        u, v = vs[rng.randint(0, i - 1)], vs[i]
        edges[(min(u, v), max(u, v))] = rng.randint(1, 2)
    extra = rng.randint(0, n * (n - 1) // 2)
    for _ in range(extra):
        u, v = rng.sample(vs, 2)
        key = (min(u, v), max(u, v))
        edges[key] = edges.get(key, 0) + rng.randint(1, 2)
    return WeightedMultigraph({v: Fraction(1) for v in vs}, edges)


def test_feasibility_matches_oracle_on_small_instances():
    rng = pyrandom.Random(99)
    budget = OracleBudget(max_vertices=8, max_edges=64, max_nodes=30_000_000)
    agree = 0
    for _ in range(60):
        G = _random_connected_multigraph(rng, rng.randint(2, 5))
        out = pack_spanning_trees(G, 3)
        want, _ = oracle_tree_packing(G, 3, budget=budget)
        assert isinstance(out, Packing) == want
        agree += 1
    assert agree == 60


def test_duplicated_6ec_graphs_always_pack():
    rng = pyrandom.Random(7)
    for _ in range(30):
        n = rng.randint(3, 8)
        G = _random_connected_multigraph(rng, n)
        D = duplicate_edges(G)
        vs = sorted(D.vertices)
        six_connected = all(
            max_edge_disjoint_paths(D, vs[0], y, cap=6) >= 6 for y in vs[1:]
        )
        if not six_connected:
            continue
        assert isinstance(pack_spanning_trees(D, 3), Packing)


def test_each_original_edge_used_at_most_twice_after_duplication():
    rng = pyrandom.Random(13)
    for _ in range(20):
        G = _random_connected_multigraph(rng, rng.randint(3, 6))
        D = duplicate_edges(G)
        out = pack_spanning_trees(D, 3)
        if not isinstance(out, Packing):
            continue
        for key, m in G.edge_multiplicities().items():
            used = sum(1 for t in out.trees if key in t)
            assert used <= min(3, 2 * m)
