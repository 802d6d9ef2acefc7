"""Core graph layer: measures, the transport identity, windows, contraction."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiredtree.graph import (
    ContractionMap,
    HierarchicalPartition,
    InputError,
    TotalOrder,
    WeightedMultigraph,
    WiredWindow,
    build_partition,
    contract_edges,
    edge_key,
    edge_measure,
    renormalized_nu,
    validate_window,
    verify_mtp,
)
from wiredtree.generators import grid_window, ladder_window, line_window, ray_window

from conftest import path_graph, triangle, unit_graph


# -- edge_measure --------------------------------------------------------


def test_edge_measure_triangle_all_edges_is_6():
    G = triangle()
    assert edge_measure(G, G.sorted_edges()) == 6


def test_edge_measure_empty_is_0():
    assert edge_measure(triangle(), []) == 0


def test_edge_measure_weighted_path_is_9():
    G = WeightedMultigraph(
        {"a": 1, "b": 2, "c": 4},
        {("a", "b"): 1, ("b", "c"): 1},
    )
    assert edge_measure(G, [("a", "b"), ("b", "c")]) == 9


def test_edge_measure_unknown_edge_rejected():
    with pytest.raises(InputError):
        edge_measure(triangle(), [("a", "z")])


def test_edge_measure_respects_multiplicity():
    G = unit_graph([("a", "b", 3)])
    assert edge_measure(G, [("a", "b")]) == 6  # 3 instances of mass 2
    assert edge_measure(G, {("a", "b"): 2}) == 4
    with pytest.raises(InputError):
        edge_measure(G, {("a", "b"): 4})


def test_mu_total_matches_edge_measure():
    G = triangle()
    assert G.mu_total() == edge_measure(G, G.sorted_edges())


# -- verify_mtp ----------------------------------------------------------


def test_mtp_zero_transport_holds():
    assert verify_mtp(triangle(), {})


def test_mtp_edge_indicator_holds_for_nonconstant_nu():
    G = WeightedMultigraph({"a": 1, "b": 2, "c": 7}, {("a", "b"): 1, ("b", "c"): 1})
    f = {}
    for u, v in G.sorted_edges():
        f[(u, v)] = Fraction(1)
        f[(v, u)] = Fraction(1)
    assert verify_mtp(G, f)


def test_mtp_constant_cocycle_mutant_fails_with_4_vs_3():
    """Designated mutant fixture: the identity-cocycle corruption is caught.

    Path a–b–c with nu = (1, 2, 2) and f the downward edge indicator
    (mass flows toward 'a').  Hand evaluation:
      send side   = nu(b)*f(b,a) + nu(c)*f(c,b) = 2 + 2 = 4
      corrupted receive side (w ≡ 1)
                  = nu(a)*f(b,a) + nu(b)*f(c,b) = 1 + 2 = 3
    so the mutant must report inequality (4 ≠ 3), while the true
    nu-ratio cocycle restores equality at 4.
    """
    G = WeightedMultigraph({"a": 1, "b": 2, "c": 2}, {("a", "b"): 1, ("b", "c"): 1})
    f = {("b", "a"): Fraction(1), ("c", "b"): Fraction(1)}
    send = sum(G.nu(x) * fx for (x, _y), fx in f.items())
    receive_corrupted = sum(G.nu(y) * fx for (_x, y), fx in f.items())
    assert (send, receive_corrupted) == (4, 3)
    assert not verify_mtp(G, f, cocycle=lambda x, y: Fraction(1))
    assert verify_mtp(G, f)


def test_mtp_two_vertex_mutant_also_caught():
    # one-way unit transport on a path with nu = (1, 2): 1 sent vs 2 received
    G = WeightedMultigraph({"a": 1, "b": 2}, {("a", "b"): 1})
    f = {("a", "b"): Fraction(1)}
    assert not verify_mtp(G, f, cocycle=lambda x, y: Fraction(1))
    assert verify_mtp(G, f)


@given(
    nu=st.lists(st.integers(1, 9), min_size=4, max_size=4),
    fvals=st.lists(st.fractions(0, 5), min_size=12, max_size=12),
)
@settings(max_examples=60, deadline=None)
def test_mtp_holds_for_all_f_with_true_cocycle(nu, fvals):
    vs = ["a", "b", "c", "d"]
    G = WeightedMultigraph(
        {v: Fraction(n) for v, n in zip(vs, nu)},
        {(u, v): 1 for i, u in enumerate(vs) for v in vs[i + 1 :]},
    )
    pairs = [(u, v) for u in vs for v in vs if u != v]
    f = {p: x for p, x in zip(pairs, fvals)}
    assert verify_mtp(G, f)


# -- mu additivity / monotonicity ---------------------------------------


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_mu_additive_and_monotone(data):
    G = grid_window(3).graph
    edges = G.sorted_edges()
    a = data.draw(st.sets(st.sampled_from(edges)))
    b = data.draw(st.sets(st.sampled_from(edges)))
    disjoint_b = b - a
    assert edge_measure(G, sorted(a | disjoint_b)) == edge_measure(G, sorted(a)) + edge_measure(
        G, sorted(disjoint_b)
    )
    assert edge_measure(G, sorted(a)) <= edge_measure(G, edges)


# -- windows -------------------------------------------------------------


def test_ray_window_is_end_faithful():
    report = validate_window(ray_window(8))
    assert report.ok and report.end_faithful


def test_line_window_is_two_ended():
    report = validate_window(line_window(4))
    assert not report.end_faithful
    assert any(subset == ("0",) and n == 2 for subset, n in report.failures)


def test_8x8_grid_outer_ring_end_faithful():
    W = grid_window(8)
    assert len(W.boundary) == 28
    report = validate_window(W)
    assert report.ok
    assert report.checked_sets == 36  # removing any single interior vertex


def test_disconnected_graph_rejected():
    G = unit_graph([("a", "b"), ("c", "d")])
    report = validate_window(WiredWindow(G, frozenset({"a"})))
    assert not report.ok and not report.connected


def test_empty_boundary_rejected():
    with pytest.raises(InputError):
        WiredWindow(path_graph(3), frozenset())


def test_boundary_must_exist_in_graph():
    with pytest.raises(InputError):
        WiredWindow(path_graph(3), frozenset({"zz"}))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_cut_vertex_between_two_boundary_parts_detected(k):
    # two k-paths glued at a cut vertex, boundary at the far ends
    left = [(f"L{i}", f"L{i+1}") for i in range(k - 1)] + [("L0", "m")]
    right = [(f"R{i}", f"R{i+1}") for i in range(k - 1)] + [("R0", "m")]
    G = unit_graph(left + right)
    W = WiredWindow(G, frozenset({f"L{k-1}", f"R{k-1}"}))
    assert not validate_window(W).end_faithful


def test_sampled_radius_above_two_notes_incompleteness():
    W = WiredWindow(grid_window(6).graph, grid_window(6).boundary, check_radius=3)
    report = validate_window(W, sample_size=40, seed=1)
    assert any("sampled" in n for n in report.notes)
    assert report.ok


# -- contraction ---------------------------------------------------------


def test_contract_triangle_edge_gives_double_edge():
    G = triangle()
    cmap = ContractionMap(G.vertices)
    Q = contract_edges(G, [("a", "b")], cmap)
    assert Q.vertices == {"a", "c"}
    assert Q.multiplicity("a", "c") == 2
    assert Q.nu("a") == 2 and Q.nu("c") == 1


def test_contract_nothing_is_identity():
    G = triangle()
    cmap = ContractionMap(G.vertices)
    assert contract_edges(G, [], cmap) == G
    assert cmap.current_representatives() == sorted(G.vertices)


def test_contract_path_abc_in_abcd():
    G = path_graph(3)  # 0-1-2-3
    cmap = ContractionMap(G.vertices)
    Q = contract_edges(G, [("0", "1"), ("1", "2")], cmap)
    assert Q.vertices == {"0", "3"}
    assert Q.nu("0") == 3
    assert Q.multiplicity("0", "3") == 1
    assert cmap.preimage("0") == {"0", "1", "2"}


def test_contract_drops_self_loops_and_merges_parallels():
    G = unit_graph([("a", "b"), ("a", "c"), ("b", "c"), ("c", "d"), ("a", "d")])
    cmap = ContractionMap(G.vertices)
    Q = contract_edges(G, [("a", "b"), ("b", "c")], cmap)
    # a-c and b-c became loops at the blob; c-d and a-d became parallel a-d
    assert Q.vertices == {"a", "d"}
    assert Q.multiplicity("a", "d") == 2


def test_expand_tree_reinserts_blob_trees():
    G = unit_graph([("a", "b"), ("b", "c"), ("c", "d"), ("a", "d"), ("b", "d")])
    cmap = ContractionMap(G.vertices)
    Q = contract_edges(G, [("a", "b"), ("b", "c")], cmap)
    quotient_tree = [("a", "d")]
    expanded = cmap.expand_tree(quotient_tree)
    # 3 blob vertices need 2 tree edges, plus the lowered quotient edge
    assert len(expanded) == 3
    from wiredtree.oracle import oracle_connected

    assert oracle_connected(G.vertices, expanded)


@given(st.data())
@settings(max_examples=40, deadline=None)
def test_contract_expand_roundtrip_on_random_sequences(data):
    G = grid_window(3).graph
    cmap = ContractionMap(G.vertices)
    current = G
    for _ in range(data.draw(st.integers(0, 3))):
        pool = current.sorted_edges()
        if not pool:
            break
        batch = data.draw(st.sets(st.sampled_from(pool), max_size=4))
        current = contract_edges(current, sorted(batch), cmap)
    # vertex preimages partition the original vertex set
    seen: set[str] = set()
    for rep in cmap.current_representatives():
        pre = cmap.preimage(rep)
        assert not (pre & seen)
        seen |= pre
    assert seen == G.vertices
    # any spanning tree of the quotient expands to a spanning tree of G
    from wiredtree.cycles import _kruskal_forest
    from wiredtree.oracle import oracle_connected

    order = TotalOrder.by_id(current.vertices)
    qtree = _kruskal_forest(current, order)
    expanded = cmap.expand_tree(qtree)
    assert len(expanded) == len(G.vertices) - 1
    assert oracle_connected(G.vertices, expanded)


# -- hierarchical partitions ---------------------------------------------


def test_dyadic_4x4_levels_16_4_1():
    W = grid_window(4)
    P = build_partition(W, "dyadic-grid")
    assert [len(P.classes(i)) for i in range(P.depth)] == [16, 4, 1]
    assert P.validate_on(W.graph) == []


def test_single_vertex_partition_one_level_one_class():
    G = WeightedMultigraph({"0,0": 1}, {})
    P = build_partition(WiredWindow(G, frozenset({"0,0"})), "dyadic-grid")
    assert P.depth == 1
    assert P.classes(0) == [frozenset({"0,0"})]


def test_tree_guided_partition_classes_connected():
    from wiredtree.cycles import spanning_tree
    from wiredtree.generators import random_window

    W = random_window(5, Fraction(3, 10), seed=7)
    order = TotalOrder.by_id(W.graph.vertices)
    T = spanning_tree(W, order)
    P = build_partition(W, "tree-guided", tree_edges=T.edges)
    assert P.validate_on(W.graph) == []
    # every class is connected inside the tree itself, not just in G
    tree_graph = W.graph.spanning_subgraph(T.edges)
    for lvl in range(P.depth):
        for c in P.classes(lvl):
            assert len(tree_graph.bfs_reach([min(c)], allowed=c)) == len(c)


def test_partition_validation_rejects_bad_nesting():
    with pytest.raises(InputError):
        HierarchicalPartition(
            [
                [{"a"}, {"b"}, {"c"}],
                [{"a", "b"}, {"c"}],
                [{"a"}, {"b", "c"}],  # not a coarsening
            ]
        )


def test_partition_level0_must_be_singletons():
    with pytest.raises(InputError):
        HierarchicalPartition([[{"a", "b"}]])


def test_partition_scheme_unknown_rejected():
    with pytest.raises(InputError):
        build_partition(grid_window(2), "spiral")


def test_dyadic_rejects_non_coordinate_ids():
    W = ray_window(3)
    with pytest.raises(InputError):
        build_partition(W, "dyadic-grid")


# -- total orders and renormalization ------------------------------------


def test_total_order_random_is_deterministic_and_distinct():
    vs = [f"{r},{c}" for r in range(4) for c in range(4)]
    o1 = TotalOrder.random(vs, seed=11)
    o2 = TotalOrder.random(vs, seed=11)
    assert o1.labels() == o2.labels()
    assert len(set(o1.labels().values())) == len(vs)
    assert TotalOrder.random(vs, seed=12).labels() != o1.labels()


def test_total_order_rejects_duplicate_labels():
    with pytest.raises(InputError):
        TotalOrder({"a": 1, "b": 1})


def test_renormalized_nu_sums_to_one():
    G = WeightedMultigraph({"a": 1, "b": 2, "c": 5}, {("a", "b"): 1, ("b", "c"): 1})
    R = renormalized_nu(G)
    assert R.nu_total() == 1
    assert R.nu("b") == Fraction(2, 8)
    # measure ratios are preserved
    assert R.mu(("a", "b")) * G.mu_total() == G.mu(("a", "b")) * R.mu_total()


def test_zero_measure_only_by_exception():
    with pytest.raises(InputError):
        WeightedMultigraph({"a": 0, "b": 1}, {("a", "b"): 1})
    G = WeightedMultigraph({"a": 0, "b": 1}, {("a", "b"): 1}, zero_measure_ok=frozenset({"a"}))
    assert G.nu("a") == 0


def test_edge_key_normalizes_and_rejects_loops():
    assert edge_key("b", "a") == ("a", "b")
    with pytest.raises(InputError):
        edge_key("a", "a")
