"""Mass-reduction pipeline: substantiality, the five stages, and the driver."""

from __future__ import annotations

from fractions import Fraction

import pytest

from conftest import path_graph, unit_graph
from wiredtree.cycles import EndSelectedTree, comb_tree, core, spanning_tree
from wiredtree.generators import grid_window, ladder_window, line_window, ray_window
from wiredtree.graph import (
    InputError,
    InvariantError,
    TotalOrder,
    WeightedMultigraph,
    WiredWindow,
    build_partition,
    edge_key,
)
from wiredtree.pipeline import (
    check_substantial,
    contract_off_core,
    delete_offtree_in_classes,
    iteration_cap,
    prune_off_core,
    reduce_once,
    remove_redundant_and_contract_segments,
    run_reduction,
    sparse_substantial,
)


def boundary_tree(W, order=None):
    order = order or TotalOrder.by_id(W.graph.vertices)
    return spanning_tree(W, order, style="boundary"), order


# -- check_substantial ---------------------------------------------------------


class TestCheckSubstantial:
    def test_full_grid_is_substantial_with_no_isolated(self):
        W = grid_window(8)
        rep = check_substantial(W, W.graph)
        assert rep.ok
        assert rep.isolated_vertices == frozenset()
        assert rep.one_ended_vertices == W.graph.vertices

    def test_edgeless_subgraph_is_not_substantial(self):
        # every vertex is isolated, so the single ambient component holds
        # sixty boundary-touching parts instead of exactly one
        W = grid_window(8)
        empty = W.graph.without_edges(W.graph.edge_multiplicities())
        rep = check_substantial(W, empty)
        assert not rep.ok

    def test_isolated_strand_plus_one_ended_tail(self):
        W = ray_window(50)
        keep = {edge_key(str(i), str(i + 1)): 1 for i in range(25, 50)}
        Gp = W.graph.without_edges(
            {k: m for k, m in W.graph.edge_multiplicities().items() if k not in keep}
        )
        rep = check_substantial(W, Gp)
        assert rep.ok
        assert rep.isolated_vertices == frozenset(str(i) for i in range(25))
        assert rep.one_ended_vertices == frozenset(str(i) for i in range(25, 51))

    def test_cut_vertex_splitting_two_boundary_branches_fails(self):
        # a plus-shaped subgraph of the grid: the crossing vertex splits
        # four boundary-touching branches
        W = grid_window(8)
        keep = set()
        for c in range(7):
            keep.add(edge_key(f"3,{c}", f"3,{c+1}"))
        for r in range(7):
            keep.add(edge_key(f"{r},3", f"{r+1},3"))
        Gp = W.graph.without_edges(
            {
                k: m
                for k, m in W.graph.edge_multiplicities().items()
                if k not in keep
            }
        )
        rep = check_substantial(W, Gp)
        assert not rep.ok
        assert rep.cut_witnesses  # at least one witness recorded
        interior = {f"{r},3" for r in range(1, 7)} | {f"3,{c}" for c in range(1, 7)}
        assert set(rep.cut_witnesses.values()) <= interior

    def test_boundary_free_ambient_component_constrains_nothing(self):
        # ambient graph already split: a one-ended piece with the boundary
        # plus a boundary-free pair; the pair's ambient component is exempt
        G = unit_graph([("0", "1"), ("1", "2"), ("x", "y")])
        W = WiredWindow(G, frozenset({"2"}))
        Gp = G.without_edges({edge_key("x", "y"): 1})
        rep = check_substantial(W, Gp)
        assert rep.ok
        assert rep.isolated_vertices == frozenset({"x", "y"})

    def test_subgraph_with_unknown_vertex_rejected(self):
        W = grid_window(4)
        other = path_graph(3)
        with pytest.raises(InputError):
            check_substantial(W, other)


# -- stage A: delete off-tree edges in classes ---------------------------------


class TestDeleteOfftree:
    def test_dyadic_partition_needs_partition_respecting_tree(self):
        W = grid_window(8)
        T, order = boundary_tree(W)
        P = build_partition(W, "dyadic-grid")
        with pytest.raises(InputError, match="not tree-connected"):
            delete_offtree_in_classes(W, T, P, Fraction(1))

    def test_partition_respecting_tree_deletes_at_some_level(self):
        W = grid_window(8)
        order = TotalOrder.by_id(W.graph.vertices)
        P = build_partition(W, "dyadic-grid")
        T = spanning_tree(W, order, partition=P, style="boundary")
        eps_mass = Fraction(1, 10) * W.graph.mu_total()
        win, rep = delete_offtree_in_classes(W, T, P, eps_mass)
        assert rep.mu_after < rep.mu_before
        assert T.edges <= frozenset(win.graph.edge_multiplicities())
        assert check_substantial(win, win.graph).ok
        assert any("level" in n for n in rep.notes)

    def test_tree_guided_partition_top_level_selection(self):
        W = grid_window(16)
        T, order = boundary_tree(W)
        P = build_partition(W, "tree-guided", tree_edges=T.edges)
        win, rep = delete_offtree_in_classes(W, T, P, Fraction(96))
        # grid16 boundary tree: all off-tree mass removable at the top level
        assert rep.mu_before == Fraction(960)
        assert rep.mu_after == Fraction(510)


# -- stage B: prune off-core strands -------------------------------------------


class TestPruneOffCore:
    def test_requires_substantial_input(self):
        G = unit_graph([("0", "1"), ("1", "2"), ("2", "3"), ("0", "3"), ("1", "3")])
        W = WiredWindow(G, frozenset({"0", "3"}))
        order = TotalOrder.by_id(G.vertices)
        T = EndSelectedTree(G, W.boundary, [edge_key("0", "1"), edge_key("1", "2"), edge_key("2", "3")], order)
        bad = WiredWindow(
            unit_graph(
                [(f"3,{c}", f"3,{c+1}") for c in range(7)]
                + [(f"{r},3", f"{r+1},3") for r in range(7)],
                extra_vertices=[f"{r},{c}" for r in range(8) for c in range(8)],
            ),
            grid_window(8).boundary,
        )
        border_tree, order8 = boundary_tree(bad)
        P = build_partition(bad, "tree-guided", tree_edges=border_tree.edges)
        with pytest.raises(InputError, match="not substantial"):
            prune_off_core(bad, border_tree, P, Fraction(1, 10))

    def test_ray_tree_peels_to_the_boundary(self):
        # the ray is its own spanning tree with an empty core: every edge
        # is off-core and tip-peeling consumes the whole strand
        W = ray_window(20)
        T, order = boundary_tree(W)
        P = build_partition(W, "tree-guided", tree_edges=T.edges)
        win, tree, rep = prune_off_core(W, T, P, Fraction(1, 10))
        assert win.graph.mu_total() == 0
        assert tree.edges == frozenset()
        sub = check_substantial(win, win.graph)
        assert sub.ok
        assert sub.isolated_vertices == frozenset(str(i) for i in range(20))

    def test_grid16_after_delete_prunes_to_ring_mass(self):
        W = grid_window(16)
        T, order = boundary_tree(W)
        P = build_partition(W, "tree-guided", tree_edges=T.edges)
        win, _ = delete_offtree_in_classes(W, T, P, Fraction(96))
        T2 = T.replace_graph_context(win.graph, win.boundary)
        P2 = build_partition(win, "tree-guided", tree_edges=T2.edges)
        win2, tree2, rep = prune_off_core(win, T2, P2, Fraction(1, 10))
        assert rep.mu_before == Fraction(510)
        assert rep.mu_after == Fraction(118)
        assert check_substantial(win2, win2.graph).ok


# -- stage C: contract off-core components -------------------------------------


class TestContractOffCore:
    def _tooth_fixture(self):
        # boundary-to-boundary path with one off-core tooth at the middle
        G = unit_graph(
            [("-2", "-1"), ("-1", "0"), ("0", "1"), ("1", "2"), ("0", "t")]
        )
        W = WiredWindow(G, frozenset({"-2", "2"}))
        order = TotalOrder.by_id(G.vertices)
        T = EndSelectedTree(
            G,
            W.boundary,
            [edge_key(*p) for p in [("-2", "-1"), ("-1", "0"), ("0", "1"), ("1", "2"), ("0", "t")]],
            order,
        )
        return W, T

    def test_boundary_free_tooth_contracts_and_core_equals_tree(self):
        W, T = self._tooth_fixture()
        win, tree, cmap, rep = contract_off_core(W, T)
        assert "t" not in win.graph.vertices
        assert win.graph.nu("0") == Fraction(2)
        assert core(win, tree).edges == tree.edges
        assert cmap.expand_tree(tree.edges) == T.edges

    def test_boundary_touching_component_rejected_by_default(self):
        # a single-boundary ray: the whole tree is off-core and meets B
        W = ray_window(4)
        T, order = boundary_tree(W)
        with pytest.raises(InputError, match="boundary"):
            contract_off_core(W, T)

    def test_only_b_free_skips_boundary_touching_components(self):
        W = ray_window(4)
        T, order = boundary_tree(W)
        win, tree, cmap, rep = contract_off_core(W, T, only_b_free=True)
        assert win.graph.vertices == W.graph.vertices
        assert any("skip" in n for n in rep.notes)

    def test_core_equals_tree_is_identity(self):
        W = line_window(3)
        T, order = boundary_tree(W)
        win, tree, cmap, rep = contract_off_core(W, T)
        assert win.graph.vertices == W.graph.vertices
        assert tree.edges == T.edges
        assert rep.contracted_mass == 0


# -- stage D: redundant chords and bare segments --------------------------------


class TestSegments:
    def _fixture(self):
        G = unit_graph(
            [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("b", "d")]
        )
        W = WiredWindow(G, frozenset({"a", "e"}))
        order = TotalOrder.by_id(G.vertices)
        T = EndSelectedTree(
            G,
            W.boundary,
            [edge_key(*p) for p in [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")]],
            order,
        )
        return W, T

    def test_redundant_chord_deleted_and_bare_run_contracted(self):
        W, T = self._fixture()
        win, tree, cmap, rep = remove_redundant_and_contract_segments(W, T)
        assert sorted(win.graph.vertices) == ["a", "d"]
        assert sorted(win.boundary) == ["a", "d"]
        assert tree.edges == frozenset({edge_key("a", "d")})
        assert win.graph.nu("a") == Fraction(3)
        assert win.graph.nu("d") == Fraction(2)
        assert rep.mu_before == Fraction(10)
        assert rep.mu_after == Fraction(5)
        assert rep.deleted_mass == Fraction(2)
        assert rep.contracted_mass == Fraction(6)
        assert cmap.expand_tree(tree.edges) == T.edges

    def test_non_boundary_leaf_rejected(self):
        G = unit_graph([("a", "b"), ("b", "c")])
        W = WiredWindow(G, frozenset({"a"}))
        order = TotalOrder.by_id(G.vertices)
        T = EndSelectedTree(G, W.boundary, [edge_key("a", "b"), edge_key("b", "c")], order)
        with pytest.raises(InputError, match="leaf"):
            remove_redundant_and_contract_segments(W, T)

    def test_isolated_vertices_are_exempt_from_the_leaf_precondition(self):
        G = unit_graph([("a", "b"), ("b", "c")], extra_vertices=["z"])
        W = WiredWindow(G, frozenset({"a", "c"}))
        order = TotalOrder.by_id(G.vertices)
        T = EndSelectedTree(G, W.boundary, [edge_key("a", "b"), edge_key("b", "c")], order)
        win, tree, cmap, rep = remove_redundant_and_contract_segments(W, T)
        assert "z" in win.graph.vertices


# -- stage E: sparse substantial subgraph ---------------------------------------


class TestSparseSubstantial:
    def test_grid8_comb_tree_meets_the_strict_bound(self):
        W = grid_window(8)
        order = TotalOrder.by_id(W.graph.vertices)
        T = comb_tree(W, order, spine_row=1)
        P = build_partition(W, "dyadic-grid")
        win, rep = sparse_substantial(W, T, P, Fraction(1, 10))
        assert rep.mu_before == Fraction(224)
        assert rep.mu_after == Fraction(168)
        bound = rep.targets["mass_bound_strict"]
        assert bound == Fraction(1022, 5)
        assert rep.mu_after < bound
        assert any("level 3" in n and "8 blob-internal" in n for n in rep.notes)
        assert check_substantial(win, win.graph).ok

    def test_requires_chords(self):
        W = ray_window(5)
        T, order = boundary_tree(W)
        P = build_partition(W, "tree-guided", tree_edges=T.edges)
        with pytest.raises(InputError):
            sparse_substantial(W, T, P, Fraction(1, 10))


# -- one round ------------------------------------------------------------------


class TestReduceOnce:
    @pytest.mark.parametrize("eps", [Fraction(0), Fraction(1, 5), Fraction(-1, 10), Fraction(1)])
    def test_eps_outside_open_interval_rejected(self, eps):
        W = grid_window(4)
        order = TotalOrder.by_id(W.graph.vertices)
        with pytest.raises(InputError, match="eps"):
            reduce_once(W, order, eps)

    def test_grid16_exits_early_after_the_delete_stage(self):
        W = grid_window(16)
        order = TotalOrder.by_id(W.graph.vertices)
        res = reduce_once(W, order, Fraction(1, 10))
        assert [r.stage for r in res.reports] == ["delete-offtree"]
        assert res.mu_before == Fraction(960)
        assert res.mu_after == Fraction(510)
        assert res.target_ratio == Fraction(5, 6)
        assert res.achieved_ratio <= res.target_ratio
        assert res.slack_used == 0
        assert res.tree_edges  # working tree is reported
        assert res.tree_edges <= frozenset(res.window.graph.edge_multiplicities())

    def test_contract_false_keeps_the_vertex_space(self):
        W = ladder_window(20)
        order = TotalOrder.by_id(W.graph.vertices)
        res = reduce_once(W, order, Fraction(1, 10), contract=False)
        assert res.window.graph.vertices == W.graph.vertices
        assert all(not s.blobs for s in res.cmap.steps)


# -- the iterated driver ----------------------------------------------------------


class TestRunReduction:
    def test_grid16_trace_and_terminal(self):
        W = grid_window(16)
        tr = run_reduction(W, Fraction(1, 10))
        assert [m for m in tr.mu_trace] == [Fraction(960), Fraction(510), Fraction(118)]
        assert tr.terminal == "threshold"
        assert tr.threshold == Fraction(120)
        assert len(tr.iterations) == 2

    def test_grid32_trace(self):
        W = grid_window(32)
        tr = run_reduction(W, Fraction(1, 10))
        assert tr.mu_trace == [Fraction(3968), Fraction(2046), Fraction(246)]
        assert tr.terminal == "threshold"

    def test_ray_is_already_a_one_ended_tree(self):
        W = ray_window(50)
        tr = run_reduction(W, Fraction(1, 10))
        assert tr.terminal == "tree"
        assert tr.iterations == []
        assert tr.mu_trace == [Fraction(100)]

    def test_ladder_stalls_at_the_rail_tree(self):
        W = ladder_window(20)
        tr = run_reduction(W, Fraction(1, 10))
        assert tr.mu_trace == [Fraction(116), Fraction(78), Fraction(38), Fraction(38)]
        assert tr.terminal == "stalled"

    def test_contract_free_traces_match(self):
        for W in [grid_window(16), ladder_window(20)]:
            a = run_reduction(W, Fraction(1, 10))
            b = run_reduction(W, Fraction(1, 10), contract=False)
            assert a.mu_trace == b.mu_trace
            assert a.terminal == b.terminal

    def test_iteration_cap_value(self):
        assert iteration_cap(Fraction(960), Fraction(120)) == 14

    def test_threshold_already_met_means_no_iterations(self):
        W = grid_window(16)
        tr = run_reduction(W, Fraction(1, 10), threshold=Fraction(2000))
        assert tr.iterations == []
        assert tr.terminal == "threshold"

    def test_per_iteration_ratio_bound_with_slack(self):
        # mu(G_{k+1}) <= (5/6) mu(G_k) + slack_k, slack_k <= eps * mu(G_k)
        eps = Fraction(1, 10)
        for W in [grid_window(16), grid_window(32)]:
            tr = run_reduction(W, eps)
            for rec in tr.iterations:
                r = rec.result
                assert r.slack_used <= eps * r.mu_before
                assert r.mu_after <= Fraction(5, 6) * r.mu_before + r.slack_used

    def test_two_ended_window_is_rejected_as_not_substantial(self):
        G = unit_graph(
            [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("b", "d")]
        )
        W = WiredWindow(G, frozenset({"a", "e"}))
        order = TotalOrder.by_id(G.vertices)
        with pytest.raises(InputError, match="not substantial"):
            reduce_once(W, order, Fraction(1, 10))

    def test_cumulative_map_tracks_every_original_vertex(self):
        W = ladder_window(20)
        tr = run_reduction(W, Fraction(1, 10))
        expanded = tr.cmap.expand_vertices(tr.window.graph.vertices)
        assert expanded == W.graph.vertices
