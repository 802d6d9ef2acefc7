"""Instance text format and DOT export."""

from __future__ import annotations

from fractions import Fraction

import pytest

from wiredtree.generators import from_spec
from wiredtree.graph import (
    HierarchicalPartition,
    InputError,
    WeightedMultigraph,
    WiredWindow,
)
from wiredtree.io import InstanceData, parse_instance, serialize_instance, to_dot


def unit_graph(edges, nu=None):
    vs = sorted({x for e in edges for x in e})
    masses = {v: Fraction(1) for v in vs}
    if nu:
        masses.update({k: Fraction(v) for k, v in nu.items()})
    return WeightedMultigraph(masses, {tuple(sorted(e)): 1 for e in edges})


class TestRoundTrip:
    @pytest.mark.parametrize(
        "spec",
        [
            "grid:4",
            "grid:8",
            "ray:10",
            "ladder:6",
            "line:5",
            "torus:4",
            "random-window:12:3/10:5",
            "random-window:20:1/2:9",
        ],
    )
    def test_serialize_parse_is_byte_stable(self, spec):
        obj = from_spec(spec)
        text = serialize_instance(obj)
        back = parse_instance(text)
        assert serialize_instance(back) == text

    def test_window_boundary_survives(self):
        W = from_spec("grid:4")
        back = parse_instance(serialize_instance(W))
        assert back.graph == W.graph
        assert back.boundary == W.boundary
        assert back.window.boundary == W.boundary

    def test_bare_graph_has_empty_boundary(self):
        G = from_spec("torus:3")
        back = parse_instance(serialize_instance(G))
        assert back.boundary == frozenset()
        with pytest.raises(InputError, match="no boundary"):
            back.window

    def test_partition_blocks_round_trip(self):
        W = from_spec("ray:4")
        hp = HierarchicalPartition(
            [
                [{v} for v in W.graph.vertices],
                [{"0", "1"}, {"2", "3"}, {"4"}],
                [W.graph.vertices],
            ]
        )
        inst = InstanceData(W.graph, W.boundary, hp)
        text = serialize_instance(inst)
        back = parse_instance(text)
        assert back == inst
        assert serialize_instance(back) == text

    def test_non_unit_masses_round_trip(self):
        G = unit_graph([("a", "b")], nu={"a": Fraction(3, 7)})
        text = serialize_instance(G)
        assert "v a 3/7" in text
        assert parse_instance(text).graph.nu("a") == Fraction(3, 7)

    def test_zero_mass_vertex_is_accepted(self):
        text = "wiredtree 1\nv a 0/1\nv b 1/1\ne a b 1\n"
        back = parse_instance(text)
        assert back.graph.nu("a") == 0
        assert serialize_instance(back) == text

    def test_integer_mass_normalizes_to_fraction_form(self):
        back = parse_instance("wiredtree 1\nv a 2\nv b 1/1\ne a b 1\n")
        assert back.graph.nu("a") == 2
        assert "v a 2/1" in serialize_instance(back)

    def test_comments_and_blank_lines_are_ignored(self):
        text = "# preamble\n\nwiredtree 1\n# a note\nv a 1/1 boundary\n\n"
        assert parse_instance(text).boundary == frozenset({"a"})

    def test_multiplicity_round_trips(self):
        G = WeightedMultigraph(
            {"a": Fraction(1), "b": Fraction(1)}, {("a", "b"): 3}
        )
        text = serialize_instance(G)
        assert "e a b 3" in text
        assert parse_instance(text).graph.multiplicity("a", "b") == 3


class TestParseErrors:
    def test_empty_file(self):
        with pytest.raises(InputError, match="empty"):
            parse_instance("")

    def test_bad_header(self):
        with pytest.raises(InputError, match="header"):
            parse_instance("wiredtree 2\nv a 1/1\n")

    def test_unknown_record(self):
        with pytest.raises(InputError, match="unknown record"):
            parse_instance("wiredtree 1\nv a 1/1\nq a\n")

    def test_vertex_field_count(self):
        with pytest.raises(InputError, match="vertex record"):
            parse_instance("wiredtree 1\nv a\n")

    def test_vertex_bad_flag(self):
        with pytest.raises(InputError, match="vertex record"):
            parse_instance("wiredtree 1\nv a 1/1 interior\n")

    def test_duplicate_vertex(self):
        with pytest.raises(InputError, match="duplicate vertex"):
            parse_instance("wiredtree 1\nv a 1/1\nv a 1/1\n")

    def test_bad_mass(self):
        with pytest.raises(InputError, match="bad vertex mass"):
            parse_instance("wiredtree 1\nv a 1/0\n")
        with pytest.raises(InputError, match="bad vertex mass"):
            parse_instance("wiredtree 1\nv a heavy\n")

    def test_edge_field_count(self):
        with pytest.raises(InputError, match="edge record"):
            parse_instance("wiredtree 1\nv a 1/1\nv b 1/1\ne a b\n")

    def test_bad_multiplicity(self):
        with pytest.raises(InputError, match="bad multiplicity"):
            parse_instance("wiredtree 1\nv a 1/1\nv b 1/1\ne a b two\n")
        with pytest.raises(InputError, match="positive"):
            parse_instance("wiredtree 1\nv a 1/1\nv b 1/1\ne a b 0\n")

    def test_duplicate_edge_even_reversed(self):
        with pytest.raises(InputError, match="duplicate edge"):
            parse_instance("wiredtree 1\nv a 1/1\nv b 1/1\ne a b 1\ne b a 2\n")

    def test_undeclared_endpoint(self):
        with pytest.raises(InputError, match="not a declared vertex"):
            parse_instance("wiredtree 1\nv a 1/1\ne a b 1\n")

    def test_no_vertices(self):
        with pytest.raises(InputError, match="no vertices"):
            parse_instance("wiredtree 1\n")

    def test_partition_class_id_must_be_least_member(self):
        with pytest.raises(InputError, match="least member"):
            parse_instance("wiredtree 1\nv a 1/1\np 0 b a\n")

    def test_partition_levels_must_be_contiguous(self):
        text = "wiredtree 1\nv a 1/1\np 0 a a\np 2 a a\n"
        with pytest.raises(InputError, match="levels"):
            parse_instance(text)

    def test_partition_must_cover_vertex_set(self):
        text = "wiredtree 1\nv a 1/1\nv b 1/1\np 0 a a\np 1 a a\n"
        with pytest.raises(InputError, match="cover"):
            parse_instance(text)

    def test_partition_record_field_count(self):
        with pytest.raises(InputError, match="partition record"):
            parse_instance("wiredtree 1\nv a 1/1\np 0 a\n")

    def test_partition_bad_level(self):
        with pytest.raises(InputError, match="bad level"):
            parse_instance("wiredtree 1\nv a 1/1\np zero a a\n")


class TestSerializeErrors:
    def test_whitespace_in_id_rejected(self):
        G = WeightedMultigraph({"a b": Fraction(1)}, {})
        with pytest.raises(InputError, match="whitespace"):
            serialize_instance(G)


class TestDot:
    def test_palette_and_roles(self):
        W = from_spec("ray:4")
        dot = to_dot(W, tree_edges=[("0", "1")], deleted_edges=[("3", "2")])
        assert '"4" [shape=box, style=filled, fillcolor="#aecbfa"];' in dot
        assert '"0" -- "1" [color="#1a7f37", penwidth=2];' in dot
        assert '"2" -- "3" [color="#cf222e", style=dashed];' in dot
        assert '"1" -- "2" [color="#6e7781"];' in dot

    def test_multiplicity_label(self):
        G = WeightedMultigraph(
            {"a": Fraction(1), "b": Fraction(1)}, {("a", "b"): 4}
        )
        assert 'label="4"' in to_dot(G)

    def test_output_is_deterministic(self):
        W = from_spec("grid:4")
        assert to_dot(W) == to_dot(WiredWindow(W.graph, W.boundary))
