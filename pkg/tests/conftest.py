"""Shared fixture builders for all test modules."""

from __future__ import annotations

from fractions import Fraction

import pytest

from wiredtree.graph import WeightedMultigraph, WiredWindow


def unit_graph(edges, extra_vertices=()):
    """Graph with nu ≡ 1 from an edge list [(u, v)] or [(u, v, mult)]."""
    mult = {}
    vs = set(map(str, extra_vertices))
    for e in edges:
        u, v = str(e[0]), str(e[1])
        m = e[2] if len(e) > 2 else 1
        key = (min(u, v), max(u, v))
        mult[key] = mult.get(key, 0) + m
        vs |= {u, v}
    return WeightedMultigraph({v: Fraction(1) for v in vs}, mult)


def triangle():
    return unit_graph([("a", "b"), ("b", "c"), ("a", "c")])


def doubled_triangle():
    return unit_graph([("a", "b", 2), ("b", "c", 2), ("a", "c", 2)])


def k4():
    vs = ["a", "b", "c", "d"]
    return unit_graph([(u, v) for i, u in enumerate(vs) for v in vs[i + 1 :]])


def cycle_graph(n, mult=1):
    return unit_graph([(str(i), str((i + 1) % n), mult) for i in range(n)])


def path_graph(n):
    """Path 0–…–n with nu ≡ 1."""
    return unit_graph([(str(i), str(i + 1)) for i in range(n)])


@pytest.fixture
def order_by_id():
    from wiredtree.graph import TotalOrder

    def make(G):
        return TotalOrder.by_id(G.vertices)

    return make
