"""Deterministic instance generators: grids, rays, ladders, random windows, tori.

All generated windows use ``nu ≡ 1`` and carry their end as the set B of
boundary vertices.  Vertex ids are ``'r,c'`` for 2-d shapes and plain
integers for paths, so the dyadic partition scheme and the comb tree
builder apply directly.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .graph import (
    EdgeKey,
    InputError,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    edge_key,
)


def _unit_graph(vertices: list[Vertex], edges: dict[EdgeKey, int]) -> WeightedMultigraph:
    return WeightedMultigraph({v: Fraction(1) for v in vertices}, edges)


def grid_window(rows: int, cols: int | None = None) -> WiredWindow:
    """rows × cols grid, ids 'r,c', boundary = outer ring."""
    if cols is None:
        cols = rows
    if rows < 2 or cols < 2:
        raise InputError("grid needs at least 2x2")
    vs = [f"{r},{c}" for r in range(rows) for c in range(cols)]
    edges: dict[EdgeKey, int] = {}
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges[edge_key(f"{r},{c}", f"{r},{c+1}")] = 1
            if r + 1 < rows:
                edges[edge_key(f"{r},{c}", f"{r+1},{c}")] = 1
    boundary = frozenset(
        f"{r},{c}"
        for r in range(rows)
        for c in range(cols)
        if r in (0, rows - 1) or c in (0, cols - 1)
    )
    return WiredWindow(_unit_graph(vs, edges), boundary)


def ray_window(n: int) -> WiredWindow:
    """Path 0–…–n with boundary {n}: the finite proxy of a one-ended ray."""
    if n < 1:
        raise InputError("ray needs n >= 1")
    vs = [str(i) for i in range(n + 1)]
    edges = {edge_key(str(i), str(i + 1)): 1 for i in range(n)}
    return WiredWindow(_unit_graph(vs, edges), frozenset({str(n)}))


def line_window(n: int) -> WiredWindow:
    """Path −n–…–n with boundary at both ends: a two-ended counterexample."""
    if n < 1:
        raise InputError("line needs n >= 1")
    vs = [str(i) for i in range(-n, n + 1)]
    edges = {edge_key(str(i), str(i + 1)): 1 for i in range(-n, n)}
    return WiredWindow(_unit_graph(vs, edges), frozenset({str(-n), str(n)}))


def ladder_window(n: int) -> WiredWindow:
    """2 × n ladder, ids '0,c' (top rail) and '1,c'; boundary = top rail."""
    if n < 2:
        raise InputError("ladder needs n >= 2")
    vs = [f"{r},{c}" for r in range(2) for c in range(n)]
    edges: dict[EdgeKey, int] = {}
    for c in range(n):
        edges[edge_key(f"0,{c}", f"1,{c}")] = 1
        if c + 1 < n:
            edges[edge_key(f"0,{c}", f"0,{c+1}")] = 1
            edges[edge_key(f"1,{c}", f"1,{c+1}")] = 1
    return WiredWindow(_unit_graph(vs, edges), frozenset(f"0,{c}" for c in range(n)))


def random_window(n: int, density: float | Fraction, seed: int) -> WiredWindow:
    """n × n grid plus random diagonal chords, deterministic per seed.

    Each unit cell contributes its two diagonals independently with the
    given probability.  Chords only add connectivity, so the window stays
    end-faithful.
    """
    if n < 2:
        raise InputError("random window needs n >= 2")
    d = float(density)
    if not 0 <= d <= 1:
        raise InputError("density must be in [0, 1]")
    base = grid_window(n)
    rng = random.Random(seed)
    extra: list[tuple[str, str, int]] = []
    for r in range(n - 1):
        for c in range(n - 1):
            if rng.random() < d:
                extra.append((f"{r},{c}", f"{r+1},{c+1}", 1))
            if rng.random() < d:
                extra.append((f"{r},{c+1}", f"{r+1},{c}", 1))
    return WiredWindow(base.graph.with_extra_edges(extra), base.boundary)


def torus_graph(n: int) -> WeightedMultigraph:
    """n × n torus (no boundary); only label-driven subroutines apply."""
    if n < 3:
        raise InputError("torus needs n >= 3")
    vs = [f"{r},{c}" for r in range(n) for c in range(n)]
    edges: dict[EdgeKey, int] = {}
    for r in range(n):
        for c in range(n):
            edges[edge_key(f"{r},{c}", f"{r},{(c+1) % n}")] = 1
            edges[edge_key(f"{r},{c}", f"{(r+1) % n},{c}")] = 1
    return _unit_graph(vs, edges)


def from_spec(spec: str) -> WiredWindow | WeightedMultigraph:
    """Parse generator specs: grid:n, ray:n, ladder:n, line:n,
    random-window:n:density:seed, torus:n."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "grid" and len(parts) == 2:
            return grid_window(int(parts[1]))
        if kind == "grid" and len(parts) == 3:
            return grid_window(int(parts[1]), int(parts[2]))
        if kind == "ray" and len(parts) == 2:
            return ray_window(int(parts[1]))
        if kind == "line" and len(parts) == 2:
            return line_window(int(parts[1]))
        if kind == "ladder" and len(parts) == 2:
            return ladder_window(int(parts[1]))
        if kind == "random-window" and len(parts) == 4:
            return random_window(int(parts[1]), Fraction(parts[2]), int(parts[3]))
        if kind == "torus" and len(parts) == 2:
            return torus_graph(int(parts[1]))
    except ValueError as exc:
        raise InputError(f"bad generator spec {spec!r}: {exc}") from None
    raise InputError(f"unknown generator spec {spec!r}")
