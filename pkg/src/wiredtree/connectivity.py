"""Edge-connectivity primitives: Menger queries and boundary wiring.

All flow work is unit-capacity max-flow by repeated BFS augmentation on
the residual multigraph; the pipeline only ever needs k <= 3, so each
query is a handful of traversals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import (
    EdgeKey,
    InputError,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    edge_key,
)

#: The single vertex allowed to carry measure zero: the wired stand-in for
#: the infinite remainder beyond the window boundary.
INFINITY_VERTEX = "∞"


@dataclass(frozen=True)
class FlowCertificate:
    """k pairwise edge-disjoint paths between source and sink."""

    source: Vertex
    sink: Vertex
    value: int
    paths: tuple[tuple[Vertex, ...], ...]

    def __post_init__(self) -> None:
        if self.value != len(self.paths):
            raise InputError("certificate value must equal the number of paths")


@dataclass(frozen=True)
class CutWitness:
    """An edge cut smaller than the requested number of paths."""

    source: Vertex
    sink: Vertex
    size: int
    edges: tuple[EdgeKey, ...]  # one entry per crossing edge instance


def _residual_bfs(
    adj: dict[Vertex, dict[Vertex, int]],
    flow: dict[tuple[Vertex, Vertex], int],
    x: Vertex,
    y: Vertex,
) -> list[Vertex] | None:
    """One augmenting path in the residual graph, or None."""
    prev: dict[Vertex, Vertex] = {x: x}
    queue = [x]
    i = 0
    while i < len(queue):
        v = queue[i]
        i += 1
        for w in sorted(adj[v]):
            if w in prev:
                continue
            if adj[v][w] - flow.get((v, w), 0) + flow.get((w, v), 0) > 0:
                prev[w] = v
                if w == y:
                    path = [y]
                    while path[-1] != x:
                        path.append(prev[path[-1]])
                    path.reverse()
                    return path
                queue.append(w)
    return None


def _apply_path(flow: dict[tuple[Vertex, Vertex], int], path: list[Vertex]) -> None:
    for u, v in zip(path, path[1:]):
        back = flow.get((v, u), 0)
        if back > 0:
            flow[(v, u)] = back - 1
        else:
            flow[(u, v)] = flow.get((u, v), 0) + 1


def _decompose_paths(
    flow: dict[tuple[Vertex, Vertex], int],
    x: Vertex,
    y: Vertex,
    value: int,
) -> list[list[Vertex]]:
    """Split an integral flow into ``value`` arc-disjoint x->y paths.

    Cycle flow (possible after residual cancellations) is discarded: when
    the walk revisits a vertex, the loop's arcs are dropped from the pool
    and the path rewinds, which cannot affect the x->y value.
    """
    out: dict[Vertex, dict[Vertex, int]] = {}
    for (u, v), f in flow.items():
        if f > 0:
            out.setdefault(u, {})[v] = f
    paths: list[list[Vertex]] = []
    for _ in range(value):
        path = [x]
        pos = {x: 0}
        while path[-1] != y:
            v = path[-1]
            nexts = sorted(w for w, f in out.get(v, {}).items() if f > 0)
            if not nexts:
                raise InputError("flow decomposition failed (conservation violated)")
            w = nexts[0]
            out[v][w] -= 1
            if w in pos:
                for dropped in path[pos[w] + 1:]:
                    del pos[dropped]
                del path[pos[w] + 1:]
            else:
                pos[w] = len(path)
                path.append(w)
        paths.append(path)
    return paths


def edge_disjoint_paths(
    G: WeightedMultigraph,
    x: Vertex,
    y: Vertex,
    k: int,
) -> FlowCertificate | CutWitness:
    """Either k edge-disjoint x-y paths or an edge cut of size < k.

    Unit-capacity max-flow duality: the returned cut, when one is
    returned, has size equal to the maximum number of edge-disjoint
    paths.  Vertices in different components yield a cut of size 0.
    """
    if x == y:
        raise InputError("x and y must differ")
    if not G.has_vertex(x) or not G.has_vertex(y):
        raise InputError("x and y must be vertices of G")
    if k < 1:
        raise InputError("k must be >= 1")
    adj = {v: G.adjacency(v) for v in G.vertices}
    flow: dict[tuple[Vertex, Vertex], int] = {}
    value = 0
    while value < k:
        path = _residual_bfs(adj, flow, x, y)
        if path is None:
            break
        _apply_path(flow, path)
        value += 1
    if value >= k:
        paths = _decompose_paths(flow, x, y, value)
        return FlowCertificate(x, y, value, tuple(tuple(p) for p in paths))
    # saturated: residual-reachable side of x gives a minimum cut
    reach = {x}
    queue = [x]
    i = 0
    while i < len(queue):
        v = queue[i]
        i += 1
        for w in adj[v]:
            if w in reach:
                continue
            if adj[v][w] - flow.get((v, w), 0) + flow.get((w, v), 0) > 0:
                reach.add(w)
                queue.append(w)
    cut: list[EdgeKey] = []
    for (u, v), m in sorted(G.edge_multiplicities().items()):
        if (u in reach) != (v in reach):
            cut.extend([(u, v)] * m)
    if len(cut) != value:
        raise InputError("max-flow/min-cut mismatch (internal error)")
    return CutWitness(x, y, value, tuple(cut))


def max_edge_disjoint_paths(G: WeightedMultigraph, x: Vertex, y: Vertex, cap: int) -> int:
    """The x-y max-flow value, computed up to ``cap``."""
    result = edge_disjoint_paths(G, x, y, cap)
    return result.value if isinstance(result, FlowCertificate) else result.size


def is_locally_3ec(G: WeightedMultigraph) -> tuple[bool, EdgeKey | None]:
    """Do the endpoints of every edge admit 3 edge-disjoint paths?

    Returns (True, None) or (False, witness edge).
    """
    for u, v in G.sorted_edges():
        if max_edge_disjoint_paths(G, u, v, 3) < 3:
            return False, (u, v)
    return True, None


def is_3ec_per_component(G: WeightedMultigraph) -> tuple[bool, CutWitness | None]:
    """Is every component with at least two vertices 3-edge-connected?

    The component's edge connectivity is min over vertices v of the
    root-v max-flow, so only Menger queries are needed.  Returns
    (True, None) or (False, a cut of size <= 2).
    """
    for comp in G.components():
        if len(comp) < 2:
            continue
        root = min(comp)
        for v in sorted(comp):
            if v == root:
                continue
            result = edge_disjoint_paths(G, root, v, 3)
            if isinstance(result, CutWitness):
                return False, result
    return True, None


def wire_boundary(W: WiredWindow, m: int = 3) -> WeightedMultigraph:
    """Add the virtual vertex modelling the remainder beyond the boundary.

    The new vertex carries measure zero (the single sanctioned exception
    to positivity) and is joined to every boundary vertex with
    multiplicity ``m``.  It exists only for connectivity checks: it must
    be excluded from all measures and trees downstream.
    """
    if m < 3:
        raise InputError("wiring multiplicity must be >= 3")
    if W.graph.has_vertex(INFINITY_VERTEX):
        raise InputError(f"graph already contains the virtual vertex {INFINITY_VERTEX!r}")
    wired = W.graph.with_vertex(INFINITY_VERTEX, 0, zero_ok=True)
    return wired.with_extra_edges((b, INFINITY_VERTEX, m) for b in sorted(W.boundary))
