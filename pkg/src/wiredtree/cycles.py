"""Spanning trees with end selection, fundamental cycles, core, kernel, exterior.

The recurring convention: a side of a tree cut is "infinite" exactly when
it meets the window boundary ``B``.  The core of a tree is the set of
tree edges whose removal leaves boundary vertices on both sides; a tree
is one-ended in the wired sense iff its core is empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .graph import (
    EdgeKey,
    HierarchicalPartition,
    InputError,
    InvariantError,
    TotalOrder,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    WindowReport,
    edge_key,
    validate_window,
)


class EndSelectedTree:
    """A forest with per-component orientation toward the boundary.

    ``edges`` must be acyclic.  In every component the root is the
    order-least boundary vertex (or the order-least vertex if the
    component misses the boundary); parent pointers climb to that root.
    ``max_far`` of a tree edge is the endpoint farther from the boundary
    inside the tree, ties broken by label, and ``omega(e) = nu(max_far(e))``
    is the tree-edge weight; non-tree edges implicitly carry weight 0.
    """

    def __init__(
        self,
        graph: WeightedMultigraph,
        boundary: frozenset[Vertex],
        edges: Iterable[EdgeKey],
        order: TotalOrder,
    ) -> None:
        self.graph = graph
        self.boundary = frozenset(boundary)
        self.order = order
        self.edges = frozenset(edge_key(*e) for e in edges)
        for u, v in self.edges:
            if not graph.multiplicity(u, v):
                raise InputError(f"tree edge {(u, v)} not in graph")
        self._adj: dict[Vertex, set[Vertex]] = {v: set() for v in graph.vertices}
        for u, v in self.edges:
            self._adj[u].add(v)
            self._adj[v].add(u)
        # acyclicity: |edges| = |V| - #components of (V, edges)
        comps = self._forest_components()
        if len(self.edges) != len(graph.vertices) - len(comps):
            raise InputError("edge set contains a cycle")
        self._components = comps
        self.parent: dict[Vertex, Vertex | None] = {}
        self.root_of: dict[Vertex, Vertex] = {}
        for comp in comps:
            b_here = sorted(comp & self.boundary)
            root = order.least(b_here) if b_here else order.least(comp)
            self._orient_from(root, comp)
        # distance to the boundary within the tree (for max_far)
        self._bdist: dict[Vertex, int] = {}
        for comp in comps:
            sources = comp & self.boundary
            if not sources:
                sources = {self.root_of[min(comp)]}
            dist = self._tree_bfs_layers(sources, comp)
            self._bdist.update(dist)

    def _forest_components(self) -> list[frozenset[Vertex]]:
        remaining = set(self.graph.vertices)
        out = []
        while remaining:
            start = min(remaining)
            comp = {start}
            stack = [start]
            while stack:
                v = stack.pop()
                for w in self._adj[v]:
                    if w not in comp:
                        comp.add(w)
                        stack.append(w)
            out.append(frozenset(comp))
            remaining -= comp
        return sorted(out, key=min)

    def _orient_from(self, root: Vertex, comp: frozenset[Vertex]) -> None:
        self.parent[root] = None
        self.root_of[root] = root
        queue = [root]
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            for w in sorted(self._adj[v], key=self.order.label):
                if w not in self.parent and w in comp:
                    self.parent[w] = v
                    self.root_of[w] = root
                    queue.append(w)

    def _tree_bfs_layers(self, sources: set[Vertex], comp: frozenset[Vertex]) -> dict[Vertex, int]:
        dist = {s: 0 for s in sources}
        queue = sorted(sources)
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            for w in self._adj[v]:
                if w not in dist and w in comp:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        return dist

    # -- queries ---------------------------------------------------------

    def tree_components(self) -> list[frozenset[Vertex]]:
        return list(self._components)

    def boundary_distance(self, v: Vertex) -> int:
        return self._bdist[v]

    def max_far(self, e: EdgeKey) -> Vertex:
        """The endpoint farther from the boundary (tie: larger label)."""
        u, v = edge_key(*e)
        if (u, v) not in self.edges:
            raise InputError(f"{(u, v)} is not a tree edge")
        du, dv = self._bdist[u], self._bdist[v]
        if du != dv:
            return u if du > dv else v
        return u if self.order.label(u) > self.order.label(v) else v

    def omega(self, e: EdgeKey) -> Fraction:
        key = edge_key(*e)
        if key not in self.edges:
            return Fraction(0)
        return self.graph.nu(self.max_far(key))

    def omega_map(self) -> dict[EdgeKey, Fraction]:
        return {e: self.omega(e) for e in sorted(self.edges)}

    def tree_neighbors(self, v: Vertex) -> list[Vertex]:
        return sorted(self._adj[v])

    def tree_degree(self, v: Vertex) -> int:
        return len(self._adj[v])

    def path_between(self, a: Vertex, b: Vertex) -> list[Vertex] | None:
        """The unique tree path a..b, or None if in different components."""
        if self.root_of.get(a) != self.root_of.get(b):
            return None
        up_a = [a]
        while self.parent[up_a[-1]] is not None:
            up_a.append(self.parent[up_a[-1]])
        index_a = {v: i for i, v in enumerate(up_a)}
        up_b = [b]
        while up_b[-1] not in index_a:
            up_b.append(self.parent[up_b[-1]])
        meet = up_b[-1]
        return up_a[: index_a[meet] + 1] + up_b[:-1][::-1]

    def spans(self, G: WeightedMultigraph) -> bool:
        """Does the forest connect each component of G entirely?"""
        return {frozenset(c) for c in G.components()} == set(self._components)

    def replace_graph_context(self, graph: WeightedMultigraph, boundary: frozenset[Vertex]) -> "EndSelectedTree":
        return EndSelectedTree(graph, boundary, self.edges, self.order)


def _kruskal_forest(
    G: WeightedMultigraph,
    order: TotalOrder,
    *,
    edge_pool: Iterable[EdgeKey] | None = None,
    seed_edges: Iterable[EdgeKey] = (),
    level_of: Mapping[EdgeKey, int] | None = None,
) -> set[EdgeKey]:
    """Label-least Kruskal over the pool, optionally intra-class first."""
    parent: dict[Vertex, Vertex] = {v: v for v in G.vertices}

    def find(v: Vertex) -> Vertex:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    chosen: set[EdgeKey] = set()

    def try_add(e: EdgeKey) -> None:
        ru, rv = find(e[0]), find(e[1])
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
            chosen.add(e)

    for e in seed_edges:
        try_add(edge_key(*e))
    pool = sorted(
        (edge_key(*e) for e in (edge_pool if edge_pool is not None else G.sorted_edges())),
        key=lambda e: (
            (level_of.get(e, 0) if level_of is not None else 0),
            order.edge_key_fn(e),
            e,
        ),
    )
    for e in pool:
        try_add(e)
    return chosen


def _co_class_level(P: HierarchicalPartition, e: EdgeKey) -> int:
    for lvl in range(P.depth):
        if e[1] in P.class_of(lvl, e[0]):
            return lvl
    return P.depth


def spanning_tree(
    W: WiredWindow | WeightedMultigraph,
    order: TotalOrder,
    partition: HierarchicalPartition | None = None,
    style: str = "boundary",
) -> EndSelectedTree:
    """Deterministic spanning tree of the window, oriented toward B.

    Styles:

    - ``boundary`` (default): first a label-least spanning forest of the
      boundary-to-boundary edges, then one parent edge per interior
      vertex toward the boundary (label-least among neighbors one BFS
      layer closer), then label-least connecting edges if components
      remain.
    - ``bfs``: the same without the boundary-forest seeding.
    - ``kruskal``: pure label-least Kruskal.

    If ``partition`` is given the tree is built by intra-class-first
    Kruskal instead, so its restriction to every class is connected.

    A bare graph (no window boundary, e.g. a torus) is accepted for the
    ``kruskal`` style only; the other styles orient toward the boundary.
    """
    if isinstance(W, WeightedMultigraph):
        if style != "kruskal" or partition is not None:
            raise InputError(
                "a bare graph has no boundary: only style='kruskal' applies"
            )
        return EndSelectedTree(W, frozenset(), _kruskal_forest(W, order), order)
    G = W.graph
    if partition is not None:
        levels = {e: _co_class_level(partition, e) for e in G.sorted_edges()}
        edges = _kruskal_forest(G, order, level_of=levels)
        return EndSelectedTree(G, W.boundary, edges, order)
    if style == "kruskal":
        edges = _kruskal_forest(G, order)
        return EndSelectedTree(G, W.boundary, edges, order)
    if style not in ("boundary", "bfs"):
        raise InputError(f"unknown spanning tree style {style!r}")
    seed: set[EdgeKey] = set()
    if style == "boundary":
        b_edges = [e for e in G.sorted_edges() if e[0] in W.boundary and e[1] in W.boundary]
        seed = _kruskal_forest(G, order, edge_pool=b_edges)
    depth = G.bfs_distances(W.boundary)
    parent_edges: set[EdgeKey] = set()
    for v in G.sorted_vertices():
        d = depth.get(v)
        if d is None or d == 0:
            continue
        ups = [w for w in G.neighbors(v) if depth.get(w) == d - 1]
        parent_edges.add(edge_key(v, order.least(ups)))
    edges = _kruskal_forest(G, order, seed_edges=sorted(seed | parent_edges))
    return EndSelectedTree(G, W.boundary, edges, order)


def comb_tree(W: WiredWindow, order: TotalOrder, spine_row: int | None = None) -> EndSelectedTree:
    """Spine along one row plus one full vertical tooth per column.

    Requires ``'r,c'`` vertex ids on a full rectangular block.  When
    every tooth end away from the spine lies in the boundary, every leaf
    of the comb does, which forces core(T) = T.  ``spine_row`` defaults
    to the first row; a ladder whose boundary is the top rail wants the
    spine on the bottom row instead.
    """
    G = W.graph
    coords: dict[Vertex, tuple[int, int]] = {}
    for v in G.vertices:
        try:
            r, c = v.split(",")
            coords[v] = (int(r), int(c))
        except ValueError:
            raise InputError("comb_tree needs 'row,col' vertex ids") from None
    edges: set[EdgeKey] = set()
    by_coord = {rc: v for v, rc in coords.items()}
    cols = sorted({c for _, c in coords.values()})
    rows = sorted({r for r, _ in coords.values()})
    spine = rows[0] if spine_row is None else spine_row
    if spine not in rows:
        raise InputError(f"no row {spine} in this block")
    for c0, c1 in zip(cols, cols[1:]):
        a, b = by_coord.get((spine, c0)), by_coord.get((spine, c1))
        if a is None or b is None or not G.multiplicity(a, b):
            raise InputError("comb_tree spine edge missing (not a full block?)")
        edges.add(edge_key(a, b))
    for c in cols:
        for r0, r1 in zip(rows, rows[1:]):
            a, b = by_coord.get((r0, c)), by_coord.get((r1, c))
            if a is None or b is None or not G.multiplicity(a, b):
                raise InputError("comb_tree tooth edge missing (not a full block?)")
            edges.add(edge_key(a, b))
    return EndSelectedTree(G, W.boundary, edges, order)


def fundamental_cycle(T: EndSelectedTree, e: EdgeKey) -> list[EdgeKey]:
    """The unique cycle closed by a non-tree edge (keys, with repetition).

    A parallel copy of a tree edge closes the 2-cycle ``[key, key]``.
    Raises if ``e`` has no non-tree instance or joins two components.
    """
    key = edge_key(*e)
    mult = T.graph.multiplicity(*key)
    if mult == 0:
        raise InputError(f"unknown edge {key}")
    if key in T.edges:
        if mult < 2:
            raise InputError(f"{key} is a tree edge with no spare parallel copy")
        return [key, key]
    path = T.path_between(key[0], key[1])
    if path is None:
        raise InputError(f"{key} joins two different tree components")
    return [key] + [edge_key(a, b) for a, b in zip(path, path[1:])]


def fundamental_cycles(T: EndSelectedTree) -> dict[EdgeKey, list[EdgeKey]]:
    """One fundamental cycle per edge key having a non-tree instance."""
    out: dict[EdgeKey, list[EdgeKey]] = {}
    for key, mult in sorted(T.graph.edge_multiplicities().items()):
        spare = mult - (1 if key in T.edges else 0)
        if spare <= 0:
            continue
        out[key] = fundamental_cycle(T, key)
    return out


@dataclass
class CoreReport:
    """Core edges plus the per-edge crossing-count diagnostic."""

    edges: frozenset[EdgeKey]
    crossing: dict[EdgeKey, int] = field(default_factory=dict)


def core(W: WiredWindow, T: EndSelectedTree, wiring_multiplicity: int = 3) -> CoreReport:
    """Tree edges whose removal leaves boundary on both sides.

    The crossing diagnostic counts non-tree edge instances joining the
    two sides of the cut, plus ``wiring_multiplicity`` whenever both
    sides reach the boundary (their connections through the wired
    vertex).
    """
    B = W.boundary
    G = T.graph
    # children lists from the stored orientation
    children: dict[Vertex, list[Vertex]] = {v: [] for v in G.vertices}
    for v, p in T.parent.items():
        if p is not None:
            children[p].append(v)
    roots = [v for v, p in T.parent.items() if p is None]
    post: list[Vertex] = []
    for root in sorted(roots):
        stack = [root]
        while stack:
            v = stack.pop()
            post.append(v)
            stack.extend(children[v])
    post.reverse()  # children before parents
    b_sub: dict[Vertex, int] = {}
    comp_b: dict[Vertex, int] = {}
    for v in post:
        b_sub[v] = (1 if v in B else 0) + sum(b_sub[c] for c in children[v])
    for comp in T.tree_components():
        total = sum(1 for v in comp if v in B)
        for v in comp:
            comp_b[v] = total
    # crossing counts: +mult at both chord endpoints, -2*mult at their meet
    diff: dict[Vertex, int] = {v: 0 for v in G.vertices}
    for key, mult in G.edge_multiplicities().items():
        spare = mult - (1 if key in T.edges else 0)
        if spare <= 0:
            continue
        path = T.path_between(key[0], key[1])
        if path is None:
            continue
        x, y = key
        diff[x] += spare
        diff[y] += spare
        # the meet of the two root-ward walks is the cycle's top vertex
        up = set()
        a = x
        while a is not None:
            up.add(a)
            a = T.parent[a]
        meet = y
        while meet not in up:
            meet = T.parent[meet]  # type: ignore[assignment]
        diff[meet] -= 2 * spare
    cross_sub: dict[Vertex, int] = {}
    for v in post:
        cross_sub[v] = diff[v] + sum(cross_sub[c] for c in children[v])
    edges: set[EdgeKey] = set()
    crossing: dict[EdgeKey, int] = {}
    for u, v in sorted(T.edges):
        child = u if T.parent.get(u) == v else v
        below = b_sub[child]
        above = comp_b[child] - below
        in_core = below >= 1 and above >= 1
        if in_core:
            edges.add((u, v))
        crossing[(u, v)] = cross_sub[child] + (wiring_multiplicity if in_core else 0)
    return CoreReport(frozenset(edges), crossing)


def kernel(
    W: WiredWindow,
    generating_cycles: Iterable[Sequence[EdgeKey]],
    U: Iterable[Vertex],
) -> frozenset[EdgeKey]:
    """Edges all of whose generating cycles lie inside the induced G[U].

    Edges on no generating cycle (bridges, for the fundamental-cycle
    family) are vacuously in the kernel of every U.
    """
    G = W.graph
    Uset = frozenset(U)
    unknown = Uset - G.vertices
    if unknown:
        raise InputError(f"U contains unknown vertices {sorted(unknown)}")
    excluded: set[EdgeKey] = set()
    for cycle in generating_cycles:
        keys = [edge_key(*e) for e in cycle]
        inside = all(u in Uset and v in Uset for u, v in keys)
        if not inside:
            excluded.update(keys)
    return frozenset(e for e in G.sorted_edges() if e not in excluded)


def exterior(W: WiredWindow, H: Iterable[Vertex]) -> frozenset[Vertex]:
    """Vertices of H with an escape to B meeting H only at its start.

    A vertex qualifies if it lies in B, or if it has a neighbor outside
    H from which B is reachable without re-entering H.
    """
    G = W.graph
    Hset = frozenset(H)
    unknown = Hset - G.vertices
    if unknown:
        raise InputError(f"H contains unknown vertices {sorted(unknown)}")
    outside = frozenset(G.vertices - Hset)
    escaping = G.bfs_reach(sorted(W.boundary & outside), allowed=outside)
    out: set[Vertex] = set()
    for v in Hset:
        if v in W.boundary:
            out.add(v)
        elif any(w in escaping for w in G.neighbors(v)):
            out.add(v)
    return frozenset(out)


def wired_generating_cycles(
    W: WiredWindow,
    T: EndSelectedTree,
    m: int = 3,
) -> list[list[EdgeKey]]:
    """Fundamental cycles of T extended into the wired graph.

    The window tree is joined to the virtual vertex by a single edge at
    the order-least boundary vertex; the remaining boundary wiring
    instances become chords, so escapes through the boundary appear as
    cycles.  Cycles through the virtual vertex lie inside no G[U], which
    keeps near-boundary edges out of every kernel — the behaviour the
    infinite picture dictates.
    """
    from .connectivity import INFINITY_VERTEX, wire_boundary

    H = wire_boundary(W, m)
    labels = T.order.labels()
    labels[INFINITY_VERTEX] = max(labels.values()) + 1
    order_w = TotalOrder(labels)
    anchor = T.order.least(W.boundary)
    wired_tree = set(T.edges) | {edge_key(anchor, INFINITY_VERTEX)}
    T_w = EndSelectedTree(H, frozenset({INFINITY_VERTEX}), wired_tree, order_w)
    return list(fundamental_cycles(T_w).values())


def exterior_connectivity_check(
    W: WiredWindow,
    F: Iterable[Vertex],
    T: EndSelectedTree | None = None,
    order: TotalOrder | None = None,
) -> bool:
    """Is ext(G[F] minus its kernel edges) inside one remaining component?

    The generating set is the fundamental-cycle family of ``T`` (default:
    the boundary-style spanning tree) computed on the *wired* graph, so
    that boundary escapes count as cycles.  Expected always true on
    end-faithful windows; used as a runtime assertion by the pipeline.
    """
    G = W.graph
    Fset = frozenset(F)
    if not Fset:
        return True
    if len(G.bfs_reach([min(Fset)], allowed=Fset)) != len(Fset):
        raise InputError("G[F] must be connected")
    if T is None:
        T = spanning_tree(W, order or TotalOrder.by_id(G.vertices))
    cycles = wired_generating_cycles(W, T)
    ker = kernel(W, cycles, Fset)
    ext = exterior(W, Fset)
    if not ext:
        return True
    h_edges = [
        e
        for e in G.sorted_edges()
        if e[0] in Fset and e[1] in Fset and e not in ker
    ]
    adj: dict[Vertex, set[Vertex]] = {v: set() for v in Fset}
    for u, v in h_edges:
        adj[u].add(v)
        adj[v].add(u)
    start = min(ext)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return ext <= seen


@dataclass
class RemovalReport:
    """Proof obligations for an intra-class edge removal."""

    classes_checked: int
    removed_mass: Fraction
    window_report: WindowReport


def remove_edges_one_ended(
    W: WiredWindow,
    Q: Iterable[EdgeKey],
    F: Sequence[Iterable[Vertex]],
) -> tuple[WiredWindow, RemovalReport]:
    """Remove intra-class edges, certifying the one-endedness obligations.

    Every edge of Q must lie inside some class of F, every class must
    stay connected after the removal (violations name the class), and
    the end-faithfulness proxy is re-validated on the result.
    """
    from .graph import edge_measure

    G = W.graph
    classes = [frozenset(c) for c in F]
    Qset = {edge_key(*e) for e in Q}
    for key in Qset:
        if not G.multiplicity(*key):
            raise InputError(f"unknown edge {key}")
        if not any(key[0] in c and key[1] in c for c in classes):
            raise InputError(f"edge {key} is not inside any class")
    removed_mass = edge_measure(G, sorted(Qset))
    new_graph = G.without_edges(sorted(Qset))
    for c in classes:
        if not c:
            continue
        if len(new_graph.bfs_reach([min(c)], allowed=c)) != len(c):
            raise InputError(f"class {min(c)} disconnected by the removal")
    new_window = W.replace_graph(new_graph)
    report = RemovalReport(
        classes_checked=len(classes),
        removed_mass=removed_mass,
        window_report=validate_window(new_window),
    )
    return new_window, report
