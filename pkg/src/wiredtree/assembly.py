"""Final-tree assembly: Voronoi tessellation of leftover regions, partition
refinement, isolated-vertex attachment, stage-forest union, and the
one-endedness verdicts; plus the certified two-ended construction.

Everything here is deterministic given (window, order): nearest-center
ties break by order label, and every greedy choice minimizes exact
rational mass with order-label ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .cycles import EndSelectedTree, core
from .graph import (
    EdgeKey,
    InputError,
    InvariantError,
    TotalOrder,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    edge_key,
)
from .pipeline import SubstantialReport, check_substantial


# -- Voronoi tessellation ----------------------------------------------------


@dataclass
class VoronoiPartition:
    """Cells over a region A, one per outer-boundary center.

    ``cell_of`` maps every vertex of A (and each center to itself) to its
    center; every cell induces a connected subgraph containing its
    center, and ``tree_edges`` holds a per-cell spanning tree rooted
    there.  ``radius`` is the truncation radius of the last refinement
    (None before any), and ``trace`` accumulates refinement notes.
    """

    region: frozenset[Vertex]
    centers: frozenset[Vertex]
    cell_of: dict[Vertex, Vertex]
    tree_edges: dict[Vertex, frozenset[EdgeKey]]
    radius: int | None = None
    trace: list[str] = field(default_factory=list)

    def cells(self) -> dict[Vertex, frozenset[Vertex]]:
        out: dict[Vertex, set[Vertex]] = {c: set() for c in self.centers}
        for v, c in self.cell_of.items():
            out[c].add(v)
        return {c: frozenset(s) for c, s in out.items()}

    def all_tree_edges(self) -> frozenset[EdgeKey]:
        out: set[EdgeKey] = set()
        for edges in self.tree_edges.values():
            out |= edges
        return frozenset(out)


def _cell_tree(
    G: WeightedMultigraph, cell: frozenset[Vertex], center: Vertex, order: TotalOrder
) -> frozenset[EdgeKey]:
    """Label-least BFS tree of G[cell] rooted at the center."""
    dist = G.bfs_distances([center], allowed=cell)
    if len(dist) != len(cell):
        raise InvariantError(f"cell of {center} is not connected")
    edges: set[EdgeKey] = set()
    for v in sorted(cell - {center}):
        parents = [u for u in G.neighbors(v) if u in cell and dist.get(u) == dist[v] - 1]
        if not parents:
            raise InvariantError(f"no tree parent for {v} in the cell of {center}")
        edges.add(edge_key(v, order.least(parents)))
    return frozenset(edges)


def voronoi(
    W: WiredWindow | WeightedMultigraph,
    region: Iterable[Vertex],
    order: TotalOrder,
) -> VoronoiPartition:
    """Tessellate ``region`` by its outer vertex boundary.

    Each region vertex is claimed by the order-least nearest center,
    with distances measured along paths whose interior stays in the
    region.  Centers are all vertices outside the region adjacent to it.
    Accepts a bare graph (e.g. a torus): the construction never looks at
    a window boundary.
    """
    G = W.graph if isinstance(W, WiredWindow) else W
    A = frozenset(region)
    for v in A:
        if not G.has_vertex(v):
            raise InputError(f"unknown vertex {v!r}")
    if not A:
        return VoronoiPartition(A, frozenset(), {}, {})
    centers = frozenset(
        v for v in G.vertices - A if any(w in A for w in G.neighbors(v))
    )
    if not centers:
        raise InputError("region has an empty outer boundary")
    best: dict[Vertex, tuple[int, Fraction]] = {}
    assign: dict[Vertex, Vertex] = {c: c for c in centers}
    for c in sorted(centers, key=order.label):
        dist = G.bfs_distances([c], allowed=A | {c})
        for v, d in dist.items():
            if v == c:
                continue
            key = (d, order.label(c))
            if v not in best or key < best[v]:
                best[v] = key
                assign[v] = c
    unreached = sorted(A - set(best))
    if unreached:
        raise InputError(
            f"region vertices unreachable from any center: {unreached[:4]}"
        )
    part = VoronoiPartition(A, centers, assign, {})
    part.tree_edges = {
        c: _cell_tree(G, cell, c, order) for c, cell in sorted(part.cells().items())
    }
    return part


# -- refinement ---------------------------------------------------------------


def _cell_depths(
    G: WeightedMultigraph, cells: Mapping[Vertex, frozenset[Vertex]]
) -> dict[Vertex, int]:
    depth: dict[Vertex, int] = {}
    for c, cell in cells.items():
        dist = G.bfs_distances([c], allowed=cell)
        if len(dist) != len(cell):
            raise InvariantError(f"cell of {c} is not connected")
        depth.update(dist)
    return depth


def refine_partition(
    W: WiredWindow | WeightedMultigraph,
    V: VoronoiPartition,
    eta: Fraction,
    order: TotalOrder,
    shallow_contact_threshold: int = 12,
) -> VoronoiPartition:
    """One refinement round: push deep cell parts into few recipient cells.

    A truncation radius k is chosen so the shallow parts (depth <= k)
    carry at least (1 - eta/3) of the region's nu-mass.  Deep pieces
    (connected components beyond k) with many shallow contacts
    (>= ``shallow_contact_threshold``, the window proxy for an infinite
    shallow boundary) move to the cell of their order-least shallow
    contact; the remaining pieces are grouped by mutual contact and each
    group merges into an adjacent cell of minimal mass (the transversal
    choice).  Postcondition unless the best-effort note fires: the mass
    of region vertices in boundary-meeting cells is <= eta * nu(region).
    Cells stay connected and keep their centers throughout.
    """
    eta = Fraction(eta)
    if eta <= 0:
        raise InputError("eta must be positive")
    if eta >= 1:
        out = VoronoiPartition(
            V.region, V.centers, dict(V.cell_of), dict(V.tree_edges), V.radius,
            V.trace + ["eta >= 1: bound vacuous, unchanged"],
        )
        return out
    if isinstance(W, WiredWindow):
        G, boundary = W.graph, W.boundary
    else:
        G, boundary = W, frozenset()
    A = V.region
    nu_A = G.nu_total(A)
    cells = V.cells()
    depth = _cell_depths(G, cells)
    if not A:
        return V

    # k: smallest radius whose shallow mass reaches (1 - eta/3) of the region
    max_depth = max((depth[v] for v in A), default=0)
    k = max_depth
    acc = Fraction(0)
    by_depth: dict[int, Fraction] = {}
    for v in A:
        by_depth[depth[v]] = by_depth.get(depth[v], Fraction(0)) + G.nu(v)
    target_shallow = (1 - eta / 3) * nu_A
    for d in range(max_depth + 1):
        acc += by_depth.get(d, Fraction(0))
        if acc >= target_shallow:
            k = d
            break

    shallow = {v for v in A if depth[v] <= k}
    new_cell = dict(V.cell_of)

    # deep pieces per cell, each processed as its own connected component
    pieces: list[tuple[Vertex, frozenset[Vertex]]] = []  # (home center, piece)
    for c in sorted(cells, key=order.label):
        deep = frozenset(v for v in cells[c] if v in A and depth[v] > k)
        if not deep:
            continue
        sub = G.induced_subgraph(deep)
        for comp in sub.components():
            pieces.append((c, comp))

    moved: list[str] = []
    remaining: list[tuple[Vertex, frozenset[Vertex]]] = []
    for c, piece in pieces:
        contacts = sorted(
            {
                u
                for v in piece
                for u in G.neighbors(v)
                if u in shallow and u not in piece
            },
            key=order.label,
        )
        if len(contacts) >= shallow_contact_threshold:
            recipient = new_cell[contacts[0]]
            for v in piece:
                new_cell[v] = recipient
            moved.append(f"{len(piece)} vertices -> cell {recipient} (shallow contact)")
        else:
            remaining.append((c, piece))

    # group the rest by mutual deep contact; merge each group into the
    # adjacent cell of minimal current mass (ties by center label)
    if remaining:
        idx_of: dict[Vertex, int] = {}
        for i, (_c, piece) in enumerate(remaining):
            for v in piece:
                idx_of[v] = i
        parent = list(range(len(remaining)))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, (_c, piece) in enumerate(remaining):
            for v in piece:
                for u in G.neighbors(v):
                    j = idx_of.get(u)
                    if j is not None and find(i) != find(j):
                        parent[max(find(i), find(j))] = min(find(i), find(j))
        groups: dict[int, set[Vertex]] = {}
        for i, (_c, piece) in enumerate(remaining):
            groups.setdefault(find(i), set()).update(piece)

        cell_mass = {
            c: G.nu_total(cell & A) for c, cell in cells.items()
        }
        for gi in sorted(groups):
            group = frozenset(groups[gi])
            adjacent_cells = sorted(
                {
                    new_cell[u]
                    for v in group
                    for u in G.neighbors(v)
                    if u not in group and (u in A or u in V.centers)
                },
                key=order.label,
            )
            if not adjacent_cells:
                moved.append(f"group of {len(group)} has no adjacent cell; left in place")
                continue
            recipient = min(
                adjacent_cells,
                key=lambda c: (cell_mass.get(c, Fraction(0)), order.label(c)),
            )
            for v in group:
                new_cell[v] = recipient
            cell_mass[recipient] = cell_mass.get(recipient, Fraction(0)) + G.nu_total(group)
            moved.append(f"group of {len(group)} -> cell {recipient} (transversal)")

    out = VoronoiPartition(A, V.centers, new_cell, {}, k, list(V.trace))
    new_cells = out.cells()
    out.tree_edges = {
        c: _cell_tree(G, cell, c, order) for c, cell in sorted(new_cells.items())
    }
    bad = sum(
        (
            G.nu_total(cell & A)
            for cell in new_cells.values()
            if cell & boundary
        ),
        Fraction(0),
    )
    achieved = bad / nu_A if nu_A else Fraction(0)
    out.trace.append(
        f"k={k}; boundary-cell mass ratio {achieved} (target <= {eta})"
    )
    if bad > eta * nu_A:
        out.trace.append(f"best-effort: target {eta} unreachable, achieved {achieved}")
    if moved:
        out.trace.extend(moved)
    return out


def iterate_refinement(
    W: WiredWindow | WeightedMultigraph,
    V0: VoronoiPartition,
    order: TotalOrder,
    max_iterations: int = 64,
) -> VoronoiPartition:
    """Refine with the schedule eta_n = 2^-n until the mapping stabilizes.

    On finite windows each round either changes the cell mapping or is
    the identity, so stabilization is guaranteed; hitting the cap raises
    a diagnostic (expected never on valid windows).
    """
    current = V0
    for n in range(1, max_iterations + 1):
        nxt = refine_partition(W, current, Fraction(1, 2**n), order)
        if nxt.cell_of == current.cell_of:
            nxt.trace.append(f"stabilized after {n} iteration(s)")
            return nxt
        current = nxt
    raise InvariantError(f"refinement did not stabilize within {max_iterations} rounds")


# -- isolated-vertex attachment ----------------------------------------------


@dataclass
class AttachResult:
    """The stage forest with its mechanism split and coverage audit."""

    edges: frozenset[EdgeKey]
    class_trees: frozenset[EdgeKey]  # classes adjacent to the targets
    pocket_trees: frozenset[EdgeKey]  # boundary-free pockets
    cell_trees: frozenset[EdgeKey]  # boundary-touching pockets via Voronoi
    coverage: Fraction  # nu-fraction of I whose class lands in one component
    notes: list[str] = field(default_factory=list)


def grow_attachment_classes(
    G: WeightedMultigraph,
    targets: frozenset[Vertex],
    region: frozenset[Vertex],
    order: TotalOrder,
    rho: int | None = None,
) -> list[frozenset[Vertex]]:
    """Connected classes covering the region, grown from the targets.

    Label-least nearest-target growth (a Voronoi tessellation of the
    region by the adjacent targets), truncated at depth ``rho`` when
    given; each class is the region part of one target's cell.
    """
    best: dict[Vertex, tuple[int, Fraction]] = {}
    assign: dict[Vertex, Vertex] = {}
    seeds = sorted(
        (t for t in targets if any(w in region for w in G.neighbors(t))),
        key=order.label,
    )
    for t in seeds:
        dist = G.bfs_distances([t], allowed=region | {t})
        for v, d in dist.items():
            if v == t or (rho is not None and d > rho):
                continue
            key = (d, order.label(t))
            if v not in best or key < best[v]:
                best[v] = key
                assign[v] = t
    classes: dict[Vertex, set[Vertex]] = {}
    for v, t in assign.items():
        classes.setdefault(t, set()).add(v)
    # a cell is connected only through its target (branches may meet
    # nowhere else), so split each into its actual components; every
    # component keeps a vertex adjacent to the target
    out: list[frozenset[Vertex]] = []
    for _t, c in sorted(classes.items()):
        parts = G.induced_subgraph(frozenset(c)).components()
        out.extend(sorted(parts, key=min))
    return out


def attach_isolated(
    W: WiredWindow,
    Gp: WeightedMultigraph,
    F: Sequence[Iterable[Vertex]],
    delta: Fraction,
    order: TotalOrder,
    *,
    ambient: WeightedMultigraph | None = None,
    extra_targets: frozenset[Vertex] = frozenset(),
) -> AttachResult:
    """Attach every isolated vertex of Gp to the surviving structure.

    Builds an acyclic forest in three layers: spanning trees of the
    F-classes adjacent to the target set, each hooked by one edge;
    spanning trees of leftover boundary-free pockets, hooked likewise;
    and refined Voronoi cell trees over boundary-touching pockets.
    Every forest component contains exactly one target vertex, and the
    nu-fraction of isolated vertices whose F-class lands inside a single
    component is reported against ``delta``.

    ``ambient`` supplies the attachment edges (default: the window's
    graph); ``extra_targets`` extends the target set beyond the one-ended
    vertices of Gp (the pipeline passes previously attached vertices).
    """
    delta = Fraction(delta)
    G = ambient if ambient is not None else W.graph
    sub = check_substantial(W, Gp)
    if not sub.ok:
        raise InputError("subgraph is not substantial: " + "; ".join(sub.notes))
    O = sub.one_ended_vertices | extra_targets
    I = sub.isolated_vertices - extra_targets
    if not I:
        return AttachResult(
            frozenset(), frozenset(), frozenset(), frozenset(), Fraction(1),
            ["no isolated vertices"],
        )
    classes = [frozenset(c) for c in F]
    seen: set[Vertex] = set()
    for c in classes:
        if not c:
            raise InputError("empty attachment class")
        if not c <= I:
            raise InputError(f"class {sorted(c)[:3]} leaves the isolated set")
        if c & seen:
            raise InputError("attachment classes overlap")
        seen |= c
        if len(G.bfs_reach([min(c)], allowed=c)) != len(c):
            raise InputError(f"class {sorted(c)[:3]} is not connected")

    notes: list[str] = []
    attached: set[Vertex] = set()
    class_edges: set[EdgeKey] = set()
    pocket_edges: set[EdgeKey] = set()
    cell_edges: set[EdgeKey] = set()

    # layer 1: classes adjacent to the targets
    for c in sorted(classes, key=min):
        links = sorted(
            (
                (order.label(o), order.label(u), u, o)
                for u in c
                for o in G.neighbors(u)
                if o in O
            ),
        )
        if not links:
            continue
        _lo, _lu, u, o = links[0]
        class_edges.add(edge_key(u, o))
        dist = G.bfs_distances([u], allowed=c)
        for v in sorted(c - {u}):
            parents = [
                w for w in G.neighbors(v) if w in c and dist.get(w) == dist[v] - 1
            ]
            class_edges.add(edge_key(v, order.least(parents)))
        attached |= c

    # leftover pockets: components of G[I minus attached].  A pocket
    # cannot contain boundary vertices (those are one-ended parts), so
    # "meets the boundary" is read on its closure: member or neighbor.
    leftover = I - attached
    pockets = G.induced_subgraph(leftover).components() if leftover else []

    def touches_boundary(p: frozenset[Vertex]) -> bool:
        return bool(p & W.boundary) or any(
            w in W.boundary for v in p for w in G.neighbors(v)
        )

    finite_pockets = [p for p in pockets if not touches_boundary(p)]
    infinite_pockets = [p for p in pockets if touches_boundary(p)]

    # layer 2: boundary-free pockets, spanning tree plus one hook
    for p in sorted(finite_pockets, key=min):
        hook = sorted(
            (
                (order.label(t), order.label(u), u, t)
                for u in p
                for t in G.neighbors(u)
                if t in O or t in attached
            ),
        )
        if not hook:
            comp = G.component_of(min(p))
            if not (comp & O):
                raise InputError(
                    f"isolated vertices at {min(p)} unreachable from the one-ended set"
                )
            raise InputError(f"pocket at {min(p)} has no attachment edge yet")
        _lt, _lu, u, t = hook[0]
        pocket_edges.add(edge_key(u, t))
        dist = G.bfs_distances([u], allowed=p)
        if len(dist) != len(p):
            raise InvariantError(f"pocket at {min(p)} is not connected")
        for v in sorted(p - {u}):
            parents = [
                w for w in G.neighbors(v) if w in p and dist.get(w) == dist[v] - 1
            ]
            pocket_edges.add(edge_key(v, order.least(parents)))
        attached |= p
        notes.append(f"pocket at {min(p)}: {len(p)} vertices")

    # layer 3: boundary-touching pockets via refined Voronoi cells
    for p in sorted(infinite_pockets, key=min):
        ambient_window = W.replace_graph(G) if ambient is not None else W
        base = voronoi(ambient_window, p, order)
        stray = sorted(base.centers - (O | attached))
        if stray:
            raise InputError(
                f"pocket at {min(p)} touches unattached vertices {stray[:3]}"
            )
        refined = iterate_refinement(ambient_window, base, order)
        cell_edges |= refined.all_tree_edges()
        attached |= p
        notes.append(
            f"boundary pocket at {min(p)}: {len(p)} vertices, "
            f"{len(refined.centers)} cells"
        )

    edges = frozenset(class_edges | pocket_edges | cell_edges)

    # audit: acyclic, every component meets the targets exactly once
    adj: dict[Vertex, list[Vertex]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen_v: set[Vertex] = set()
    for start in sorted(adj):
        if start in seen_v:
            continue
        comp = {start}
        queue = [start]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            for y in adj[x]:
                if y not in comp:
                    comp.add(y)
                    queue.append(y)
        seen_v |= comp
        n_edges = sum(1 for e in edges if e[0] in comp)
        if n_edges != len(comp) - 1:
            raise InvariantError(f"attachment component at {min(comp)} has a cycle")
        if len(comp & O) != 1:
            raise InvariantError(
                f"attachment component at {min(comp)} meets {len(comp & O)} targets"
            )
    missing = sorted(I - attached)
    if missing:
        raise InputError(
            f"isolated vertices unreachable from the one-ended set: {missing[:4]}"
        )

    # coverage: classes fully inside one forest component
    comp_id: dict[Vertex, Vertex] = {}
    for start in sorted(adj):
        if start in comp_id:
            continue
        comp = {start}
        queue = [start]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            for y in adj[x]:
                if y not in comp:
                    comp.add(y)
                    queue.append(y)
        rep = min(comp)
        for v in comp:
            comp_id[v] = rep
    covered = Fraction(0)
    for c in classes:
        reps = {comp_id.get(v) for v in c}
        if len(reps) == 1 and None not in reps:
            covered += G.nu_total(c)
    nu_I = G.nu_total(I)
    coverage = covered / nu_I if nu_I else Fraction(1)
    if coverage < 1 - delta:
        notes.append(f"coverage {coverage} below target {1 - delta}")
    return AttachResult(
        edges=edges,
        class_trees=frozenset(class_edges),
        pocket_trees=frozenset(pocket_edges),
        cell_trees=frozenset(cell_edges),
        coverage=coverage,
        notes=notes,
    )


# -- stage union and the final tree ------------------------------------------


@dataclass
class AssemblyStage:
    """One reduction snapshot in the original vertex space."""

    graph: WeightedMultigraph
    tree_edges: frozenset[EdgeKey]


@dataclass
class OneEndedReport:
    """Two independently computed wired-one-endedness verdicts."""

    one_ended: bool
    cut_verdict: bool  # every tree edge has at most one boundary side
    peel_verdict: bool  # non-boundary leaf peeling exhausts non-boundary vertices
    witness: Vertex | EdgeKey | None = None
    notes: list[str] = field(default_factory=list)


@dataclass
class AssemblyResult:
    """The assembled spanning structure with its audits."""

    tree: EndSelectedTree
    stage_forests: list[frozenset[EdgeKey]]
    final_forest: frozenset[EdgeKey]
    coverages: list[Fraction]
    verdict: OneEndedReport
    notes: list[str] = field(default_factory=list)


def boundary_forest(
    W: WiredWindow, tree_edges: frozenset[EdgeKey], order: TotalOrder
) -> frozenset[EdgeKey]:
    """Split a spanning forest at the boundary: one tree per boundary vertex.

    Multi-source BFS from the boundary along the given tree edges keeps
    each vertex's parent edge toward its nearest boundary vertex, so a
    component holding several boundary vertices loses exactly the edges
    linking their territories.  A tree component with edges but no
    boundary vertex cannot be split and raises.
    """
    adj: dict[Vertex, set[Vertex]] = {}
    for u, v in tree_edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    roots = sorted(set(adj) & W.boundary)
    dist: dict[Vertex, int] = {r: 0 for r in roots}
    queue: list[Vertex] = list(roots)
    i = 0
    while i < len(queue):
        v = queue[i]
        i += 1
        for w in sorted(adj.get(v, ())):
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    unreached = sorted(v for v in adj if v not in dist and v not in W.boundary)
    if unreached:
        raise InvariantError(
            f"tree component without boundary contact at {unreached[0]}"
        )
    kept: set[EdgeKey] = set()
    for v in sorted(dist):
        if dist[v] == 0:
            continue
        parents = [u for u in adj[v] if dist.get(u) == dist[v] - 1]
        kept.add(edge_key(v, order.least(parents)))
    return frozenset(kept)


class _ForestBuilder:
    """Grows an acyclic edge set; admission merges two components or fails."""

    def __init__(self, vertices: Iterable[Vertex]) -> None:
        self._parent: dict[Vertex, Vertex] = {v: v for v in vertices}
        self.edges: set[EdgeKey] = set()
        self.skipped: list[EdgeKey] = []

    def find(self, v: Vertex) -> Vertex:
        p = self._parent
        while p[v] != v:
            p[v] = p[p[v]]
            v = p[v]
        return v

    def joined(self, u: Vertex, v: Vertex) -> bool:
        return self.find(u) == self.find(v)

    def add(self, u: Vertex, v: Vertex) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            self.skipped.append(edge_key(u, v))
            return False
        self._parent[max(ru, rv)] = min(ru, rv)
        self.edges.add(edge_key(u, v))
        return True


def _attach_unit(
    builder: _ForestBuilder,
    G: WeightedMultigraph,
    unit: frozenset[Vertex],
    targets: frozenset[Vertex],
    order: TotalOrder,
) -> bool:
    """Hook one connected unit into the forest: one outgoing edge plus a
    spanning tree of the unit.  Returns False when no hook edge exists."""
    hooks = sorted(
        (order.label(t), order.label(u), u, t)
        for u in unit
        for t in G.neighbors(u)
        if t in targets
    )
    if not hooks:
        return False
    for _lt, _lu, u, t in hooks:
        if builder.add(u, t):
            break
    else:
        u = hooks[0][2]  # already joined through earlier stages
    dist = G.bfs_distances([u], allowed=unit)
    if len(dist) != len(unit):
        raise InvariantError(f"attachment unit at {min(unit)} is not connected")
    for v in sorted(unit - {u}):
        parents = [w for w in G.neighbors(v) if w in unit and dist.get(w) == dist[v] - 1]
        builder.add(v, order.least(parents))
    return True


def assemble(
    W: WiredWindow,
    stages: Sequence[AssemblyStage],
    order: TotalOrder,
    delta: Fraction = Fraction(1, 10),
    rho: int | None = None,
) -> AssemblyResult:
    """Union the per-stage attachment forests with the split final tree.

    ``stages`` are the reduction snapshots in the original vertex space:
    nested substantial subgraphs, each carrying its spanning forest.  At
    each stage the newly isolated vertices are attached with the edges
    of the previous stage's graph (those still existed when the
    isolation happened); the final stage's forest is split at the
    boundary and unioned in.  The result spans every vertex, is acyclic
    by construction, and is handed to both one-endedness checks.
    """
    if not stages:
        raise InputError("no stages given")
    V = W.graph.vertices
    prev = W.graph
    for i, st in enumerate(stages):
        if st.graph.vertices != V:
            raise InputError(f"stage {i} changes the vertex set")
        for (u, v), m in st.graph.edge_multiplicities().items():
            if m > prev.multiplicity(u, v):
                raise InputError(f"stage {i} adds edge {(u, v)}")
        prev = st.graph

    builder = _ForestBuilder(V)
    stage_forests: list[frozenset[EdgeKey]] = []
    coverages: list[Fraction] = []
    notes: list[str] = []
    attached: set[Vertex] = set()
    ambient = W.graph
    for i, st in enumerate(stages):
        sub = check_substantial(W, st.graph)
        if not sub.ok:
            raise InputError(f"stage {i} is not substantial: " + "; ".join(sub.notes))
        newly = sub.isolated_vertices - attached
        before = set(builder.edges)
        if newly:
            targets = frozenset(sub.one_ended_vertices | attached)
            classes = grow_attachment_classes(ambient, targets, frozenset(newly), order, rho)
            claimed: set[Vertex] = set()
            nu_covered = Fraction(0)
            for c in sorted(classes, key=min):
                if not _attach_unit(builder, ambient, c, targets, order):
                    raise InputError(
                        f"stage {i}: class at {min(c)} has no edge to the targets"
                    )
                claimed |= c
                nu_covered += ambient.nu_total(c)
            leftover = frozenset(newly - claimed)
            pockets = (
                ambient.induced_subgraph(leftover).components() if leftover else []
            )
            for p in sorted(pockets, key=min):
                near_boundary = bool(p & W.boundary) or any(
                    w in W.boundary for v in p for w in ambient.neighbors(v)
                )
                if near_boundary:
                    win = W.replace_graph(ambient)
                    refined = iterate_refinement(win, voronoi(win, p, order), order)
                    stray = sorted(refined.centers - (targets | claimed))
                    if stray:
                        raise InputError(
                            f"stage {i}: pocket at {min(p)} touches unattached "
                            f"vertices {stray[:3]}"
                        )
                    # a cell is connected through its center, but the body
                    # alone may split into lobes; the refined cell trees
                    # already span cell + center, so admit those edges
                    for c in sorted(refined.cells()):
                        for u, v in sorted(refined.tree_edges.get(c, frozenset())):
                            builder.add(u, v)
                    notes.append(
                        f"stage {i}: boundary pocket at {min(p)}, "
                        f"{len(refined.centers)} cells"
                    )
                else:
                    if not _attach_unit(builder, ambient, p, frozenset(targets | claimed), order):
                        comp = ambient.component_of(min(p))
                        raise InputError(
                            f"stage {i}: isolated vertices at {min(p)} unreachable "
                            f"from the one-ended set"
                            if not (comp & targets)
                            else f"stage {i}: pocket at {min(p)} has no hook"
                        )
                    notes.append(f"stage {i}: pocket at {min(p)}, {len(p)} vertices")
                claimed |= p
            attached |= newly
            nu_newly = ambient.nu_total(newly)
            coverage = nu_covered / nu_newly if nu_newly else Fraction(1)
            coverages.append(coverage)
            if coverage < 1 - delta:
                notes.append(f"stage {i}: class coverage {coverage} below {1 - delta}")
        else:
            coverages.append(Fraction(1))
        stage_forests.append(frozenset(builder.edges - before))
        ambient = st.graph

    final_split = boundary_forest(W, stages[-1].tree_edges, order)
    for u, v in sorted(final_split):
        builder.add(u, v)
    if builder.skipped:
        notes.append(f"{len(builder.skipped)} candidate edges skipped as redundant")

    tree = EndSelectedTree(W.graph, W.boundary, frozenset(builder.edges), order)
    n_comps = len(tree.tree_components())
    if len(tree.edges) != len(V) - n_comps:
        raise InvariantError("assembled edge set is not a forest")
    verdict = check_wired_one_ended(W, tree)
    return AssemblyResult(
        tree=tree,
        stage_forests=stage_forests,
        final_forest=final_split,
        coverages=coverages,
        verdict=verdict,
        notes=notes,
    )


# -- one-endedness verdicts ---------------------------------------------------


def check_wired_one_ended(W: WiredWindow, T: EndSelectedTree) -> OneEndedReport:
    """Decide wired one-endedness of a spanning forest, twice.

    Cut route: no tree edge separates two boundary-touching sides within
    its component, and every component touches the boundary.  Peel
    route: repeatedly deleting non-boundary leaves (degree exactly one)
    leaves no vertex outside the boundary, and no tree edge joins two
    boundary vertices (wired to a single point at infinity such an edge
    is a self-loop, which peeling cannot see: it has no interior vertex
    to leave behind).  The verdicts are computed independently and must
    agree.

    The forest may split a connected window into several trees: after
    wiring the boundary to the point at infinity it is still one tree,
    which is the object being judged.
    """
    report_core = core(W, T)
    bfree = [c for c in T.tree_components() if not (c & W.boundary)]
    cut_ok = not report_core.edges and not bfree
    witness_a: Vertex | EdgeKey | None = None
    if report_core.edges:
        witness_a = min(report_core.edges)
    elif bfree:
        witness_a = min(bfree[0])

    deg: dict[Vertex, int] = {v: 0 for v in W.graph.vertices}
    adj: dict[Vertex, set[Vertex]] = {v: set() for v in W.graph.vertices}
    for u, v in T.edges:
        deg[u] += 1
        deg[v] += 1
        adj[u].add(v)
        adj[v].add(u)
    alive = set(W.graph.vertices)
    queue = sorted(v for v in alive if deg[v] == 1 and v not in W.boundary)
    qi = 0
    while qi < len(queue):
        v = queue[qi]
        qi += 1
        if v not in alive or deg[v] != 1:
            continue  # deleted already, or its last neighbor went first
        alive.discard(v)
        for w in adj[v]:
            if w in alive:
                deg[w] -= 1
                if deg[w] == 1 and w not in W.boundary:
                    queue.append(w)
    survivors = sorted(alive - W.boundary)
    loops = sorted(
        e for e in T.edges if e[0] in W.boundary and e[1] in W.boundary
    )
    peel_ok = not survivors and not loops
    witness_b: Vertex | EdgeKey | None = survivors[0] if survivors else None
    if witness_b is None and loops:
        witness_b = loops[0]

    if cut_ok != peel_ok:
        raise InvariantError(
            f"one-endedness verdicts disagree: cut={cut_ok} peel={peel_ok}"
        )
    notes = []
    if not cut_ok:
        notes.append(
            f"cut witness {witness_a}" if report_core.edges else f"boundary-free component at {witness_a}"
        )
    if not peel_ok:
        if survivors:
            notes.append(f"peel survivor {witness_b}")
        else:
            notes.append(f"boundary-boundary tree edge {witness_b}")
    return OneEndedReport(
        one_ended=cut_ok,
        cut_verdict=cut_ok,
        peel_verdict=peel_ok,
        witness=witness_a if witness_a is not None else witness_b,
        notes=notes,
    )


# -- the two-ended construction ----------------------------------------------


@dataclass
class TwoEndedResult:
    """A spanning tree realizing exactly one two-sided line."""

    tree: EndSelectedTree
    line_edges: frozenset[EdgeKey]
    certificate: frozenset[EdgeKey]
    notes: list[str] = field(default_factory=list)


def two_ended_tree(
    W: WiredWindow, L: Sequence[Vertex], order: TotalOrder
) -> TwoEndedResult:
    """Spanning tree whose only two-sided cuts are the edges of L.

    L must be a simple boundary-to-boundary path in the window graph.
    All off-line vertices are claimed by refined Voronoi cells around L
    and hang below it, so cutting a cell edge strands a subtree that
    misses both designated ends, while cutting a line edge separates
    them.  The certificate lists the two-sided edges and must equal
    E(L) exactly.
    """
    if len(L) < 2:
        raise InputError("line must have at least two vertices")
    if len(set(L)) != len(L):
        raise InputError("line repeats a vertex")
    if L[0] not in W.boundary or L[-1] not in W.boundary:
        raise InputError("line must run boundary to boundary")
    for u, v in zip(L, L[1:]):
        if not W.graph.multiplicity(u, v):
            raise InputError(f"line step {(u, v)} is not an edge")
    line_edges = frozenset(edge_key(u, v) for u, v in zip(L, L[1:]))
    rest = frozenset(W.graph.vertices - set(L))
    cell_edges: frozenset[EdgeKey] = frozenset()
    if rest:
        refined = iterate_refinement(W, voronoi(W, rest, order), order)
        cell_edges = refined.all_tree_edges()
    edges = line_edges | cell_edges
    tree = EndSelectedTree(W.graph, W.boundary, edges, order)
    if len(tree.tree_components()) != 1:
        raise InvariantError("line plus cell trees do not span a single tree")

    ends = {L[0], L[-1]}
    adj: dict[Vertex, set[Vertex]] = {v: set() for v in W.graph.vertices}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    two_sided: set[EdgeKey] = set()
    for e in sorted(edges):
        u, v = e
        seen = {u}
        stack = [u]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if (x, y) in ((u, v), (v, u)):
                    continue
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if ends & seen and ends - seen:
            two_sided.add(e)
    if two_sided != line_edges:
        raise InvariantError(
            f"certificate mismatch: {sorted(two_sided ^ line_edges)[:4]}"
        )
    return TwoEndedResult(
        tree=tree,
        line_edges=line_edges,
        certificate=frozenset(two_sided),
        notes=[f"{len(rest)} off-line vertices in cells"],
    )


def stages_from_trace(W: WiredWindow, trace, order: TotalOrder) -> list[AssemblyStage]:
    """Assembly stages from a contraction-free reduction trace.

    Each iteration window becomes one stage; a trace with no iterations
    stages the window itself with a boundary-rooted spanning forest.
    Contracted traces change the vertex set and cannot be staged — run
    the reduction with ``contract=False`` for assembly.
    """
    from .cycles import spanning_tree

    if any(step.blobs for step in trace.cmap.steps):
        raise InputError(
            "trace used contraction; rerun the reduction with contract=False"
        )
    stages = [
        AssemblyStage(rec.result.window.graph, rec.result.tree_edges)
        for rec in trace.iterations
    ]
    if not stages:
        t = spanning_tree(W, order, style="boundary")
        stages = [AssemblyStage(W.graph, t.edges)]
    return stages
