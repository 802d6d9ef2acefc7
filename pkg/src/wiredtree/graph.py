"""Core graph model: weighted multigraphs with exact rational vertex measures.

Everything downstream builds on four objects:

- :class:`WeightedMultigraph` — a finite multigraph carrying a positive
  rational vertex measure ``nu``; the edge measure ``mu`` and the ratio
  cocycle are derived from it.
- :class:`WiredWindow` — a graph plus a nonempty boundary set ``B``.  The
  single convention used throughout the package: a vertex set counts as
  "infinite" exactly when its component meets ``B``.
- :class:`HierarchicalPartition` — nested connected partitions, from
  singletons up to connected components.
- :class:`ContractionMap` — an invertible record of vertex merges, so trees
  found on a contracted graph can be expanded back to the original one.

All arithmetic on measures is done with :class:`fractions.Fraction`; no
floats appear in any comparison.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

Vertex = str
EdgeKey = tuple[str, str]
EdgeInstance = tuple[str, str, int]

RationalLike = Fraction | int | str


class GraphError(ValueError):
    """Any structural error raised by this package."""


class InputError(GraphError):
    """An argument fails an operation's precondition."""


class InvariantError(GraphError):
    """An internal invariant that should never fail did fail."""


def edge_key(u: Vertex, v: Vertex) -> EdgeKey:
    """Canonical unordered key for an edge: endpoints sorted, no self-loops."""
    if u == v:
        raise InputError(f"self-loop at {u!r} is not a valid edge")
    return (u, v) if u <= v else (v, u)


def as_fraction(x: RationalLike) -> Fraction:
    """Coerce ints, 'p/q' strings, and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise InputError(f"not an exact rational: {x!r}")


class WeightedMultigraph:
    """Finite multigraph with a positive rational vertex measure.

    Parameters
    ----------
    nu:
        Mapping vertex id -> measure.  Every value must be > 0, except for
        vertices listed in ``zero_measure_ok`` (used only by the wired
        virtual vertex).
    edges:
        Either a mapping ``(u, v) -> multiplicity`` with ``u < v``, or an
        iterable of ``(u, v)`` / ``(u, v, multiplicity)`` tuples.  Parallel
        mentions accumulate.  Self-loops are rejected.
    """

    __slots__ = ("_nu", "_edges", "_adj", "_zero_ok", "_mu_cache")

    def __init__(
        self,
        nu: Mapping[Vertex, RationalLike],
        edges: Mapping[EdgeKey, int] | Iterable[tuple] = (),
        zero_measure_ok: frozenset[Vertex] = frozenset(),
    ) -> None:
        self._zero_ok = frozenset(zero_measure_ok)
        self._nu: dict[Vertex, Fraction] = {}
        for v, raw in nu.items():
            val = as_fraction(raw)
            if val < 0 or (val == 0 and v not in self._zero_ok):
                raise InputError(f"nu({v!r}) = {val} must be positive")
            self._nu[str(v)] = val
        self._edges: dict[EdgeKey, int] = {}
        if isinstance(edges, Mapping):
            items: Iterable[tuple] = ((u, v, m) for (u, v), m in edges.items())
        else:
            items = edges
        for item in items:
            if len(item) == 2:
                u, v, m = item[0], item[1], 1
            else:
                u, v, m = item
            if not isinstance(m, int) or m < 1:
                raise InputError(f"edge {item!r}: multiplicity must be a positive int")
            key = edge_key(str(u), str(v))
            if key[0] not in self._nu or key[1] not in self._nu:
                raise InputError(f"edge {key} mentions an unknown vertex")
            self._edges[key] = self._edges.get(key, 0) + m
        self._adj: dict[Vertex, dict[Vertex, int]] = {v: {} for v in self._nu}
        for (u, v), m in self._edges.items():
            self._adj[u][v] = m
            self._adj[v][u] = m
        self._mu_cache: Fraction | None = None

    # -- read access ---------------------------------------------------

    @property
    def vertices(self) -> frozenset[Vertex]:
        return frozenset(self._nu)

    def sorted_vertices(self) -> list[Vertex]:
        return sorted(self._nu)

    def nu(self, v: Vertex) -> Fraction:
        try:
            return self._nu[v]
        except KeyError:
            raise InputError(f"unknown vertex {v!r}") from None

    def nu_map(self) -> dict[Vertex, Fraction]:
        return dict(self._nu)

    def nu_total(self, vertices: Iterable[Vertex] | None = None) -> Fraction:
        vs = self._nu if vertices is None else vertices
        return sum((self.nu(v) for v in vs), Fraction(0))

    @property
    def zero_measure_ok(self) -> frozenset[Vertex]:
        return self._zero_ok

    def edge_multiplicities(self) -> dict[EdgeKey, int]:
        return dict(self._edges)

    def sorted_edges(self) -> list[EdgeKey]:
        return sorted(self._edges)

    def multiplicity(self, u: Vertex, v: Vertex) -> int:
        return self._edges.get(edge_key(u, v), 0)

    def has_vertex(self, v: Vertex) -> bool:
        return v in self._nu

    def edge_instances(self) -> list[EdgeInstance]:
        """All edge instances ``(u, v, i)``, one per unit of multiplicity."""
        return [(u, v, i) for (u, v) in self.sorted_edges() for i in range(self._edges[(u, v)])]

    def num_edge_instances(self) -> int:
        return sum(self._edges.values())

    def degree(self, v: Vertex) -> int:
        return sum(self._adj[v].values())

    def neighbors(self, v: Vertex) -> list[Vertex]:
        try:
            return sorted(self._adj[v])
        except KeyError:
            raise InputError(f"unknown vertex {v!r}") from None

    def adjacency(self, v: Vertex) -> dict[Vertex, int]:
        return dict(self._adj[v])

    # -- traversal -----------------------------------------------------

    def bfs_reach(
        self,
        sources: Iterable[Vertex],
        allowed: frozenset[Vertex] | None = None,
    ) -> set[Vertex]:
        """Vertices reachable from ``sources`` staying inside ``allowed``."""
        seen: set[Vertex] = set()
        queue: list[Vertex] = []
        for s in sources:
            if s in seen or (allowed is not None and s not in allowed):
                continue
            seen.add(s)
            queue.append(s)
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            for w in self._adj[v]:
                if w in seen or (allowed is not None and w not in allowed):
                    continue
                seen.add(w)
                queue.append(w)
        return seen

    def bfs_distances(
        self,
        sources: Iterable[Vertex],
        allowed: frozenset[Vertex] | None = None,
    ) -> dict[Vertex, int]:
        """BFS layer number from the source set, restricted to ``allowed``."""
        dist: dict[Vertex, int] = {}
        queue: list[Vertex] = []
        for s in sorted(set(sources)):
            if allowed is not None and s not in allowed:
                continue
            dist[s] = 0
            queue.append(s)
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            for w in self._adj[v]:
                if w in dist or (allowed is not None and w not in allowed):
                    continue
                dist[w] = dist[v] + 1
                queue.append(w)
        return dist

    def components(self) -> list[frozenset[Vertex]]:
        """Connected components, sorted by their least vertex id."""
        remaining = set(self._nu)
        out: list[frozenset[Vertex]] = []
        while remaining:
            start = min(remaining)
            comp = self.bfs_reach([start])
            out.append(frozenset(comp))
            remaining -= comp
        return sorted(out, key=min)

    def component_of(self, v: Vertex) -> frozenset[Vertex]:
        return frozenset(self.bfs_reach([v]))

    def is_connected(self) -> bool:
        if not self._nu:
            return True
        return len(self.bfs_reach([min(self._nu)])) == len(self._nu)

    # -- derived graphs --------------------------------------------------

    def spanning_subgraph(self, edges: Iterable[EdgeKey] | Mapping[EdgeKey, int]) -> "WeightedMultigraph":
        """Same vertices, only the given edges (full multiplicity for bare keys)."""
        sub: dict[EdgeKey, int] = {}
        if isinstance(edges, Mapping):
            for key, m in edges.items():
                key = edge_key(*key)
                have = self._edges.get(key, 0)
                if m < 0 or m > have:
                    raise InputError(f"edge {key} multiplicity {m} exceeds graph's {have}")
                if m:
                    sub[key] = m
        else:
            for key in edges:
                key = edge_key(*key)
                if key not in self._edges:
                    raise InputError(f"unknown edge {key}")
                sub[key] = self._edges[key]
        return WeightedMultigraph(self._nu, sub, zero_measure_ok=self._zero_ok)

    def without_edges(self, edges: Iterable[EdgeKey] | Mapping[EdgeKey, int]) -> "WeightedMultigraph":
        """Remove edges; a bare key removes all parallel copies of it."""
        sub = dict(self._edges)
        if isinstance(edges, Mapping):
            for key, m in edges.items():
                key = edge_key(*key)
                have = sub.get(key, 0)
                if m < 0 or m > have:
                    raise InputError(f"edge {key} multiplicity {m} exceeds graph's {have}")
                if have - m:
                    sub[key] = have - m
                else:
                    sub.pop(key, None)
        else:
            for key in edges:
                key = edge_key(*key)
                if key not in sub:
                    raise InputError(f"unknown edge {key}")
                del sub[key]
        return WeightedMultigraph(self._nu, sub, zero_measure_ok=self._zero_ok)

    def induced_subgraph(self, vertices: Iterable[Vertex]) -> "WeightedMultigraph":
        vs = set(vertices)
        unknown = vs - set(self._nu)
        if unknown:
            raise InputError(f"unknown vertices {sorted(unknown)}")
        nu = {v: self._nu[v] for v in vs}
        edges = {k: m for k, m in self._edges.items() if k[0] in vs and k[1] in vs}
        return WeightedMultigraph(nu, edges, zero_measure_ok=self._zero_ok & vs)

    def with_vertex(self, v: Vertex, nu: RationalLike, *, zero_ok: bool = False) -> "WeightedMultigraph":
        if v in self._nu:
            raise InputError(f"vertex {v!r} already present")
        new_nu = dict(self._nu)
        new_nu[v] = as_fraction(nu)
        zero = self._zero_ok | ({v} if zero_ok else set())
        return WeightedMultigraph(new_nu, self._edges, zero_measure_ok=frozenset(zero))

    def with_extra_edges(self, edges: Iterable[tuple]) -> "WeightedMultigraph":
        merged = dict(self._edges)
        for item in edges:
            if len(item) == 2:
                u, v, m = item[0], item[1], 1
            else:
                u, v, m = item
            key = edge_key(u, v)
            merged[key] = merged.get(key, 0) + m
        return WeightedMultigraph(self._nu, merged, zero_measure_ok=self._zero_ok)

    def mu(self, key: EdgeKey) -> Fraction:
        """Measure of one edge instance: nu(u) + nu(v)."""
        u, v = edge_key(*key)
        return self.nu(u) + self.nu(v)

    def mu_total(self) -> Fraction:
        if self._mu_cache is None:
            self._mu_cache = sum(
                ((self._nu[u] + self._nu[v]) * m for (u, v), m in self._edges.items()),
                Fraction(0),
            )
        return self._mu_cache

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedMultigraph):
            return NotImplemented
        return self._nu == other._nu and self._edges == other._edges

    def __hash__(self) -> int:  # pragma: no cover - not used as dict key in hot paths
        return hash((tuple(sorted(self._nu.items())), tuple(sorted(self._edges.items()))))

    def __repr__(self) -> str:
        return f"WeightedMultigraph(|V|={len(self._nu)}, |E|={self.num_edge_instances()})"


def edge_measure(G: WeightedMultigraph, A: Iterable[EdgeKey] | Mapping[EdgeKey, int]) -> Fraction:
    """mu(A) = sum over edge instances {x,y} in A of nu(x) + nu(y).

    ``A`` is either a mapping key -> multiplicity, or an iterable of keys
    (each taken with its full multiplicity in ``G``).  Edges not in ``G``
    are rejected.
    """
    total = Fraction(0)
    have = G.edge_multiplicities()
    if isinstance(A, Mapping):
        items = [(edge_key(*k), m) for k, m in A.items()]
    else:
        keys = [edge_key(*k) for k in A]
        if len(set(keys)) != len(keys):
            raise InputError("duplicate edge keys in edge set")
        items = [(k, have.get(k, 0)) for k in keys]
    for key, m in items:
        if key not in have:
            raise InputError(f"unknown edge {key}")
        if m < 0 or m > have[key]:
            raise InputError(f"edge {key}: multiplicity {m} out of range")
        total += (G.nu(key[0]) + G.nu(key[1])) * m
    return total


def verify_mtp(
    G: WeightedMultigraph,
    f: Mapping[tuple[Vertex, Vertex], RationalLike],
    cocycle: Callable[[Vertex, Vertex], Fraction] | None = None,
) -> bool:
    """Check the weighted mass-transport identity for ``f``, exactly.

    With the ratio cocycle ``w^y(x) = nu(x)/nu(y)`` (the default) the
    identity ``sum_x nu(x) sum_y f(x,y) = sum_y nu(y) sum_x f(x,y) w^y(x)``
    holds for every nonnegative ``f``; a corrupted cocycle may break it.
    """
    if cocycle is None:
        def cocycle(x: Vertex, y: Vertex) -> Fraction:
            return G.nu(x) / G.nu(y)
    lhs = Fraction(0)
    rhs = Fraction(0)
    for (x, y), raw in f.items():
        if not G.has_vertex(x) or not G.has_vertex(y):
            raise InputError(f"f mentions unknown pair ({x!r}, {y!r})")
        val = as_fraction(raw)
        if val < 0:
            raise InputError(f"f({x!r},{y!r}) = {val} must be nonnegative")
        lhs += G.nu(x) * val
        rhs += G.nu(y) * val * cocycle(x, y)
    return lhs == rhs


# -- wired windows -----------------------------------------------------


@dataclass(frozen=True)
class WiredWindow:
    """A connected graph with a nonempty boundary set standing for the end.

    ``check_radius`` controls how hard :func:`validate_window` probes the
    end-faithfulness proxy (exhaustive up to radius 2, seeded sampling
    above).
    """

    graph: WeightedMultigraph
    boundary: frozenset[Vertex]
    check_radius: int = 1

    def __post_init__(self) -> None:
        if not self.boundary:
            raise InputError("boundary must be nonempty")
        unknown = self.boundary - self.graph.vertices
        if unknown:
            raise InputError(f"boundary vertices not in graph: {sorted(unknown)}")
        if self.check_radius < 0:
            raise InputError("check_radius must be nonnegative")
        object.__setattr__(self, "boundary", frozenset(self.boundary))

    def replace_graph(self, graph: WeightedMultigraph) -> "WiredWindow":
        """Same boundary (intersected with the new vertex set), new graph."""
        b = self.boundary & graph.vertices
        return WiredWindow(graph, b, self.check_radius)

    def interior(self) -> frozenset[Vertex]:
        return self.graph.vertices - self.boundary


@dataclass
class WindowReport:
    """Result of :func:`validate_window`."""

    connected: bool
    boundary_ok: bool
    end_faithful: bool
    checked_sets: int
    failures: list[tuple[tuple[Vertex, ...], int]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.connected and self.boundary_ok and self.end_faithful


def _b_touching_components(G: WeightedMultigraph, removed: set[Vertex], B: frozenset[Vertex]) -> int:
    allowed = frozenset(G.vertices - removed)
    seen: set[Vertex] = set()
    count = 0
    for b in sorted(B):
        if b in removed or b in seen:
            continue
        comp = G.bfs_reach([b], allowed)
        seen |= comp
        count += 1
    return count


def validate_window(
    W: WiredWindow,
    *,
    sample_size: int = 500,
    seed: int = 0,
) -> WindowReport:
    """End-faithfulness proxy check.

    For every set ``S`` of at most ``check_radius`` non-boundary vertices
    (exhaustive for radius <= 2, seeded sampling above), the graph minus
    ``S`` must have exactly one component meeting the boundary.
    """
    G = W.graph
    report = WindowReport(
        connected=G.is_connected(),
        boundary_ok=bool(W.boundary),
        end_faithful=True,
        checked_sets=0,
    )
    if not report.connected:
        report.end_faithful = False
        report.notes.append("graph is disconnected")
        return report
    interior = sorted(W.interior())
    r = W.check_radius
    sizes = range(1, r + 1)

    def check(subset: tuple[Vertex, ...]) -> None:
        report.checked_sets += 1
        n = _b_touching_components(G, set(subset), W.boundary)
        if n != 1:
            report.failures.append((subset, n))

    for size in sizes:
        if size <= 2:
            for subset in itertools.combinations(interior, size):
                check(subset)
        else:
            rng = random.Random(seed * 1_000_003 + size)
            total = len(interior)
            if total >= size:
                for _ in range(sample_size):
                    subset = tuple(sorted(rng.sample(interior, size)))
                    check(subset)
            report.notes.append(f"size {size}: sampled, not exhaustive")
    if report.failures:
        report.end_faithful = False
    return report


# -- contraction -------------------------------------------------------


@dataclass
class ContractionStep:
    """One contraction event: the blobs merged and the edge preimages."""

    name: str
    blobs: list[tuple[Vertex, frozenset[Vertex], frozenset[EdgeKey]]]
    edge_preimage: dict[EdgeKey, tuple[EdgeKey, ...]]


class ContractionMap:
    """Invertible record of vertex merges.

    Each :func:`contract_edges` call appends a step.  A step stores, per
    blob, the representative id (least vertex id in the blob), the blob's
    vertex set, and a spanning tree of the contracted edges, so that any
    spanning tree of the quotient expands to a spanning tree of the
    original graph.
    """

    def __init__(self, vertices: Iterable[Vertex]) -> None:
        self._parent: dict[Vertex, Vertex] = {v: v for v in vertices}
        self.steps: list[ContractionStep] = []

    def find(self, v: Vertex) -> Vertex:
        root = v
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[v] != root:
            self._parent[v], v = root, self._parent[v]
        return root

    def vertices(self) -> list[Vertex]:
        return sorted(self._parent)

    def current_representatives(self) -> list[Vertex]:
        return sorted({self.find(v) for v in self._parent})

    def _record(self, name: str, blobs, edge_preimage) -> None:
        for rep, members, _tree in blobs:
            for v in members:
                self._parent[self.find(v)] = rep
            self._parent[rep] = rep
        self.steps.append(ContractionStep(name, blobs, edge_preimage))

    def absorb(self, other: "ContractionMap") -> None:
        """Append another map's steps; their vertices must be tracked here."""
        for step in other.steps:
            self._record(step.name, step.blobs, step.edge_preimage)

    def preimage(self, v: Vertex) -> frozenset[Vertex]:
        """All original vertices currently represented by ``v``."""
        members = {v}
        for step in reversed(self.steps):
            expanded: set[Vertex] = set()
            for u in members:
                hit = False
                for rep, blob, _tree in step.blobs:
                    if u == rep:
                        expanded |= blob
                        hit = True
                        break
                if not hit:
                    expanded.add(u)
            members = expanded
        return frozenset(members)

    def expand_vertices(self, vs: Iterable[Vertex]) -> frozenset[Vertex]:
        out: set[Vertex] = set()
        for v in vs:
            out |= self.preimage(v)
        return frozenset(out)

    def expand_tree(self, tree_edges: Iterable[EdgeKey]) -> frozenset[EdgeKey]:
        """Expand a forest on the final quotient back to the original graph.

        Each quotient edge is replaced by its lexicographically least
        original preimage; each blob contributes its stored spanning tree.
        The result is a forest on the original vertex set whenever the
        input is a forest on the quotient.
        """
        edges = {edge_key(*e) for e in tree_edges}
        for step in reversed(self.steps):
            lowered: set[EdgeKey] = set()
            for e in edges:
                pre = step.edge_preimage.get(e)
                lowered.add(min(pre) if pre else e)
            for _rep, _blob, tree in step.blobs:
                lowered |= set(tree)
            edges = lowered
        return frozenset(edges)


def _spanning_tree_of_edges(edges: set[EdgeKey], vertices: set[Vertex]) -> frozenset[EdgeKey]:
    """Deterministic spanning forest of the subgraph (vertices, edges)."""
    parent = {v: v for v in vertices}

    def find(v: Vertex) -> Vertex:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    tree: set[EdgeKey] = set()
    for u, v in sorted(edges):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
            tree.add((u, v))
    return frozenset(tree)


def contract_edges(
    G: WeightedMultigraph,
    edges: Iterable[EdgeKey],
    cmap: ContractionMap,
    *,
    step_name: str = "contract",
) -> WeightedMultigraph:
    """Contract the given edges; aggregate nu; drop self-loops.

    ``cmap`` is extended in place with one step recording blob membership,
    a spanning tree of each blob's contracted edges, and the preimage of
    each surviving quotient edge.
    """
    keyset = {edge_key(*e) for e in edges}
    have = G.edge_multiplicities()
    for key in keyset:
        if key not in have:
            raise InputError(f"unknown edge {key}")
    if not keyset:
        cmap.steps.append(ContractionStep(step_name, [], {}))
        return G

    # blobs = connected components of the contracted edge set
    parent: dict[Vertex, Vertex] = {}
    for u, v in keyset:
        parent.setdefault(u, u)
        parent.setdefault(v, v)

    def find(v: Vertex) -> Vertex:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for u, v in sorted(keyset):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)

    blob_members: dict[Vertex, set[Vertex]] = {}
    for v in parent:
        blob_members.setdefault(find(v), set()).add(v)

    rep_of: dict[Vertex, Vertex] = {}
    blobs: list[tuple[Vertex, frozenset[Vertex], frozenset[EdgeKey]]] = []
    for root, members in sorted(blob_members.items()):
        rep = min(members)
        for v in members:
            rep_of[v] = rep
        blob_edges = {k for k in keyset if k[0] in members}
        blobs.append((rep, frozenset(members), _spanning_tree_of_edges(blob_edges, members)))

    def image(v: Vertex) -> Vertex:
        return rep_of.get(v, v)

    new_nu: dict[Vertex, Fraction] = {}
    zero_ok: set[Vertex] = set()
    for v in G.vertices:
        iv = image(v)
        new_nu[iv] = new_nu.get(iv, Fraction(0)) + G.nu(v)
        if v in G.zero_measure_ok:
            zero_ok.add(iv)
    new_edges: dict[EdgeKey, int] = {}
    edge_preimage: dict[EdgeKey, list[EdgeKey]] = {}
    for (u, v), m in have.items():
        iu, iv = image(u), image(v)
        if iu == iv:
            continue  # self-loop after contraction: dropped
        qkey = edge_key(iu, iv)
        new_edges[qkey] = new_edges.get(qkey, 0) + m
        edge_preimage.setdefault(qkey, []).append((u, v))
    # zero_ok survives only where the aggregate is still zero
    zero_ok = {v for v in zero_ok if new_nu[v] == 0}
    cmap._record(step_name, blobs, {k: tuple(sorted(v)) for k, v in edge_preimage.items()})
    return WeightedMultigraph(new_nu, new_edges, zero_measure_ok=frozenset(zero_ok))


# -- hierarchical partitions -------------------------------------------


class HierarchicalPartition:
    """Nested partitions P_0 (singletons) up to P_m (connected components).

    Class ids are the least vertex id of the class, which is stable under
    the nesting: a coarser class containing a finer one has an id no
    larger than that class's id.
    """

    def __init__(self, levels: Sequence[Iterable[Iterable[Vertex]]]) -> None:
        if not levels:
            raise InputError("a partition needs at least one level")
        self.levels: list[dict[Vertex, frozenset[Vertex]]] = []
        for raw in levels:
            classes = [frozenset(map(str, c)) for c in raw]
            level = {min(c): c for c in classes if c}
            if len(level) != len([c for c in classes if c]):
                raise InputError("duplicate class ids within a level")
            self.levels.append(level)
        self._validate_structure()

    def _validate_structure(self) -> None:
        ground = self.ground_set()
        for i, level in enumerate(self.levels):
            union: set[Vertex] = set()
            for c in level.values():
                if union & c:
                    raise InputError(f"level {i}: classes overlap")
                union |= c
            if union != ground:
                raise InputError(f"level {i}: classes do not cover the ground set")
        if any(len(c) != 1 for c in self.levels[0].values()):
            raise InputError("level 0 must be singletons")
        for i in range(len(self.levels) - 1):
            finer, coarser = self.levels[i], self.levels[i + 1]
            for c in finer.values():
                rep = min(c)
                target = self.class_of(i + 1, rep)
                if not c <= target:
                    raise InputError(f"level {i} class {min(c)} is not inside a level-{i+1} class")

    def ground_set(self) -> frozenset[Vertex]:
        return frozenset().union(*self.levels[0].values()) if self.levels[0] else frozenset()

    @property
    def depth(self) -> int:
        return len(self.levels)

    def classes(self, level: int) -> list[frozenset[Vertex]]:
        try:
            return [self.levels[level][k] for k in sorted(self.levels[level])]
        except IndexError:
            raise InputError(f"no level {level} (depth {self.depth})") from None

    def class_of(self, level: int, v: Vertex) -> frozenset[Vertex]:
        for c in self.levels[level].values():
            if v in c:
                return c
        raise InputError(f"vertex {v!r} not in level {level}")

    def validate_on(self, G: WeightedMultigraph) -> list[str]:
        """Check connectivity of every class and top = components; list problems."""
        problems: list[str] = []
        if self.ground_set() != G.vertices:
            problems.append("ground set differs from graph vertex set")
            return problems
        for i in range(self.depth):
            for c in self.classes(i):
                if len(G.bfs_reach([min(c)], allowed=c)) != len(c):
                    problems.append(f"level {i} class {min(c)} is not connected")
        if set(self.levels[-1].values()) != set(G.components()):
            problems.append("top level is not the set of connected components")
        return problems


def _dyadic_coords(vertices: Iterable[Vertex]) -> dict[Vertex, tuple[int, int]]:
    coords: dict[Vertex, tuple[int, int]] = {}
    for v in vertices:
        parts = v.split(",")
        if len(parts) != 2:
            raise InputError(f"dyadic scheme needs 'row,col' vertex ids, got {v!r}")
        try:
            coords[v] = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise InputError(f"dyadic scheme needs integer coordinates, got {v!r}") from None
    return coords


def build_partition(
    W: WiredWindow,
    scheme: str,
    *,
    tree_edges: Iterable[EdgeKey] | None = None,
    max_levels: int = 64,
) -> HierarchicalPartition:
    """Build a hierarchical partition of the window's vertex set.

    ``scheme='dyadic-grid'`` groups vertices with ids ``'r,c'`` into
     2^k x 2^k blocks.  ``scheme='tree-guided'`` needs ``tree_edges`` (a
    spanning forest); successive levels merge leaf classes of the quotient
    forest into their neighbors, so every class is tree-connected.
    """
    G = W.graph
    if scheme == "dyadic-grid":
        coords = _dyadic_coords(G.vertices)
        levels: list[list[frozenset[Vertex]]] = [[frozenset({v}) for v in G.vertices]]
        k = 0
        while len(levels[-1]) > len(G.components()) and k < max_levels:
            k += 1
            blocks: dict[tuple[int, int], set[Vertex]] = {}
            for v, (r, c) in coords.items():
                blocks.setdefault((r >> k, c >> k), set()).add(v)
            level = [frozenset(b) for b in blocks.values()]
            if len(level) == len(levels[-1]):
                continue
            levels.append(level)
        levels.append([frozenset(c) for c in G.components()])
        # drop a duplicated top if the loop already reached components
        if len(levels) >= 2 and set(levels[-1]) == set(levels[-2]):
            levels.pop()
        return HierarchicalPartition(levels)
    if scheme == "tree-guided":
        if tree_edges is None:
            raise InputError("tree-guided scheme needs tree_edges")
        tset = {edge_key(*e) for e in tree_edges}
        for key in tset:
            if not G.multiplicity(*key):
                raise InputError(f"tree edge {key} not in graph")
        classes: list[frozenset[Vertex]] = [frozenset({v}) for v in G.vertices]
        levels = [classes]
        components = {frozenset(c) for c in G.components()}
        for _ in range(max_levels):
            if {frozenset(c) for c in levels[-1]} == components:
                break
            cls_of: dict[Vertex, int] = {}
            for i, c in enumerate(levels[-1]):
                for v in c:
                    cls_of[v] = i
            # quotient forest adjacency between classes
            nbrs: dict[int, set[int]] = {i: set() for i in range(len(levels[-1]))}
            for u, v in tset:
                a, b = cls_of[u], cls_of[v]
                if a != b:
                    nbrs[a].add(b)
                    nbrs[b].add(a)
            merged_into: dict[int, int] = {}

            def resolve(i: int) -> int:
                while i in merged_into:
                    i = merged_into[i]
                return i

            order = sorted(range(len(levels[-1])), key=lambda i: min(levels[-1][i]))
            for i in order:
                if i in merged_into:
                    continue
                live_nbrs = {resolve(j) for j in nbrs[i]} - {i}
                if len(live_nbrs) == 1:  # leaf class in the quotient forest
                    merged_into[i] = min(live_nbrs, key=lambda j: min(levels[-1][j]))
            groups: dict[int, set[Vertex]] = {}
            for i, c in enumerate(levels[-1]):
                groups.setdefault(resolve(i), set()).update(c)
            new_level = [frozenset(g) for g in groups.values()]
            if len(new_level) == len(levels[-1]):
                break
            levels.append(new_level)
        if {frozenset(c) for c in levels[-1]} != components:
            levels.append([frozenset(c) for c in G.components()])
        return HierarchicalPartition(levels)
    raise InputError(f"unknown partition scheme {scheme!r}")


# -- total orders ------------------------------------------------------


class TotalOrder:
    """Injective vertex -> rational labels used for all tie-breaking."""

    def __init__(self, labels: Mapping[Vertex, RationalLike]) -> None:
        self._labels = {str(v): as_fraction(x) for v, x in labels.items()}
        if len(set(self._labels.values())) != len(self._labels):
            raise InputError("labels must be distinct")

    @classmethod
    def by_id(cls, vertices: Iterable[Vertex]) -> "TotalOrder":
        return cls({v: Fraction(i) for i, v in enumerate(sorted(map(str, vertices)))})

    @classmethod
    def random(cls, vertices: Iterable[Vertex], seed: int) -> "TotalOrder":
        vs = sorted(map(str, vertices))
        rng = random.Random(seed)
        n = max(len(vs), 1)
        values = rng.sample(range(n * n * n + n), len(vs))
        return cls({v: Fraction(k, n * n * n + n) for v, k in zip(vs, values)})

    def label(self, v: Vertex) -> Fraction:
        try:
            return self._labels[v]
        except KeyError:
            raise InputError(f"no label for vertex {v!r}") from None

    def labels(self) -> dict[Vertex, Fraction]:
        return dict(self._labels)

    def key(self, v: Vertex) -> Fraction:
        return self.label(v)

    def least(self, vs: Iterable[Vertex]) -> Vertex:
        vs = list(vs)
        if not vs:
            raise InputError("least() of empty collection")
        return min(vs, key=self.label)

    def sort(self, vs: Iterable[Vertex]) -> list[Vertex]:
        return sorted(vs, key=self.label)

    def edge_key_fn(self, e: EdgeKey) -> tuple[Fraction, Fraction]:
        a, b = self.label(e[0]), self.label(e[1])
        return (a, b) if a <= b else (b, a)

    def restricted(self, vertices: Iterable[Vertex]) -> "TotalOrder":
        vs = set(map(str, vertices))
        return TotalOrder({v: x for v, x in self._labels.items() if v in vs})


def renormalized_nu(G: WeightedMultigraph) -> WeightedMultigraph:
    """Optional preprocessing: scale nu so the total vertex mass is 1.

    On finite windows every measure is already finite; this toggle exists
    so experiments can normalize before comparing mass ratios.
    """
    total = G.nu_total(v for v in G.vertices if v not in G.zero_measure_ok)
    if total <= 0:
        raise InputError("cannot renormalize: total mass is zero")
    nu = {v: (G.nu(v) / total if v not in G.zero_measure_ok else Fraction(0)) for v in G.vertices}
    return WeightedMultigraph(nu, G.edge_multiplicities(), zero_measure_ok=G.zero_measure_ok)
