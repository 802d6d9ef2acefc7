"""Edge duplication, k edge-disjoint spanning tree packing, light-tree choice.

The packer is an incremental matroid-union construction on the graphic
matroid: edge instances are offered one at a time, each placed either
directly into a forest or via an augmenting exchange chain; instances
that no augmentation can place are left unused.  When the final forests
are not all spanning, the instance is infeasible and a counting witness
(a vertex partition with too few crossing edges) is extracted and
verified before being returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .graph import (
    EdgeKey,
    InputError,
    InvariantError,
    Vertex,
    WeightedMultigraph,
    edge_key,
)

#: An edge instance: (key, copy index) with copies numbered from 0.
Instance = tuple[EdgeKey, int]


def duplicate_edges(G: WeightedMultigraph) -> WeightedMultigraph:
    """Double every edge multiplicity; copies inherit weights by key."""
    return WeightedMultigraph(
        G.nu_map(),
        {k: 2 * m for k, m in G.edge_multiplicities().items()},
        zero_measure_ok=G.zero_measure_ok,
    )


@dataclass
class PackingWitness:
    """A vertex partition certifying that k trees cannot be packed."""

    k: int
    partition: list[frozenset[Vertex]]
    crossing: int

    def __post_init__(self) -> None:
        if self.crossing >= self.k * (len(self.partition) - 1):
            raise InvariantError("witness partition is not deficient")


@dataclass
class Packing:
    """k instance-disjoint spanning trees with their per-tree weights."""

    trees: list[frozenset[EdgeKey]]
    graph: WeightedMultigraph
    weights: dict[EdgeKey, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        mult = self.graph.edge_multiplicities()
        usage: dict[EdgeKey, int] = {}
        n = len(self.graph.vertices)
        for tree in self.trees:
            if len(tree) != n - 1:
                raise InvariantError("a packed tree does not span (wrong edge count)")
            for e in tree:
                usage[e] = usage.get(e, 0) + 1
        for e, used in usage.items():
            if used > mult.get(e, 0):
                raise InvariantError(f"edge {e} used {used} times, multiplicity {mult.get(e, 0)}")
        for tree in self.trees:
            if not _spans(self.graph.vertices, tree):
                raise InvariantError("a packed tree is not connected")

    @property
    def k(self) -> int:
        return len(self.trees)

    def tree_weights(self) -> list[Fraction]:
        return [
            sum((self.weights.get(e, Fraction(0)) for e in tree), Fraction(0))
            for tree in self.trees
        ]


def _spans(vertices: frozenset[Vertex], edges: Iterable[EdgeKey]) -> bool:
    adj: dict[Vertex, list[Vertex]] = {v: [] for v in vertices}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    if not vertices:
        return True
    start = next(iter(vertices))
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for w in adj[cur]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(vertices)


class _Forest:
    """One forest of the union, with adjacency and a lazy union-find."""

    def __init__(self, vertices: list[Vertex]) -> None:
        self.vertices = vertices
        self.adj: dict[Vertex, dict[Vertex, Instance]] = {v: {} for v in vertices}
        self.edges: set[Instance] = set()
        self._uf: dict[Vertex, Vertex] = {v: v for v in vertices}
        self._dirty = False

    def _rebuild(self) -> None:
        self._uf = {v: v for v in self.vertices}
        for (u, v), _i in self.edges:
            ru, rv = self._find(u), self._find(v)
            if ru != rv:
                self._uf[max(ru, rv)] = min(ru, rv)
        self._dirty = False

    def _find(self, v: Vertex) -> Vertex:
        uf = self._uf
        while uf[v] != v:
            uf[v] = uf[uf[v]]
            v = uf[v]
        return v

    def connected(self, u: Vertex, v: Vertex) -> bool:
        if self._dirty:
            self._rebuild()
        return self._find(u) == self._find(v)

    def add(self, inst: Instance) -> None:
        (u, v), _i = inst
        self.edges.add(inst)
        self.adj[u][v] = inst
        self.adj[v][u] = inst
        if not self._dirty:
            ru, rv = self._find(u), self._find(v)
            if ru == rv:
                self._dirty = True
            else:
                self._uf[max(ru, rv)] = min(ru, rv)

    def remove(self, inst: Instance) -> None:
        (u, v), _i = inst
        self.edges.discard(inst)
        del self.adj[u][v]
        del self.adj[v][u]
        self._dirty = True

    def tree_path(self, a: Vertex, b: Vertex) -> list[Instance] | None:
        """Instances along the unique forest path a..b, or None."""
        prev: dict[Vertex, tuple[Vertex, Instance] | None] = {a: None}
        queue = [a]
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            if v == b:
                break
            for w, inst in self.adj[v].items():
                if w not in prev:
                    prev[w] = (v, inst)
                    queue.append(w)
        if b not in prev:
            return None
        out: list[Instance] = []
        cur = b
        while prev[cur] is not None:
            p, inst = prev[cur]  # type: ignore[misc]
            out.append(inst)
            cur = p
        return out


def pack_spanning_trees(
    G: WeightedMultigraph,
    k: int,
    weights: Mapping[EdgeKey, Fraction] | None = None,
) -> Packing | PackingWitness:
    """Pack k edge-disjoint spanning trees, or return a deficiency witness.

    Guaranteed to succeed on 2k-edge-connected multigraphs; on failure
    the returned partition P satisfies crossing(P) < k(|P|-1), which is
    exactly the obstruction the packing theorem forbids.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if not G.is_connected():
        raise InputError("packing needs a connected graph")
    vertices = sorted(G.vertices)
    n = len(vertices)
    if n == 1:
        return Packing([frozenset() for _ in range(k)], G, dict(weights or {}))

    instances: list[Instance] = []
    for key, m in sorted(G.edge_multiplicities().items()):
        instances.extend((key, i) for i in range(m))

    forests = [_Forest(vertices) for _ in range(k)]

    def try_augment(e0: Instance) -> bool:
        """Place e0, possibly by an exchange chain; return success."""
        parent: dict[Instance, tuple[Instance, int]] = {}
        seen = {e0}
        queue = [e0]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            (u, v), _i = x
            for f in range(k):
                if not forests[f].connected(u, v):
                    # augment: place x into f, then unwind the chain
                    cur = x
                    while True:
                        forests[f].add(cur)
                        nxt = parent.get(cur)
                        if nxt is None:
                            return True
                        prev_inst, f_prev = nxt
                        forests[f_prev].remove(cur)
                        cur, f = prev_inst, f_prev
                else:
                    path = forests[f].tree_path(u, v)
                    assert path is not None
                    for y in path:
                        if y not in seen:
                            seen.add(y)
                            parent[y] = (x, f)
                            queue.append(y)
        return False

    unplaced: list[Instance] = []
    for e in instances:
        (u, v), _i = e
        placed = False
        for f in range(k):  # fast path: direct insertion
            if not forests[f].connected(u, v):
                forests[f].add(e)
                placed = True
                break
        if not placed and not try_augment(e):
            unplaced.append(e)

    if all(len(f.edges) == n - 1 for f in forests):
        trees = [frozenset(key for key, _i in f.edges) for f in forests]
        return Packing(trees, G, dict(weights or {}))
    return _deficiency_witness(G, k, forests, unplaced)


def _crossing_count(G: WeightedMultigraph, parts: Sequence[frozenset[Vertex]]) -> int:
    index: dict[Vertex, int] = {}
    for i, p in enumerate(parts):
        for v in p:
            index[v] = i
    return sum(m for (u, v), m in G.edge_multiplicities().items() if index[u] != index[v])


def _verify(G: WeightedMultigraph, k: int, parts: list[frozenset[Vertex]]) -> PackingWitness | None:
    if len(parts) < 2:
        return None
    crossing = _crossing_count(G, parts)
    if crossing < k * (len(parts) - 1):
        return PackingWitness(k, parts, crossing)
    return None


def _deficiency_witness(
    G: WeightedMultigraph,
    k: int,
    forests: list[_Forest],
    unplaced: list[Instance],
) -> PackingWitness:
    """Extract and verify a partition with crossing < k(|P|-1)."""
    vertices = sorted(G.vertices)
    n = len(vertices)

    # counting bound: all singletons
    singletons = [frozenset({v}) for v in vertices]
    w = _verify(G, k, singletons)
    if w is not None:
        return w

    # closure of a failed exchange search: the reachable instances span
    # blocks on which every forest is already maximal
    def closure_blocks(e0: Instance) -> list[frozenset[Vertex]]:
        seen = {e0}
        queue = [e0]
        qi = 0
        while qi < len(queue):
            (u, v), _i = queue[qi]
            qi += 1
            for f in forests:
                path = f.tree_path(u, v)
                if path is None:
                    continue
                for y in path:
                    if y not in seen:
                        seen.add(y)
                        queue.append(y)
        touched: dict[Vertex, Vertex] = {}

        def find(a: Vertex) -> Vertex:
            while touched[a] != a:
                touched[a] = touched[touched[a]]
                a = touched[a]
            return a

        for (u, v), _i in seen:
            touched.setdefault(u, u)
            touched.setdefault(v, v)
            ru, rv = find(u), find(v)
            if ru != rv:
                touched[max(ru, rv)] = min(ru, rv)
        blocks: dict[Vertex, set[Vertex]] = {}
        for a in touched:
            blocks.setdefault(find(a), set()).add(a)
        rest = [frozenset({v}) for v in vertices if v not in touched]
        return [frozenset(b) for b in sorted(blocks.values(), key=min)] + rest

    for e0 in unplaced:
        w = _verify(G, k, closure_blocks(e0))
        if w is not None:
            return w

    # merge all closures into one coarser candidate
    if unplaced:
        merged: dict[Vertex, Vertex] = {v: v for v in vertices}

        def mfind(a: Vertex) -> Vertex:
            while merged[a] != a:
                merged[a] = merged[merged[a]]
                a = merged[a]
            return a

        for e0 in unplaced:
            for block in closure_blocks(e0):
                first = min(block)
                for v in block:
                    ra, rb = mfind(first), mfind(v)
                    if ra != rb:
                        merged[max(ra, rb)] = min(ra, rb)
        groups: dict[Vertex, set[Vertex]] = {}
        for v in vertices:
            groups.setdefault(mfind(v), set()).add(v)
        w = _verify(G, k, [frozenset(g) for g in sorted(groups.values(), key=min)])
        if w is not None:
            return w

    if n <= 9:  # exhaustive set-partition fallback on tiny instances
        from .oracle import OracleBudget, oracle_nash_williams_deficient_partition

        parts = oracle_nash_williams_deficient_partition(
            G, k, budget=OracleBudget(max_vertices=9, max_edges=10 ** 9)
        )
        if parts is not None:
            w = _verify(G, k, list(parts))
            if w is not None:
                return w
    raise InvariantError(
        "packing incomplete but no deficiency witness found within budget"
    )


def pick_light_tree(p: Packing, total: Fraction) -> int:
    """Index of a tree whose weight is at most 2/3 of ``total``.

    Pigeonhole over a duplicated input: the trees together use each
    original instance at most twice, so the lightest of the three is at
    most 2/3 of the original total weight.
    """
    tree_weights = p.tree_weights()
    best = min(range(p.k), key=lambda i: (tree_weights[i], i))
    if 3 * tree_weights[best] > 2 * total:
        raise InvariantError(
            f"no tree within the 2/3 bound: weights {tree_weights}, total {total}"
        )
    return best
