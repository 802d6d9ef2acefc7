"""Brute-force reference implementations used only by tests and --oracle flags.

Everything here is deliberately independent of the main algorithms: the
oracles re-derive answers by exhaustive enumeration over their own plain
data structures, reading input graphs only as data (vertex and edge
lists).  Budgets are enforced before enumeration begins.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import EdgeKey, InputError, Vertex, WeightedMultigraph


class OracleBudgetExceeded(InputError):
    """The instance is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class OracleBudget:
    """Hard limits checked before any enumeration starts."""

    max_vertices: int = 12
    max_edges: int = 16
    max_nodes: int = 20_000_000

    def check_vertices(self, n: int) -> None:
        if n > self.max_vertices:
            raise OracleBudgetExceeded(f"{n} vertices exceeds oracle budget {self.max_vertices}")

    def check_edges(self, m: int) -> None:
        if m > self.max_edges:
            raise OracleBudgetExceeded(f"{m} edge instances exceed oracle budget {self.max_edges}")


DEFAULT_BUDGET = OracleBudget()


def _edge_instance_list(G: WeightedMultigraph) -> list[tuple[Vertex, Vertex]]:
    out: list[tuple[Vertex, Vertex]] = []
    for (u, v), m in sorted(G.edge_multiplicities().items()):
        out.extend([(u, v)] * m)
    return out


def oracle_min_cut(
    G: WeightedMultigraph,
    x: Vertex,
    y: Vertex,
    budget: OracleBudget = OracleBudget(max_vertices=16, max_edges=10 ** 9),
) -> int:
    """Minimum x-y edge cut by enumerating all vertex bipartitions.

    For every subset S of vertices with x in S and y not in S, count the
    edge instances crossing S; the minimum over all S is the cut value
    (and by duality the edge-disjoint x-y path count).
    """
    if x == y:
        raise InputError("x and y must differ")
    vs = sorted(G.vertices)
    if x not in G.vertices or y not in G.vertices:
        raise InputError("x and y must be vertices of G")
    budget.check_vertices(len(vs))
    others = [v for v in vs if v not in (x, y)]
    edges = _edge_instance_list(G)
    index = {v: i for i, v in enumerate(vs)}
    xi, yi = index[x], index[y]
    best = len(edges) + 1
    for bits in range(1 << len(others)):
        side = 1 << xi
        for j, v in enumerate(others):
            if bits >> j & 1:
                side |= 1 << index[v]
        if side >> yi & 1:
            continue
        crossing = 0
        for u, v in edges:
            if ((side >> index[u]) & 1) != ((side >> index[v]) & 1):
                crossing += 1
                if crossing >= best:
                    break
        best = min(best, crossing)
    return best


def _forest_accepts(parent: dict[Vertex, Vertex], u: Vertex, v: Vertex) -> bool:
    def find(a: Vertex) -> Vertex:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    return find(u) != find(v)


def oracle_tree_packing(
    G: WeightedMultigraph,
    k: int,
    budget: OracleBudget = DEFAULT_BUDGET,
) -> tuple[bool, list[list[tuple[Vertex, Vertex]]] | None]:
    """Exhaustive search for k edge-disjoint spanning trees.

    Assigns edge instances, in order, to one of the k forests or to
    "unused", backtracking whenever an assignment closes a cycle or the
    remaining edges cannot complete every forest.  Returns (feasible,
    one packing or None).
    """
    if k < 1:
        raise InputError("k must be >= 1")
    edges = _edge_instance_list(G)
    budget.check_edges(len(edges))
    vs = sorted(G.vertices)
    n = len(vs)
    if n == 0:
        return True, [[] for _ in range(k)]
    need_total = k * (n - 1)
    if len(edges) < need_total:
        return False, None

    # union-find state per forest, managed with explicit undo for backtracking
    parents = [{v: v for v in vs} for _ in range(k)]
    sizes = [{v: 1 for v in vs} for _ in range(k)]
    counts = [0] * k
    chosen: list[list[tuple[Vertex, Vertex]]] = [[] for _ in range(k)]
    nodes = 0

    def find(f: int, a: Vertex) -> Vertex:
        p = parents[f]
        while p[a] != a:
            a = p[a]
        return a

    def union(f: int, a: Vertex, b: Vertex) -> tuple[Vertex, Vertex] | None:
        ra, rb = find(f, a), find(f, b)
        if ra == rb:
            return None
        if sizes[f][ra] < sizes[f][rb]:
            ra, rb = rb, ra
        parents[f][rb] = ra
        sizes[f][ra] += sizes[f][rb]
        return ra, rb

    def undo(f: int, ra: Vertex, rb: Vertex) -> None:
        parents[f][rb] = rb
        sizes[f][ra] -= sizes[f][rb]

    def completable(f: int, i: int) -> bool:
        """Can forest f still be connected using instances i..end?"""
        if counts[f] == n - 1:
            return True
        reps: dict[Vertex, Vertex] = {}

        def top(a: Vertex) -> Vertex:
            r = find(f, a)
            while r in reps and reps[r] != r:
                r = reps[r]
            return r

        merged = 0
        for u, v in edges[i:]:
            ru, rv = top(u), top(v)
            if ru != rv:
                reps[ru] = rv
                reps[rv] = rv
                merged += 1
        return counts[f] + merged == n - 1

    # two sound symmetry prunes (existence search only): empty forests are
    # interchangeable, so an instance may open at most the first of them;
    # parallel copies of one edge are interchangeable, so copies go to
    # strictly increasing forest indices and never follow a skipped copy
    def search(i: int, same_floor: int) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > budget.max_nodes:
            raise OracleBudgetExceeded(f"enumeration exceeded {budget.max_nodes} nodes")
        missing = sum(n - 1 - c for c in counts)
        if missing == 0:
            return True
        if len(edges) - i < missing:
            return False
        if any(not completable(f, i) for f in range(k)):
            return False
        u, v = edges[i]
        repeat = i + 1 < len(edges) and edges[i + 1] == edges[i]
        opened_empty = False
        for f in range(same_floor, k):
            if counts[f] == n - 1:
                continue
            if counts[f] == 0:
                if opened_empty:
                    break
                opened_empty = True
            undo_rec = union(f, u, v)
            if undo_rec is None:
                continue
            counts[f] += 1
            chosen[f].append((u, v))
            if search(i + 1, f + 1 if repeat else 0):
                return True
            chosen[f].pop()
            counts[f] -= 1
            undo(f, *undo_rec)
        # leave this edge unused; identical later copies must then be
        # unused as well (floor k empties their forest loop)
        return search(i + 1, k if repeat else 0)

    if search(0, 0):
        return True, [list(t) for t in chosen]
    return False, None


def oracle_fundamental_cycles(
    G: WeightedMultigraph,
    tree_edges: set[EdgeKey],
    budget: OracleBudget = OracleBudget(max_vertices=64, max_edges=256),
) -> dict[EdgeKey, list[EdgeKey]]:
    """For every non-tree edge, its cycle, by exhaustive tree-path search.

    Returns a mapping: non-tree edge key -> edge keys of the unique cycle
    (the non-tree edge itself first, then the tree path).  Parallel copies
    of a tree edge map to the 2-cycle [key, key].  The tree path is found
    by depth-first enumeration of all simple tree paths, which is exactly
    one path per endpoint pair in a forest.
    """
    budget.check_vertices(len(G.vertices))
    budget.check_edges(G.num_edge_instances())
    tset = {(min(e), max(e)) for e in tree_edges}
    adj: dict[Vertex, list[Vertex]] = {v: [] for v in G.vertices}
    for u, v in tset:
        adj[u].append(v)
        adj[v].append(u)

    def tree_path(a: Vertex, b: Vertex) -> list[Vertex] | None:
        stack = [(a, [a])]
        while stack:
            cur, path = stack.pop()
            if cur == b:
                return path
            for w in sorted(adj[cur], reverse=True):
                if w not in path:
                    stack.append((w, path + [w]))
        return None

    out: dict[EdgeKey, list[EdgeKey]] = {}
    for (u, v), mult in sorted(G.edge_multiplicities().items()):
        spare = mult - (1 if (u, v) in tset else 0)
        if spare <= 0:
            continue
        if (u, v) in tset:
            out[(u, v)] = [(u, v), (u, v)]
            continue
        path = tree_path(u, v)
        if path is None:
            continue  # endpoints in different tree components: no cycle
        cycle = [(u, v)]
        for a, b in zip(path, path[1:]):
            cycle.append((min(a, b), max(a, b)))
        out[(u, v)] = cycle
    return out


def oracle_tree_edge_cycle_counts(
    G: WeightedMultigraph,
    tree_edges: set[EdgeKey],
) -> dict[EdgeKey, int]:
    """How many fundamental cycles contain each tree edge (by enumeration)."""
    cycles = oracle_fundamental_cycles(G, tree_edges)
    tset = {(min(e), max(e)) for e in tree_edges}
    counts = {e: 0 for e in tset}
    for chord, cycle in cycles.items():
        mult = G.multiplicity(*chord)
        weight = mult - 1 if chord in tset else mult
        for e in cycle[1:] if chord not in tset else [chord]:
            if e in counts:
                counts[e] += weight
    return counts


def oracle_connected(vertices: set[Vertex], edges: list[tuple[Vertex, Vertex]]) -> bool:
    """Plain reachability on an edge list (used by test harnesses)."""
    if not vertices:
        return True
    adj: dict[Vertex, set[Vertex]] = {v: set() for v in vertices}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    start = min(vertices)
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for w in adj[cur]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == vertices


def oracle_nash_williams_deficient_partition(
    G: WeightedMultigraph,
    k: int,
    budget: OracleBudget = OracleBudget(max_vertices=8, max_edges=10 ** 9),
) -> list[frozenset[Vertex]] | None:
    """Search all vertex partitions for one violating the packing count.

    Returns a partition P with (# crossing edge instances) < k(|P|-1),
    or None if every partition satisfies the bound.  Used as an extra
    cross-check on packing verdicts for tiny instances.
    """
    vs = sorted(G.vertices)
    budget.check_vertices(len(vs))
    edges = _edge_instance_list(G)

    def partitions(seq: list[Vertex]):
        if not seq:
            yield []
            return
        first, rest = seq[0], seq[1:]
        for sub in partitions(rest):
            for i in range(len(sub)):
                yield sub[:i] + [sub[i] | {first}] + sub[i + 1:]
            yield sub + [{first}]

    for parts in partitions(vs):
        if len(parts) < 2:
            continue
        index: dict[Vertex, int] = {}
        for i, part in enumerate(parts):
            for v in part:
                index[v] = i
        crossing = sum(1 for u, v in edges if index[u] != index[v])
        if crossing < k * (len(parts) - 1):
            return [frozenset(p) for p in parts]
    return None
