"""Label-driven runs: i.i.d.-style vertex labels decide every tie-break.

A :class:`LabelField` hashes (seed, coordinate) to a rational in [0, 1)
with a splittable counter-based mixer, so the label a vertex sees is a
pure function of its lattice coordinate.  Shifting coordinates therefore
shifts the whole field exactly, which makes torus-shift equivariance of
the label-only subroutines a checkable identity rather than a statistical
statement.  ``run_fiid`` drives the full reduction-plus-assembly pipeline
on a boxed lattice with such an order and reports exact statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .assembly import (
    OneEndedReport,
    assemble,
    iterate_refinement,
    refine_partition,
    stages_from_trace,
    voronoi,
)
from .cycles import EndSelectedTree, spanning_tree
from .generators import grid_window, torus_graph
from .graph import (
    EdgeKey,
    InputError,
    TotalOrder,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    edge_key,
)
from .pipeline import run_reduction

_M64 = (1 << 64) - 1
_SEED_TAG = 0x6A09E667F3BCC909
_SPLIT_TAG = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """The splitmix64 finalizer: a bijective 64-bit scrambler."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class LabelField:
    """Distinct rational labels keyed by (seed, lattice coordinate).

    ``label_at`` is a pure function: the same (seed, coordinate) always
    yields the same 128-bit rational in [0, 1), and two evaluations never
    share state.  Distinctness over any finite vertex set is enforced
    when the field is materialized into a :class:`TotalOrder` (a 128-bit
    collision would be rejected there).
    """

    seed: int

    def label_at(self, coord: tuple[int, int]) -> Fraction:
        r, c = coord
        z = _mix64((self.seed & _M64) ^ _SEED_TAG)
        z = _mix64(z ^ (r & _M64))
        z = _mix64(z ^ (c & _M64))
        hi = z
        lo = _mix64(z ^ _SPLIT_TAG)
        return Fraction((hi << 64) | lo, 1 << 128)

    def order_for(self, coords: Mapping[Vertex, tuple[int, int]]) -> TotalOrder:
        return TotalOrder({v: self.label_at(xy) for v, xy in coords.items()})


def lattice_coords(vertices: Iterable[Vertex]) -> dict[Vertex, tuple[int, int]]:
    """Parse ``"r,c"`` vertex ids into integer lattice coordinates."""
    out: dict[Vertex, tuple[int, int]] = {}
    for v in vertices:
        try:
            r, c = str(v).split(",")
            out[str(v)] = (int(r), int(c))
        except ValueError:
            raise InputError(f"vertex {v!r} has no r,c lattice coordinate") from None
    return out


# -- boxed-lattice runs --------------------------------------------------------


@dataclass
class FiidRun:
    """One deterministic labeled run with its exact statistics."""

    shape: str
    seed: int
    eps: Fraction
    tree: EndSelectedTree
    degree_histogram: dict[int, int]
    peel_profile: list[int]  # vertices removed per simultaneous leaf round
    mu_trace: list[Fraction]
    verdict: OneEndedReport

    def fingerprint(self) -> tuple:
        """Hashable exact summary; equal iff the runs are identical."""
        return (
            self.shape,
            self.seed,
            self.eps,
            tuple(sorted(self.tree.edges)),
            tuple(sorted(self.degree_histogram.items())),
            tuple(self.peel_profile),
            tuple(self.mu_trace),
            self.verdict.one_ended,
        )


def _peel_profile(W: WiredWindow, tree_edges: frozenset[EdgeKey]) -> list[int]:
    """Per-round counts of simultaneous non-boundary leaf deletion."""
    deg: dict[Vertex, int] = {v: 0 for v in W.graph.vertices}
    adj: dict[Vertex, set[Vertex]] = {v: set() for v in W.graph.vertices}
    for u, v in tree_edges:
        deg[u] += 1
        deg[v] += 1
        adj[u].add(v)
        adj[v].add(u)
    alive = set(W.graph.vertices)
    profile: list[int] = []
    while True:
        layer = [v for v in alive if deg[v] == 1 and v not in W.boundary]
        if not layer:
            return profile
        profile.append(len(layer))
        for v in layer:
            alive.discard(v)
            for w in adj[v]:
                if w in alive:
                    deg[w] -= 1


def parse_shape(shape: str) -> tuple[str, int]:
    """Split ``"box:16"`` / ``"torus:16"`` into (kind, n)."""
    parts = shape.split(":")
    if len(parts) != 2 or parts[0] not in ("box", "torus"):
        raise InputError(f"shape must be box:<n> or torus:<n>, got {shape!r}")
    try:
        n = int(parts[1])
    except ValueError:
        raise InputError(f"shape size {parts[1]!r} is not an integer") from None
    return parts[0], n


def run_fiid(shape: str, seed: int, eps: Fraction) -> FiidRun:
    """Full labeled pipeline on a boxed lattice: reduce, stage, assemble.

    The box's topological boundary is the wired end.  A torus has no
    boundary to wire, so torus shapes are reserved for
    :func:`equivariance_check` and rejected here.
    """
    kind, n = parse_shape(shape)
    if kind == "torus":
        raise InputError(
            "torus runs have no boundary to wire; use equivariance_check"
        )
    eps = Fraction(eps)
    W = grid_window(n)
    order = LabelField(seed).order_for(lattice_coords(W.graph.vertices))
    trace = run_reduction(W, eps, order=order, contract=False)
    stages = stages_from_trace(W, trace, order)
    result = assemble(W, stages, order)
    histogram: dict[int, int] = {}
    deg: dict[Vertex, int] = {v: 0 for v in W.graph.vertices}
    for u, v in result.tree.edges:
        deg[u] += 1
        deg[v] += 1
    for v in sorted(deg):
        histogram[deg[v]] = histogram.get(deg[v], 0) + 1
    return FiidRun(
        shape=shape,
        seed=seed,
        eps=eps,
        tree=result.tree,
        degree_histogram=histogram,
        peel_profile=_peel_profile(W, result.tree.edges),
        mu_trace=list(trace.mu_trace),
        verdict=result.verdict,
    )


# -- exact shift equivariance on the torus -------------------------------------

#: Names equivariance_check accepts; everything else either needs a wired
#: boundary (which a torus lacks) or is unknown.
LABEL_ONLY_SUBROUTINES = ("voronoi", "refine", "spanning_tree")
MUTANT_SUBROUTINE = "mutant-coordinate-order"


def _region_from_labels(order: TotalOrder, vertices: Iterable[Vertex]) -> frozenset[Vertex]:
    """The labels themselves pick the region, so shifting labels shifts it."""
    return frozenset(v for v in vertices if order.label(v) < Fraction(1, 2))


def _voronoi_output(
    G: WeightedMultigraph, order: TotalOrder, claim_order: TotalOrder | None = None
) -> tuple:
    region = _region_from_labels(order, G.vertices)
    if not region or region == G.vertices:
        return (("degenerate", len(region)),)
    part = voronoi(G, region, claim_order if claim_order is not None else order)
    return (
        ("pairs", tuple(sorted(part.cell_of.items()))),
        ("edges", tuple(sorted(part.all_tree_edges()))),
    )


def _refine_output(G: WeightedMultigraph, order: TotalOrder) -> tuple:
    region = _region_from_labels(order, G.vertices)
    if not region or region == G.vertices:
        return (("degenerate", len(region)),)
    part = iterate_refinement(G, voronoi(G, region, order), order)
    return (("pairs", tuple(sorted(part.cell_of.items()))),)


def _tree_output(G: WeightedMultigraph, order: TotalOrder) -> tuple:
    return (("edges", tuple(sorted(spanning_tree(G, order, style="kruskal").edges))),)


def _transport(out: tuple, vmap: Callable[[Vertex], Vertex]) -> tuple:
    """Apply a vertex bijection to a tagged output summary."""
    mapped = []
    for tag, items in out:
        if tag == "degenerate":
            mapped.append((tag, items))
        elif tag == "pairs":  # (vertex, assigned vertex), order significant
            mapped.append(
                (tag, tuple(sorted((vmap(a), vmap(b)) for a, b in items)))
            )
        else:  # undirected edges, re-normalized after mapping
            mapped.append(
                (tag, tuple(sorted(edge_key(vmap(a), vmap(b)) for a, b in items)))
            )
    return tuple(mapped)


def equivariance_check(
    subroutine: str, n: int, seed: int, shift: tuple[int, int]
) -> bool:
    """Does the subroutine commute exactly with a torus shift?

    Composing the label field with the shift must move the output by the
    same shift, element for element.  Accepted subroutines are the
    label-only ones (:data:`LABEL_ONLY_SUBROUTINES`); the deliberately
    broken :data:`MUTANT_SUBROUTINE` breaks ties by vertex id instead of
    by label, so it exists to prove this check can fail.
    """
    if subroutine == MUTANT_SUBROUTINE:
        runner = "mutant"
    elif subroutine in LABEL_ONLY_SUBROUTINES:
        runner = subroutine
    else:
        raise InputError(
            f"subroutine {subroutine!r} references the wired boundary or is "
            f"unknown; torus checks accept "
            f"{', '.join(LABEL_ONLY_SUBROUTINES)} or {MUTANT_SUBROUTINE}"
        )
    G = torus_graph(n)
    coords = lattice_coords(G.vertices)
    at = {xy: v for v, xy in coords.items()}
    gr, gc = shift
    field = LabelField(seed)
    base = field.order_for(coords)
    shifted = field.order_for(
        {v: ((r + gr) % n, (c + gc) % n) for v, (r, c) in coords.items()}
    )

    def vmap(v: Vertex) -> Vertex:
        r, c = coords[v]
        return at[((r - gr) % n, (c - gc) % n)]

    if runner == "voronoi":
        out_base = _voronoi_output(G, base)
        out_shift = _voronoi_output(G, shifted)
    elif runner == "refine":
        out_base = _refine_output(G, base)
        out_shift = _refine_output(G, shifted)
    elif runner == "spanning_tree":
        out_base = _tree_output(G, base)
        out_shift = _tree_output(G, shifted)
    else:  # mutant: region follows the labels, claiming ties follow ids
        id_order = TotalOrder.by_id(G.vertices)
        out_base = _voronoi_output(G, base, claim_order=id_order)
        out_shift = _voronoi_output(G, shifted, claim_order=id_order)
    return _transport(out_base, vmap) == out_shift
