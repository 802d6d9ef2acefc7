"""Instance files and DOT export.

The instance format is line-oriented text with a version header:

.. code-block:: text

    wiredtree 1
    v <id> <nu_num>/<nu_den> [boundary]
    e <u> <v> <multiplicity>
    p <level> <class-id> <vertex> [<vertex> ...]

Vertex records come first (sorted by id), then edge records (sorted by
key), then optional partition blocks (by level, then class id).  A file
serialized by :func:`serialize_instance` parses back to an equal object,
and parsing a canonically ordered file then serializing reproduces it
byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .graph import (
    EdgeKey,
    HierarchicalPartition,
    InputError,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    edge_key,
)

FORMAT_NAME = "wiredtree"
FORMAT_VERSION = 1
_HEADER = f"{FORMAT_NAME} {FORMAT_VERSION}"


@dataclass
class InstanceData:
    """A parsed instance: graph, boundary (possibly empty), partition."""

    graph: WeightedMultigraph
    boundary: frozenset[Vertex] = frozenset()
    partition: HierarchicalPartition | None = None

    @property
    def window(self) -> WiredWindow:
        if not self.boundary:
            raise InputError("instance has no boundary vertices: not a window")
        return WiredWindow(self.graph, self.boundary)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InstanceData):
            return NotImplemented
        mine = None if self.partition is None else self.partition.levels
        theirs = None if other.partition is None else other.partition.levels
        return (
            self.graph == other.graph
            and self.boundary == other.boundary
            and mine == theirs
        )


def _check_id(v: Vertex) -> str:
    s = str(v)
    if not s or any(ch.isspace() for ch in s):
        raise InputError(f"vertex id {v!r} is empty or contains whitespace")
    return s


def serialize_instance(
    obj: InstanceData | WiredWindow | WeightedMultigraph,
    partition: HierarchicalPartition | None = None,
) -> str:
    """Canonical text form; equal objects serialize identically."""
    if isinstance(obj, InstanceData):
        graph, boundary = obj.graph, obj.boundary
        partition = obj.partition if partition is None else partition
    elif isinstance(obj, WiredWindow):
        graph, boundary = obj.graph, obj.boundary
    else:
        graph, boundary = obj, frozenset()
    lines = [_HEADER]
    for v in graph.sorted_vertices():
        _check_id(v)
        nu = graph.nu(v)
        flag = " boundary" if v in boundary else ""
        lines.append(f"v {v} {nu.numerator}/{nu.denominator}{flag}")
    for (u, v), m in sorted(graph.edge_multiplicities().items()):
        lines.append(f"e {u} {v} {m}")
    if partition is not None:
        for lvl in range(partition.depth):
            for cls in partition.classes(lvl):
                members = " ".join(sorted(cls))
                lines.append(f"p {lvl} {min(cls)} {members}")
    return "\n".join(lines) + "\n"


def _parse_nu(token: str) -> Fraction:
    if "/" in token:
        num, _, den = token.partition("/")
        try:
            return Fraction(int(num), int(den))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad vertex mass {token!r}") from exc
    try:
        return Fraction(int(token))
    except ValueError:
        raise InputError(f"bad vertex mass {token!r}") from None


def parse_instance(text: str) -> InstanceData:
    """Parse instance text; tolerant of blank and ``#`` comment lines."""
    lines = text.splitlines()
    body: list[tuple[int, list[str]]] = []
    for i, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        body.append((i, stripped.split()))
    if not body:
        raise InputError("empty instance file")
    first_no, header = body[0]
    if header != [FORMAT_NAME, str(FORMAT_VERSION)]:
        raise InputError(
            f"line {first_no}: expected header {_HEADER!r}, got {' '.join(header)!r}"
        )
    nu: dict[Vertex, Fraction] = {}
    boundary: set[Vertex] = set()
    edges: dict[EdgeKey, int] = {}
    levels: dict[int, list[frozenset[Vertex]]] = {}
    for no, fields in body[1:]:
        kind = fields[0]
        if kind == "v":
            if len(fields) not in (3, 4) or (len(fields) == 4 and fields[3] != "boundary"):
                raise InputError(f"line {no}: vertex record needs 'v <id> <p>/<q> [boundary]'")
            vid = _check_id(fields[1])
            if vid in nu:
                raise InputError(f"line {no}: duplicate vertex {vid!r}")
            nu[vid] = _parse_nu(fields[2])
            if len(fields) == 4:
                boundary.add(vid)
        elif kind == "e":
            if len(fields) != 4:
                raise InputError(f"line {no}: edge record needs 'e <u> <v> <mult>'")
            u, v = fields[1], fields[2]
            try:
                m = int(fields[3])
            except ValueError:
                raise InputError(f"line {no}: bad multiplicity {fields[3]!r}") from None
            if m <= 0:
                raise InputError(f"line {no}: multiplicity must be positive")
            key = edge_key(u, v)
            if key in edges:
                raise InputError(f"line {no}: duplicate edge {key}")
            edges[key] = m
        elif kind == "p":
            if len(fields) < 4:
                raise InputError(
                    f"line {no}: partition record needs 'p <level> <class-id> <vertices>'"
                )
            try:
                lvl = int(fields[1])
            except ValueError:
                raise InputError(f"line {no}: bad level {fields[1]!r}") from None
            cls = frozenset(fields[3:])
            if fields[2] != min(cls):
                raise InputError(
                    f"line {no}: class id {fields[2]!r} is not the least member"
                )
            levels.setdefault(lvl, []).append(cls)
        else:
            raise InputError(f"line {no}: unknown record type {kind!r}")
    if not nu:
        raise InputError("instance has no vertices")
    for u, v in edges:
        for x in (u, v):
            if x not in nu:
                raise InputError(f"edge endpoint {x!r} is not a declared vertex")
    zero_ok = frozenset(v for v, x in nu.items() if x == 0)
    graph = WeightedMultigraph(nu, edges, zero_measure_ok=zero_ok)
    partition = None
    if levels:
        want = list(range(len(levels)))
        if sorted(levels) != want:
            raise InputError(f"partition levels {sorted(levels)} are not 0..{len(levels)-1}")
        partition = HierarchicalPartition([levels[i] for i in want])
        if partition.ground_set() != graph.vertices:
            raise InputError("partition does not cover the vertex set")
    return InstanceData(graph, frozenset(boundary), partition)


# -- DOT export -----------------------------------------------------------------

# fixed palette so regenerated figures are comparable
_DOT_BOUNDARY_FILL = "#aecbfa"
_DOT_TREE_COLOR = "#1a7f37"
_DOT_DELETED_COLOR = "#cf222e"
_DOT_EDGE_COLOR = "#6e7781"


def to_dot(
    obj: InstanceData | WiredWindow | WeightedMultigraph,
    *,
    tree_edges: Iterable[EdgeKey] = (),
    deleted_edges: Iterable[EdgeKey] = (),
    name: str = "wiredtree",
) -> str:
    """Graphviz text with the fixed palette: boundary / tree / deleted."""
    if isinstance(obj, InstanceData):
        graph, boundary = obj.graph, obj.boundary
    elif isinstance(obj, WiredWindow):
        graph, boundary = obj.graph, obj.boundary
    else:
        graph, boundary = obj, frozenset()
    tree = {edge_key(*e) for e in tree_edges}
    deleted = {edge_key(*e) for e in deleted_edges}
    lines = [f"graph {name} {{"]
    lines.append("  node [shape=circle, fontsize=10];")
    for v in graph.sorted_vertices():
        if v in boundary:
            lines.append(
                f'  "{v}" [shape=box, style=filled, fillcolor="{_DOT_BOUNDARY_FILL}"];'
            )
        else:
            lines.append(f'  "{v}";')
    for (u, v), m in sorted(graph.edge_multiplicities().items()):
        key = (u, v)
        if key in tree:
            attrs = [f'color="{_DOT_TREE_COLOR}"', "penwidth=2"]
        elif key in deleted:
            attrs = [f'color="{_DOT_DELETED_COLOR}"', "style=dashed"]
        else:
            attrs = [f'color="{_DOT_EDGE_COLOR}"']
        if m > 1:
            attrs.append(f'label="{m}"')
        lines.append(f'  "{u}" -- "{v}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
