"""Batch command-line entry points.

Subcommands: generate, validate, analyze-tree, check-connectivity, pack,
reduce, assemble, pipeline, fiid, oracle.  Instance arguments accept a
file path or an inline generator spec (``grid:16``, ``ray:50``, ...).

Exit codes: 0 success, 2 validation failure (bad input, bad instance),
3 stage invariant failure, 4 budget or iteration cap exceeded.  All
report numbers are exact rationals; non-integers also get a decimal
rendering, but the rational is authoritative.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .assembly import (
    AssemblyStage,
    assemble,
    check_wired_one_ended,
    stages_from_trace,
)
from .connectivity import is_3ec_per_component, is_locally_3ec, wire_boundary
from .cycles import spanning_tree
from .fiid import equivariance_check, run_fiid
from .generators import from_spec
from .graph import (
    EdgeKey,
    HierarchicalPartition,
    InputError,
    InvariantError,
    TotalOrder,
    Vertex,
    WeightedMultigraph,
    WiredWindow,
    edge_key,
    validate_window,
)
from .io import InstanceData, parse_instance, serialize_instance, to_dot
from .oracle import (
    OracleBudget,
    OracleBudgetExceeded,
    oracle_connected,
    oracle_min_cut,
    oracle_tree_packing,
)
from .packing import (
    Packing,
    duplicate_edges,
    pack_spanning_trees,
    pick_light_tree,
)
from .pipeline import IterationCapExceeded, reduce_once, run_reduction

GENERATE_KINDS = ("grid", "ray", "ladder", "random-window")


@dataclass
class RunConfig:
    """Parsed invocation: one subcommand plus its knobs."""

    subcommand: str
    instance: str | None = None
    eps: Fraction = Fraction(1, 10)
    partition: HierarchicalPartition | None = None
    seed: int = 0
    iters: int | None = None
    threshold: Fraction | None = None
    delta: Fraction = Fraction(1, 10)
    rho: int | None = None
    contract: bool = True
    once: bool = False
    style: str = "boundary"
    wire: int | None = None
    k: int = 3
    duplicate: bool = False
    weight_seed: int | None = None
    sample_size: int = 500
    shape: str = "box:8"
    seeds: str = "0"
    equivariance: str | None = None
    torus: int = 6
    shift: tuple[int, int] = (1, 0)
    oracle_action: str | None = None
    x: str | None = None
    y: str | None = None
    max_vertices: int = 12
    max_edges: int = 16
    max_nodes: int = 20_000_000
    out: str | None = None
    emit_dot: str | None = None
    emit_stages: str | None = None
    print_edges: bool = False
    echo: Callable[[str], None] = field(default=print, repr=False)


def _fmt_q(x: Fraction | int) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator} (~{float(x):.6g})"


def _fmt_edge(e: EdgeKey) -> str:
    return f"{e[0]} {e[1]}"


def _parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"bad rational {text!r}; write it as p/q") from None


def _load_instance(arg: str) -> InstanceData:
    """A path to an instance file, or an inline generator spec."""
    if os.path.exists(arg):
        obj = parse_instance(Path(arg).read_text())
        return obj
    if ":" in arg:
        built = from_spec(arg)
        if isinstance(built, WiredWindow):
            return InstanceData(built.graph, built.boundary)
        return InstanceData(built)
    raise InputError(f"{arg!r} is neither an existing file nor a generator spec")


def _require_window(inst: InstanceData) -> WiredWindow:
    return inst.window


def _order_for(G: WeightedMultigraph) -> TotalOrder:
    return TotalOrder.by_id(G.vertices)


def _write_or_echo(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
        cfg.echo(f"wrote {cfg.out}")
    else:
        cfg.echo(text.rstrip("\n"))


# -- subcommands ----------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> int:
    spec = cfg.instance or ""
    kind = spec.split(":", 1)[0]
    if ":" not in spec or kind not in GENERATE_KINDS:
        raise InputError(
            f"generate accepts {', '.join(GENERATE_KINDS)} specs, not {spec!r}"
        )
    built = from_spec(spec)
    assert isinstance(built, WiredWindow)
    report = validate_window(built, sample_size=cfg.sample_size, seed=cfg.seed)
    if not report.ok:
        cfg.echo(f"generator bug: {spec} fails validation: {'; '.join(report.notes)}")
        return 2
    _write_or_echo(cfg, serialize_instance(built))
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    if not inst.boundary:
        cfg.echo("not a window: no boundary vertices")
        return 2
    W = inst.window
    report = validate_window(W, sample_size=cfg.sample_size, seed=cfg.seed)
    cfg.echo(f"vertices {len(W.graph.vertices)}")
    cfg.echo(f"boundary {len(W.boundary)}")
    cfg.echo(f"edge instances {W.graph.num_edge_instances()}")
    cfg.echo(f"mu total {_fmt_q(W.graph.mu_total())}")
    cfg.echo(f"connected {'yes' if report.connected else 'no'}")
    cfg.echo(f"boundary reach {'yes' if report.boundary_ok else 'no'}")
    cfg.echo(f"end-faithful {'yes' if report.end_faithful else 'no'}")
    cfg.echo(f"checked sets {report.checked_sets}")
    for vs, parts in report.failures:
        cfg.echo(f"failure: removing {' '.join(vs)} leaves {parts} deep parts")
    for note in report.notes:
        cfg.echo(f"note: {note}")
    if inst.partition is not None:
        problems = inst.partition.validate_on(W.graph)
        cfg.echo(f"partition levels {inst.partition.depth}")
        for p in problems:
            cfg.echo(f"partition problem: {p}")
        if problems:
            return 2
    cfg.echo(f"verdict {'ok' if report.ok else 'not end-faithful'}")
    return 0 if report.ok else 2


def cmd_analyze_tree(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    if inst.boundary:
        host: WiredWindow | WeightedMultigraph = inst.window
        G = inst.graph
    else:
        host = inst.graph
        G = inst.graph
    T = spanning_tree(host, _order_for(G), style=cfg.style)
    cfg.echo(f"style {cfg.style}")
    cfg.echo(f"vertices {len(G.vertices)}")
    cfg.echo(f"boundary {len(inst.boundary)}")
    cfg.echo(f"tree edges {len(T.edges)}")
    cfg.echo(f"tree components {len(T.tree_components())}")
    omega_total = sum(T.omega_map().values(), Fraction(0))
    cfg.echo(f"omega total {_fmt_q(omega_total)}")
    if inst.boundary:
        verdict = check_wired_one_ended(inst.window, T)
        cfg.echo(f"cut check {'pass' if verdict.cut_verdict else 'fail'}")
        cfg.echo(f"peel check {'pass' if verdict.peel_verdict else 'fail'}")
        if verdict.witness is not None:
            w = verdict.witness
            shown = _fmt_edge(w) if isinstance(w, tuple) else str(w)
            cfg.echo(f"witness {shown}")
        for note in verdict.notes:
            cfg.echo(f"note: {note}")
        cfg.echo(f"verdict {'one-ended' if verdict.one_ended else 'not one-ended'}")
    if cfg.print_edges:
        for e in sorted(T.edges):
            cfg.echo(_fmt_edge(e))
    if cfg.emit_dot:
        Path(cfg.emit_dot).write_text(
            to_dot(inst, tree_edges=T.edges, name="analyze")
        )
        cfg.echo(f"wrote {cfg.emit_dot}")
    return 0


def cmd_check_connectivity(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    G = inst.graph
    if cfg.wire is not None:
        G = wire_boundary(inst.window, m=cfg.wire)
        cfg.echo(f"wired boundary with multiplicity {cfg.wire}")
    local_ok, local_witness = is_locally_3ec(G)
    comp_ok, comp_witness = is_3ec_per_component(G)
    cfg.echo(f"locally 3-edge-connected {'yes' if local_ok else 'no'}")
    if local_witness is not None:
        cfg.echo(f"thin edge {_fmt_edge(local_witness)}")
    cfg.echo(f"3-edge-connected per component {'yes' if comp_ok else 'no'}")
    if comp_witness is not None:
        cut = ", ".join(_fmt_edge(e) for e in comp_witness.edges)
        cfg.echo(
            f"cut of size {comp_witness.size} between {comp_witness.source}"
            f" and {comp_witness.sink}: {cut}"
        )
    if local_ok != comp_ok:
        raise InvariantError(
            "local and per-component 3-edge-connectivity verdicts disagree"
        )
    return 0


def _random_weights(G: WeightedMultigraph, seed: int) -> dict[EdgeKey, Fraction]:
    import random

    rng = random.Random(seed)
    return {
        k: Fraction(rng.randint(1, 60), rng.randint(1, 6))
        for k in G.sorted_edges()
    }


def cmd_pack(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    G = inst.graph
    weights = None
    total = Fraction(0)
    if cfg.weight_seed is not None:
        weights = _random_weights(G, cfg.weight_seed)
        total = sum(
            (w * G.multiplicity(*k) for k, w in weights.items()), Fraction(0)
        )
    if cfg.duplicate:
        G = duplicate_edges(G)
    result = pack_spanning_trees(G, cfg.k, weights=weights)
    if isinstance(result, Packing):
        cfg.echo(f"packed {cfg.k} edge-disjoint spanning trees")
        for i, w in enumerate(result.tree_weights()):
            cfg.echo(f"tree {i}: {len(result.trees[i])} edges, weight {_fmt_q(w)}")
        if weights is not None:
            light = pick_light_tree(result, total)
            cfg.echo(f"total weight {_fmt_q(total)}")
            cfg.echo(f"light tree {light}")
        if cfg.print_edges:
            for i, tree in enumerate(result.trees):
                for e in sorted(tree):
                    cfg.echo(f"{i} {_fmt_edge(e)}")
        return 0
    sets = "; ".join(" ".join(sorted(p)) for p in result.partition)
    cfg.echo(f"no packing of {cfg.k} trees")
    cfg.echo(
        f"witness partition into {len(result.partition)} parts"
        f" with {result.crossing} crossing instances: {sets}"
    )
    return 0


def _print_iteration(cfg: RunConfig, i: int, res) -> None:
    cfg.echo(
        f"iteration {i}: mu {_fmt_q(res.mu_before)} -> {_fmt_q(res.mu_after)},"
        f" ratio {_fmt_q(res.achieved_ratio)},"
        f" target {_fmt_q(res.target_ratio)},"
        f" slack {_fmt_q(res.slack_used)}"
    )
    for rep in res.reports:
        cfg.echo(
            f"  stage {rep.stage}: mu {_fmt_q(rep.mu_before)} ->"
            f" {_fmt_q(rep.mu_after)}, deleted {_fmt_q(rep.deleted_mass)},"
            f" contracted {_fmt_q(rep.contracted_mass)}"
        )
        for note in rep.notes:
            cfg.echo(f"    note: {note}")


def _emit_stage_files(cfg: RunConfig, W: WiredWindow, trace) -> None:
    out = Path(cfg.emit_stages or "stages")
    out.mkdir(parents=True, exist_ok=True)
    stages = stages_from_trace(W, trace, _order_for(W.graph))
    for i, st in enumerate(stages):
        win = WiredWindow(st.graph, W.boundary & st.graph.vertices)
        (out / f"stage-{i}.win").write_text(serialize_instance(win))
        lines = "".join(f"{_fmt_edge(e)}\n" for e in sorted(st.tree_edges))
        (out / f"stage-{i}.tree").write_text(lines)
    cfg.echo(f"wrote {len(stages)} stage file pairs to {out}")


def cmd_reduce(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    W = _require_window(inst)
    order = _order_for(W.graph)
    if cfg.once:
        res = reduce_once(
            W, order, cfg.eps, partition=inst.partition, contract=cfg.contract
        )
        _print_iteration(cfg, 0, res)
        cfg.echo(f"mu trace {' '.join(_fmt_q(x) for x in (res.mu_before, res.mu_after))}")
        return 0
    trace = run_reduction(
        W,
        cfg.eps,
        threshold=cfg.threshold,
        order=order,
        max_iterations=cfg.iters,
        contract=cfg.contract,
    )
    for rec in trace.iterations:
        _print_iteration(cfg, rec.index, rec.result)
    cfg.echo(f"terminal {trace.terminal}")
    cfg.echo(f"threshold {_fmt_q(trace.threshold)}")
    cfg.echo(f"mu trace {' '.join(_fmt_q(x) for x in trace.mu_trace)}")
    if cfg.emit_stages:
        if cfg.contract:
            raise InputError("stage files need --no-contract (stable vertex set)")
        _emit_stage_files(cfg, W, trace)
    if cfg.emit_dot:
        final = trace.window
        tree = (
            trace.iterations[-1].result.tree_edges if trace.iterations else frozenset()
        )
        deleted = set()
        if final.graph.vertices == W.graph.vertices:
            deleted = set(W.graph.edge_multiplicities()) - set(
                final.graph.edge_multiplicities()
            )
        Path(cfg.emit_dot).write_text(
            to_dot(W, tree_edges=tree, deleted_edges=deleted, name="reduce")
        )
        cfg.echo(f"wrote {cfg.emit_dot}")
    return 0


_STAGE_FILE = re.compile(r"stage-(\d+)\.win$")


def _read_stage_dir(path: str) -> list[AssemblyStage]:
    root = Path(path)
    if not root.is_dir():
        raise InputError(f"{path!r} is not a directory")
    found: dict[int, AssemblyStage] = {}
    for win in root.iterdir():
        m = _STAGE_FILE.search(win.name)
        if not m:
            continue
        i = int(m.group(1))
        tree_file = root / f"stage-{i}.tree"
        if not tree_file.exists():
            raise InputError(f"missing {tree_file.name} next to {win.name}")
        inst = parse_instance(win.read_text())
        edges = frozenset(
            edge_key(*line.split()) for line in tree_file.read_text().splitlines() if line.strip()
        )
        found[i] = AssemblyStage(inst.graph, edges)
    if not found:
        raise InputError(f"no stage-<k>.win files in {path!r}")
    want = list(range(len(found)))
    if sorted(found) != want:
        raise InputError(f"stage indices {sorted(found)} are not 0..{len(found)-1}")
    return [found[i] for i in want]


def _print_assembly(cfg: RunConfig, result) -> None:
    cfg.echo(f"tree edges {len(result.tree.edges)}")
    cfg.echo(f"tree components {len(result.tree.tree_components())}")
    for i, forest in enumerate(result.stage_forests):
        cfg.echo(
            f"stage {i}: attached {len(forest)} edges,"
            f" coverage {_fmt_q(result.coverages[i])}"
        )
    cfg.echo(f"final forest {len(result.final_forest)} edges")
    for note in result.notes:
        cfg.echo(f"note: {note}")
    v = result.verdict
    cfg.echo(f"cut check {'pass' if v.cut_verdict else 'fail'}")
    cfg.echo(f"peel check {'pass' if v.peel_verdict else 'fail'}")
    if v.witness is not None:
        shown = _fmt_edge(v.witness) if isinstance(v.witness, tuple) else str(v.witness)
        cfg.echo(f"witness {shown}")
    for note in v.notes:
        cfg.echo(f"note: {note}")
    cfg.echo(f"verdict {'one-ended' if v.one_ended else 'not one-ended'}")
    if cfg.print_edges:
        for e in sorted(result.tree.edges):
            cfg.echo(_fmt_edge(e))


def cmd_assemble(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    W = _require_window(inst)
    order = _order_for(W.graph)
    if cfg.emit_stages:
        stages = _read_stage_dir(cfg.emit_stages)
        stages = [AssemblyStage(st.graph, st.tree_edges) for st in stages]
    else:
        trace = run_reduction(
            W,
            cfg.eps,
            threshold=cfg.threshold,
            order=order,
            max_iterations=cfg.iters,
            contract=False,
        )
        stages = stages_from_trace(W, trace, order)
        cfg.echo(f"reduced in {len(trace.iterations)} iteration(s), terminal {trace.terminal}")
    result = assemble(W, stages, order, delta=cfg.delta, rho=cfg.rho)
    _print_assembly(cfg, result)
    if cfg.emit_dot:
        Path(cfg.emit_dot).write_text(
            to_dot(inst, tree_edges=result.tree.edges, name="assemble")
        )
        cfg.echo(f"wrote {cfg.emit_dot}")
    return 0 if result.verdict.one_ended else 3


def cmd_pipeline(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    if not inst.boundary:
        cfg.echo("not a window: no boundary vertices")
        return 2
    W = inst.window
    report = validate_window(W, sample_size=cfg.sample_size, seed=cfg.seed)
    if not report.ok:
        cfg.echo(f"validation failed: {'; '.join(report.notes) or 'window is not end-faithful'}")
        for vs, parts in report.failures:
            cfg.echo(f"failure: removing {' '.join(vs)} leaves {parts} deep parts")
        return 2
    cfg.echo("validation ok")
    order = _order_for(W.graph)
    trace = run_reduction(
        W,
        cfg.eps,
        threshold=cfg.threshold,
        order=order,
        max_iterations=cfg.iters,
        contract=False,
    )
    for rec in trace.iterations:
        _print_iteration(cfg, rec.index, rec.result)
    cfg.echo(f"terminal {trace.terminal}")
    cfg.echo(f"mu trace {' '.join(_fmt_q(x) for x in trace.mu_trace)}")
    stages = stages_from_trace(W, trace, order)
    result = assemble(W, stages, order, delta=cfg.delta, rho=cfg.rho)
    _print_assembly(cfg, result)
    if cfg.emit_dot:
        Path(cfg.emit_dot).write_text(
            to_dot(inst, tree_edges=result.tree.edges, name="pipeline")
        )
        cfg.echo(f"wrote {cfg.emit_dot}")
    # the assembled forest is split at the boundary (one tree per boundary
    # vertex), so "spanning" here means covering the vertex set acyclically
    if result.tree.graph.vertices != W.graph.vertices:
        raise InvariantError("assembled tree does not cover the window")
    return 0 if result.verdict.one_ended else 3


def _parse_seed_range(text: str) -> list[int]:
    if ".." in text:
        a, _, b = text.partition("..")
        try:
            lo, hi = int(a), int(b)
        except ValueError:
            raise InputError(f"bad seed range {text!r}") from None
        if hi < lo:
            raise InputError(f"bad seed range {text!r}")
        return list(range(lo, hi + 1))
    try:
        return [int(text)]
    except ValueError:
        raise InputError(f"bad seed {text!r}") from None


def cmd_fiid(cfg: RunConfig) -> int:
    seeds = _parse_seed_range(cfg.seeds)
    if cfg.equivariance is not None:
        failures = 0
        for seed in seeds:
            ok = equivariance_check(cfg.equivariance, cfg.torus, seed, cfg.shift)
            cfg.echo(
                f"seed {seed} shift {cfg.shift[0]},{cfg.shift[1]}"
                f" {cfg.equivariance}: {'equivariant' if ok else 'MISMATCH'}"
            )
            failures += 0 if ok else 1
        cfg.echo(f"{len(seeds) - failures}/{len(seeds)} equivariant")
        return 0 if failures == 0 else 3
    cfg.echo("seed vertices tree-edges one-ended peel-rounds mu-trace")
    first = True
    for seed in seeds:
        run = run_fiid(cfg.shape, seed, cfg.eps)
        n_vertices = sum(run.degree_histogram.values())
        trace = ">".join(_fmt_q(x) for x in run.mu_trace)
        cfg.echo(
            f"{seed} {n_vertices} {len(run.tree.edges)}"
            f" {'yes' if run.verdict.one_ended else 'no'}"
            f" {len(run.peel_profile)} {trace}"
        )
        if first and cfg.emit_dot:
            W = from_spec(f"grid:{run.shape.split(':')[1]}")
            assert isinstance(W, WiredWindow)
            Path(cfg.emit_dot).write_text(
                to_dot(W, tree_edges=run.tree.edges, name="fiid")
            )
            cfg.echo(f"wrote {cfg.emit_dot}")
        first = False
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    inst = _load_instance(cfg.instance or "")
    G = inst.graph
    budget = OracleBudget(
        max_vertices=cfg.max_vertices,
        max_edges=cfg.max_edges,
        max_nodes=cfg.max_nodes,
    )
    if cfg.oracle_action == "min-cut":
        if cfg.x is None or cfg.y is None:
            raise InputError("min-cut needs --x and --y")
        value = oracle_min_cut(G, cfg.x, cfg.y, budget=budget)
        cfg.echo(f"min cut {cfg.x} {cfg.y}: {value}")
        return 0
    if cfg.oracle_action == "pack":
        feasible, forests = oracle_tree_packing(G, cfg.k, budget=budget)
        cfg.echo(f"packing {cfg.k} trees: {'feasible' if feasible else 'infeasible'}")
        if feasible and forests is not None:
            for i, forest in enumerate(forests):
                edges = ", ".join(_fmt_edge(edge_key(*e)) for e in sorted(forest))
                cfg.echo(f"tree {i}: {edges}")
        return 0
    if cfg.oracle_action == "connected":
        verts = set(G.vertices)
        edges = [e for e, m in G.edge_multiplicities().items() for _ in range(m)]
        cfg.echo(f"connected: {'yes' if oracle_connected(verts, edges) else 'no'}")
        return 0
    raise InputError(f"unknown oracle action {cfg.oracle_action!r}")


# -- argument parsing -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="wiredtree",
        description="Wired-window spanning tree toolkit",
    )
    sub = top.add_subparsers(dest="subcommand", required=True)

    def add(name: str, help_text: str, instance: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if instance:
            p.add_argument("instance", help="instance file path or generator spec")
        return p

    p = add("generate", "write a validated instance file")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--sample-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)

    p = add("validate", "check window end-faithfulness")
    p.add_argument("--sample-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)

    p = add("analyze-tree", "build a spanning tree and judge it")
    p.add_argument("--style", choices=["boundary", "bfs", "kruskal"], default="boundary")
    p.add_argument("--print-edges", action="store_true")
    p.add_argument("--emit-dot", help="write a DOT rendering here")

    p = add("check-connectivity", "local vs per-component 3-edge-connectivity")
    p.add_argument("--wire", type=int, help="wire the boundary with this multiplicity")

    p = add("pack", "pack edge-disjoint spanning trees")
    p.add_argument("-k", type=int, default=3)
    p.add_argument("--duplicate", action="store_true", help="double all multiplicities first")
    p.add_argument("--weight-seed", type=int, help="random rational edge weights")
    p.add_argument("--print-edges", action="store_true")

    p = add("reduce", "run mass-reduction iterations")
    p.add_argument("--eps", default="1/10", help="slack fraction in (0, 1/5)")
    p.add_argument("--threshold", help="assembly threshold (default mu/8)")
    p.add_argument("--iters", type=int, help="iteration cap override")
    p.add_argument("--no-contract", action="store_true", help="skip contraction stages")
    p.add_argument("--once", action="store_true", help="single step, using the file's partition")
    p.add_argument("--emit-dot", help="write a DOT rendering here")
    p.add_argument("--emit-stages", help="write stage-<k>.win/.tree files here")

    p = add("assemble", "attach isolated vertices stage by stage")
    p.add_argument("--eps", default="1/10")
    p.add_argument("--threshold")
    p.add_argument("--iters", type=int)
    p.add_argument("--delta", default="1/10", help="coverage slack")
    p.add_argument("--rho", type=int, help="attachment class radius cap")
    p.add_argument("--stages", dest="emit_stages", help="read stage files from here")
    p.add_argument("--print-edges", action="store_true")
    p.add_argument("--emit-dot", help="write a DOT rendering here")

    p = add("pipeline", "validate, reduce, assemble, check")
    p.add_argument("--eps", default="1/10")
    p.add_argument("--threshold")
    p.add_argument("--iters", type=int)
    p.add_argument("--delta", default="1/10")
    p.add_argument("--rho", type=int)
    p.add_argument("--sample-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--print-edges", action="store_true")
    p.add_argument("--emit-dot", help="write a DOT rendering here")

    p = add("fiid", "label-field runs and torus equivariance", instance=False)
    p.add_argument("--shape", default="box:8", help="box:n")
    p.add_argument("--seeds", default="0", help="single seed or a..b range")
    p.add_argument("--eps", default="1/10")
    p.add_argument("--equivariance", help="subroutine name to shift-test on the torus")
    p.add_argument("--torus", type=int, default=6, help="torus side for --equivariance")
    p.add_argument("--shift", default="1,0", help="dr,dc shift for --equivariance")
    p.add_argument("--emit-dot", help="write a DOT of the first run here")

    p = add("oracle", "exhaustive baselines with hard budgets", instance=False)
    p.add_argument("oracle_action", choices=["min-cut", "pack", "connected"])
    p.add_argument("instance", help="instance file path or generator spec")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("-k", type=int, default=2)
    p.add_argument("--max-vertices", type=int, default=12)
    p.add_argument("--max-edges", type=int, default=16)
    p.add_argument("--max-nodes", type=int, default=20_000_000)

    return top


_COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "generate": cmd_generate,
    "validate": cmd_validate,
    "analyze-tree": cmd_analyze_tree,
    "check-connectivity": cmd_check_connectivity,
    "pack": cmd_pack,
    "reduce": cmd_reduce,
    "assemble": cmd_assemble,
    "pipeline": cmd_pipeline,
    "fiid": cmd_fiid,
    "oracle": cmd_oracle,
}


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=ns.subcommand)
    for name in vars(ns):
        if name == "subcommand":
            continue
        value = getattr(ns, name)
        if name in ("eps", "delta") and value is not None:
            value = _parse_rational(str(value))
        if name == "threshold" and value is not None:
            value = _parse_rational(str(value))
        if name == "shift" and isinstance(value, str):
            parts = value.split(",")
            if len(parts) != 2:
                raise InputError(f"bad shift {value!r}; write dr,dc")
            try:
                value = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise InputError(f"bad shift {value!r}; write dr,dc") from None
        if name == "no_contract":
            cfg.contract = not value
            continue
        key = name.replace("-", "_")
        if hasattr(cfg, key):
            setattr(cfg, key, value)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(list(argv) if argv is not None else None)
        cfg = _config_from_args(ns)
        cfg.eps = Fraction(cfg.eps)
        return _COMMANDS[cfg.subcommand](cfg)
    except OracleBudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 4
    except IterationCapExceeded as exc:
        print(f"iteration cap exceeded: {exc}", file=sys.stderr)
        return 4
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
