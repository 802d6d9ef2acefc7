"""Measured multigraph windows, wired spanning forests, and reduction pipeline."""

from __future__ import annotations

from .assembly import (
    AssemblyResult,
    AssemblyStage,
    AttachResult,
    OneEndedReport,
    TwoEndedResult,
    VoronoiPartition,
    assemble,
    attach_isolated,
    boundary_forest,
    check_wired_one_ended,
    iterate_refinement,
    refine_partition,
    stages_from_trace,
    two_ended_tree,
    voronoi,
)
from .connectivity import (
    is_3ec_per_component,
    is_locally_3ec,
    max_edge_disjoint_paths,
    wire_boundary,
)
from .cycles import (
    CoreReport,
    EndSelectedTree,
    comb_tree,
    core,
    exterior,
    exterior_connectivity_check,
    fundamental_cycle,
    fundamental_cycles,
    kernel,
    remove_edges_one_ended,
    spanning_tree,
)
from .fiid import (
    FiidRun,
    LabelField,
    equivariance_check,
    lattice_coords,
    parse_shape,
    run_fiid,
)
from .generators import (
    from_spec,
    grid_window,
    ladder_window,
    line_window,
    random_window,
    ray_window,
    torus_graph,
)
from .graph import (
    ContractionMap,
    EdgeInstance,
    EdgeKey,
    GraphError,
    HierarchicalPartition,
    InputError,
    InvariantError,
    TotalOrder,
    Vertex,
    WeightedMultigraph,
    WindowReport,
    WiredWindow,
    contract_edges,
    edge_key,
    edge_measure,
    validate_window,
    verify_mtp,
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
    PackingWitness,
    duplicate_edges,
    pack_spanning_trees,
    pick_light_tree,
)
from .pipeline import (
    IterationCapExceeded,
    ReduceResult,
    ReductionTrace,
    StageReport,
    SubstantialReport,
    check_substantial,
    iteration_cap,
    reduce_once,
    run_reduction,
    sparse_substantial,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyResult",
    "AssemblyStage",
    "AttachResult",
    "ContractionMap",
    "CoreReport",
    "EdgeInstance",
    "EdgeKey",
    "EndSelectedTree",
    "FiidRun",
    "GraphError",
    "HierarchicalPartition",
    "InputError",
    "InstanceData",
    "InvariantError",
    "IterationCapExceeded",
    "LabelField",
    "OneEndedReport",
    "OracleBudget",
    "OracleBudgetExceeded",
    "Packing",
    "PackingWitness",
    "ReduceResult",
    "ReductionTrace",
    "StageReport",
    "SubstantialReport",
    "TotalOrder",
    "TwoEndedResult",
    "Vertex",
    "VoronoiPartition",
    "WeightedMultigraph",
    "WindowReport",
    "WiredWindow",
    "assemble",
    "attach_isolated",
    "boundary_forest",
    "check_substantial",
    "check_wired_one_ended",
    "comb_tree",
    "contract_edges",
    "core",
    "duplicate_edges",
    "edge_key",
    "edge_measure",
    "equivariance_check",
    "exterior",
    "exterior_connectivity_check",
    "from_spec",
    "fundamental_cycle",
    "fundamental_cycles",
    "grid_window",
    "is_3ec_per_component",
    "is_locally_3ec",
    "iterate_refinement",
    "iteration_cap",
    "kernel",
    "ladder_window",
    "lattice_coords",
    "line_window",
    "max_edge_disjoint_paths",
    "oracle_connected",
    "oracle_min_cut",
    "oracle_tree_packing",
    "pack_spanning_trees",
    "parse_instance",
    "parse_shape",
    "pick_light_tree",
    "random_window",
    "ray_window",
    "reduce_once",
    "refine_partition",
    "remove_edges_one_ended",
    "run_fiid",
    "run_reduction",
    "serialize_instance",
    "spanning_tree",
    "sparse_substantial",
    "stages_from_trace",
    "to_dot",
    "torus_graph",
    "two_ended_tree",
    "validate_window",
    "verify_mtp",
    "voronoi",
    "wire_boundary",
]
