"""Automated weighted least-squares adjustment of horizontal survey networks."""

from .adjust import (
    AdjustmentOptions,
    AdjustmentResult,
    DesignSystem,
    form_equations,
    iterate_adjustment,
    propagate_covariance,
    provisional_coordinates,
    solve_normal,
    weights_from_sigmas,
)
from .control import (
    ControlDatabase,
    ControlPoint,
    SimilarityTransform,
    StationClassification,
    estimate_datum_transform,
    list_in_datum,
    scan_stations,
)
from .equations import Coordinates, PolarElements, StationIndex, bearing, distance
from .errors import NetadjError
from .fieldbook import (
    CompiledObservation,
    DataSet,
    FieldBook,
    SigmaPolicy,
    parse_fieldbook,
)
from .graph import (
    NetworkGraph,
    SpanningTree,
    bfs_spanning_tree,
    build_graph,
    cycle_misclosure,
    dfs_spanning_tree,
    fundamental_cycles,
)
from .regress import fit_basis, fit_simple_line, linearize_fit

__version__ = "0.1.0"

__all__ = [
    "AdjustmentOptions",
    "AdjustmentResult",
    "CompiledObservation",
    "ControlDatabase",
    "ControlPoint",
    "Coordinates",
    "DataSet",
    "DesignSystem",
    "FieldBook",
    "NetadjError",
    "NetworkGraph",
    "PolarElements",
    "SigmaPolicy",
    "SimilarityTransform",
    "SpanningTree",
    "StationClassification",
    "StationIndex",
    "bearing",
    "bfs_spanning_tree",
    "build_graph",
    "cycle_misclosure",
    "dfs_spanning_tree",
    "distance",
    "estimate_datum_transform",
    "fit_basis",
    "fit_simple_line",
    "form_equations",
    "fundamental_cycles",
    "iterate_adjustment",
    "linearize_fit",
    "list_in_datum",
    "parse_fieldbook",
    "propagate_covariance",
    "provisional_coordinates",
    "scan_stations",
    "solve_normal",
    "weights_from_sigmas",
]
