"""Graph construction and graph-operator algebra."""

from .filters import GraphFilter, apply_filter
from .graph import Graph, build_graph, erdos_renyi, incidence, read_edge_list, write_edge_list
from .pseudoinverse import (
    IncidencePseudoInverse,
    ReducedIncidence,
    incidence_pseudoinverses,
    reduced_incidence,
)

__all__ = [
    "Graph",
    "GraphFilter",
    "IncidencePseudoInverse",
    "ReducedIncidence",
    "apply_filter",
    "build_graph",
    "erdos_renyi",
    "incidence",
    "incidence_pseudoinverses",
    "read_edge_list",
    "reduced_incidence",
    "write_edge_list",
]
