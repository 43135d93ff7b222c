"""Parallel label propagation community detection with per-vertex hashtables."""
from .errors import GraphFormatError, InvariantViolation, NoTableError, ValidationError
from .graph import CsrGraph, EdgeList, build_csr, load_graph, write_edge_list
from .hashtable import HtArena, HtGeometry, ProbeStrategy, geometry_for
from .lpa import ExecMode, LpaConfig, RunStats, cross_check, lpa, lpa_move, partition_by_degree
from .quality import CommunityStats, community_stats, delta_modularity, modularity

__version__ = "0.1.0"
