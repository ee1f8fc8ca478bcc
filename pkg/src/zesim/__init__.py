"""Zero-error channel simulation costs with no-signalling assistance.

The package computes the one-shot simulation cost of non-commutative
bipartite graphs by semidefinite programming, checks the multiplicativity
conditions, and verifies explicit certificates.
"""

from .linalg import DimensionError, EigenError, TOL
from .sdpcore import Block, Constraint, SdpProblem, SdpSolution, SolverOptions, solve
from .graphspace import (
    Channel,
    InfeasibleGraphError,
    NCBGraph,
    SolverFailure,
    classical_graph,
    delta_ell,
    graph_of_channel,
    kalpha,
    kalpha_from_cos2,
    tensor_graph,
    tensor_power,
)
from .simcost import (
    Certificate,
    SimCostResult,
    cheapest_full_rank_check,
    nontrivial_check,
    paper_certificate_pi3,
    s0ns_bounds,
    search_condition_dual,
    sigma_channel,
    sigma_graph,
    sigma_minus,
)

__version__ = "0.1.0"
