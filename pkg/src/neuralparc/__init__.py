"""Reach-avoid set computation for black-box systems via ReLU trajectory models.

Offline: collect parameterized trajectories, fit a ReLU network model and
bound its error by sampling.  Online: convert the network exactly to a
piecewise-affine system and compute, region by region, the set of start
positions and trajectory parameters certified to reach a goal polytope
while avoiding obstacle polytopes.
"""

import os as _os

# NEURALPARC_THREADS caps BLAS parallelism; it must take effect before
# numpy is first imported, hence here at the package root.
_threads = _os.environ.get("NEURALPARC_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .ahpoly import (
    AHPolytope,
    contains_point_ah,
    convex_hull_ah,
    from_hpolytope,
    intersect_ah,
    is_empty_ah,
    project,
)
from .bounds import (
    ErrorBounds,
    PartitionedBounds,
    ValidationReport,
    error_sets,
    estimate,
    partition_and_estimate,
    validate,
)
from .hpoly import (
    HPolytope,
    Hyperrectangle,
    bounding_box,
    buffer_agent_body,
    cartesian_product,
    chebyshev_center,
    circumscribed_octagon,
    intersect,
    minkowski_buffer,
    pontryagin_diff,
    preimage,
    reduce,
    sample_uniform,
    support,
)
from .lp import (
    EPS_FEAS,
    EPS_OPT,
    LinearProgram,
    LpError,
    LpInputError,
    LpOutcome,
    LpSolverError,
    LpStatus,
    feasible,
    solve as solve_lp,
)
from .network import ReluNetwork, TrainingSet, init_network, train
from .reachavoid import (
    AvoidPiece,
    AvoidSet,
    BrasSample,
    PreparedSets,
    ReachSet,
    RegionReport,
    Scenario,
    SolveBudget,
    SolveReport,
    compute_bas,
    compute_brs,
    prepare,
    sample_bras,
    solve,
)
from .regions import (
    AffineRegion,
    Enumeration,
    RegionFrontier,
    enumerate_all,
    essential_constraints,
    neighbor,
    region_at,
    walk_regions,
)
from .seeding import derive_seed
from .systems import BlackBoxSystem, BoatSteering, Dataset, DriftManeuver, builtin, collect
from .trajectory import (
    SlicedAffineMap,
    TrajectorySpec,
    interpolate,
    predict,
    predict_batch,
    slice_region,
)

__version__ = "0.1.0"
