"""heatbounds: numerical verification of boundary-curvature gradient bounds
for Neumann heat flows.

Reflected diffusions with boundary local time (stochastic), conformal
time-change geometry (conformal), deterministic PDE reference solvers
(semigroup), explicit domains and analytic fields (geometry, fields), and
an inequality harness (verify) orchestrated by a CLI (cli).
"""

from .conformal import (
    CurvatureBoundSpec,
    Polyline,
    check_local_convexity,
    conformal_distance,
    conformal_length,
    contraction_report,
    convexification_weight,
    evi_flow,
    geodesic,
    timechange_curvature,
)
from .geometry import (
    Ball,
    BallComplement,
    Box,
    Domain,
    HalfSpace,
    Interval,
    boundary_curvature_bound,
    comparison_potential,
    reflect_into,
    signed_distance,
)
from .report import Report
from .semigroup import (
    BoxGrid,
    DiscGrid,
    GridFunction,
    IntervalGrid,
    RadialGrid,
    disc_gap_reference,
    gradient_norm,
    neumann_heat,
    schrodinger_heat,
    spectral_gap,
    taming_reference,
)
from .stochastic import (
    PathSample,
    RngSpec,
    additive_functional_N,
    decomposition_identity,
    fk_exponent,
    local_time_consistency,
    path_horizon,
    simulate_reflected,
    taming_expectation,
    time_change_path,
)

__version__ = "0.1.0"
