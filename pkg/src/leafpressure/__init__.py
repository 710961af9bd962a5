"""Equilibrium states and topological pressure for toral diffeomorphisms from weighted leaf densities."""
from .dynamics import (
    Potential,
    Splitting,
    ToralSystem,
    apply,
    evaluate_potential,
    make_splitting,
    make_toral_system,
    torus_distance,
    unstable_log_jacobian,
    wrap,
)
from .kernels import BACKEND
from .leaf import LeafCloud, birkhoff_sum, evolve, push_cloud, sample_disk
from .thermo import (
    PressureSeries,
    analytic_reference,
    leaf_pressure_series,
    log_partition,
    pressure_estimate,
)

__version__ = "0.1.0"

CAT_MAP = ((2, 1), (1, 1))
PRODUCT_MAP = ((3, 2, 0, 0), (1, 1, 0, 0), (0, 0, 2, 1), (0, 0, 1, 1))
