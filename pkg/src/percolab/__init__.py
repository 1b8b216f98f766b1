"""Bond-percolation laboratory on hypercubic lattice windows.

Renormalized good/bad boxes, separating components and their closed edge
cuts, signed inclusion-exclusion expansions, exact counting oracles, and
Monte Carlo estimators for the macroscopic cluster functions.
"""

from .errors import (
    BudgetExceeded,
    InsufficientData,
    InvariantViolation,
    MarginViolation,
    PercolabError,
)
from .lattice import (
    AXIS,
    DIAGONAL,
    LatticeWindow,
    box_faces,
    box_neighbors,
    box_overlap,
    box_vertices,
    l1_diameter,
)
from .percolation import (
    ClusterLabeling,
    Configuration,
    clusters,
    edge_boundary,
    load_configuration,
    minimal_edge_cut,
    sample,
    sample_coupled,
    save_configuration,
    touching_edge_count,
)
from .renorm import (
    BoxClassifier,
    SubstantialSet,
    boundary_diagonally_connected,
    check_star,
    classification_table,
    good_probability,
    is_good,
    is_substantial,
    substantial_set,
)
from .separating import (
    CutResult,
    SeparatingComponent,
    TailEstimate,
    build_separating_component,
    enumerate_occurring,
    extract_cut,
    occurs,
    tail_experiment,
    tail_experiments,
)
from .expansion import (
    ExponentPolynomial,
    SignedAggregate,
    disk_bound_check,
    disk_bound_sweep,
    empirical_expansion,
    exact_event_polynomial,
    geometric_decay_check,
    per_config_inclusion_exclusion,
)
from .counting import (
    AnimalCensus,
    PartitionTable,
    count_animals,
    disjoint_packing,
    exp_dec_bound,
    partitions,
)
from .estimators import (
    EstimatorReport,
    calibrate_pc_surrogate,
    chi_f_hat,
    kappa_derivative_check,
    kappa_hat,
    origin_cluster_statistics,
    tau_f_ball_sum,
    tau_f_decay,
    tau_hat,
    theta_hat,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
