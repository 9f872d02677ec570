"""First-order solvers for smooth two-player zero-sum min-max games."""

from .errors import ConfigurationError, InvalidInputError, NumericError
from .geometry import (
    Ball,
    Box,
    FeasibleSet,
    LocalLinearResult,
    Simplex,
    Unconstrained,
    linear_min_local,
    project,
)
from .measures import StationarityReport, is_eps_fne, stationarity, x_measure, y_measure
from .ncc import (
    NccConfig,
    RegularizedOracle,
    apga,
    ncc_iteration_counts,
    outer_step_fw,
    outer_step_pgd,
    regularize,
    solve_ncc,
)
from .oracle import ProblemOracle, RateConstants, Record, Trajectory
from .pl_gda import PlConfig, inner_ascent, pl_iteration_counts, solve_pl
from .problems import (
    abs_value_game,
    fair_classification_problem,
    pl_hyperplane_game,
    quadratic_pl_game,
    quadratic_saddle,
    simplex_inner_argmax,
    synth_fair_dataset,
)

__version__ = "0.1.0"
