from .diagnostics import (
    GradCheck,
    LipschitzEstimate,
    check_gradients,
    estimate_lipschitz,
    estimate_rate_constants,
    finite_diff_grad,
)
from .runner import CSV_COLUMNS, RunConfig, RunReport, config_hash, run, run_suite

__all__ = [
    "GradCheck",
    "LipschitzEstimate",
    "check_gradients",
    "estimate_lipschitz",
    "estimate_rate_constants",
    "finite_diff_grad",
    "CSV_COLUMNS",
    "RunConfig",
    "RunReport",
    "config_hash",
    "run",
    "run_suite",
]
