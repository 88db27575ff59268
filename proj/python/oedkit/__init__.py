"""Optimal sensor placement and data assimilation for linear-Gaussian inverse problems."""

import json as _json

from ._core import (
    Experiment,
    OedkitError,
    __version__,
    brute_force,
    hutchinson_trace,
    log_pmf,
    log_pmf_gradient,
    optimal_baseline,
    solve_stochastic,
    toy_linear_matrix,
    validate_config,
    weighted_precision,
)
from ._core import run_json as _run_json

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NON_CONVERGENCE = 3
EXIT_IO = 4


def run(config, experiment=None, seed=None, output=None, workers=None):
    """Run a pipeline from a config path or dict.

    Returns (exit_code, bundle) where bundle is the parsed result.json.
    """
    code, text = _run_json(config, experiment, seed, None if output is None else str(output), workers)
    return code, _json.loads(text)


__all__ = [
    "EXIT_IO",
    "EXIT_NON_CONVERGENCE",
    "EXIT_OK",
    "EXIT_VALIDATION",
    "Experiment",
    "OedkitError",
    "__version__",
    "brute_force",
    "hutchinson_trace",
    "log_pmf",
    "log_pmf_gradient",
    "optimal_baseline",
    "run",
    "solve_stochastic",
    "toy_linear_matrix",
    "validate_config",
    "weighted_precision",
]
