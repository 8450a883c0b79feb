"""Cost-aware causal optimisation with optimal stopping."""

from ._osco import (
    ParseError,
    benchmark_names,
    identify,
    measure_overhead,
    mis,
    pomis,
    run,
    run_config,
    true_objective,
)

__all__ = [
    "ParseError",
    "benchmark_names",
    "identify",
    "measure_overhead",
    "mis",
    "pomis",
    "run",
    "run_config",
    "true_objective",
]
