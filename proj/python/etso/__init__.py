"""Event-triggered safe Bayesian optimization: GP surrogate, safe sets, trigger, benchmarks."""

from ._etso import (
    ConfigError,
    DomainError,
    GridDomain,
    KernelParams,
    NumericalError,
    Optimizer,
    Scenario,
    episode,
    kernel_matrix,
    noise_bound,
    normalization_scale,
    normalized_performance,
    posterior,
    rho,
    run,
    safe_sets,
    safety_threshold,
    scenario_ids,
    threshold,
    validate_scenario,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "GridDomain",
    "KernelParams",
    "NumericalError",
    "Optimizer",
    "Scenario",
    "episode",
    "kernel_matrix",
    "noise_bound",
    "normalization_scale",
    "normalized_performance",
    "posterior",
    "rho",
    "run",
    "safe_sets",
    "safety_threshold",
    "scenario_ids",
    "threshold",
    "validate_scenario",
]
