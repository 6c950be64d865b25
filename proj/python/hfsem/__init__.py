"""Structural equation models for latent diffusions observed at high frequency."""

from ._hfsem import (
    FitReport,
    Spec,
    builtin_spec,
    criteria,
    fit,
    gamma_zero,
    grad_h_n,
    h_n,
    implied_cov,
    jacobian_delta,
    limit_optimum,
    load_spec,
    posterior_probs,
    quad_var,
    run_experiment,
    select,
    sigma0,
    simulate,
    spec_from_json,
)

__all__ = [
    "FitReport",
    "Spec",
    "builtin_spec",
    "criteria",
    "fit",
    "gamma_zero",
    "grad_h_n",
    "h_n",
    "implied_cov",
    "jacobian_delta",
    "limit_optimum",
    "load_spec",
    "posterior_probs",
    "quad_var",
    "run_experiment",
    "select",
    "sigma0",
    "simulate",
    "spec_from_json",
]
