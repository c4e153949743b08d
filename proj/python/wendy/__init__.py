"""Weak-form estimation of ODE parameters."""

from ._wendy import (
    WendyError,
    estimate,
    model,
    models,
    run_experiment,
    simulate,
)

__all__ = ["WendyError", "estimate", "model", "models", "run_experiment", "simulate"]
