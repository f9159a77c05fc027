"""Jump-driven renewable capacity installation toolkit.

Simulates a subordinator-driven OU model of capacity factor and demand and
solves the installation problem two ways: a backward BSDE-with-jumps solver
selecting an optimal threshold rule, and a global feedback-control trainer.
An independent Monte Carlo cost oracle cross-validates both.
"""

from ._core import (
    BsdeTrainConfig,
    ControlTrainConfig,
    ModelParams,
    RngStream,
    analytic_mean_demand,
    build_grid,
    mc_cost,
    mc_cost_policy_file,
    mlp_forward_file,
    no_jump_state,
    sample_jumps,
    select_threshold_mc,
    simulate,
    solve_bsde,
    substream,
    train_policy,
)

__all__ = [
    "BsdeTrainConfig",
    "ControlTrainConfig",
    "ModelParams",
    "RngStream",
    "analytic_mean_demand",
    "build_grid",
    "mc_cost",
    "mc_cost_policy_file",
    "mlp_forward_file",
    "no_jump_state",
    "sample_jumps",
    "select_threshold_mc",
    "simulate",
    "solve_bsde",
    "substream",
    "train_policy",
]
