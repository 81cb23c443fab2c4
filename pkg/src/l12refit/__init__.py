"""Refitting of l12 structured-sparse analysis estimates with block penalties."""

__version__ = "0.1.0"

from .blocks import (BlockVector, SupportSet, bregman_global, bregman_local, cosine,
                     l12_norm, project_span, support_of)
from .operators import (AnisotropicTV, Convolution, Gradient, IdentityAnalysis,
                        IdentityForward, analysis_operator, motion_blur_kernel)
from .penalties import (BlockPenalty, Penalty, brute_force_prox, penalty_value,
                        prox_conjugate, prox_omega_conjugate)
from .solvers import (PrimalDualParams, convergence_residual, iterative_bregman,
                      joint_solve, posterior_refit, psi_estimate, solve_biased)

__all__ = [
    "BlockVector", "SupportSet", "bregman_global", "bregman_local", "cosine", "l12_norm",
    "project_span", "support_of", "AnisotropicTV", "Convolution", "Gradient",
    "IdentityAnalysis", "IdentityForward", "analysis_operator", "motion_blur_kernel",
    "BlockPenalty", "Penalty", "brute_force_prox", "penalty_value", "prox_conjugate",
    "prox_omega_conjugate", "PrimalDualParams", "convergence_residual", "iterative_bregman",
    "joint_solve", "posterior_refit", "psi_estimate", "solve_biased",
]
