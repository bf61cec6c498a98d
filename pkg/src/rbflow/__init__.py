"""Mesh-free spatiotemporal solver: Gaussian expansions driven by a neural ODE.

The solution of a spatiotemporal (integro)differential equation is written
as a sum of anisotropic Gaussian kernels whose coefficients, centers, and
per-dimension scales are functions of time.  A small dense network maps the
current parameters (and time) to their velocities; training minimizes the
Monte Carlo mismatch between the equation's right-hand side applied to the
expansion and the expansion's exact chain-rule time derivative, with
gradients taken through the unrolled Runge-Kutta steps.
"""

from .rbf import (KernelTables, RbfState, ScaleMap, kernel_eval,
                  marginal_density, moment_weighted_marginal, rbf_eval,
                  rbf_grad, rbf_laplacian_diag, rbf_time_derivative, total_mass)
from .dynamics import Mlp, gelu, load_checkpoint, save_checkpoint
from .odeint import (AdamState, IntegrationError, IntegrationGrid, Trajectory,
                     adam_update, integrate, integrate_backward)
from .training import (MetricsReport, TrainConfig, error_metrics,
                       learned_operator_error, loss_forward, loss_inverse,
                       loss_mass_regularized, loss_vlasov, train, train_family)

__all__ = [
    "RbfState", "ScaleMap", "KernelTables", "kernel_eval", "rbf_eval",
    "rbf_grad", "rbf_laplacian_diag", "rbf_time_derivative",
    "marginal_density", "moment_weighted_marginal", "total_mass",
    "Mlp", "gelu", "save_checkpoint", "load_checkpoint",
    "IntegrationGrid", "IntegrationError", "Trajectory", "integrate",
    "integrate_backward", "AdamState", "adam_update",
    "TrainConfig", "MetricsReport", "train", "train_family",
    "loss_forward", "loss_inverse", "loss_vlasov", "loss_mass_regularized",
    "error_metrics", "learned_operator_error",
]
