"""Approximate message passing with partial row updates.

Engines for spiked-matrix estimation when only a subset of the data matrix
rows can be applied per iteration, deterministic state-evolution predictors
for their overlap trajectories, small-scale reference implementations of the
general linear-operator recursion, and a Monte-Carlo experiment CLI.
"""

from .denoise import (BayesDenoiser, DiscretePrior, IdentityDenoiser,
                      SeparableDenoiser, SphereDenoiser, conditional_mean,
                      conditional_mean_derivative, denoiser_moments,
                      gauss_hermite, gaussian_quadrature, mmse_overlap,
                      sphere_project)
from .engine import (DebiasPlan, IterateHistory, PowerHistory, masked_multiply,
                     run_power_method, run_projection_amp)
from .estimators import PartialPowerMethod, PartialUpdateAMP
from .models import (SpikedMatrix, bbp_overlap, build_spiked, sample_goe,
                     sample_rademacher, sample_spiked)
from .schedules import (FullMatrixSchedule, RandomUpdateSchedule,
                        RoundRobinSchedule, Schedule, ScheduleState, UpdateMask,
                        full_matrix, limiting_measure, random_update,
                        round_robin, schedule_from_config)
from .se import (BayesKernel, DenoiserKernel, FiniteSizeSE, FixedPointError,
                 SETrajectory, bayes_overlap_step, finite_size_se, fixed_point,
                 mixture_se_step, power_overlap_step, predict_trajectory)

__version__ = "0.1.0"

__all__ = [
    "BayesDenoiser", "BayesKernel", "DebiasPlan", "DenoiserKernel",
    "DiscretePrior", "FiniteSizeSE", "FixedPointError", "FullMatrixSchedule",
    "IdentityDenoiser", "IterateHistory", "PartialPowerMethod",
    "PartialUpdateAMP", "PowerHistory", "RandomUpdateSchedule",
    "RoundRobinSchedule", "SETrajectory", "Schedule", "ScheduleState",
    "SeparableDenoiser", "SphereDenoiser", "SpikedMatrix", "UpdateMask",
    "bayes_overlap_step", "bbp_overlap", "build_spiked", "conditional_mean",
    "conditional_mean_derivative", "denoiser_moments", "finite_size_se",
    "fixed_point", "full_matrix", "gauss_hermite", "gaussian_quadrature",
    "limiting_measure", "masked_multiply",
    "mixture_se_step", "mmse_overlap", "power_overlap_step",
    "predict_trajectory", "random_update", "round_robin", "run_power_method",
    "run_projection_amp", "sample_goe", "sample_rademacher", "sample_spiked",
    "schedule_from_config", "sphere_project",
]
