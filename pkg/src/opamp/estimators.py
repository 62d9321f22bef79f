"""Estimator-style wrappers so the engines compose with the sklearn ecosystem.

Both classes follow the scikit-learn contract: all constructor arguments are
stored verbatim (get_params / set_params / clone work), fit() validates its
input and sets trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator

from . import se as se_mod
from ._validation import check_square_symmetric, rng_from_key
from .denoise import BayesDenoiser, DiscretePrior, SphereDenoiser
from .engine import run_power_method, run_projection_amp
from .schedules import full_matrix, random_update, round_robin


def _build_schedule(protocol, n, gamma, n_blocks, seed):
    if protocol == "full":
        return full_matrix(n)
    if protocol == "random":
        return random_update(n, gamma, seed=seed)
    if protocol == "round_robin":
        return round_robin(n, n_blocks)
    raise ValueError(f"unknown protocol {protocol!r}")


class PartialUpdateAMP(BaseEstimator):
    """Rank-one spike estimation by AMP with partial row updates.

    fit(M) runs ``n_iter`` masked iterations on the symmetric data matrix and
    stores the final coordinatewise estimate.  With the default sphere
    denoiser no model knowledge is needed; the Bayes denoiser additionally
    uses ``signal_strength`` and a one-parameter state-evolution trajectory
    seeded at ``assumed_overlap`` (defaults to 1/sqrt(n), the typical overlap
    of a random start) to set its per-class gains.

    Attributes after fit: ``estimate_`` (length-n vector on the unit-mean-
    square scale), ``history_`` (per-step overlaps and costs), ``schedule_``.
    """

    def __init__(self, denoiser="sphere", protocol="full", gamma=0.1, n_blocks=10,
                 n_iter=30, signal_strength=None, assumed_overlap=None,
                 debias_mode="empirical", random_state=0):
        self.denoiser = denoiser
        self.protocol = protocol
        self.gamma = gamma
        self.n_blocks = n_blocks
        self.n_iter = n_iter
        self.signal_strength = signal_strength
        self.assumed_overlap = assumed_overlap
        self.debias_mode = debias_mode
        self.random_state = random_state

    def fit(self, M, signal=None):
        M = check_square_symmetric(np.asarray(M, dtype=float))
        n = M.shape[0]
        schedule = _build_schedule(self.protocol, n, self.gamma, self.n_blocks,
                                   seed=(self.random_state, 1))
        rng = rng_from_key(self.random_state, 0)
        init = rng.standard_normal(n)
        init *= np.sqrt(n) / np.linalg.norm(init)
        if self.denoiser == "sphere":
            history = run_projection_amp(M, init, schedule, SphereDenoiser(),
                                         self.n_iter, signal=signal)
        elif self.denoiser == "bayes":
            if self.signal_strength is None:
                raise ValueError("the bayes denoiser needs signal_strength")
            rho0 = self.assumed_overlap
            if rho0 is None:
                rho0 = 1.0 / np.sqrt(n)
            prior = DiscretePrior.rademacher()
            trajectory = se_mod.predict_trajectory(
                schedule, "bayes", self.signal_strength, rho0, self.n_iter,
                prior=prior)
            history = run_projection_amp(
                M, init, schedule, BayesDenoiser(prior), self.n_iter,
                signal_strength=self.signal_strength, se_trajectory=trajectory,
                signal=signal, debias_mode=self.debias_mode, prior=prior)
        else:
            raise ValueError(f"unknown denoiser {self.denoiser!r}")
        self.n_features_in_ = n
        self.schedule_ = schedule
        self.history_ = history
        self.estimate_ = history.final_estimate
        return self

    def score(self, M, signal):
        """Absolute normalized correlation between the estimate and a signal."""
        if not hasattr(self, "estimate_"):
            self.fit(M, signal=signal)
        est = self.estimate_
        return float(abs(signal @ est) / (np.linalg.norm(signal) * np.linalg.norm(est)))


class PartialPowerMethod(BaseEstimator):
    """Leading-eigenvector estimation with partial row updates.

    A power iteration that only refreshes the masked rows each step and
    subtracts the class-weighted memory correction, so iterates stay useful
    even when most rows are stale.  After fit: ``components_`` holds the unit
    eigenvector estimate, ``eigenvalue_`` its Rayleigh quotient.
    """

    def __init__(self, protocol="full", gamma=0.1, n_blocks=10, n_iter=50,
                 random_state=0):
        self.protocol = protocol
        self.gamma = gamma
        self.n_blocks = n_blocks
        self.n_iter = n_iter
        self.random_state = random_state

    def fit(self, M, y=None):
        M = check_square_symmetric(np.asarray(M, dtype=float))
        n = M.shape[0]
        schedule = _build_schedule(self.protocol, n, self.gamma, self.n_blocks,
                                   seed=(self.random_state, 1))
        rng = rng_from_key(self.random_state, 0)
        x0 = rng.standard_normal(n)
        history = run_power_method(M, x0, schedule, self.n_iter)
        direction = history.iterates[-1] / history.norms[-1]
        self.n_features_in_ = n
        self.history_ = history
        self.components_ = direction[None, :]
        self.eigenvalue_ = float(direction @ M @ direction)
        return self
