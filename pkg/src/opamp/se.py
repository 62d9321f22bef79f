"""Deterministic predictors for the overlap trajectories of the engines.

Two coupled overlap parameters are tracked per step: the mean-square size of
the estimate (sigma2, the finite-size q) and its signal overlap (rho, the
finite-size r).  Classes of coordinates that were last refreshed at the same
step share a scalar Gaussian channel, so every update is a mixture over the
class measure p_t: either the protocol's closed-form limiting measure (the
asymptotic predictor) or the realized class fractions of a concrete mask
sequence (the finite-size predictor).

Kernels:

- ``power``      the sphere-projection recursion; sigma2 stays at 1.
- ``bayes``      posterior-mean denoising; sigma2_t = rho_t for t >= 1 and a
                 one-parameter recursion in the MMSE-overlap map.
- custom         any object with psi(v, w) / phi(v, w) methods.
"""

from dataclasses import dataclass

import numpy as np

from . import denoise
from .schedules import ScheduleState


class FixedPointError(RuntimeError):
    """Raised when plain iteration fails to converge; carries the last iterate."""

    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


@dataclass
class SETrajectory:
    sigma2: np.ndarray
    rho: np.ndarray

    @property
    def corr(self):
        """Normalized correlation rho / sqrt(sigma2) per step."""
        return self.rho / np.sqrt(self.sigma2)

    def __len__(self):
        return len(self.rho)


class DenoiserKernel:
    """Mixture kernel for an arbitrary separable denoiser under a prior.

    psi(v, w) = E[eta(w u + sqrt(v) z; v, w)^2]
    phi(v, w) = E[u * eta(w u + sqrt(v) z; v, w)]
    """

    def __init__(self, prior, denoiser, order=61):
        self.prior = prior
        self.denoiser = denoiser
        self.order = order

    def psi_phi(self, v, w):
        return denoise.denoiser_moments(self.prior, self.denoiser, v, w, order=self.order)

    def psi(self, v, w):
        return self.psi_phi(v, w)[0]

    def phi(self, v, w):
        return self.psi_phi(v, w)[1]


class BayesKernel:
    """Kernel of the posterior-mean denoiser: psi = phi = MMSE overlap at w^2 / v."""

    def __init__(self, prior, order=61):
        self.prior = prior
        self.order = order

    def psi_phi(self, v, w):
        value = denoise.mmse_overlap(self.prior, w**2 / v, order=self.order)
        return value, value

    def psi(self, v, w):
        return self.psi_phi(v, w)[0]

    def phi(self, v, w):
        return self.psi_phi(v, w)[1]


def _check_measure(p, t):
    p = np.asarray(p, dtype=float)
    if p.shape != (t,):
        raise ValueError(f"class measure must have length {t}, got shape {p.shape}")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("class measure must be nonnegative and sum to 1 within 1e-9")
    return p


def mixture_se_step(sigma2_hist, rho_hist, p, kernel, signal_strength):
    """One step of the mixture state evolution.

    sigma2_t = sum_s psi(sigma2_s, lam * rho_s) p[s]
    rho_t    = sum_s phi(sigma2_s, lam * rho_s) p[s]
    """
    t = len(rho_hist)
    p = _check_measure(p, t)
    sigma2_t = 0.0
    rho_t = 0.0
    for s in np.flatnonzero(p):
        psi, phi = kernel.psi_phi(sigma2_hist[s], signal_strength * rho_hist[s])
        sigma2_t += psi * p[s]
        rho_t += phi * p[s]
    return sigma2_t, rho_t


def power_overlap_step(rho_hist, p, signal_strength):
    """Overlap update for the sphere-projection denoiser.

    rho_t = lam * sum_s rho_s p[s] / sqrt(sum_s (lam^2 rho_s^2 + 1) p[s]);
    the mean square stays pinned at 1 by the projection.
    """
    t = len(rho_hist)
    p = _check_measure(p, t)
    rho = np.asarray(rho_hist, dtype=float)
    lam = signal_strength
    num = lam * float(np.sum(rho * p))
    den = float(np.sqrt(np.sum((lam**2 * rho**2 + 1.0) * p)))
    return num / den


def bayes_overlap_step(rho_hist, p, signal_strength, prior, sigma2_0=1.0, order=61):
    """One-parameter overlap update for posterior-mean denoising.

    rho_t = sum_s Psi(lam^2 rho_s) p[s], using the identity sigma2_s = rho_s
    that holds for s >= 1.  The initial estimate generally has mean square
    sigma2_0 != rho_0, so the s = 0 term evaluates the map at the honest SNR
    (lam * rho_0)^2 / sigma2_0.
    """
    t = len(rho_hist)
    p = _check_measure(p, t)
    lam = signal_strength
    total = 0.0
    for s in np.flatnonzero(p):
        if s == 0:
            snr = (lam * rho_hist[0]) ** 2 / sigma2_0
        else:
            snr = lam**2 * rho_hist[s]
        total += denoise.mmse_overlap(prior, snr, order=order) * p[s]
    return total


def fixed_point(fn, x0, tol=1e-10, max_iter=10_000):
    """Iterate x <- fn(x) until successive values differ by less than tol.

    Returns (x_star, iterations).  Raises FixedPointError carrying the last
    iterate if max_iter is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    x = x0
    for k in range(1, max_iter + 1):
        x_new = fn(x)
        if abs(x_new - x) < tol:
            return x_new, k
        x = x_new
    raise FixedPointError(f"no convergence after {max_iter} iterations", last=x)


def _resolve_kernel(kernel, prior, order):
    if isinstance(kernel, str):
        if kernel == "power":
            return "power"
        if kernel == "bayes":
            if prior is None:
                prior = denoise.DiscretePrior.rademacher()
            return BayesKernel(prior, order=order)
        raise ValueError(f"unknown kernel {kernel!r}")
    return kernel


def predict_trajectory(schedule, kernel, signal_strength, rho0, horizon,
                       prior=None, q0=1.0, order=61):
    """Deterministic (sigma2_t, rho_t) trajectory for t = 0..horizon.

    The class measure at each step is the schedule's closed-form limiting
    measure.  ``kernel`` is "power", "bayes", or a psi/phi kernel object.
    rho0 is the initial overlap of the estimate (never inferred), q0 its
    mean square.
    """
    kern = _resolve_kernel(kernel, prior, order)
    sigma2 = [float(q0)]
    rho = [float(rho0)]
    for t in range(1, horizon + 1):
        p = schedule.limiting_measure(t)
        if kern == "power":
            rho_t = power_overlap_step(rho, p, signal_strength)
            sigma2_t = 1.0
        else:
            sigma2_t, rho_t = mixture_se_step(sigma2, rho, p, kern, signal_strength)
        sigma2.append(sigma2_t)
        rho.append(rho_t)
    return SETrajectory(sigma2=np.array(sigma2), rho=np.array(rho))


@dataclass
class FiniteSizeSE:
    """Finite-size state evolution driven by realized masks.

    ``q[t]`` / ``r[t]`` are the overlap parameters of the estimate at step t;
    ``last_update[t]`` stores each coordinate's class when the estimate at
    step t was formed (i.e. the classes of the iterate x_{t-1}).
    """

    q: np.ndarray
    r: np.ndarray
    last_update: list
    signal_strength: float

    @property
    def sigma2(self):
        return self.q

    @property
    def rho(self):
        return self.r

    @property
    def corr(self):
        return self.r / np.sqrt(self.q)

    def coordinate_channel(self, t):
        """Predicted per-coordinate (mean_scale, variance) of the iterate x_{t-1}.

        Coordinate i of the iterate feeding the step-t estimate is Gaussian
        with mean mean_scale[i] * theta_i and variance variance[i].
        """
        classes = self.last_update[t]
        return (self.signal_strength * self.r[classes], self.q[classes])


def finite_size_se(schedule, theta, kernel, signal_strength, q0, r0, horizon,
                   prior=None, order=61):
    """State evolution using the realized class structure of a mask sequence.

    Coordinates are grouped by (last-update step, signal value); each group
    contributes its exact fraction times a 1-d Gaussian expectation, so the
    only approximation is the quadrature order.  ``kernel`` as in
    ``predict_trajectory``; the power kernel keeps q at 1.
    """
    n = len(theta)
    theta = np.asarray(theta, dtype=float)
    kern = _resolve_kernel(kernel, prior, order)
    state = ScheduleState(n)
    nodes, probs = denoise.gaussian_quadrature(order)
    q = [float(q0)]
    r = [float(r0)]
    last = [None]
    for t in range(1, horizon + 1):
        state.advance(schedule.mask(t - 1))
        classes = state.last_update.copy()
        last.append(classes)
        if kern == "power":
            p_hat = state.class_fractions()
            q_t = 1.0
            r_t = power_overlap_step(r, p_hat, signal_strength)
        else:
            q_t = 0.0
            r_t = 0.0
            values_of_theta, value_index = np.unique(theta, return_inverse=True)
            keys, counts = np.unique(classes * len(values_of_theta) + value_index,
                                     return_counts=True)
            for key, count in zip(keys, counts):
                s = int(key) // len(values_of_theta)
                u = values_of_theta[int(key) % len(values_of_theta)]
                frac = count / n
                v = q[s]
                w = signal_strength * r[s]
                if isinstance(kern, BayesKernel):
                    values = denoise.conditional_mean(kern.prior, w * u + np.sqrt(v) * nodes, v, w)
                else:
                    values = kern.denoiser.eta(w * u + np.sqrt(v) * nodes, v, w)
                q_t += frac * float(values**2 @ probs)
                r_t += frac * u * float(values @ probs)
        q.append(q_t)
        r.append(r_t)
    return FiniteSizeSE(q=np.array(q), r=np.array(r), last_update=last,
                        signal_strength=float(signal_strength))
