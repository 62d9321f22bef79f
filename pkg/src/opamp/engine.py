"""Iteration engines: projection AMP with partial updates and the matching
partial-update power method.

Projection AMP (estimate convention, ``|theta_i| = 1`` scaling):

    estimate_t = f_t(x_{t-1})
    x_t = delta_t o (M @ estimate_t - sum_{s<t} b_{ts} estimate_s)
          + (1 - delta_t) o x_{t-1}

where o is the elementwise product and the correction coefficient b_{ts}
collects the mean denoiser slope over the coordinates whose most recent
update happened at step s.  Unmasked coordinates keep their previous value
exactly.  For a separable denoiser, coordinate i of f_t is evaluated with the
channel parameters of its own class: variance q_{tau(t,i)} and gain
lam * r_{tau(t,i)} taken from a supplied state-evolution trajectory.  The
sphere denoiser needs no model knowledge: its correction uses
counts[s] / (sqrt(n) * ||x_{t-1}||).

The power method is the same recursion in the unit-norm convention

    x_{t+1} = (1/||x_t||) Pi_t (M x_t - (1/n) sum_{s<t} (w_s / ||x_s||) x_s)
              + (1 - Pi_t) x_t

with w_s the live class counts; its iterates equal the projection-AMP
iterates divided by sqrt(n) when started from the same direction.
"""

from dataclasses import dataclass, field

import numpy as np

from . import denoise
from ._validation import check_mask, check_square_symmetric, check_vector
from .denoise import SphereDenoiser
from .schedules import ScheduleState


def masked_multiply(M, v, delta):
    """Rows of M @ v where delta is 1, zeros elsewhere.

    Cost scales with (number of active rows) x n; the all-ones mask takes the
    dense path.
    """
    M = np.asarray(M)
    v = check_vector(v, n=M.shape[1])
    delta = check_mask(delta, n=M.shape[0])
    if delta.all():
        return M @ v
    out = np.zeros(M.shape[0])
    rows = np.flatnonzero(delta)
    if rows.size:
        out[rows] = M[rows] @ v
    return out


@dataclass
class DebiasPlan:
    """Correction coefficients b_{ts}, keyed by (t, s), plus how they were made."""

    mode: str
    coefficients: dict = field(default_factory=dict)

    def row(self, t):
        return {s: b for (tt, s), b in self.coefficients.items() if tt == t}


def empirical_debias(denoiser, x_prev, last_update, noise_vars, signal_gains):
    """Correction row from realized iterates.

    b[s] = (1/n) * sum over {i : last_update[i] = s} of the denoiser slope at
    x_prev[i], evaluated with each coordinate's own channel parameters.
    """
    n = x_prev.shape[0]
    slopes = denoiser.deta_dy(x_prev, noise_vars, signal_gains)
    return np.bincount(last_update, weights=slopes) / n


def analytic_debias(denoiser, prior, counts, class_vars, class_gains, order=61):
    """Correction row from the state-evolution channel law instead of the iterate.

    b[s] = (counts[s]/n) * E[ deta_dy(w_s u + sqrt(v_s) z; v_s, w_s) ] with
    u from the prior and z standard normal.
    """
    n = counts.sum()
    nodes, probs = denoise.gaussian_quadrature(order)
    b = np.zeros(len(counts))
    for s in np.flatnonzero(counts):
        v, w = class_vars[s], class_gains[s]
        y = w * prior.atoms[:, None] + np.sqrt(v) * nodes[None, :]
        slopes = denoiser.deta_dy(y, v, w)
        b[s] = counts[s] / n * float(prior.weights @ (slopes @ probs))
    return b


def projection_amp_step(M, x_prev, delta, estimate, past_estimates, debias_row):
    """One masked update: active rows get the corrected matrix product,
    inactive rows retain x_prev exactly."""
    produced = masked_multiply(M, estimate, delta)
    if debias_row is not None:
        live = np.flatnonzero(debias_row)
        if live.size:
            correction = debias_row[live] @ np.asarray([past_estimates[s] for s in live])
            active = delta.astype(bool)
            produced[active] -= correction[active]
    if x_prev is None:
        return produced
    return np.where(delta.astype(bool), produced, x_prev)


@dataclass
class IterateHistory:
    """Per-step record of a run.

    ``overlaps_q[t] = ||estimate_t||^2 / n`` and
    ``overlaps_r[t] = <signal, estimate_t> / n`` (nan without a signal);
    ``eff_mults[t]`` is the cumulative number of equivalent full matrix
    multiplies consumed *before* estimate_t existed, i.e.
    sum_{s<t} (active rows at step s) / n.
    """

    overlaps_q: np.ndarray
    overlaps_r: np.ndarray
    eff_mults: np.ndarray
    debias: DebiasPlan
    estimates: list | None = None
    iterates: list | None = None
    final_estimate: np.ndarray | None = None

    @property
    def corr(self):
        """Normalized correlation <signal, estimate> / (||signal|| ||estimate||),
        assuming the signal has unit mean square."""
        return self.overlaps_r / np.sqrt(self.overlaps_q)


def run_projection_amp(M, init, schedule, denoiser, horizon, signal_strength=None,
                       se_trajectory=None, signal=None, debias_mode="empirical",
                       prior=None, order=61, store_estimates=False, store_iterates=False):
    """Run projection AMP for ``horizon`` steps; returns an IterateHistory
    with estimates indexed t = 0..horizon.

    ``denoiser`` is either a SphereDenoiser (model-free corrections) or a
    SeparableDenoiser, in which case ``signal_strength`` and a
    ``se_trajectory`` with sigma2/rho entries for steps 0..horizon-1 supply
    the per-class channel parameters.  ``debias_mode`` picks how b_{ts} is
    computed: "empirical" (slopes at the realized iterate) or "se-analytic"
    (channel-law expectation; needs a prior).
    """
    M = check_square_symmetric(M)
    n = M.shape[0]
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    init = check_vector(init, n=n, name="init")
    if signal is not None:
        signal = check_vector(signal, n=n, name="signal")
    is_sphere = isinstance(denoiser, SphereDenoiser)
    if not is_sphere:
        if se_trajectory is None or signal_strength is None:
            raise ValueError("separable denoisers need signal_strength and se_trajectory")
        sigma2 = np.asarray(se_trajectory.sigma2, dtype=float)
        rho = np.asarray(se_trajectory.rho, dtype=float)
        if len(sigma2) < horizon or len(rho) < horizon:
            raise ValueError("se_trajectory must cover steps 0..horizon-1")
        if debias_mode == "se-analytic":
            prior = prior if prior is not None else getattr(denoiser, "prior", None)
            if prior is None:
                raise ValueError("se-analytic debiasing needs a prior")
        elif debias_mode != "empirical":
            raise ValueError(f"unknown debias_mode {debias_mode!r}")
    elif debias_mode != "empirical":
        raise ValueError("the sphere denoiser only supports empirical debiasing")

    state = ScheduleState(n)
    plan = DebiasPlan(mode=debias_mode)
    q_hat = np.empty(horizon + 1)
    r_hat = np.full(horizon + 1, np.nan)
    eff = np.zeros(horizon + 1)
    estimates = np.empty((horizon + 1, n))
    iterates = [] if store_iterates else None
    x_prev = None

    def make_estimate():
        """Estimate and correction row from the current iterate and classes."""
        if is_sphere:
            est = denoise.sphere_project(x_prev)
            b_row = state.counts * (denoiser.debias_scale(x_prev) / n)
        else:
            classes = state.last_update
            v = sigma2[classes]
            w = signal_strength * rho[classes]
            est = denoiser.eta(x_prev, v, w)
            if debias_mode == "empirical":
                b_row = empirical_debias(denoiser, x_prev, classes, v, w)
            else:
                b_row = analytic_debias(denoiser, prior, state.counts,
                                        sigma2, signal_strength * rho, order=order)
        return est, b_row

    def record(t, est):
        estimates[t] = est
        q_hat[t] = est @ est / n
        if signal is not None:
            r_hat[t] = signal @ est / n

    record(0, init)
    for t in range(horizon):
        if t == 0:
            estimate, b_row = init, None
        else:
            estimate, b_row = make_estimate()
            record(t, estimate)
            for s in np.flatnonzero(b_row):
                plan.coefficients[(t, int(s))] = float(b_row[s])
        delta = schedule.mask(t)
        x = projection_amp_step(M, x_prev, delta, estimate, estimates[:t], b_row)
        state.advance(delta)
        eff[t + 1] = eff[t] + delta.sum() / n
        x_prev = x
        if store_iterates:
            iterates.append(x.copy())
    final, _ = make_estimate()
    record(horizon, final)
    return IterateHistory(overlaps_q=q_hat, overlaps_r=r_hat, eff_mults=eff,
                          debias=plan,
                          estimates=list(estimates) if store_estimates else None,
                          iterates=iterates, final_estimate=final)


@dataclass
class PowerHistory:
    """Iterates and bookkeeping of the partial-update power method."""

    iterates: list
    norms: np.ndarray
    eff_mults: np.ndarray
    correlations: np.ndarray | None = None


def power_step(M, iterates, norms, delta, counts):
    """One unit-norm-convention update producing the next iterate.

    ``iterates`` and ``norms`` cover steps 0..t; ``counts[s]`` is the number
    of coordinates currently carrying the value written at step s.
    """
    n = M.shape[0]
    t = len(iterates) - 1
    x_t = iterates[-1]
    r_t = norms[-1]
    if r_t <= 1e-12 * np.sqrt(n):
        raise ValueError("iterate norm is degenerately small")
    produced = masked_multiply(M, x_t, delta)
    if t >= 1:
        live = np.flatnonzero(counts[:t])
        if live.size:
            weights = counts[live] / (n * norms[live])
            correction = weights @ np.asarray([iterates[s] for s in live])
            active = delta.astype(bool)
            produced[active] -= correction[active]
    produced /= r_t
    active = delta.astype(bool)
    return np.where(active, produced, x_t)


def run_power_method(M, x0, schedule, horizon, signal=None):
    """Power iteration with partial updates, horizon steps from x0.

    Returns iterates x_0..x_horizon in the unit-norm convention; when a
    signal with unit-mean-square entries is supplied, ``correlations[t]`` is
    the cosine between x_t and the signal.
    """
    M = check_square_symmetric(M)
    n = M.shape[0]
    x0 = check_vector(x0, n=n, name="x0")
    state = ScheduleState(n)
    iterates = [x0]
    norms = [np.linalg.norm(x0)]
    eff = np.zeros(horizon + 1)
    for t in range(horizon):
        delta = schedule.mask(t)
        x_next = power_step(M, iterates, np.asarray(norms), delta, state.counts)
        state.advance(delta)
        iterates.append(x_next)
        norms.append(np.linalg.norm(x_next))
        eff[t + 1] = eff[t] + delta.sum() / n
    correlations = None
    if signal is not None:
        signal = check_vector(signal, n=n, name="signal")
        scale = np.linalg.norm(signal)
        correlations = np.array([signal @ x / (scale * nx) for x, nx in zip(iterates, norms)])
    return PowerHistory(iterates=iterates, norms=np.asarray(norms), eff_mults=eff,
                        correlations=correlations)
