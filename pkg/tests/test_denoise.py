import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opamp.denoise import (BayesDenoiser, DiscretePrior, IdentityDenoiser,
                           conditional_mean, conditional_mean_derivative,
                           denoiser_moments, gauss_hermite, mmse_overlap,
                           sphere_project)

RADEMACHER = DiscretePrior.rademacher()
THREE_ATOM = DiscretePrior(atoms=np.array([-1.5, 0.0, 1.0]),
                           weights=np.array([0.2, 0.25, 0.55]))


def brute_force_mmse_overlap(prior, snr):
    """Trapezoid oracle for the overlap map: direct integral over y in
    [-12, 12] at step 1e-3 of (numerator^2 / evidence) * normal density."""
    y = np.arange(-12.0, 12.0 + 1e-9, 1e-3)
    root = np.sqrt(snr)
    scores = root * np.outer(y, prior.atoms) - 0.5 * snr * prior.atoms**2
    lik = prior.weights * np.exp(scores)
    num = (lik * prior.atoms).sum(axis=1)
    den = lik.sum(axis=1)
    integrand = num**2 / den * np.exp(-0.5 * y**2) / np.sqrt(2 * np.pi)
    return np.trapezoid(integrand, y)


def test_prior_validation():
    with pytest.raises(ValueError):
        DiscretePrior(atoms=np.array([1.0, -1.0]), weights=np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        DiscretePrior(atoms=np.array([2.0, -2.0]), weights=np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscretePrior(atoms=np.array([1.0, -1.0]), weights=np.array([1.5, -0.5]))


def test_prior_json_round_trip():
    for prior in (RADEMACHER, THREE_ATOM):
        clone = DiscretePrior.from_json(prior.to_json())
        np.testing.assert_array_equal(clone.atoms, prior.atoms)
        np.testing.assert_array_equal(clone.weights, prior.weights)
    assert DiscretePrior.from_json('{"kind": "rademacher"}').second_moment == 1.0


def test_sphere_project_examples():
    x = np.array([2.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(sphere_project(x), x, atol=1e-12)
    y = np.array([1.0, 2.0, 2.0])
    proj = sphere_project(y)
    assert np.linalg.norm(proj) == pytest.approx(np.sqrt(3), abs=1e-10)
    np.testing.assert_allclose(sphere_project(3.0 * y), proj, atol=1e-12)
    with pytest.raises(ValueError):
        sphere_project(np.zeros(5))


def test_conditional_mean_rademacher_closed_form():
    y = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(conditional_mean(RADEMACHER, y, 0.7, 1.3),
                               np.tanh(1.3 * y / 0.7), rtol=1e-12)
    # two-atom channel quadrature oracle for a single value
    assert conditional_mean(RADEMACHER, 10.0, 1.0, 1.0) == pytest.approx(
        np.tanh(10.0), rel=1e-12)
    assert float(conditional_mean(RADEMACHER, 0.0, 1.0, 1.0)) == 0.0


def test_conditional_mean_flat_likelihood_gives_prior_mean():
    for prior in (RADEMACHER, THREE_ATOM):
        assert conditional_mean(prior, 0.37, 1.0, 0.0) == pytest.approx(prior.mean)
        assert conditional_mean_derivative(prior, 0.37, 1.0, 0.0) == 0.0


def test_conditional_mean_extreme_arguments_stable():
    # log-sum-exp shift keeps huge scores finite
    val = conditional_mean(RADEMACHER, 500.0, 0.1, 2.0)
    assert np.isfinite(val) and val == pytest.approx(1.0)
    val = conditional_mean(THREE_ATOM, -400.0, 0.05, 1.5)
    assert np.isfinite(val) and val == pytest.approx(-1.5)


def test_conditional_mean_derivative_values():
    assert conditional_mean_derivative(RADEMACHER, 0.0, 1.0, 1.0) == pytest.approx(1.0)
    y, v, w = 0.3, 0.7, 1.2
    step = 1e-5
    fd = (conditional_mean(RADEMACHER, y + step, v, w)
          - conditional_mean(RADEMACHER, y - step, v, w)) / (2 * step)
    assert conditional_mean_derivative(RADEMACHER, y, v, w) == pytest.approx(fd, rel=1e-6)


def test_conditional_mean_invalid_variance():
    with pytest.raises(ValueError):
        conditional_mean(RADEMACHER, 0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        conditional_mean_derivative(RADEMACHER, 0.1, -1.0, 1.0)


def test_lipschitz_bound_on_sampled_pairs():
    # slope of the posterior mean is at most (w/v) * max atom^2
    rng = np.random.default_rng(0)
    v, w = 0.8, 1.4
    bound = (w / v) * float(np.max(THREE_ATOM.atoms**2))
    pairs = rng.uniform(-6, 6, size=(64, 2))
    for y1, y2 in pairs:
        gap = abs(conditional_mean(THREE_ATOM, y1, v, w)
                  - conditional_mean(THREE_ATOM, y2, v, w))
        assert gap <= bound * abs(y1 - y2) + 1e-12


def test_gauss_hermite_weights():
    nodes, probs = gauss_hermite(31)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (nodes**2 @ probs) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        gauss_hermite(3)


def test_denoiser_moments_identity_closed_form():
    # identity denoiser: mean square = w^2 + v, overlap = w for unit priors
    for prior in (RADEMACHER, THREE_ATOM):
        for v, w in ((0.5, 0.3), (1.0, 0.0), (2.3, 1.7)):
            ms, ov = denoiser_moments(prior, IdentityDenoiser(), v, w)
            assert ms == pytest.approx(w**2 + v, rel=1e-12)
            assert ov == pytest.approx(w, abs=1e-12)


def test_denoiser_moments_zero_gain_uncorrelated():
    ms, ov = denoiser_moments(RADEMACHER, BayesDenoiser(RADEMACHER), 1.0, 0.0)
    assert ov == pytest.approx(0.0, abs=1e-14)


def test_bayes_moments_collapse_to_overlap_map():
    # posterior-mean denoiser: mean square == overlap == overlap map at w^2/v
    for prior in (RADEMACHER, THREE_ATOM):
        denoiser = BayesDenoiser(prior)
        for v, w in ((1.0, 1.0), (0.5, 0.8), (2.0, 2.4)):
            ms, ov = denoiser_moments(prior, denoiser, v, w)
            psi = mmse_overlap(prior, w**2 / v)
            assert ms == pytest.approx(psi, rel=1e-9)
            assert ov == pytest.approx(psi, rel=1e-9)


def test_mmse_overlap_zero_snr_is_squared_mean():
    assert mmse_overlap(RADEMACHER, 0.0) == 0.0
    assert mmse_overlap(THREE_ATOM, 0.0) == pytest.approx(THREE_ATOM.mean**2)


def test_mmse_overlap_saturates():
    assert mmse_overlap(RADEMACHER, 100.0) == pytest.approx(1.0, abs=1e-3)


def test_mmse_overlap_matches_tanh_expectation():
    # independent route: E_z tanh(snr + sqrt(snr) z) under classical
    # Gauss-Hermite, whose own error is the binding tolerance here
    nodes, probs = gauss_hermite(81)
    for snr in (0.3, 1.0, 2.0, 6.0):
        direct = np.tanh(snr + np.sqrt(snr) * nodes) @ probs
        assert mmse_overlap(RADEMACHER, snr) == pytest.approx(direct, abs=5e-6)


def test_mmse_overlap_brute_force_oracle():
    assert mmse_overlap(RADEMACHER, 2.0) == pytest.approx(
        brute_force_mmse_overlap(RADEMACHER, 2.0), abs=1e-6)
    assert mmse_overlap(THREE_ATOM, 1.3) == pytest.approx(
        brute_force_mmse_overlap(THREE_ATOM, 1.3), abs=1e-6)


def test_mmse_overlap_quadrature_converged():
    for snr in (0.1, 1.0, 5.0, 20.0):
        assert mmse_overlap(RADEMACHER, snr, order=40) == pytest.approx(
            mmse_overlap(RADEMACHER, snr, order=80), abs=1e-9)


def test_mmse_overlap_monotone_on_grid():
    grid = np.linspace(0.0, 12.0, 49)
    values = [mmse_overlap(RADEMACHER, g) for g in grid]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert all(0.0 <= val <= 1.0 + 1e-12 for val in values)


def test_mmse_overlap_invalid_snr():
    with pytest.raises(ValueError):
        mmse_overlap(RADEMACHER, -0.5)


@given(scale=st.floats(min_value=0.1, max_value=50.0),
       seed=st.integers(min_value=0, max_value=2**16))
@settings(max_examples=40, deadline=None)
def test_sphere_projection_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(16)
    np.testing.assert_allclose(sphere_project(scale * x), sphere_project(x),
                               rtol=1e-10, atol=1e-10)


@given(y=st.floats(min_value=-30, max_value=30),
       v=st.floats(min_value=0.05, max_value=5.0),
       w=st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=80, deadline=None)
def test_conditional_mean_stays_in_atom_hull(y, v, w):
    for prior in (RADEMACHER, THREE_ATOM):
        val = float(conditional_mean(prior, y, v, w))
        assert prior.atoms.min() - 1e-9 <= val <= prior.atoms.max() + 1e-9
