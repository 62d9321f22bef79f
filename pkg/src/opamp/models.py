"""Random-matrix models: GOE noise, rank-one spikes, and spectral reference values.

Conventions
-----------
- GOE(n): symmetric, off-diagonal entries N(0, 1/n), diagonal entries N(0, 2/n).
- Spiked model: M = (lam / n) * outer(theta, theta) + Z with theta in R^n.
- Signals follow the ``|theta_i| = 1`` normalization, so ||theta||^2 = n.

All sampling is deterministic given (n, seed); see ``_validation.rng_from_key``
for the seed-derivation scheme.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_dimension, check_square_symmetric, check_vector, rng_from_key


def sample_goe(n, seed):
    """Draw a symmetric n x n matrix from the Gaussian orthogonal ensemble.

    Built as (G + G.T) / sqrt(2 n) from an iid standard normal G, which gives
    variance 1/n above the diagonal and 2/n on the diagonal, and is exactly
    symmetric in floating point.
    """
    n = check_dimension(n)
    rng = rng_from_key(seed)
    g = rng.standard_normal((n, n))
    return (g + g.T) / np.sqrt(2.0 * n)


def sample_rademacher(n, seed):
    """Draw an n-vector of iid fair signs in {-1, +1}."""
    n = check_dimension(n)
    rng = rng_from_key(seed)
    return rng.integers(0, 2, size=n).astype(float) * 2.0 - 1.0


@dataclass(frozen=True)
class SpikedMatrix:
    """A rank-one spiked symmetric matrix together with its ingredients.

    ``matrix`` equals ``(signal_strength / n) * outer(signal, signal) + noise``
    entrywise; ``noise`` is retained so the instance is reconstructible.
    """

    n: int
    signal_strength: float
    signal: np.ndarray
    matrix: np.ndarray
    noise: np.ndarray


def build_spiked(signal_strength, signal, noise):
    """Assemble a spiked instance from a signal vector and a symmetric noise matrix."""
    if signal_strength < 0:
        raise ValueError("signal_strength must be >= 0")
    noise = check_square_symmetric(noise, name="noise")
    n = noise.shape[0]
    signal = check_vector(signal, n=n, name="signal")
    # outer(s, s) and noise are both exactly symmetric, hence so is the sum
    M = (signal_strength / n) * np.outer(signal, signal) + noise
    return SpikedMatrix(n=n, signal_strength=float(signal_strength), signal=signal,
                        matrix=M, noise=noise)


def sample_spiked(n, signal_strength, signal, seed):
    """Spiked instance with fresh GOE noise drawn from ``seed``."""
    return build_spiked(signal_strength, signal, sample_goe(n, seed))


def bbp_overlap(signal_strength):
    """Limiting squared correlation between the leading eigenvector and the spike.

    Equals 1 - 1/signal_strength^2 above the spectral threshold at 1, and 0
    at or below it.
    """
    if signal_strength < 0:
        raise ValueError("signal_strength must be >= 0")
    if signal_strength <= 1.0:
        return 0.0
    return 1.0 - 1.0 / signal_strength**2
