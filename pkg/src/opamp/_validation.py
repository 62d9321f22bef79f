"""Input validation helpers shared across the package."""

import numpy as np


def check_dimension(n):
    """Validate a problem dimension. Returns n as a plain int."""
    n = int(n)
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return n


def check_square_symmetric(M, name="M"):
    """Validate a dense symmetric matrix, returning it as float64 ndarray."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.array_equal(M, M.T):
        raise ValueError(f"{name} must be exactly symmetric")
    return M


def check_vector(v, n=None, name="v"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {v.shape[0]}")
    return v


def check_mask(delta, n=None, name="delta"):
    """Validate a binary 0/1 update mask, returning it as a uint8 vector."""
    delta = np.asarray(delta)
    if delta.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {delta.shape}")
    if n is not None and delta.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {delta.shape[0]}")
    if not np.isin(delta, (0, 1)).all():
        raise ValueError(f"{name} entries must be 0 or 1")
    return delta.astype(np.uint8)


def flatten_key(key):
    """Flatten a (possibly nested) seed key into a tuple of ints."""
    parts = []
    for item in key:
        if isinstance(item, (tuple, list)):
            parts.extend(flatten_key(item))
        else:
            parts.append(int(item))
    return tuple(parts)


def rng_from_key(*key):
    """Counter-based generator from a hierarchical integer key.

    Seeds are derived with ``np.random.SeedSequence`` (a documented, stable
    hash of the key tuple) feeding a Philox counter-based bit generator, so
    any (master_seed, index, ...) combination yields an independent and
    reproducible stream.  Normal variates use numpy's ziggurat sampler.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(flatten_key(key))))
