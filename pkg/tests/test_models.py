import numpy as np
import pytest

from opamp.models import (bbp_overlap, build_spiked, sample_goe,
                          sample_rademacher, sample_spiked)


def test_goe_symmetry_and_determinism():
    Z = sample_goe(50, 123)
    assert np.array_equal(Z, Z.T)
    assert np.array_equal(Z, sample_goe(50, 123))
    assert not np.array_equal(Z, sample_goe(50, 124))


def test_goe_rejects_zero_dimension():
    with pytest.raises(ValueError):
        sample_goe(0, 1)


def test_goe_entry_variances_monte_carlo():
    # 1e4 independent draws at n=100; bounds are ~2 sds of the sampling
    # distribution around the target variances 1/n and 2/n
    n, reps = 100, 10_000
    off = np.empty(reps)
    diag = np.empty(reps)
    for k in range(reps):
        Z = sample_goe(n, (9000, k))
        off[k] = Z[0, 1]
        diag[k] = Z[0, 0]
    assert 0.0097 <= off.var() <= 0.0103
    assert 0.0194 <= diag.var() <= 0.0206


def test_goe_spectral_radius_near_bulk_edge():
    for seed in range(3):
        Z = sample_goe(500, (77, seed))
        radius = np.abs(np.linalg.eigvalsh(Z)).max()
        assert 1.9 <= radius <= 2.1


def test_rademacher_support_and_determinism():
    s = sample_rademacher(4, 5)
    assert np.array_equal(s**2, np.ones(4))
    assert np.array_equal(s, sample_rademacher(4, 5))
    big = sample_rademacher(10_000, 11)
    assert abs(big.mean()) <= 0.05


def test_rademacher_rejects_zero_dimension():
    with pytest.raises(ValueError):
        sample_rademacher(0, 1)


def test_build_spiked_hand_value():
    theta = np.array([1.0, -1.0])
    inst = build_spiked(2.0, theta, np.zeros((2, 2)))
    np.testing.assert_array_equal(inst.matrix, [[1.0, -1.0], [-1.0, 1.0]])


def test_build_spiked_zero_cases():
    Z = sample_goe(6, 3)
    theta = sample_rademacher(6, 4)
    np.testing.assert_array_equal(build_spiked(0.0, theta, Z).matrix, Z)
    np.testing.assert_array_equal(build_spiked(1.7, np.zeros(6), Z).matrix, Z)


def test_build_spiked_linear_in_signal_strength():
    Z = sample_goe(8, 21)
    theta = sample_rademacher(8, 22)
    lhs = build_spiked(2.6, theta, Z).matrix - build_spiked(1.3, theta, Z).matrix
    rhs = build_spiked(1.3, theta, np.zeros((8, 8))).matrix
    np.testing.assert_allclose(lhs, rhs, atol=1e-15)


def test_build_spiked_shape_and_sign_errors():
    with pytest.raises(ValueError):
        build_spiked(1.0, np.ones(3), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        build_spiked(-1.0, np.ones(2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        build_spiked(1.0, np.ones(2), np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_sample_spiked_reconstructible():
    inst = sample_spiked(12, 1.5, sample_rademacher(12, 1), seed=2)
    rebuilt = (1.5 / 12) * np.outer(inst.signal, inst.signal) + sample_goe(12, 2)
    np.testing.assert_array_equal(inst.matrix, rebuilt)


def test_bbp_overlap_values():
    assert bbp_overlap(np.sqrt(2.0)) == pytest.approx(0.5)
    assert bbp_overlap(1.0) == 0.0
    assert bbp_overlap(0.3) == 0.0
    assert bbp_overlap(2.0) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        bbp_overlap(-0.1)
