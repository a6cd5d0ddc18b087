import numpy as np
import pytest
from scipy.optimize import minimize

from treeslic.errors import DegenerateTlsError, NonGenericTlsError
from treeslic.tls import total_least_squares


def _noisy_system(rng, m=60, k=4, noise=0.01):
    d0 = rng.standard_normal((m, k))
    theta = rng.standard_normal(k)
    c0 = d0 @ theta
    return d0 + noise * rng.standard_normal((m, k)), c0 + noise * rng.standard_normal(m), theta


def test_exact_recovery_without_noise(rng):
    d = rng.standard_normal((30, 5))
    theta = rng.standard_normal(5)
    sol = total_least_squares(d, d @ theta)
    assert np.allclose(sol.theta_real, theta, atol=1e-10)
    assert sol.smallest_singular_value < 1e-10


def test_one_unknown_toy():
    sol = total_least_squares(np.array([1.0, 2.0]), np.array([2.0, 4.0]))
    assert sol.theta_real == pytest.approx([2.0])


def test_matches_eckart_young_construction(rng):
    d, c, _ = _noisy_system(rng)
    aug = np.column_stack([d, c])
    u, s, vt = np.linalg.svd(aug, full_matrices=False)
    corrected = aug - s[-1] * np.outer(u[:, -1], vt[-1])
    theta_ey, *_ = np.linalg.lstsq(corrected[:, :-1], corrected[:, -1], rcond=None)
    assert np.allclose(total_least_squares(d, c).theta_real, theta_ey, atol=1e-9)


def test_minimizes_orthogonal_residual(rng):
    d, c, _ = _noisy_system(rng)

    def rayleigh(t):
        r = d @ t - c
        return r @ r / (1 + t @ t)

    ols, *_ = np.linalg.lstsq(d, c, rcond=None)
    best = minimize(rayleigh, ols, method="BFGS", options={"gtol": 1e-12})
    sol = total_least_squares(d, c)
    assert np.allclose(sol.theta_real, best.x, atol=1e-6)
    assert rayleigh(sol.theta_real) <= rayleigh(ols) + 1e-15
    assert sol.smallest_singular_value ** 2 == pytest.approx(rayleigh(sol.theta_real), rel=1e-9)


def test_invariant_to_row_order(rng):
    d, c, _ = _noisy_system(rng)
    perm = rng.permutation(len(c))
    assert np.allclose(total_least_squares(d[perm], c[perm]).theta_real,
                       total_least_squares(d, c).theta_real, atol=1e-12)


def test_condition_indicator_above_one(rng):
    d, c, _ = _noisy_system(rng)
    assert total_least_squares(d, c).condition_indicator > 1


def test_non_generic_case():
    d = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    c = np.array([0.0, 1.0, 0.0])
    with pytest.raises(NonGenericTlsError):
        total_least_squares(d, c)


def test_repeated_smallest_singular_value():
    d = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    c = np.array([0.0, 0.0, 1.0, 0.0])
    with pytest.raises(DegenerateTlsError) as info:
        total_least_squares(d, c)
    assert np.allclose(info.value.singular_values, [1, 1, 1])


def test_too_few_rows():
    with pytest.raises(DegenerateTlsError):
        total_least_squares(np.eye(3), np.ones(3))
