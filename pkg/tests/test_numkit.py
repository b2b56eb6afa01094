import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fredf.numkit import as_real_matrix, check_finite, make_rng, normal_draws, ols_solve


def test_ols_recovers_exact_coefficients(rng):
    x = rng.standard_normal((50, 4))
    beta = np.array([1.5, -2.0, 0.25, 3.0])
    np.testing.assert_allclose(ols_solve(x, x @ beta), beta, atol=1e-12)


def test_ols_matches_lstsq_on_noisy_target(rng):
    x = rng.standard_normal((200, 5))
    y = rng.standard_normal((200, 3))
    ref = np.linalg.lstsq(x, y, rcond=None)[0]
    np.testing.assert_allclose(ols_solve(x, y), ref, atol=1e-12)


def test_ols_collinear_design_stays_finite(rng):
    a = rng.standard_normal(40)
    x = np.column_stack([a, 2 * a, np.ones(40)])
    y = 3 * a + 1
    coef = ols_solve(x, y)
    assert np.all(np.isfinite(coef))
    np.testing.assert_allclose(x @ coef, y, atol=1e-5)


@pytest.mark.parametrize(
    "design, target",
    [
        (np.ones((2, 3)), np.ones(2)),  # n < p
        (np.ones((5, 2)), np.ones(4)),  # row mismatch
        (np.array([[1.0, np.nan], [0.0, 1.0], [1.0, 1.0]]), np.ones(3)),
    ],
)
def test_ols_rejects_bad_input(design, target):
    with pytest.raises(ValueError):
        ols_solve(design, target)


def test_rng_is_reproducible():
    a = normal_draws(make_rng(7), 100)
    b = normal_draws(make_rng(7), 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, normal_draws(make_rng(8), 100))


def test_normal_draws_moments():
    x = normal_draws(make_rng(0), 200_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.std() - 1) < 0.01


def test_matrix_helpers():
    assert as_real_matrix([[1, 2]]).dtype == np.float64
    with pytest.raises(ValueError):
        as_real_matrix([1, 2, 3])
    with pytest.raises(ValueError):
        check_finite(np.array([1.0, np.inf]), "x")


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.integers(1, 3), st.integers(0, 2**31))
def test_ols_residual_orthogonal_to_design(n, p, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((n + p, p))
    y = r.standard_normal(n + p)
    resid = y - x @ ols_solve(x, y)
    assert np.max(np.abs(x.T @ resid)) < 1e-8 * (1 + np.abs(y).sum())
