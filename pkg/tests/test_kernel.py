import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aloe import kernel as K
from aloe.errors import UsageError
from oracles import central, five_point_mixed, rel_err, se_cov

P = K.KernelParams(1.0, 1.0)

coords = st.floats(-5, 5, allow_nan=False)
point2 = st.tuples(coords, coords).map(np.array)
params = st.builds(K.KernelParams, st.floats(0.1, 10), st.floats(0.1, 10))


def test_zero_distance_gives_signal_variance():
    p = K.KernelParams(2.5, 0.7)
    x = np.array([0.3, -1.2, 4.0])
    assert K.k_eval(p, x, x) == pytest.approx(2.5, abs=0)


def test_unit_distance_value():
    assert K.k_eval(P, np.array([0.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(math.exp(-1), rel=1e-15)


def test_symmetry_random_pairs():
    rng = np.random.default_rng(0)
    p = K.KernelParams(1.7, 2.2)
    for _ in range(100):
        a, b = rng.normal(size=(2, 3))
        assert K.k_eval(p, a, b) == K.k_eval(p, b, a)


def test_first_derivative_examples():
    x = np.array([0.0, 0.0])
    assert K.k_d1(P, x, x, 0) == 0.0
    # x1 - x2 = e_1: dk/dx2_1 = 2 (x1 - x2)_1 / L * k = 2 e^-1
    assert K.k_d1(P, np.array([1.0, 0.0]), x, 0) == pytest.approx(2 * math.exp(-1), rel=1e-14)
    assert K.k_d1(P, x, np.array([1.0, 0.0]), 0) == pytest.approx(-2 * math.exp(-1), rel=1e-14)


def test_prior_derivative_variances():
    p = K.KernelParams(2.0, 3.0)
    x = np.array([0.4, -0.9])
    assert K.v1(p, x, x, 0) == pytest.approx(2 * 2.0 / 3.0, rel=1e-14)
    assert K.v2(p, x, x, 0, 0) == pytest.approx(12 * 2.0 / 9.0, rel=1e-14)
    assert K.v2(p, x, x, 0, 1) == pytest.approx(4 * 2.0 / 9.0, rel=1e-14)
    assert p.grad_prior_var() == pytest.approx(K.v1(p, x, x, 1))
    assert p.hess_prior_var(True) == pytest.approx(K.v2(p, x, x, 1, 1))
    assert p.hess_prior_var(False) == pytest.approx(K.v2(p, x, x, 1, 0))


def test_second_derivative_at_zero_distance():
    p = K.KernelParams(1.3, 0.8)
    x = np.array([1.0, 2.0])
    assert K.k_d2(p, x, x, 0, 0) == pytest.approx(-2 * 1.3 / 0.8, rel=1e-14)
    assert K.k_d2(p, x, x, 0, 1) == 0.0


def test_derivatives_match_hermite_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s, L = rng.uniform(0.2, 4), rng.uniform(0.3, 6)
        p = K.KernelParams(s, L)
        a, b = rng.normal(size=(2, 2))
        # x1 = a, x2 = b; multi-index (first arg, second arg)
        assert K.k_d1(p, a, b, 1) == pytest.approx(se_cov(s, L, a, (0, 0), b, (0, 1)), rel=1e-12, abs=1e-300)
        assert K.k_d2(p, a, b, 0, 1) == pytest.approx(se_cov(s, L, a, (0, 0), b, (1, 1)), rel=1e-12, abs=1e-300)
        assert K.v1(p, a, b, 0) == pytest.approx(se_cov(s, L, a, (1, 0), b, (1, 0)), rel=1e-12, abs=1e-300)
        assert K.v2(p, a, b, 0, 0) == pytest.approx(se_cov(s, L, a, (2, 0), b, (2, 0)), rel=1e-10, abs=1e-300)
        assert K.v2(p, a, b, 0, 1) == pytest.approx(se_cov(s, L, a, (1, 1), b, (1, 1)), rel=1e-10, abs=1e-300)


def test_second_derivative_direct_difference_of_kernel():
    # second-order central difference of k itself; round-off limits this to ~1e-6
    rng = np.random.default_rng(4)
    p = K.KernelParams(1.5, 2.0)
    h = 1e-4 * math.sqrt(p.lengthscale)
    for _ in range(50):
        a, b = rng.normal(size=(2, 2))
        for j in range(2):
            for k in range(2):
                ej, ek = np.eye(2)[j] * h, np.eye(2)[k] * h
                fd = (K.k_eval(p, a, b + ej + ek) - K.k_eval(p, a, b + ej - ek)
                      - K.k_eval(p, a, b - ej + ek) + K.k_eval(p, a, b - ej - ek)) / (4 * h * h)
                assert rel_err(K.k_d2(p, a, b, j, k), fd, 1e-3 * p.signal_variance / p.lengthscale) < 1e-5


def test_shapes():
    A = np.zeros((3, 2))
    B = np.ones((5, 2))
    assert K.k_eval(P, A, B).shape == (3, 5)
    assert K.k_d1(P, A[0], B, 0).shape == (5,)
    assert K.v2(P, A, B[0], 0, 1).shape == (3,)
    assert isinstance(K.k_d2(P, A[0], B[0], 1, 1), float)


def test_dimension_mismatch_is_usage_error():
    with pytest.raises(UsageError):
        K.k_eval(P, np.zeros(2), np.zeros(3))
    with pytest.raises(UsageError):
        K.k_d1(P, np.zeros(2), np.zeros(2), 2)


@pytest.mark.parametrize("s, L", [(0.0, 1.0), (1.0, -1.0), (float("nan"), 1.0), (1.0, float("inf"))])
def test_invalid_params(s, L):
    with pytest.raises(UsageError):
        K.KernelParams(s, L)


def test_hess_pairs():
    assert K.hess_pairs(2) == [(0, 0), (0, 1), (1, 1)]
    assert len(K.hess_pairs(4)) == 10


@settings(max_examples=100, deadline=None)
@given(params, point2, point2, point2)
def test_translation_invariance(p, a, b, shift):
    assert K.k_eval(p, a + shift, b + shift) == pytest.approx(K.k_eval(p, a, b), rel=1e-9, abs=1e-300)
    assert K.v2(p, a + shift, b + shift, 0, 1) == pytest.approx(K.v2(p, a, b, 0, 1), rel=1e-6, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(params, point2, point2)
def test_kernel_bounded_and_derivative_covariances_symmetric(p, a, b):
    assert 0.0 <= K.k_eval(p, a, b) <= p.signal_variance
    assert K.v1(p, a, b, 0) == pytest.approx(K.v1(p, b, a, 0), rel=1e-12, abs=1e-300)
    assert K.v2(p, a, b, 1, 0) == pytest.approx(K.v2(p, b, a, 0, 1), rel=1e-12, abs=1e-300)
    # swapping the arguments flips the sign of an odd derivative
    assert K.k_d1(p, a, b, 0) == pytest.approx(-K.k_d1(p, b, a, 0), rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(params, point2, point2)
def test_fourth_derivative_is_mixed_second_of_second(p, a, b):
    # v2(j, k) = d^2/dx1_j dx1_k of k_d2(j, k), five-point stencils in x1
    h = 1e-3 * math.sqrt(p.lengthscale)
    scale = p.signal_variance / p.lengthscale**2
    for j, k in ((0, 0), (0, 1)):
        fd = five_point_mixed(lambda z: K.k_d2(p, z, b, j, k), a, j, k, h)
        assert rel_err(K.v2(p, a, b, j, k), fd, 1e-6 * scale) < 1e-4


def test_first_derivative_matches_central_difference():
    p = K.KernelParams(0.7, 1.9)
    h = 1e-5 * math.sqrt(p.lengthscale)
    rng = np.random.default_rng(8)
    for _ in range(40):
        a, b = rng.normal(size=(2, 2))
        for i in range(2):
            fd = central(lambda z: K.k_eval(p, a, z), b, i, h)
            assert rel_err(K.k_d1(p, a, b, i), fd, 1e-6 * p.signal_variance / math.sqrt(p.lengthscale)) < 1e-6
