import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import comb

from addgp.errors import InvalidArgumentError
from addgp.kernels import (
    AdditiveKernelSpec,
    HullKernelSpec,
    additive_kernel,
    base_kernel,
    base_row,
    esp_dp,
    esp_excluding,
    esp_newton_girard,
    hull_kernel,
    kernel_grad_length_scales,
    kernel_grad_order_variances,
    power_sums,
    resolve_max_order,
    spec_from_dict,
)

from conftest import brute_esp, central_diff, five_point_diff

unit_z = st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=1, max_size=8)


# base kernels ----------------------------------------------------------------


def test_base_kernel_identity():
    assert base_kernel(3.0, 3.0, 0.7) == 1.0


@pytest.mark.parametrize("l", [0.1, 0.7, 3.0, 25.0])
def test_base_kernel_at_one_lengthscale(l):
    assert base_kernel(1.0, 1.0 + l, l) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert base_kernel(1.0 + l, 1.0, l) == base_kernel(1.0, 1.0 + l, l)


def test_base_kernel_increases_to_one_with_lengthscale():
    vals = [base_kernel(0.0, 1.0, l) for l in np.geomspace(0.1, 1e4, 30)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.0), (0.0, 1.0, -1.0), (np.nan, 0.0, 1.0), (0.0, np.inf, 1.0)])
def test_base_kernel_rejects_bad_input(args):
    with pytest.raises(InvalidArgumentError):
        base_kernel(*args)


def test_base_row():
    np.testing.assert_array_equal(base_row([1.0, 2.0], [1.0, 2.0], [0.3, 4.0]), [1.0, 1.0])
    z = base_row([0.0, 0.0], [0.5, -2.0], [0.5, 2.0])
    np.testing.assert_allclose(z, [math.exp(-0.5)] * 2, rtol=1e-15)
    with pytest.raises(InvalidArgumentError):
        base_row([0.0, 1.0], [0.0], [1.0, 1.0])


# symmetric polynomials -------------------------------------------------------


def test_power_sums():
    np.testing.assert_array_equal(power_sums([1, 2, 3], 2), [6, 14])
    np.testing.assert_array_equal(power_sums([1, 1, 1, 1], 4), [4, 4, 4, 4])
    np.testing.assert_array_equal(power_sums([0.5], 1), [0.5])
    with pytest.raises(InvalidArgumentError):
        power_sums([1, 2], 3)


def test_power_sums_single_variable_powers():
    # r may not exceed D, so the powers of 0.5 come from three copies / 3
    np.testing.assert_allclose(power_sums([0.5] * 3, 3) / 3, [0.5, 0.25, 0.125])


@pytest.mark.parametrize("method", [esp_dp, esp_newton_girard])
def test_esp_known_values(method):
    expected = brute_esp([1, 2, 3, 4], 4)
    np.testing.assert_array_equal(expected, [1, 10, 35, 50, 24])
    np.testing.assert_allclose(method([1, 2, 3, 4], 4), expected, rtol=1e-14)
    np.testing.assert_allclose(method([1, 1, 1, 1], 4), [1, 4, 6, 4, 1], rtol=1e-14)
    assert method([0.3, 0.2], 1)[0] == 1.0


@pytest.mark.parametrize("method", [esp_dp, esp_newton_girard])
def test_esp_rejects_bad_order(method):
    for r in (0, 3, 1.5):
        with pytest.raises(InvalidArgumentError):
            method([0.5, 0.5], r)


def test_esp_dp_base_case():
    np.testing.assert_array_equal(esp_dp([0.37], 1), [1.0, 0.37])


@settings(max_examples=200, deadline=None)
@given(unit_z)
def test_esp_dp_matches_brute_force_on_adversarial_inputs(z):
    r = len(z)
    np.testing.assert_allclose(esp_dp(z, r), brute_esp(z, r), rtol=1e-10)


def test_esp_methods_match_brute_force_on_random_inputs(rng):
    for _ in range(200):
        D = int(rng.integers(1, 9))
        z = 1.0 - rng.uniform(size=D)  # (0, 1]
        ref = brute_esp(z, D)
        np.testing.assert_allclose(esp_dp(z, D), ref, rtol=1e-10)
        np.testing.assert_allclose(esp_newton_girard(z, D), ref, rtol=1e-10)


def test_newton_girard_cancellation_is_real():
    # two values at one and a tiny third: e_3 comes out of O(1) alternating terms
    z = [1.0, 1.0, 1e-6]
    ng = esp_newton_girard(z, 3)[3]
    assert abs(ng - 1e-6) / 1e-6 > 1e-12
    assert esp_dp(z, 3)[3] == pytest.approx(1e-6, rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(unit_z)
def test_esp_bounds_on_unit_cube(z):
    D = len(z)
    e = esp_dp(z, D)
    binom = [comb(D, n, exact=True) for n in range(D + 1)]
    assert e[0] == 1.0
    assert np.all(e >= 0) and np.all(e <= np.array(binom) * (1 + 1e-12))
    s = power_sums(z, D)
    assert np.all(np.diff(s) <= 1e-15) and np.all(s <= D)


@pytest.mark.parametrize("D", range(1, 21))
def test_esp_all_ones_is_binomial(D):
    e = esp_dp(np.ones(D), D)
    np.testing.assert_array_equal(e, [comb(D, n, exact=True) for n in range(D + 1)])


def test_esp_batch_shape_matches_pointwise(rng):
    z = rng.uniform(size=(5, 3, 4))
    batch = esp_dp(z, 5)
    for i in range(3):
        for j in range(4):
            np.testing.assert_allclose(batch[:, i, j], brute_esp(z[:, i, j], 5), rtol=1e-12)


def test_esp_excluding_values():
    z = [1.0, 2.0, 3.0, 4.0]
    e = esp_dp(z, 4)
    out = esp_excluding(z, e, 0, 3)
    np.testing.assert_allclose(out, brute_esp([2, 3, 4], 3), rtol=1e-14)
    np.testing.assert_allclose(out, [1, 9, 26, 24])
    e1 = esp_dp([1.0, 1.0, 1.0], 3)
    for j in range(3):
        np.testing.assert_allclose(esp_excluding([1, 1, 1], e1, j, 2), [1, 2, 1])
    with pytest.raises(InvalidArgumentError):
        esp_excluding(z, e, 4, 3)


def test_esp_excluding_is_derivative():
    z = np.array([1.0, 2.0, 3.0, 4.0])
    deriv = esp_excluding(z, esp_dp(z, 4), 0, 3)[1]
    fd = central_diff(lambda v: esp_dp(v, 4)[2], z, 1e-6)[0]
    assert deriv == 9.0
    assert fd == pytest.approx(9.0, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=2, max_size=7))
def test_esp_excluding_matches_finite_differences(z):
    z = np.array(z)
    D = len(z)
    e = esp_dp(z, D)
    for j in range(D):
        ex = esp_excluding(z, e, j, D - 1)
        np.testing.assert_allclose(ex, brute_esp(np.delete(z, j), D - 1), rtol=1e-10, atol=1e-14)
        for n in range(1, D + 1):
            fd = central_diff(lambda v: esp_dp(v, D)[n], z, 1e-6)[j]
            assert ex[n - 1] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_esp_excluding_fallback_when_divide_out_cancels():
    # z_j dominates: divide-out subtracts nearly equal numbers
    z = np.array([1.0, 1e-9, 2e-9, 3e-9])
    e = esp_dp(z, 4)
    ex = esp_excluding(z, e, 0, 3)
    np.testing.assert_allclose(ex, brute_esp(z[1:], 3), rtol=1e-12)
    assert np.all(ex >= 0)


def test_esp_excluding_batch_fallback_only_touches_bad_entries():
    z = np.array([[1.0, 0.5], [1e-9, 0.4], [2e-9, 0.3], [3e-9, 0.2]])
    e = esp_dp(z, 4)
    ex = esp_excluding(z, e, 0, 3)
    for col in range(2):
        np.testing.assert_allclose(ex[:, col], brute_esp(z[1:, col], 3), rtol=1e-12)


# additive kernel -------------------------------------------------------------


def _spec(ls, ov):
    return AdditiveKernelSpec(tuple(ls), tuple(ov))


def test_additive_kernel_at_zero_lag():
    spec = _spec([0.5, 1, 2, 3], [1, 1, 1, 1])
    x = np.array([0.1, -0.2, 3.0, 1.0])
    assert additive_kernel(x, x, spec) == 15.0
    np.testing.assert_array_equal(kernel_grad_order_variances(x, x, spec), [4, 6, 4, 1])


def test_top_order_only_is_gaussian_kernel():
    ls = [0.4, 1.7]
    spec = _spec(ls, [0.0, 2.5])
    x = np.array([0.3, 0.1])
    xp = x + np.array(ls)
    assert additive_kernel(x, xp, spec) == pytest.approx(2.5 * math.exp(-1.0), rel=1e-14)


def test_first_order_only_is_sum_of_base_kernels(rng):
    ls = rng.uniform(0.2, 2, size=5)
    spec = _spec(ls, [1.3])
    x, xp = rng.normal(size=5), rng.normal(size=5)
    expected = 1.3 * sum(base_kernel(a, b, l) for a, b, l in zip(x, xp, ls))
    assert additive_kernel(x, xp, spec) == pytest.approx(expected, abs=1e-12)


def test_additive_kernel_matches_explicit_subset_sum(rng):
    D = 5
    ls = rng.uniform(0.3, 2, size=D)
    ov = rng.uniform(0.1, 2, size=4)
    spec = _spec(ls, ov)
    x, xp = rng.normal(size=D), rng.normal(size=D)
    z = [base_kernel(a, b, l) for a, b, l in zip(x, xp, ls)]
    expected = sum(
        ov[n - 1] * sum(math.prod(z[i] for i in c) for c in combinations(range(D), n))
        for n in range(1, 5)
    )
    assert additive_kernel(x, xp, spec) == pytest.approx(expected, rel=1e-13)
    assert additive_kernel(xp, x, spec) == additive_kernel(x, xp, spec)


def test_additive_kernel_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        additive_kernel([0.0, 1.0], [0.0, 1.0, 2.0], _spec([1, 1], [1]))


def test_newton_girard_selector_agrees(rng):
    ls, ov = rng.uniform(0.5, 2, size=6), rng.uniform(0.1, 1, size=6)
    dp = _spec(ls, ov)
    ng = AdditiveKernelSpec(tuple(ls), tuple(ov), "newton-girard")
    A = rng.normal(size=(7, 6))
    np.testing.assert_allclose(ng.gram(A), dp.gram(A), rtol=1e-10)


def test_order_variance_gradient_matches_finite_differences(rng):
    for _ in range(10):
        D = int(rng.integers(1, 7))
        R = int(rng.integers(1, D + 1))
        ls, ov = rng.uniform(0.3, 2, size=D), rng.uniform(0.2, 2, size=R)
        x, xp = rng.normal(size=D), rng.normal(size=D)
        grad = kernel_grad_order_variances(x, xp, _spec(ls, ov))
        fd = five_point_diff(lambda v: additive_kernel(x, xp, _spec(ls, v)), ov, 1e-3)
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-12)
        assert np.all(grad >= 0)


def test_order_variance_gradient_single_dimension():
    z = base_kernel(0.0, 0.8, 1.3)
    np.testing.assert_allclose(kernel_grad_order_variances([0.0], [0.8], _spec([1.3], [2.0])), [z])


def test_lengthscale_gradient_matches_finite_differences(rng):
    for _ in range(20):
        D = int(rng.integers(1, 7))
        R = int(rng.integers(1, D + 1))
        log_ls, ov = rng.uniform(-1, 1, size=D), rng.uniform(0.2, 2, size=R)
        x, xp = rng.normal(size=D), rng.normal(size=D)
        grad = kernel_grad_length_scales(x, xp, _spec(np.exp(log_ls), ov))
        fd = five_point_diff(lambda v: additive_kernel(x, xp, _spec(np.exp(v), ov)), log_ls, 1e-3)
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-12)


def test_lengthscale_gradient_closed_forms():
    spec = _spec([0.7, 1.1], [1.0, 0.5])
    np.testing.assert_array_equal(kernel_grad_length_scales([1.0, 2.0], [1.0, 2.0], spec), [0, 0])
    l, delta = 0.9, 0.6
    z = math.exp(-(delta**2) / (2 * l * l))
    g = kernel_grad_length_scales([0.0], [delta], _spec([l], [1.7]))
    assert g[0] == pytest.approx(1.7 * z * delta**2 / l**2, rel=1e-14)


def test_gram_with_grads_matches_pairwise_grads(rng):
    ls, ov = rng.uniform(0.5, 2, size=4), rng.uniform(0.2, 1, size=3)
    spec = _spec(ls, ov)
    A = rng.normal(size=(5, 4))
    K, grads = spec.gram_with_grads(A)
    for i in range(5):
        for j in range(5):
            assert K[i, j] == pytest.approx(additive_kernel(A[i], A[j], spec), rel=1e-14)
            np.testing.assert_allclose(grads[:4, i, j], kernel_grad_length_scales(A[i], A[j], spec), rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(
                grads[4:, i, j], ov * kernel_grad_order_variances(A[i], A[j], spec), rtol=1e-14
            )


def test_zero_order_variances_are_inactive():
    spec = _spec([1, 1, 1], [0.0, 0.0, 2.0])
    assert spec.active_orders == (3,)
    assert spec.n_params == 4
    back = spec.with_log_params(spec.log_params())
    assert back.order_variances == (0.0, 0.0, 2.0)
    with pytest.raises(InvalidArgumentError):
        _spec([1, 1], [0.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        _spec([1, 1], [1.0, 1.0, 1.0])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_gram_is_psd(D, N, seed):
    rng = np.random.default_rng(seed)
    R = int(rng.integers(1, D + 1))
    spec = _spec(rng.uniform(0.2, 3, size=D), rng.uniform(0.01, 2, size=R))
    K = spec.gram(rng.normal(size=(N, D)))
    np.testing.assert_array_equal(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8 * K.diagonal().max()


# hull kernel -----------------------------------------------------------------


def test_hull_kernel_cases(rng):
    h0 = HullKernelSpec(2.0, 0.0, (1.0, 1.0))
    assert hull_kernel([0.0, 0.0], [3.0, -1.0], h0) == 2.0
    z = base_kernel(0.2, 1.0, 0.6)
    assert hull_kernel([0.2], [1.0], HullKernelSpec(1.5, 0.7, (0.6,))) == pytest.approx(1.5 * (1 + 0.7 * z))
    x, xp = rng.normal(size=2), rng.normal(size=2)
    h = HullKernelSpec(0.8, 1.9, (0.5, 1.5))
    z1, z2 = base_row(x, xp, h.length_scales)
    expected = 0.8 * (1 + 1.9 * (z1 + z2) + 1.9**2 * z1 * z2)
    assert hull_kernel(x, xp, h) == pytest.approx(expected, rel=1e-14)


def test_hull_kernel_is_weighted_esp_sum(rng):
    for D in range(1, 9):
        h = HullKernelSpec(rng.uniform(0.1, 3), rng.uniform(0, 2), tuple(rng.uniform(0.3, 2, size=D)))
        x, xp = rng.normal(size=D), rng.normal(size=D)
        e = brute_esp(base_row(x, xp, h.length_scales), D)
        expected = h.amplitude * sum(h.alpha**n * e[n] for n in range(D + 1))
        assert hull_kernel(x, xp, h) == pytest.approx(expected, rel=1e-10)


def test_hull_gram_grads_match_finite_differences(rng):
    h = HullKernelSpec(1.3, 0.6, (0.7, 1.4, 0.9))
    A = rng.normal(size=(4, 3))
    _, grads = h.gram_with_grads(A)
    theta = h.log_params()
    for p in range(theta.size):
        fd = central_diff(lambda t: h.with_log_params(t).gram(A)[1, 2], theta, 1e-6)[p]
        assert grads[p, 1, 2] == pytest.approx(fd, rel=1e-6, abs=1e-10)


# misc --------------------------------------------------------------------------


def test_resolve_max_order():
    assert resolve_max_order(3) == 3
    assert resolve_max_order(14) == 10
    assert resolve_max_order(1, 1) == 1
    with pytest.warns(UserWarning):
        assert resolve_max_order(4, 7) == 4
    with pytest.raises(InvalidArgumentError):
        resolve_max_order(4, 0)


def test_spec_dict_round_trip():
    a = AdditiveKernelSpec((0.5, 2.0), (0.1, 0.0), "newton-girard")
    h = HullKernelSpec(1.5, 0.25, (0.5, 2.0))
    assert spec_from_dict(a.to_dict()) == a
    assert spec_from_dict(h.to_dict()) == h
