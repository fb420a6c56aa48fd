import math
import time

import numpy as np
import pytest
from scipy import integrate, special

from efie2d.errors import AccuracyFailure, InvalidArgument, NumericDomainError
from efie2d.quadrature import (
    FilonPlan,
    MAX_TERMS,
    adaptive_oracle,
    endpoint_singular_integral,
    gauss_legendre,
    legendre_coefficients,
    legendre_table,
    log_singular_panel_rule,
    mehler_sonine_plan,
    mehler_sonine_tail,
    oscillatory_integral,
)


def inv_sqrt(t):
    return 1.0 / np.sqrt(t * t - 1.0)


@pytest.mark.parametrize("n", [1, 2, 5, 16, 64, 200])
def test_gauss_rule(n):
    rule = gauss_legendre(n)
    assert abs(rule.weights.sum() - 2.0) < 1e-14
    for deg in range(2 * n):
        exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert abs(rule.weights @ rule.nodes**deg - exact) < 1e-13


def test_legendre_coefficients_examples():
    a = legendre_coefficients(lambda t: np.ones_like(t), 3.0, 7.0, 6)
    assert a[0] == pytest.approx(1.0) and np.max(np.abs(a[1:])) < 1e-15
    a = legendre_coefficients(lambda t: t, -1.0, 1.0, 6)
    assert a[1] == pytest.approx(1.0) and np.max(np.abs(np.delete(a, 1))) < 1e-15


def test_legendre_coefficients_reject_nonfinite():
    with pytest.raises(NumericDomainError):
        legendre_coefficients(lambda t: np.full_like(t, np.nan), 2.0, 3.0, 4)


def test_inverse_sqrt_expansion_reconstructs():
    plan = FilonPlan.build(inv_sqrt, 2.0, 10.0)
    assert plan.converged
    x = np.cos(math.pi * (np.arange(50) + 0.5) / 50)
    t = 2.0 + 4.0 * (x + 1.0)
    assert np.max(np.abs(plan.reconstruct(t) - inv_sqrt(t))) < 1e-12


def test_plan_truncation_invariants():
    for c2 in (3.0, 10.0, 40.0):
        plan = mehler_sonine_plan(2.0, c2)
        a = np.abs(plan.coeffs)
        assert plan.converged and plan.terms <= MAX_TERMS
        assert a[-1] / a.max() <= 1e-14
        x = np.cos(math.pi * (np.arange(50) + 0.5) / 50)
        t = 2.0 + 0.5 * (c2 - 2.0) * (x + 1.0)
        assert np.max(np.abs(plan.reconstruct(t) - inv_sqrt(t))) < 1e-12


def test_coefficient_decay_is_geometric():
    plan = mehler_sonine_plan(2.0, 10.0)
    a = np.abs(plan.coeffs)
    n = np.arange(a.size)
    tail = slice(a.size - 12, a.size - 2)  # last ten above the stopping pair
    slope, icpt = np.polyfit(n[tail], np.log(a[tail]), 1)
    assert slope < 0  # rho = exp(-slope) > 1
    resid = np.log(a[tail]) - (slope * n[tail] + icpt)
    assert np.max(np.abs(resid)) < math.log(10.0)
    # every retained coefficient respects the fitted envelope
    body = slice(2, a.size - 2)
    assert np.all(np.log(a[body]) <= slope * n[body] + icpt + math.log(100.0))


def test_constant_on_unit_interval():
    plan = FilonPlan.build(lambda t: np.ones_like(t), -1.0, 1.0)
    res = oscillatory_integral(plan, 1.0)
    assert res.value == pytest.approx(1.682941969615793, abs=1e-15)
    assert res.value == pytest.approx(2 * math.sin(1.0), abs=1e-15)
    for k in (1e-6, 1e-9, 1e-12):
        assert oscillatory_integral(plan, k).value == pytest.approx(2.0, abs=1e-10)
    assert oscillatory_integral(FilonPlan.build(lambda t: np.ones_like(t), 2.0, 5.0), 1e-10).value == pytest.approx(3.0)


def test_filon_matches_oracle_on_2_20():
    plan = mehler_sonine_plan(2.0, 20.0)
    res = oscillatory_integral(plan, 5.0)
    ref = adaptive_oracle(lambda t: np.cos(5 * t) * inv_sqrt(t), 2.0, 20.0, tol=1e-14)
    assert abs(res.value - ref) <= 1e-10 * abs(ref)


@pytest.mark.parametrize("k", [0.1, 1.0, 10.0, 100.0])
def test_filon_error_estimate_bounds_actual(k):
    plan = mehler_sonine_plan(2.0, 40.0)
    res = oscillatory_integral(plan, k)
    ref = adaptive_oracle(lambda t: np.cos(k * t) * inv_sqrt(t), 2.0, 40.0, tol=1e-14)
    assert abs(res.value - ref) <= 1e-9 * abs(ref)
    assert res.error >= abs(res.value - ref)


def test_filon_rejects_bad_wavenumber():
    plan = mehler_sonine_plan(2.0, 4.0)
    for k in (-1.0, math.inf, math.nan):
        with pytest.raises(InvalidArgument):
            oscillatory_integral(plan, k)


def test_legendre_fourier_identity():
    rule = gauss_legendre(80)
    p = legendre_table(10, rule.nodes)
    for k in (0.5, 2.0, 20.0):
        direct = (p * np.exp(1j * k * rule.nodes)) @ rule.weights
        for n in range(11):
            ident = (1j) ** n * math.sqrt(2 * math.pi / k) * special.jv(n + 0.5, k)
            assert abs(direct[n] - ident) < 1e-11


def test_endpoint_branch():
    assert endpoint_singular_integral(1.0, 2.0, 1e-12) == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)
    assert math.log(2 + math.sqrt(3)) == pytest.approx(1.316957897, abs=1e-9)
    for c1, k in ((1.0, 1.0), (1.5, 10.0), (1.0, 40.0)):
        ref = adaptive_oracle(lambda t: np.cos(k * t) / np.sqrt(t - 1.0) / np.sqrt(t + 1.0), c1, 2.0, tol=1e-13,
                              singular="left" if c1 == 1.0 else None)
        assert endpoint_singular_integral(c1, 2.0, k) == pytest.approx(ref, abs=1e-10)
    with pytest.raises(InvalidArgument):
        endpoint_singular_integral(0.5, 2.0, 1.0)
    with pytest.raises(InvalidArgument):
        endpoint_singular_integral(1.0, 3.0, 1.0)


def test_mehler_sonine_tail_examples():
    # split point equals the upper limit
    assert mehler_sonine_tail(1.0, 1.0, 2.0) == pytest.approx(endpoint_singular_integral(1.0, 2.0, 1.0), abs=1e-15)
    # cosh-substitution oracle
    ref = integrate.quad(lambda u: math.cos(0.7 * math.cosh(u)), 0.0, math.acosh(30.0), limit=400, epsabs=1e-14)[0]
    assert mehler_sonine_tail(0.7, 1.0, 30.0) == pytest.approx(ref, abs=1e-9)
    # alpha -> infinity reproduces -(pi/2) Y0
    assert mehler_sonine_tail(1.0, 1.0, 1e4) == pytest.approx(-0.5 * math.pi * special.y0(1.0), abs=1e-4)
    with pytest.raises(InvalidArgument):
        mehler_sonine_tail(1.0, 2.0, 2.0)


def test_mehler_sonine_tail_continuous_at_split():
    k, r = 1.3, 0.9
    left = mehler_sonine_tail(r, k, 2 * k * (1 - 1e-13))
    right = mehler_sonine_tail(r, k, 2 * k * (1 + 1e-13))
    assert abs(left - right) < 1e-11


def test_mehler_sonine_tail_vectorized_and_r_zero():
    r = np.array([0.0, 0.2, 1.5])
    vals = mehler_sonine_tail(r, 2.0, 11.0)
    assert vals[0] == pytest.approx(math.acosh(5.5), abs=1e-13)
    assert vals[1] == pytest.approx(mehler_sonine_tail(0.2, 2.0, 11.0), abs=0)


def test_adaptive_oracle_examples():
    assert adaptive_oracle(lambda x: x * x, 0.0, 1.0, tol=1e-12) == pytest.approx(1 / 3, abs=1e-14)
    assert adaptive_oracle(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-13)
    val = adaptive_oracle(inv_sqrt, 1.0, 2.0, singular="left")
    assert val == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)


def test_adaptive_oracle_failure_carries_estimate():
    with pytest.raises(AccuracyFailure) as info:
        adaptive_oracle(lambda x: np.sign(x - 0.3), 0.0, 1.0, tol=1e-30, max_depth=8)
    assert info.value.best_estimate == pytest.approx(0.4, abs=1e-2)


def test_log_rule():
    rule = log_singular_panel_rule(10)
    x, w = rule.nodes, rule.weights
    assert w @ np.log(x) == pytest.approx(-1.0, abs=1e-13)
    assert w @ (x * np.log(x)) == pytest.approx(-0.25, abs=1e-13)
    for p in range(10):
        assert w @ x**p == pytest.approx(1 / (p + 1), abs=1e-13)
        assert w @ (x**p * np.log(x)) == pytest.approx(-1 / (p + 1) ** 2, abs=1e-13)
    for n in (2, 5):
        r = log_singular_panel_rule(n)
        assert r.weights @ np.log(r.nodes) == pytest.approx(-1.0, abs=1e-13)
    with pytest.raises(InvalidArgument):
        log_singular_panel_rule(1)


def test_filon_cost_does_not_grow_with_k():
    plan = mehler_sonine_plan(2.0, 40.0)

    def best(k):
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            oscillatory_integral(plan, k)
            times.append(time.perf_counter() - t0)
        return min(times)

    t = [best(k) for k in (0.1, 1.0, 10.0, 100.0)]
    assert max(t) <= 2.0 * min(t)
