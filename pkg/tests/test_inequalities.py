import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nonlocal_rd.field import Field, grad_l2_sq, make_initial
from nonlocal_rd.radial_grid import build_grid
from nonlocal_rd.inequalities import (eps_grid, gns_exponents, gns_sd_check,
                                      gns_young_bound, ode_bound_capped, ode_bound_hyper,
                                      ode_bound_shifted, sobolev_check, sobolev_constant,
                                      subcritical_young_exponent, young_coefficient)

from oracles import heat_kernel, radial_quad, rk4_adaptive

G = build_grid(3, 12.0, 481)


def random_field(grid, rng):
    r = grid.nodes
    u = np.zeros_like(r)
    for _ in range(rng.integers(1, 5)):
        amp, c, s = rng.uniform(0.1, 3), rng.uniform(0, 2.5), rng.uniform(0.25, 0.6)
        u += amp * (np.exp(-((r - c) ** 2) / (2 * s * s)) + np.exp(-((r + c) ** 2) / (2 * s * s)))
    return Field(grid, u)


def test_sobolev_constant_values():
    assert sobolev_constant(3).value == pytest.approx(0.75 * 2 ** (2 / 3) * math.pi ** (4 / 3), rel=1e-14)
    assert sobolev_constant(3).value == pytest.approx(5.478, abs=1e-3)
    g52 = 3 * math.sqrt(math.pi) / 4
    assert sobolev_constant(4).value == pytest.approx(2 * 2**0.5 * math.pi**1.25 * g52**-0.5, rel=1e-14)
    assert all(sobolev_constant(n).value > 0 for n in range(3, 13))
    with pytest.raises(ValueError):
        sobolev_constant(2)


admissible = st.tuples(st.integers(3, 8), st.floats(0.3, 4.0), st.floats(0.01, 0.99))


def _ab(n, a, frac):
    # b/a placed strictly inside (1, min(2n/(a(n-2)), 2/a + 2/n))
    top = min(2 * n / (a * (n - 2)), 2 / a + 2 / n)
    assume(top > 1 + 1e-6)
    return a, a * (1 + frac * (top - 1))


@settings(max_examples=200, deadline=None)
@given(p=admissible)
def test_exponent_identities(p):
    n, a, frac = p
    a, b = _ab(n, a, frac)
    ex = gns_exponents(n, a, b)
    assert 0 < ex.theta < 1
    assert b * ex.theta < 2
    assert b * ex.theta * ex.delta == pytest.approx(2, rel=1e-10)
    assert ex.delta > 1
    # mass exponent produced by the Young step
    assert ex.gamma == pytest.approx((b / a) * (1 - ex.theta) * ex.delta / (ex.delta - 1), rel=1e-10)


def test_exponent_reference_point():
    ex = gns_exponents(3, 1.0, 1.5)
    assert ex.gamma == pytest.approx(9 / 7)
    assert ex.theta == pytest.approx(0.4)
    assert ex.delta == pytest.approx(10 / 3)


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.0, 0.5), (1.0, 2 + 2 / 3), (1.0, 7.0), (-1.0, 1.5)])
def test_exponent_constraints_rejected(a, b):
    with pytest.raises(ValueError):
        gns_exponents(3, a, b)


@pytest.mark.parametrize("k", [2.0, 3.0, 4.0])
def test_moser_type_exponents(k):
    # a = 4/k, b = 2(k + alpha - 1)/k gives gamma = k + alpha - 2 at n = 3, alpha = 5/3
    alpha = 5 / 3
    ex = gns_exponents(3, 4 / k, 2 * (k + alpha - 1) / k)
    assert ex.gamma == pytest.approx(k + alpha - 2)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("k", [2.0, 3.0, 5.0])
def test_subcritical_exponent_switches_at_fujita(n, k):
    ac = 1 + 2 / n
    assert subcritical_young_exponent(n, ac - 0.05, k) < 1
    assert subcritical_young_exponent(n, ac, k) == pytest.approx(1.0, rel=1e-10)
    assert subcritical_young_exponent(n, ac + 0.02, k) > 1


def test_young_coefficient_formula():
    s = sobolev_constant(3).value
    assert young_coefficient(3, 2.0, 1.0) == pytest.approx(0.5 * 0.5 / s)


def test_checks_on_zero_field():
    z = Field.zeros(G)
    assert sobolev_check(z) == 0.0
    assert gns_sd_check(z, 1.0, 2 + 2 / 3) == (0.0, 0.0)
    lhs, rhs = gns_young_bound(z, 1.0, 1.5, 1.0)
    assert lhs == 0.0 and rhs == 0.0


def test_sobolev_margin_gaussian_against_quadrature():
    f = make_initial(G, "gaussian", mass=1.0, sigma=1.0)
    margin = sobolev_check(f)
    assert margin > 0
    s = sobolev_constant(3).value
    gq = radial_quad(lambda r: (r / 2 * heat_kernel(r, 3, 1.0)) ** 2, 3)
    l6 = radial_quad(lambda r: heat_kernel(r, 3, 1.0) ** 6, 3) ** (1 / 6)
    assert abs(margin - (gq - s * l6**2)) <= eps_grid(G) * gq


@pytest.mark.parametrize("a", [1.0, 2.0])
def test_gns_sd_gaussian(a):
    # a = 2 is the b/a = 1 + 2/3 point
    b = a * (2 / a + 2 / 3)
    lhs, rhs = gns_sd_check(make_initial(G, "gaussian", mass=1.0, sigma=1.0), a, b)
    assert lhs < rhs


def test_gns_sd_rejects_unbalanced_exponents():
    f = make_initial(G, "gaussian", mass=1.0, sigma=1.0)
    with pytest.raises(ValueError):
        gns_sd_check(f, 1.0, 1 + 2 / 3)


def test_gns_sd_homogeneity():
    f = make_initial(G, "gaussian", mass=1.0, sigma=1.0)
    a, b = 2.0, 2 * (1 + 2 / 3)
    l1, r1 = gns_sd_check(f, a, b)
    l3, r3 = gns_sd_check(f * 3.0, a, b)
    assert l3 / l1 == pytest.approx(3 ** (b / a))
    assert r3 / r1 == pytest.approx(3 ** (2 / a + 2 / 3))
    assert l3 / r3 == pytest.approx(l1 / r1)


@pytest.mark.parametrize("c0", [0.1, 1.0, 10.0])
def test_young_bound_gaussian(c0):
    lhs, rhs = gns_young_bound(make_initial(G, "gaussian", mass=1.0, sigma=1.0), 1.0, 1.5, c0)
    assert lhs <= rhs


def test_young_bound_rejects_bad_c0():
    with pytest.raises(ValueError):
        gns_young_bound(make_initial(G, "gaussian", mass=1.0, sigma=1.0), 1.0, 1.5, 0.0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_randomized_fields_respect_inequalities(n):
    g = build_grid(n, 8.0, 161)
    rng = np.random.default_rng(7 + n)
    eps = eps_grid(g)
    for _ in range(30):
        f = random_field(g, rng)
        assert sobolev_check(f) >= -eps * grad_l2_sq(f)
        for a in (1.0, 2.0):
            lhs, rhs = gns_sd_check(f, a, a * (2 / a + 2 / n))
            assert lhs <= rhs * (1 + eps)
        for c0 in (0.1, 1.0, 10.0):
            lhs, rhs = gns_young_bound(f, 1.0, 1.5, c0)
            assert lhs <= rhs * (1 + eps)


def test_ode_bound_examples():
    assert ode_bound_hyper(0.0, 1.0, 2.0, 1.0) == pytest.approx(1.0)
    assert ode_bound_hyper(1.0, 1.0, 2.0, 1e14) == pytest.approx(1.0, abs=1e-12)
    assert ode_bound_capped(0.0, 1.0, 1.0, 2.0) == 1.0
    assert ode_bound_capped(5.0, 1.0, 1.0, 2.0) == 5.0
    # f = 0 leaves only the (t - t0)^{-1/(p-1)} tail
    assert ode_bound_shifted(0.0, 1.0, 3.0, 1.0, 3.0) == pytest.approx((1 / (2 * 2)) ** 0.5)


def test_shifted_bound_with_inverse_square_forcing():
    # f(t) = t^-2, beta = 1, p = 2, t0 = t/2 gives 2/t + 2/t
    for t in (1.0, 7.0, 100.0):
        assert ode_bound_shifted((t / 2) ** -2, 1.0, 2.0, t / 2, t) * t == pytest.approx(4.0)


@pytest.mark.parametrize("call", [
    lambda: ode_bound_hyper(-1, 1, 2, 1), lambda: ode_bound_hyper(1, 0, 2, 1),
    lambda: ode_bound_hyper(1, 1, 1, 1), lambda: ode_bound_hyper(1, 1, 2, 0),
    lambda: ode_bound_capped(-1, 1, 1, 2), lambda: ode_bound_shifted(1, 1, 2, 1, 1),
    lambda: ode_bound_shifted(1, 1, 2, 0, 1), lambda: ode_bound_shifted(-1, 1, 2, 1, 2),
])
def test_ode_bound_domain_errors(call):
    with pytest.raises(ValueError):
        call()


def test_capped_oracle_from_five_decreases_toward_one():
    ts = np.linspace(0.05, 6, 40)
    ys = rk4_adaptive(lambda t, y: 1 - y * y, 0.0, 5.0, ts)
    assert np.all(ys <= 5.0) and np.all(np.diff(ys) < 0)
    assert ys[-1] == pytest.approx(1.0, abs=1e-4)


@settings(max_examples=10, deadline=None)
@given(eta=st.floats(0, 5), beta=st.floats(0.2, 5), p=st.floats(1.2, 4), y0=st.floats(0, 200))
def test_hyper_bound_dominates_oracle(eta, beta, p, y0):
    ts = np.geomspace(1e-2, 20, 25)
    ys = rk4_adaptive(lambda t, y: eta - beta * abs(y) ** p, 0.0, y0, ts)
    bounds = np.array([ode_bound_hyper(eta, beta, p, t) for t in ts])
    assert np.all(ys <= bounds * (1 + 1e-7))
    assert np.all(ys <= ode_bound_capped(y0, eta, beta, p) * (1 + 1e-7))
