import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from solsurf.potential import (EllipticModulus, NamedSolution, NumericSolution, Potential, discriminate, eval_f,
                               parse_potential, weierstrass_root_pair)

KINDS = [("sn", {"k": 0.0}), ("sn", {"k": 0.5}), ("sn", {"k": 0.8}), ("cn", {"k": 0.5}),
         ("cn", {"k": 0.8}), ("dn", {"k": 0.5}), ("dn", {"k": 0.8}), ("wp", {"g2": 0.0, "g3": 1.0}),
         ("wp", {"g2": 4.0, "g3": 0.0})]


def test_jacobi_expansion_matches_symbolic_product():
    u, k1, k2 = sp.symbols("u k1 k2")
    for a, b in ((1.0, -0.25), (0.75, 0.25), (-0.75, 1.0), (0.5, 0.5)):
        ref = sp.Poly(sp.expand((1 - u ** 2) * (k1 + k2 * u ** 2)).subs({k1: a, k2: b}), u).all_coeffs()[::-1]
        pot = Potential.jacobi(a, b)
        np.testing.assert_array_equal(pot.coeffs, [float(c) for c in ref] + [0.0] * (5 - len(ref)))


def test_weierstrass_coefficients():
    pot = Potential.weierstrass(2.0, 3.0)
    assert pot.coeffs == (-3.0, -2.0, 0.0, 4.0)
    assert pot.degree == 3


def test_degree_bounds():
    with pytest.raises(ValueError):
        Potential.polynomial([1.0])
    with pytest.raises(ValueError):
        Potential.polynomial([0, 0, 0, 0, 0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3))
def test_discriminate_is_f_at_minus_lambda(lam):
    pot = Potential.jacobi(0.75, 0.25)
    assert discriminate(pot, lam) == eval_f(pot, -lam)[0]


def test_derivatives_against_symbolic():
    u = sp.symbols("u")
    coeffs = (0.3, -1.2, 0.7, 2.0, -0.4)
    expr = sum(c * u ** n for n, c in enumerate(coeffs))
    pot = Potential.polynomial(coeffs)
    for t in (-1.3, 0.0, 0.4, 2.1):
        f, fp, fpp = pot.eval(t)
        assert f == pytest.approx(float(expr.subs(u, t)), abs=1e-13)
        assert fp == pytest.approx(float(sp.diff(expr, u).subs(u, t)), abs=1e-13)
        assert fpp == pytest.approx(float(sp.diff(expr, u, 2).subs(u, t)), abs=1e-13)
        assert pot.third_derivative(t) == pytest.approx(float(sp.diff(expr, u, 3).subs(u, t)), abs=1e-13)


@pytest.mark.parametrize("u,v", [(0.3, 0.7), (0.5, 0.5 + 1e-9), (-1.1, 2.0)])
def test_divided_difference_first_order(u, v):
    pot = Potential.jacobi(1.0, -0.25)
    dd = pot.dd(u, 1, v, 1)
    if abs(u - v) > 1e-6:
        assert dd == pytest.approx((pot.f(u) - pot.f(v)) / (u - v), rel=1e-13)
    else:
        assert dd == pytest.approx(pot.eval(u)[1], rel=1e-7)


def test_modulus_complement():
    for k in (0.0, 0.3, 0.7071, 0.99, 1.0):
        m = EllipticModulus(k)
        assert abs(m.k ** 2 + m.k_prime ** 2 - 1) < 1e-14
    with pytest.raises(ValueError):
        EllipticModulus(1.5)


@pytest.mark.parametrize("kind,params", KINDS)
def test_jets_solve_ode_and_first_integral(kind, params):
    sol = NamedSolution(kind, **params)
    if kind == "wp":
        T = sol.inv.real_period
        xs = np.linspace(0.01, T - 0.01, 1000)
    else:
        xs = np.linspace(-10, 10, 1000)
    jet = sol.jet(xs)
    pot = sol.potential
    f, fp, _ = pot.eval(jet.u)
    assert np.all(np.abs(jet.first_integral_residual(pot)) < 1e-10 * np.maximum(1, np.abs(f)))
    assert np.all(np.abs(jet.ode_residual(pot)) < 1e-10 * np.maximum(1, np.abs(fp)))


@pytest.mark.parametrize("kind,params", KINDS)
def test_translation_is_exact(kind, params):
    xs = np.linspace(0.75, 2.0, 37)
    a = NamedSolution(kind, x0=0.7, **params).jet(xs)
    b = NamedSolution(kind, **params).jet(xs - 0.7)
    for name in ("u", "u_x", "u_xx"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_epsilon_follows_ux():
    jet = NamedSolution("sn", k=0.5).jet(np.linspace(-5, 5, 101))
    assert np.all(np.sign(jet.u_x[np.abs(jet.u_x) > 1e-12]) == jet.epsilon[np.abs(jet.u_x) > 1e-12])


def test_weierstrass_branch_is_negative_on_first_half_period():
    sol = NamedSolution("wp", g2=0.0, g3=1.0)
    jet = sol.jet(np.linspace(0.1, sol.inv.real_half_period - 0.01, 50))
    assert np.all(jet.epsilon == -1.0)


def test_numeric_solution_tracks_sn():
    # independent RK4 path against the closed form; sn passes through 0 with slope 1
    k = 0.5
    num = NumericSolution(Potential.jacobi(1.0, -k * k), u0=0.0, epsilon=1.0, step=1e-3)
    xs = np.linspace(-3, 3, 13)
    jet = num.jet(xs)
    ref = NamedSolution("sn", k=k).jet(xs)
    np.testing.assert_allclose(jet.u, ref.u, atol=1e-10)
    np.testing.assert_allclose(jet.u_x, ref.u_x, atol=1e-10)
    assert num.max_first_integral_drift < 1e-10


def test_numeric_solution_rejects_forbidden_start():
    with pytest.raises(ValueError):
        NumericSolution(Potential.jacobi(1.0, -0.25), u0=1.5)


@pytest.mark.parametrize("g2,g3", [(0.0, 1.0), (4.0, 0.0), (3.0, -0.5), (10.0, 2.0)])
def test_root_pair_factorization(g2, g3):
    a1, a2 = weierstrass_root_pair((g2, g3))
    for t in (-1.3, 0.2, 1.7):
        assert abs(4 * (t + a1) * (t + a2) * (t - a1 - a2) - (4 * t ** 3 - g2 * t - g3)) < 1e-11


def test_parse_potential():
    pot, sol = parse_potential("jacobi_sn k=0.5")
    assert sol.kind == "sn" and sol.k == 0.5 and pot == Potential.jacobi(1.0, -0.25)
    pot, sol = parse_potential("weierstrass g2=0 g3=1")
    assert sol.kind == "wp" and pot.coeffs == (-1.0, 0.0, 0.0, 4.0)
    pot, sol = parse_potential("polynomial coeffs=1,0,-2")
    assert sol is None and pot.coeffs == (1.0, 0.0, -2.0)
    with pytest.raises(ValueError):
        parse_potential("jacobi_xx k=1")
    with pytest.raises(ValueError):
        parse_potential("")


def test_unknown_kind():
    with pytest.raises(ValueError):
        NamedSolution("tan", k=0.3)


def test_pole_locations():
    sol = NamedSolution("wp", g2=0.0, g3=1.0)
    T = sol.inv.real_period
    np.testing.assert_allclose(sol.pole_locations(-0.1, 2 * T + 0.1), [0.0, T, 2 * T])
    assert len(NamedSolution("cn", k=0.3).pole_locations(-10, 10)) == 0
