import numpy as np
import pytest

from solsurf.lax import SpectralPoint
from solsurf.potential import NamedSolution
from solsurf.sl2 import Sl2Element
from solsurf.surface import (CompatibilityError, Frame, GaugeField, SurfaceParams, ab_compatibility_residual,
                             build_surface, f_gauge, f_q1, f_sym_tafel, gauge_fields, grid_mask,
                             integrate_surface, mixed_partial_residual, q1_fields, sym_tafel_fields,
                             tangent_fd_check)
from solsurf.symmetry import Characteristic
from solsurf.wavefunction import PhaseAccumulator

from oracles import phi_from_jet, quad_phase

SN = NamedSolution("sn", k=0.5)
WP = NamedSolution("wp", g2=0.0, g3=1.0)


def sp_of(sol, lam):
    return SpectralPoint.make(sol.potential, lam)


CASES = [(SN, 1.2, np.linspace(-8, 8, 15), np.linspace(-8, 8, 15)),
         (NamedSolution("cn", k=0.8), 1.2, np.linspace(-8, 8, 15), np.linspace(-8, 8, 15)),
         (WP, 1.0, np.linspace(0.2, 3.0, 15), np.linspace(-0.6, 0.6, 15))]


def test_params_validation():
    with pytest.raises(ValueError):
        SurfaceParams(1.2).validate()
    with pytest.raises(ValueError):
        SurfaceParams(1.2, a=float("nan")).validate()
    assert SurfaceParams(1.2, b=1.0).validate().b == 1.0


def test_mask_excludes_branch_points_and_poles():
    sol = NamedSolution("sn", k=0.5)
    xs = np.linspace(-4, 4, 801)
    m = grid_mask(sol, sp_of(sol, 0.5), xs)
    u = sol.u(xs)
    assert np.all(np.abs(u[m] + 0.5) >= 0.05) and not np.all(m)
    T = WP.inv.real_period
    xw = np.linspace(0.05, 2 * T, 400)
    mw = grid_mask(WP, sp_of(WP, 1.0), xw)
    assert not np.any(mw[np.abs(xw - T) < 0.1]) and not np.any(mw[xw < 0.1])


def test_sym_tafel_against_lambda_difference_oracle():
    # independent route: phi written on the jet, phase by adaptive quadrature at lambda +- h
    lam, h = 1.2, 1e-4
    f = SN.potential.f
    for x, y in ((0.7, 0.4), (-2.3, 1.5)):
        j = SN.jet(x)

        def phi(l):
            I = quad_phase(SN.u, l, SN.x_ref, x)
            return phi_from_jet(f, l, float(j.u), float(j.u_x), I, y)
        dphi = (8 * (phi(lam + h) - phi(lam - h)) - (phi(lam + 2 * h) - phi(lam - 2 * h))) / (12 * h)
        ref = np.linalg.inv(phi(lam)) @ dphi
        got = f_sym_tafel(SN, sp_of(SN, lam), 1.0, np.array([x]), np.array([y])).F.matrix()[0]
        np.testing.assert_allclose(got, ref.real, atol=1e-7)


def test_q1_surface_equals_inverse_times_x_derivative():
    sp = sp_of(SN, 1.2)
    x, y, h = 0.9, -0.6, 1e-4
    acc = PhaseAccumulator(SN, sp)

    def phi(t):
        fr = Frame(SN, sp, np.array([t]), np.array([y]))
        return fr.phi[0]
    dphi = (8 * (phi(x + h) - phi(x - h)) - (phi(x + 2 * h) - phi(x - 2 * h))) / (12 * h)
    ref = np.linalg.inv(phi(x)) @ dphi
    got = f_q1(SN, sp, 1.0, np.array([x]), np.array([y])).F.matrix()[0]
    np.testing.assert_allclose(got, ref.real, atol=1e-8)
    assert acc.phase(SN.x_ref) == 0.0


@pytest.mark.parametrize("sol,lam,xs,ys", CASES, ids=["sn", "cn", "wp"])
def test_tangents_match_finite_differences(sol, lam, xs, ys):
    sp = sp_of(sol, lam)
    X, Y = np.meshgrid(xs[2:-2:3], ys[2:-2:3], indexing="ij")
    for build in (lambda X, Y: f_sym_tafel(sol, sp, 1.0, X, Y), lambda X, Y: f_q1(sol, sp, 1.0, X, Y),
                  lambda X, Y: f_gauge(sol, sp, GaugeField.constant(0.3, -0.2, 1.0), X, Y)):
        ex, ey = tangent_fd_check(build, X, Y)
        assert ex < 1e-6 and ey < 1e-6


@pytest.mark.parametrize("sol,lam,xs,ys", CASES, ids=["sn", "cn", "wp"])
def test_mixed_partials(sol, lam, xs, ys):
    sp = sp_of(sol, lam)
    for build in (lambda X, Y: f_sym_tafel(sol, sp, 1.0, X, Y), lambda X, Y: f_q1(sol, sp, 1.0, X, Y),
                  lambda X, Y: f_gauge(sol, sp, GaugeField.constant(0.0, 0.0, 1.0), X, Y),
                  lambda X, Y: f_gauge(sol, sp, GaugeField.y_profile(np.sin, np.cos, [1.0, 0.0, 0.5]), X, Y)):
        assert mixed_partial_residual(build, xs, ys) < 5e-6


@pytest.mark.parametrize("sol,lam,xs,ys", CASES, ids=["sn", "cn", "wp"])
def test_ab_compatibility(sol, lam, xs, ys):
    sp = sp_of(sol, lam)
    xs = xs[grid_mask(sol, sp, xs)]
    for A, B in (sym_tafel_fields(1.0), q1_fields(1.0), gauge_fields(GaugeField.constant(0, 0, 1.0), sol, sp),
                 gauge_fields(GaugeField.lax_l(), sol, sp)):
        assert ab_compatibility_residual(A, B, sol, sp, xs, ys, relative=True) < 1e-6


def test_ab_compatibility_detects_mismatched_pair():
    sp = sp_of(SN, 1.2)
    A, _ = sym_tafel_fields(1.0)
    _, B = q1_fields(1.0)
    assert ab_compatibility_residual(A, B, SN, sp, np.linspace(-3, 3, 7), np.linspace(-1, 1, 7)) > 1e-3


def test_build_surface_is_sum_of_terms():
    sp = sp_of(SN, 1.2)
    X, Y = np.meshgrid(np.linspace(-2, 2, 5), np.linspace(-1, 1, 4), indexing="ij")
    S = GaugeField.constant(0.0, 1.0, 0.0)
    total = build_surface(SN, sp, SurfaceParams(1.2, a=2.0, b=-0.5, gauge=S), X, Y)
    parts = (f_sym_tafel(SN, sp, 2.0, X, Y).F.coords + f_q1(SN, sp, -0.5, X, Y).F.coords
             + f_gauge(SN, sp, S, X, Y).F.coords)
    np.testing.assert_allclose(total.F.coords, parts, atol=1e-12)


def test_masked_cells_are_nan():
    sp = sp_of(SN, 0.5)
    X, Y = np.meshgrid(np.linspace(-4, 4, 41), np.linspace(-1, 1, 3), indexing="ij")
    s = f_q1(SN, sp, 1.0, X, Y)
    assert np.all(np.isnan(s.F.coords[~s.mask])) and np.all(np.isfinite(s.F.coords[s.mask]))


class TestIntegration:
    @pytest.mark.parametrize("sol,lam,bx,by", [(SN, 1.2, (-1, 1), (-1, 1)), (WP, 1.0, (0.6, 2.2), (-0.5, 0.5)),
                                               (WP, -2.0, (0.25, 0.55), (-0.3, 0.3))])
    def test_q1_matches_closed_form(self, sol, lam, bx, by):
        sp = sp_of(sol, lam)
        xs, ys = np.linspace(*bx, 21), np.linspace(*by, 21)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        closed = f_q1(sol, sp, 1.0, X, Y)
        integ = integrate_surface(Characteristic.q1(), sol, sp, xs, ys, F0=closed.F.coords[0, 0])
        dev = np.max(np.abs(integ.F.coords - closed.F.coords)) / max(1.0, np.max(np.abs(closed.F.coords)))
        assert dev < 1e-6
        assert integ.meta["closure"] < 1e-6 and integ.meta["substeps"] >= 8

    def test_non_closed_field_raises(self):
        def field(X, Y):
            z = np.zeros(np.shape(X))
            return (Sl2Element.from_components(Y, z, z), Sl2Element.from_components(z, z, z),
                    np.ones(np.shape(X), bool))
        with pytest.raises(CompatibilityError):
            integrate_surface(field, SN, sp_of(SN, 1.2), np.linspace(0, 1, 5), np.linspace(0, 1, 5))

    def test_masked_path_raises(self):
        with pytest.raises(ValueError, match="masked"):
            integrate_surface(Characteristic.q1(), SN, sp_of(SN, 0.5), np.linspace(-4, 4, 9), np.linspace(0, 1, 3))

    def test_non_uniform_grid_rejected(self):
        with pytest.raises(ValueError, match="uniform"):
            integrate_surface(Characteristic.q1(), SN, sp_of(SN, 1.2), np.array([0, 0.1, 0.3]), np.linspace(0, 1, 3))
