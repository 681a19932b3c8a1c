import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solsurf.lax import SpectralPoint
from solsurf.potential import NamedSolution
from solsurf.wavefunction import (BranchError, PhaseAccumulator, closed_phase, compare_closed_phase,
                                  det_from_constants, lsp_residual, normalized_constants, phase_integral, psi_pair,
                                  wave_function, x_lsp_fd_residual)

from oracles import LspJetOracle, phi_from_jet, quad_phase

SN = NamedSolution("sn", k=0.5)
WP = NamedSolution("wp", g2=0.0, g3=1.0)


def sp_of(sol, lam):
    return SpectralPoint.make(sol.potential, lam)


class TestPhase:
    def test_zero_at_reference(self):
        for sol, lam in ((SN, 1.2), (WP, 1.0), (NamedSolution("dn", k=0.8), 1.2)):
            assert PhaseAccumulator(sol, lam).phase(sol.x_ref) == 0.0

    @pytest.mark.parametrize("sol,lam,x", [(SN, 1.2, 3.7), (SN, 1.2, -5.1), (WP, 1.0, 2.6),
                                           (NamedSolution("cn", k=0.8), 1.2, 6.0)])
    def test_against_adaptive_quadrature(self, sol, lam, x):
        got = phase_integral(sol, sp_of(sol, lam), x)
        ref = quad_phase(sol.u, lam, sol.x_ref, x)
        assert abs(got - ref) < 1e-11 * max(1.0, abs(ref))

    def test_monotone_where_w_has_one_sign(self):
        xs = np.linspace(-8, 8, 400)
        th = PhaseAccumulator(SN, 1.2).phase(xs)
        assert np.all(np.diff(th) > 0)

    def test_principal_value_across_zero_of_w(self):
        # u + lambda vanishes inside the path for sn with lambda = 0.5
        sol = NamedSolution("sn", k=0.5)
        sp = sp_of(sol, 0.5)
        with pytest.raises(Exception):
            PhaseAccumulator(sol, sp, mode="strict").phase(np.array([-1.0]))
        th = PhaseAccumulator(sol, sp, mode="pv").phase(np.array([-1.0, -0.9]))
        assert np.all(np.isfinite(th))

    def test_closed_form_matches_quadrature(self):
        for sol, lam, xs in ((SN, 1.2, np.linspace(-1.5, 1.5, 31)), (WP, 1.0, np.linspace(0.2, 1.2, 31))):
            rep = compare_closed_phase(sol, sp_of(sol, lam), xs)
            assert not rep["corrected"]["fallback"]
            assert rep["corrected"]["max_abs"] < 1e-12
            # the printed forms do not reproduce the phase
            assert rep["printed"]["max_abs"] > 0.1

    def test_closed_form_falls_back_at_turning_reference(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = closed_phase(NamedSolution("dn", k=0.5), 1.2, np.linspace(0.1, 1.5, 5))
        assert res.fallback


class TestPsi:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_product_is_one(self, x, y):
        for sol, lam in ((SN, 1.2), (WP, 1.0), (WP, -2.0)):
            if sol is WP and not 0.2 < x + 3 < 3.2:
                continue
            xx = x + 3 if sol is WP else x
            p = psi_pair(sol, sp_of(sol, lam), xx, y, mode="pv")
            assert abs(p.psi_plus * p.psi_minus - 1) < 1e-12

    def test_conjugate_for_negative_g(self):
        sp = sp_of(SN, 1.2)
        assert sp.g < 0
        p = psi_pair(SN, sp, np.linspace(-4, 4, 9), 0.7)
        np.testing.assert_allclose(p.psi_minus, np.conj(p.psi_plus), atol=1e-12)

    def test_real_positive_for_positive_g(self):
        sp = sp_of(WP, -2.0)
        p = psi_pair(WP, sp, np.linspace(0.3, 0.65, 9), 0.2)
        assert np.all(np.abs(p.psi_plus.imag) < 1e-14) and np.all(p.psi_plus.real > 0)


class TestWaveFunction:
    def test_constants_give_unit_determinant(self):
        for s in (2.0, 1j * np.sqrt(5), 0.3 + 0.1j):
            c = normalized_constants(s)
            assert det_from_constants(c, s) == pytest.approx(1.0, abs=1e-15)
            assert det_from_constants(c, s, convention="printed") == pytest.approx(-1.0, abs=1e-15)

    def test_matches_independent_formula(self):
        xs = np.array([-2.0, 0.4, 3.1])
        ys = np.array([0.5, -1.0, 2.0])
        sp = sp_of(SN, 1.2)
        wf = wave_function(SN, sp, xs, ys)
        th = PhaseAccumulator(SN, sp).phase(xs)
        for i in range(3):
            j = SN.jet(xs[i])
            ref = phi_from_jet(SN.potential.f, 1.2, float(j.u), float(j.u_x), th[i], ys[i])
            np.testing.assert_allclose(wf.matrix[i], ref, atol=1e-13)

    @pytest.mark.parametrize("sol,lam,x0,x1", [(SN, 1.2, -8, 8), (NamedSolution("cn", k=0.8), 1.2, -8, 8),
                                                (WP, 1.0, 0.2, 3.0), (WP, -2.0, 0.2, 0.65)])
    def test_unit_determinant_and_real(self, sol, lam, x0, x1):
        X, Y = np.meshgrid(np.linspace(x0, x1, 40), np.linspace(-1, 1, 40), indexing="ij")
        wf = wave_function(sol, sp_of(sol, lam), X, Y, mode="real")
        m = wf.matrix
        # rounding in ad - bc scales with |ad| + |bc|, which is large when g > 0
        scale = np.maximum(1.0, np.abs(m[..., 0, 0] * m[..., 1, 1]) + np.abs(m[..., 0, 1] * m[..., 1, 0]))
        assert np.max(np.abs(wf.det - 1) / scale) < 1e-10
        if wf.sp.g < 0:
            assert np.max(np.abs(wf.det - 1)) < 1e-10
        np.testing.assert_allclose(wf.inverse() @ wf.matrix, np.broadcast_to(np.eye(2), wf.matrix.shape),
                                   atol=1e-10 * np.max(scale))

    def test_real_mode_rejects_negative_w(self):
        sol = NamedSolution("sn", k=0.5)
        with pytest.raises(BranchError):
            wave_function(sol, sp_of(sol, 0.5), np.array([-1.4]), np.array([0.0]), mode="real")

    def test_singular_at_zero_discriminant(self):
        with pytest.raises(ValueError):
            wave_function(SN, sp_of(SN, 1.0), 0.3, 0.0)


class TestLsp:
    @pytest.mark.parametrize("sol,lam,xr", [(SN, 1.2, (-8, 8)), (NamedSolution("dn", k=0.5), 1.2, (-8, 8)),
                                             (WP, 1.0, (0.2, 3.0))])
    def test_fifty_by_fifty(self, sol, lam, xr):
        rep = lsp_residual(sol, sp_of(sol, lam), np.linspace(*xr, 50), np.linspace(-2, 2, 50))
        assert max(rep.max_de) < 1e-9
        assert rep.max_det_dev < 1e-10
        assert rep.max_fd_x < 1e-7
        assert rep.passed()

    def test_injected_defect_is_detected(self):
        rep = lsp_residual(SN, sp_of(SN, 1.2), np.linspace(-3, 3, 10), np.linspace(-1, 1, 10),
                           defect="flip_sqrt_g_plus")
        assert max(rep.max_de) > 1e-3 and not rep.passed()

    def test_fd_residual_against_jet_oracle(self):
        # independent route: finite differences of the matrix written on the jet
        pot = SN.potential
        f = pot.f
        fp = lambda u: pot.eval(u)[1]
        sp = sp_of(SN, 1.2)
        for x, y in ((0.4, 0.3), (2.2, -1.1)):
            j = SN.jet(x)
            I = float(PhaseAccumulator(SN, sp).phase(x))
            orc = LspJetOracle(f, fp, 1.2, float(j.epsilon), phase_dependence="x")
            ex = orc.Ex(float(j.u), float(j.u_x), float(j.u_xx), I, y)
            ey = orc.Ey(float(j.u), float(j.u_x), float(j.u_xx), I, y)
            assert np.max(np.abs(ex)) < 1e-8 and np.max(np.abs(ey)) < 1e-8
        assert np.max(x_lsp_fd_residual(SN, sp, np.array([0.4, 2.2]), np.array([0.3]))) < 1e-7
