import math

import numpy as np
import pytest
from scipy.integrate import quad

from solsurf.lax import SpectralPoint
from solsurf.potential import JetPoint, NamedSolution, NumericSolution, Potential
from solsurf.suites import q2_window
from solsurf.symmetry import (Characteristic, CharacteristicError, Q2Integral, TurningPointError,
                              compare_defect_pattern, determining_residual, lsp_symmetry_defect, monomial_form,
                              printed_defect_pattern, prolong_on_matrix)
from solsurf.wavefunction import PhaseAccumulator

from oracles import LspJetOracle, d1

DN = NamedSolution("dn", k=0.5)
CN_SQ = NamedSolution("cn", k=1 / math.sqrt(2))     # f = (1 - u^4) / 2
WP = NamedSolution("wp", g2=0.0, g3=1.0)


def q2_dn():
    base, xw = q2_window(DN, np.linspace(-8, 8, 200))
    return Characteristic.q2(DN, base=base), base, xw


class TestDetermining:
    @pytest.mark.parametrize("sol,xs", [(NamedSolution("sn", k=0.5), np.linspace(-8, 8, 200)),
                                        (CN_SQ, np.linspace(-8, 8, 200)), (DN, np.linspace(-8, 8, 200)),
                                        (WP, np.linspace(0.2, 3.0, 200))])
    def test_q1(self, sol, xs):
        assert np.max(determining_residual(Characteristic.q1(), sol.potential, sol, xs)) < 1e-8

    def test_q2_on_dn(self):
        Q, base, xw = q2_dn()
        assert xw is not None and xw[0] < base < xw[-1]
        assert np.max(determining_residual(Q, DN.potential, DN, xw)) < 1e-8

    def test_q3_on_cn_with_equal_constants(self):
        c1, c2, ell = monomial_form(CN_SQ.potential)
        assert (c1, c2, ell) == pytest.approx((0.5, -0.5, 4))
        Q = Characteristic.q3(CN_SQ.potential, gamma=1.0)
        assert np.max(determining_residual(Q, CN_SQ.potential, CN_SQ, np.linspace(-8, 8, 200))) < 1e-8

    def test_q3_on_equianharmonic_weierstrass(self):
        Q = Characteristic.q3(WP.potential)
        assert Q.params["gamma"] == 2.0 and Q.params["ell"] == 3
        assert np.max(determining_residual(Q, WP.potential, WP, np.linspace(0.2, 3.0, 200))) < 1e-8

    def test_q3_rejects_other_potentials_and_gamma(self):
        with pytest.raises(CharacteristicError):
            Characteristic.q3(NamedSolution("cn", k=0.5).potential)
        with pytest.raises(CharacteristicError):
            Characteristic.q3(CN_SQ.potential, gamma=2.0)

    def test_non_characteristic_is_detected(self):
        Q = Characteristic.custom(lambda j: j.u, lambda j: j.u_x, lambda j: j.u_xx, "u")
        xs = np.linspace(-3, 3, 50)
        assert np.max(determining_residual(Q, DN.potential, DN, xs)) > 1e-2

    def test_derivatives_match_finite_differences(self):
        Q2, base, xw = q2_dn()
        for Q, sol, xs in ((Characteristic.q1(), DN, np.linspace(-3, 3, 7)), (Q2, DN, xw[5:-5:20]),
                           (Characteristic.q3(CN_SQ.potential), CN_SQ, np.linspace(-3, 3, 7))):
            for x in xs:
                v = Q.values(sol, sol.jet(x))
                qx = d1(lambda t: Q.values(sol, sol.jet(t)).Q, x, 1e-3)
                assert abs(qx - v.Qx) < 1e-7 * max(1.0, abs(v.Qx))


class TestQ2Integral:
    def test_against_quadrature_in_u(self):
        Q, base, xw = q2_dn()
        integ = Q.params["integral"]
        pot = DN.potential
        for x in xw[::37]:
            u0, u1 = float(DN.u(base)), float(DN.u(x))
            ref = quad(lambda u: pot.f(u) ** -1.5, u0, u1, epsabs=1e-14, epsrel=1e-13)[0]
            assert abs(integ(x) - ref) < 1e-10 * max(1.0, abs(ref))
        assert integ(base) == 0.0

    def test_turning_point_rejected(self):
        # dn(0) = 1 is a root of f
        with pytest.raises(TurningPointError):
            Q2Integral(DN, base=0.0)
        _, base, xw = q2_dn()
        integ = Q2Integral(DN, base=base)
        with pytest.raises(TurningPointError):
            integ(np.array([xw[-1] + 0.5]))


class TestProlongation:
    def test_linearity(self):
        sp = SpectralPoint.make(CN_SQ.potential, 1.2)
        jet = CN_SQ.jet(np.linspace(-2, 2, 9))
        q1, q3 = Characteristic.q1(), Characteristic.q3(CN_SQ.potential)
        comb = Characteristic.combine(2.5, q1, -0.75, q3)
        for target in ("L", "M"):
            lhs = prolong_on_matrix(comb, target, CN_SQ.potential, sp, jet, sol=CN_SQ).coords
            rhs = (prolong_on_matrix(q1, target, CN_SQ.potential, sp, jet, sol=CN_SQ) * 2.5
                   + prolong_on_matrix(q3, target, CN_SQ.potential, sp, jet, sol=CN_SQ) * -0.75).coords
            assert np.max(np.abs(lhs - rhs)) < 1e-13

    def test_q1_prolongation_is_total_derivative(self):
        # for Q1 = u_x, pr v_Q(M) equals D_x M
        from solsurf.lax import LaxEntries
        sp = SpectralPoint.make(DN.potential, 1.2)
        jet = DN.jet(np.linspace(-2, 2, 9))
        got = prolong_on_matrix(Characteristic.q1(), "M", DN.potential, sp, jet, sol=DN).coords
        np.testing.assert_allclose(got, LaxEntries(DN.potential, sp, jet).DxM().coords, atol=1e-15)
        with pytest.raises(ValueError):
            prolong_on_matrix(Characteristic.q1(), "N", DN.potential, sp, jet, sol=DN)


def _oracle_defects(Q, sol, lam, x, y, dep):
    pot = sol.potential
    j = sol.jet(x)
    sp = SpectralPoint.make(pot, lam)
    I = float(PhaseAccumulator(sol, sp, mode="pv").phase(x))
    orc = LspJetOracle(pot.f, lambda u: pot.eval(u)[1], lam, float(j.epsilon), phase_dependence=dep)
    v = Q.values(sol, j)
    args = (float(j.u), float(j.u_x), float(j.u_xx), I, y, float(v.Q), float(v.Qx), float(v.Qxx))
    return orc.prolonged("x", *args), orc.prolonged("y", *args)


class TestLspDefect:
    @pytest.mark.parametrize("dep", ["u", "x"])
    def test_closed_reduction_matches_jet_oracle(self, dep):
        Q2, base, xw = q2_dn()
        for Q, sol, lam, x in ((Characteristic.q1(), DN, 1.2, 0.7), (Q2, DN, 1.2, float(xw[60])),
                               (Characteristic.q3(CN_SQ.potential), CN_SQ, 1.2, 0.9)):
            d = lsp_symmetry_defect(Q, sol, lam, np.array(x), np.array(0.4), phase_dependence=dep)
            ox, oy = _oracle_defects(Q, sol, lam, x, 0.4, dep)
            scale = max(1.0, np.max(np.abs(d.x_defect)))
            assert np.max(np.abs(d.x_defect - ox)) < 1e-6 * scale
            assert np.max(np.abs(d.y_defect - oy)) < 1e-6 * max(1.0, np.max(np.abs(d.y_defect)))

    @pytest.mark.parametrize("sol,lam,xs", [(DN, 1.2, np.linspace(-8, 8, 50)), (WP, 1.0, np.linspace(0.2, 3, 50)),
                                            (CN_SQ, 1.2, np.linspace(-8, 8, 50))])
    def test_q1_defect_vanishes(self, sol, lam, xs):
        X, Y = np.meshgrid(xs, np.linspace(-2, 2, 50), indexing="ij")
        for dep in ("u", "x"):
            d = lsp_symmetry_defect(Characteristic.q1(), sol, lam, X, Y, phase_dependence=dep)
            assert np.max(np.abs(d.x_defect)) < 1e-9 and np.max(np.abs(d.y_defect)) < 1e-9

    def test_zero_constant_term_gives_zero_defect(self):
        # f = u^4 admits Q3 with gamma = 1 and c1 = 0: u = 1 / (2 - x)
        pot = Potential.polynomial([0.0, 0.0, 0.0, 0.0, 1.0])
        sol = NumericSolution(pot, u0=0.5)
        Q = Characteristic.q3(pot)
        assert Q.params["c1"] == 0.0 and Q.params["gamma"] == 1.0
        xs = np.linspace(-1.0, 1.0, 21)
        assert np.max(determining_residual(Q, pot, sol, xs)) < 1e-8
        jet = sol.jet(xs)
        K = Q.values(sol, jet).Q * pot.eval(jet.u)[1] - 2 * jet.u_x * Q.values(sol, jet).Qx
        assert np.max(np.abs(K)) < 1e-9

    def test_non_characteristic_defect_is_nonzero(self):
        Q = Characteristic.custom(lambda j: j.u, lambda j: j.u_x, lambda j: j.u_xx, "u")
        d = lsp_symmetry_defect(Q, DN, 1.2, np.linspace(-3, 3, 10), np.zeros(10))
        assert np.max(np.abs(d.R)) > 1e-2


class TestPrintedPattern:
    """The displayed Q2/Q3 pattern: checked as printed; entries that disagree are reported."""

    def test_q3_y_defect_shape(self):
        Q = Characteristic.q3(CN_SQ.potential)
        X, Y = np.meshgrid(np.linspace(-3, 3, 20), np.linspace(-1, 1, 20), indexing="ij")
        d = lsp_symmetry_defect(Q, CN_SQ, 1.2, X, Y, phase_dependence="x")
        px, py = printed_defect_pattern(Q, CN_SQ, 1.2, X, Y)
        rep = compare_defect_pattern(d.y_defect, py)
        # lower-left entry vanishes; the printed lower-right entry does not
        assert rep["entry21_zero"]
        assert "(2,2)" in rep["mismatched_entries"]
        assert np.max(np.abs(d.y_defect[..., 1, 1])) < 1e-10

    def test_q2_x_defect_under_u_dependence_has_lower_left_entry(self):
        Q, base, xw = q2_dn()
        X, Y = np.meshgrid(xw[::10], np.linspace(-1, 1, 10), indexing="ij")
        d = lsp_symmetry_defect(Q, DN, 1.2, X, Y, phase_dependence="u")
        px, _ = printed_defect_pattern(Q, DN, 1.2, X, Y)
        rep = compare_defect_pattern(d.x_defect, px)
        assert not rep["entry21_zero"] and not rep["match"]

    def test_pattern_only_for_q2_q3(self):
        with pytest.raises(ValueError):
            printed_defect_pattern(Characteristic.q1(), DN, 1.2, 0.5, 0.0)

    def test_compare_detects_exact_match(self):
        a = np.zeros((3, 2, 2))
        a[..., 0, 0] = 1.0
        rep = compare_defect_pattern(a, a.copy())
        assert rep["match"] and rep["entry21_zero"] and rep["mismatched_entries"] == []
