"""Lax pair L, M for u_xx = f'(u)/2 and its jet derivatives.

With w = u + lambda and g = f(-lambda):

    M = [[u_x, -(f - g)/w], [w, -u_x]],
    L = 1/2 [[0, f'/w - (f - g)/w^2], [1, 0]].

Both off-diagonal rational entries are divided differences of f
(f[u, -lambda] and f[u, u, -lambda]) and are evaluated as such, so they are
exact polynomials in u and lambda.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .potential import JetPoint, Potential
from .sl2 import Sl2Element, bracket, bracket_matrix

POLE_GUARD = 1e-9


class LaxPoleError(ValueError):
    """u + lambda vanishes (to within the guard) at some sample."""

    def __init__(self, x, lam, distance):
        super().__init__(f"|u + lambda| = {distance:.3g} below pole guard at x = {x!r}, lambda = {lam!r}")
        self.x = x
        self.lam = lam
        self.distance = distance


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter with its cached discriminant g and complex sqrt(g)."""

    lam: float
    g: float
    sqrt_g: complex

    @classmethod
    def make(cls, pot: Potential, lam):
        lam = float(lam)
        g = float(pot.discriminate(lam))
        return cls(lam, g, cmath.sqrt(g))


def spectral_point(pot, lam):
    return SpectralPoint.make(pot, lam)


def _lam(sp):
    return sp.lam if isinstance(sp, SpectralPoint) else float(sp)


def check_pole(jet: JetPoint, lam, guard=POLE_GUARD):
    w = np.asarray(jet.u) + lam
    d = np.abs(w)
    if np.any(d < guard):
        i = np.unravel_index(np.argmin(d), d.shape) if d.ndim else ()
        x = np.asarray(jet.x)[i] if np.ndim(jet.x) else jet.x
        raise LaxPoleError(float(x), lam, float(d[i]))


class LaxEntries:
    """Scalar building blocks of L and M (and their u, lambda derivatives) on jets."""

    def __init__(self, pot: Potential, sp, jet: JetPoint, guard=POLE_GUARD):
        lam = _lam(sp)
        if guard:
            check_pole(jet, lam, guard)
        self.pot = pot
        self.lam = lam
        self.jet = jet
        u = np.asarray(jet.u)
        v = -lam
        self.w = u + lam
        self.q = pot.dd(u, 1, v, 1)           # (f - g)/w
        self.ell = pot.dd(u, 2, v, 1)         # f'/w - (f - g)/w^2
        self.ell_u = 2.0 * pot.dd(u, 3, v, 1)
        self.ell_uu = 6.0 * pot.dd(u, 4, v, 1)
        self.q_lam = -pot.dd(u, 1, v, 2)
        self.ell_lam = -pot.dd(u, 2, v, 2)

    # matrices in e-basis coordinates (e1 = lower-left, e2 = upper-right)
    def M(self):
        return Sl2Element.from_components(self.w, -self.q, self.jet.u_x)

    def L(self):
        return Sl2Element.from_components(0.5 * np.ones_like(self.w), 0.5 * self.ell, 0.0 * self.w)

    def dM_du(self):
        return Sl2Element.from_components(np.ones_like(self.w), -self.ell, 0.0 * self.w)

    def dM_dux(self):
        z = 0.0 * self.w
        return Sl2Element.from_components(z, z, z + 1.0)

    def dL_du(self):
        z = 0.0 * self.w
        return Sl2Element.from_components(z, 0.5 * self.ell_u, z)

    def dL_dux(self):
        return Sl2Element.zeros(np.shape(self.w))

    def dM_dlam(self):
        return Sl2Element.from_components(np.ones_like(self.w), -self.q_lam, 0.0 * self.w)

    def dL_dlam(self):
        z = 0.0 * self.w
        return Sl2Element.from_components(z, 0.5 * self.ell_lam, z)

    def DxM(self):
        """Total x-derivative by the chain rule through (u, u_x, u_xx)."""
        ux = np.asarray(self.jet.u_x)
        return self.dM_du() * ux + self.dM_dux() * np.asarray(self.jet.u_xx)

    def DxL(self):
        return self.dL_du() * np.asarray(self.jet.u_x)

    def Dx2L(self):
        ux = np.asarray(self.jet.u_x)
        uxx = np.asarray(self.jet.u_xx)
        z = 0.0 * self.w
        return Sl2Element.from_components(z, 0.5 * (self.ell_uu * ux * ux + self.ell_u * uxx), z)

    def Dx2M(self):
        """Second total derivative; u_xxx is taken from the ODE, u_xxx = f''(u) u_x / 2."""
        ux = np.asarray(self.jet.u_x)
        uxx = np.asarray(self.jet.u_xx)
        fpp = self.pot.eval(self.jet.u)[2]
        uxxx = 0.5 * fpp * ux
        return Sl2Element.from_components(uxx, -(self.ell_u * ux * ux + self.ell * uxx), uxxx)


def build_L(pot, sp, jet, guard=POLE_GUARD):
    return LaxEntries(pot, sp, jet, guard).L()


def build_M(pot, sp, jet, guard=POLE_GUARD):
    return LaxEntries(pot, sp, jet, guard).M()


def lax_defect(pot, sp, jet, guard=POLE_GUARD, use_matrix_bracket=False):
    """D_x M + [M, L] as an sl(2) element."""
    ent = LaxEntries(pot, sp, jet, guard)
    M, L = ent.M(), ent.L()
    br = bracket_matrix(M, L) if use_matrix_bracket else bracket(M, L)
    return ent.DxM() + br


def lax_residual(pot, sp, sol, x, guard=POLE_GUARD):
    """Frobenius norm of D_x M + [M, L] on the solution jets at x."""
    jet = sol.jet(x)
    d = lax_defect(pot, sp, jet, guard)
    return np.sqrt(np.sum(np.abs(d.matrix()) ** 2, axis=(-2, -1)))


def lax_stats(pot, sp, sol, xs):
    """(max, mean, argmax x) of the Lax residual over the grid xs."""
    r = lax_residual(pot, sp, sol, xs)
    i = int(np.argmax(r))
    return float(r[i]), float(np.mean(r)), float(np.asarray(xs)[i])
