"""Generalized-symmetry characteristics Q and their action on the Lax pair and LSP.

A characteristic is evaluated on solution jets as the triple (Q, D_x Q, D_x^2 Q).
The determining equation is D_x^2 Q = f''(u) Q / 2. Three families are
provided: Q1 = u_x (all f), Q2 = u_x * int f^(-3/2) du (path integral along
the solution), and Q3 = x u_x + gamma u (only for f = c1 + c2 u^l with
l = 2 + 2/gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lax import LaxEntries, SpectralPoint
from .sl2 import Sl2Element

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
TURNING_MARGIN = 0.05


class CharacteristicError(ValueError):
    """Characteristic not available for this potential."""


class TurningPointError(ValueError):
    """Q2 path comes within the margin of a turning point (f(u) = 0)."""


def _uxxx(pot, jet):
    """Third derivative on solutions: u_xxx = f''(u) u_x / 2."""
    return 0.5 * pot.eval(jet.u)[2] * np.asarray(jet.u_x)


@dataclass
class QValues:
    Q: np.ndarray
    Qx: np.ndarray
    Qxx: np.ndarray


class Characteristic:
    """Characteristic Q of an evolutionary vector field Q d/du.

    Use the constructors :meth:`q1`, :meth:`q2`, :meth:`q3`, :meth:`custom`
    and :meth:`combine`. ``values(sol, jet)`` returns :class:`QValues`.
    """

    def __init__(self, kind, evaluator: Callable, params=None):
        self.kind = kind
        self._eval = evaluator
        self.params = params or {}

    def values(self, sol, jet):
        return self._eval(sol, jet)

    def __repr__(self):
        return f"Characteristic({self.kind}, {self.params})"

    # constructors
    @classmethod
    def q1(cls):
        def ev(sol, jet):
            pot = sol.potential
            return QValues(np.asarray(jet.u_x), np.asarray(jet.u_xx), _uxxx(pot, jet))
        return cls("Q1", ev)

    @classmethod
    def q2(cls, sol, base=None, margin=TURNING_MARGIN):
        """Q2 with J(x) = int_base^x f(u)^(-3/2) u_x ds along ``sol``."""
        integ = Q2Integral(sol, base=base, margin=margin)

        def ev(s, jet):
            pot = s.potential
            J = integ(np.asarray(jet.x))
            ux = np.asarray(jet.u_x)
            uxx = np.asarray(jet.u_xx)
            f, fp, _ = pot.eval(jet.u)
            fm32 = f ** -1.5
            Q = ux * J
            # D_x Q = u_xx J + u_x^2 f^(-3/2)
            Qx = uxx * J + ux * ux * fm32
            # D_x of the line above, with D_x J = f^(-3/2) u_x
            Qxx = (_uxxx(pot, jet) * J + uxx * ux * fm32 + 2.0 * ux * uxx * fm32
                   - 1.5 * ux ** 3 * f ** -2.5 * fp)
            return QValues(Q, Qx, Qxx)
        return cls("Q2", ev, {"base": integ.base, "margin": margin, "integral": integ})

    @classmethod
    def q3(cls, pot, gamma=None, atol=1e-12):
        """Q3 = x u_x + gamma u; requires f = c1 + c2 u^l, l = 2(1 + 1/gamma)."""
        c1, c2, ell = monomial_form(pot, atol)
        g_req = 2.0 / (ell - 2.0)
        if gamma is None:
            gamma = g_req
        if abs(gamma - g_req) > 1e-12 * max(1.0, abs(g_req)):
            raise CharacteristicError(
                f"Q3 needs gamma = 2/(l - 2) = {g_req!r} for l = {ell}, got {gamma!r}")

        def ev(sol, jet):
            x = np.asarray(jet.x)
            ux, uxx = np.asarray(jet.u_x), np.asarray(jet.u_xx)
            Q = x * ux + gamma * np.asarray(jet.u)
            Qx = (1.0 + gamma) * ux + x * uxx
            Qxx = (2.0 + gamma) * uxx + x * _uxxx(sol.potential, jet)
            return QValues(Q, Qx, Qxx)
        return cls("Q3", ev, {"gamma": gamma, "c1": c1, "c2": c2, "ell": ell})

    @classmethod
    def custom(cls, q, qx, qxx, name="custom"):
        """Characteristic from three callables of the jet."""
        def ev(sol, jet):
            return QValues(np.asarray(q(jet)), np.asarray(qx(jet)), np.asarray(qxx(jet)))
        return cls(name, ev)

    @classmethod
    def combine(cls, a, qa, b, qb):
        """a*Qa + b*Qb."""
        def ev(sol, jet):
            va, vb = qa.values(sol, jet), qb.values(sol, jet)
            return QValues(a * va.Q + b * vb.Q, a * va.Qx + b * vb.Qx, a * va.Qxx + b * vb.Qxx)
        return cls(f"{a}*{qa.kind}+{b}*{qb.kind}", ev)


def monomial_form(pot, atol=1e-12):
    """(c1, c2, l) with f = c1 + c2 u^l, or CharacteristicError."""
    c = pot.coeffs
    nz = [i for i, v in enumerate(c) if i > 0 and abs(v) > atol]
    if len(nz) != 1 or nz[0] == 2:
        raise CharacteristicError("f is not of the form c1 + c2 u^l with l != 2")
    ell = nz[0]
    return c[0], c[ell], ell


class Q2Integral:
    """J(x) = int_base^x f(u(s))^(-3/2) u_x(s) ds by composite Gauss-Legendre.

    Points whose path passes within ``margin`` (in u) of a real root of f
    raise :class:`TurningPointError`. The table of node values is built per
    call; nothing is mutated after construction.
    """

    def __init__(self, sol, base=None, margin=TURNING_MARGIN, panel=0.05):
        self.sol = sol
        self.pot = sol.potential
        self.margin = float(margin)
        self.panel = float(panel)
        self.base = float(sol.x_ref if base is None else base)
        roots = np.roots(self.pot.coeffs[::-1])
        self.turning = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
        self._check_path(np.array([self.base]))

    def _near_turning(self, u):
        if self.turning.size == 0:
            return np.zeros(np.shape(u), dtype=bool)
        d = np.min(np.abs(np.asarray(u)[..., None] - self.turning), axis=-1)
        return d < self.margin

    def _check_path(self, xs):
        lo, hi = min(xs.min(), self.base), max(xs.max(), self.base)
        n = max(int(math.ceil((hi - lo) / 0.005)), 1)
        grid = np.linspace(lo, hi, n + 1)
        u = self.sol.jet(grid).u
        bad = self._near_turning(u)
        if np.any(bad):
            xb = grid[bad]
            for x in xs:
                on_path = (xb - x) * (xb - self.base) <= 0
                if np.any(on_path):
                    raise TurningPointError(
                        f"Q2 path from {self.base} to {x} comes within {self.margin} of a turning point "
                        f"(near x = {xb[on_path][0]:.6g})")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if flat.size == 0:
            return x.copy()
        self._check_path(flat)
        pts = np.unique(np.concatenate([flat, [self.base]]))
        res = np.zeros(len(pts) - 1)
        for i in range(len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            m = max(int(math.ceil((b - a) / self.panel)), 1)
            edges = np.linspace(a, b, m + 1)
            half = 0.5 * np.diff(edges)
            mid = 0.5 * (edges[1:] + edges[:-1])
            s = (mid[:, None] + half[:, None] * _GL_X).ravel()
            wts = (half[:, None] * _GL_W).ravel()
            jet = self.sol.jet(s)
            res[i] = np.sum(self.pot.f(jet.u) ** -1.5 * np.asarray(jet.u_x) * wts)
        cum = np.concatenate([[0.0], np.cumsum(res)])
        cum -= cum[int(np.searchsorted(pts, self.base))]
        return cum[np.searchsorted(pts, flat)].reshape(x.shape)

    def admissible_window(self, lo, hi, n=2001):
        """Largest interval around the base inside [lo, hi] avoiding the turning margin."""
        grid = np.linspace(lo, hi, n)
        ok = ~self._near_turning(self.sol.jet(grid).u)
        i = int(np.argmin(np.abs(grid - self.base)))
        if not ok[i]:
            return None
        a = i
        while a > 0 and ok[a - 1]:
            a -= 1
        b = i
        while b < n - 1 and ok[b + 1]:
            b += 1
        return grid[a], grid[b]


def q2_integral(pot, sol, x, base=None, margin=TURNING_MARGIN):
    """int f^(-3/2) du along the solution from ``base`` (default x_ref) to x."""
    return Q2Integral(sol, base=base, margin=margin)(x)


def determining_residual(Q: Characteristic, pot, sol, x):
    """|D_x^2 Q - f''(u) Q / 2| on the solution jets at x."""
    jet = sol.jet(x)
    v = Q.values(sol, jet)
    fpp = pot.eval(jet.u)[2]
    return np.abs(v.Qxx - 0.5 * fpp * v.Q)


def prolong_on_matrix(Q: Characteristic, target, pot, sp, jet, sol=None, values=None):
    """pr v_Q(T) = dT/du * Q + dT/du_x * D_x Q for T = L or M."""
    ent = LaxEntries(pot, sp, jet)
    if values is None:
        values = Q.values(sol, jet)
    if target in ("L", "l"):
        return ent.dL_du() * values.Q + ent.dL_dux() * values.Qx
    if target in ("M", "m"):
        return ent.dM_du() * values.Q + ent.dM_dux() * values.Qx
    raise ValueError("target must be 'L' or 'M'")


# ----------------------------------------------------------- LSP defects


@dataclass
class DefectPair:
    """pr v_Q applied to the x- and y-equations of the LSP, as 2x2 matrices."""

    x_defect: np.ndarray
    y_defect: np.ndarray
    K: np.ndarray
    R: np.ndarray


def lsp_symmetry_defect(Q: Characteristic, sol, sp, x, y, wf=None, phase_dependence="u"):
    """pr v_Q (D_x Phi - L Phi) and pr v_Q (d_y Phi - M Phi) on the normalized Phi.

    With ``phase_dependence="u"`` Phi is a function of (u, u_x, y) whose
    phase is written as int eps du / (2 w sqrt(f)), so v_Q also acts on the
    phase. With ``"x"`` the phase is a fixed function of x that v_Q does not
    touch. On solutions the branch terms reduce, with K = Q f' - 2 u_x D_xQ,
    R = D_x^2 Q - f'' Q / 2 and s = +-sqrt(g), to (first row, second row):

        y-equation, both cases:  K / sqrt(w) Psi,  0
        x-equation, "u":  (K (2 u_x^2 - g - s u_x)/4 + w u_x^2 R) / (u_x^2 w^(3/2)) Psi,
                          -s K / (4 u_x^2 sqrt(w)) Psi
        x-equation, "x":  (K / 2 + w R) / w^(3/2) Psi,  0

    Columns combine the branches with the normalization constants.
    """
    if phase_dependence not in ("u", "x"):
        raise ValueError("phase_dependence must be 'u' or 'x'")
    from .wavefunction import normalized_constants, wave_function

    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if wf is None:
        wf = wave_function(sol, sp, x, y)
    jet = wf.jet
    v = Q.values(sol, jet)
    pot = sol.potential
    f, fp, fpp = pot.eval(jet.u)
    ux = np.asarray(jet.u_x)
    w = (np.asarray(jet.u) + sp.lam).astype(complex)
    sw = np.sqrt(w)
    K = v.Q * fp - 2.0 * ux * v.Qx
    R = v.Qxx - 0.5 * fpp * v.Q
    g = sp.g
    c = normalized_constants(sp.sqrt_g)
    xd = np.zeros(np.shape(K) + (2, 2), dtype=complex)
    yd = np.zeros_like(xd)
    for sigma, psi, (cc_col1, cc_col2) in ((1.0, wf.psi.psi_plus, (c[0], c[2])),
                                           (-1.0, wf.psi.psi_minus, (c[1], c[3]))):
        s = sigma * sp.sqrt_g
        y_top = K / sw * psi
        if phase_dependence == "u":
            x_top = (K * (2 * ux * ux - g - s * ux) / 4.0 + w * ux * ux * R) / (ux * ux * w * sw) * psi
            x_bot = -s * K / (4.0 * ux * ux * sw) * psi
        else:
            x_top = (0.5 * K + w * R) / (w * sw) * psi
            x_bot = 0.0 * psi
        yd[..., 0, 0] += cc_col1 * y_top
        yd[..., 0, 1] += cc_col2 * y_top
        xd[..., 0, 0] += cc_col1 * x_top
        xd[..., 0, 1] += cc_col2 * x_top
        xd[..., 1, 0] += cc_col1 * x_bot
        xd[..., 1, 1] += cc_col2 * x_bot
    return DefectPair(xd, yd, K, R)


def printed_defect_pattern(Q: Characteristic, sol, sp, x, y, wf=None):
    """The defect matrices in the closed form displayed for Q2 and Q3.

    Both equations share the matrix [[-(P+ + P-), (P+ - P-)/sqrt(g)], [0, P+ + P-]]
    with prefactors u_x/(sqrt(w) sqrt(f)) (y) and u_x/(2 w^(3/2) sqrt(f)) (x)
    for Q2, and c1(1+gamma)/sqrt(w), c1(1+gamma)/(2 w^(3/2)) for Q3.
    Returns (x_pattern, y_pattern).
    """
    from .wavefunction import wave_function

    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    if wf is None:
        wf = wave_function(sol, sp, x, y)
    jet = wf.jet
    p, m = wf.psi.psi_plus, wf.psi.psi_minus
    w = (np.asarray(jet.u) + sp.lam).astype(complex)
    sw = np.sqrt(w)
    base = np.zeros(np.shape(p) + (2, 2), dtype=complex)
    base[..., 0, 0] = -(p + m)
    base[..., 0, 1] = (p - m) / sp.sqrt_g
    base[..., 1, 1] = p + m
    if Q.kind == "Q2":
        f = sol.potential.f(jet.u)
        pre_y = np.asarray(jet.u_x) / (sw * np.sqrt(f))
        pre_x = np.asarray(jet.u_x) / (2 * w * sw * np.sqrt(f))
    elif Q.kind == "Q3":
        c1, gamma = Q.params["c1"], Q.params["gamma"]
        pre_y = c1 * (1 + gamma) / sw
        pre_x = c1 * (1 + gamma) / (2 * w * sw)
    else:
        raise ValueError("printed pattern exists only for Q2 and Q3")
    return pre_x[..., None, None] * base, pre_y[..., None, None] * base


def compare_defect_pattern(computed, printed, rel_tol=1e-8, zero_tol=1e-10):
    """Entry-wise comparison of a computed defect matrix grid with a printed pattern.

    Returns a dict with the max relative deviation per entry (relative to the
    largest printed magnitude), the max |(2,1)| entry, and pass flags.
    """
    scale = max(np.max(np.abs(printed)), np.max(np.abs(computed)), 1e-300)
    dev = np.abs(computed - printed) / scale
    per_entry = {f"({i + 1},{j + 1})": float(np.max(dev[..., i, j])) for i in range(2) for j in range(2)}
    e21 = float(np.max(np.abs(computed[..., 1, 0])))
    return {
        "per_entry": per_entry,
        "max_rel": float(np.max(dev)),
        "entry21": e21,
        "match": bool(np.max(dev) < rel_tol),
        "entry21_zero": bool(e21 < zero_tol),
        "mismatched_entries": [k for k, d in per_entry.items() if d >= rel_tol],
    }
