"""Wave function of the linear spectral problem D_x Phi = L Phi, d_y Phi = M Phi.

Branch solutions

    phi_1(+-) = (+-sqrt(g) + u_x) / sqrt(w) * Psi(+-),   phi_2(+-) = sqrt(w) * Psi(+-),
    Psi(+-) = exp(+-sqrt(g) (y + theta(x) + c0)),   theta(x) = int_{x_ref}^x ds / (2 w(s)),

are combined with constants c1 = c2 = 1/2, c3 = -c4 = -1/(2 sqrt(g)) into a
unit-determinant Phi. Everything is computed in complex arithmetic and
realness is checked on output.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .elliptic import EllipticDomainError, carlson_rj, legendre_pi
from .lax import LaxEntries, SpectralPoint
from .potential import weierstrass_root_pair
from .sl2 import det2

# 16-point Gauss-Legendre rule on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
PANEL = 0.25
ZERO_SCAN_STEP = 0.01
REALNESS_TOL = 1e-10


class PoleCrossingError(ValueError):
    """u + lambda changes sign on the integration path (strict mode)."""


class BranchError(ValueError):
    """Real-mode evaluation requested where u + lambda <= 0."""


def _spectral(sol, sp):
    if isinstance(sp, SpectralPoint):
        return sp
    return SpectralPoint.make(sol.potential, sp)


def _jet(sol, x):
    return sol.jet(x, pole_radius=0.0)


class PhaseAccumulator:
    """Phase theta(x) = int_{x_ref}^x ds / (2(u(s) + lambda)) along one solution.

    ``mode="strict"`` refuses paths on which u + lambda changes sign;
    ``mode="pv"`` takes the Cauchy principal value through simple zeros of
    u + lambda by subtracting r / (s - z), r = 1 / (2 u_x(z)), and adding the
    logarithms back analytically. Instances cache zeros per interval and are
    meant to be used within a single evaluation context.
    """

    def __init__(self, sol, lam, x_ref=None, c0=0.0, mode="strict", panel=PANEL):
        if mode not in ("strict", "pv"):
            raise ValueError("mode must be 'strict' or 'pv'")
        self.sol = sol
        self.lam = float(lam.lam if isinstance(lam, SpectralPoint) else lam)
        self.x_ref = float(sol.x_ref if x_ref is None else x_ref)
        self.c0 = float(c0)
        self.mode = mode
        self.panel = float(panel)
        self._zero_cache = {}

    def _w(self, x):
        return np.asarray(_jet(self.sol, x).u) + self.lam

    def zeros(self, a, b):
        """Simple zeros of u + lambda on [a, b] with their residues r = 1/(2 u_x(z))."""
        key = (a, b)
        if key in self._zero_cache:
            return self._zero_cache[key]
        n = max(int(math.ceil((b - a) / ZERO_SCAN_STEP)), 1)
        xs = np.linspace(a, b, n + 1)
        poles = self.sol.pole_locations(a - 1.0, b + 1.0)
        if poles.size:  # keep samples off the poles
            near = np.min(np.abs(xs[:, None] - poles[None, :]), axis=1) < 1e-9
            xs[near] += 1e-7
        w = self._w(xs)
        out = []
        for i in range(n):
            if w[i] == 0.0:
                z = xs[i]
            elif w[i] * w[i + 1] < 0:
                z = brentq(lambda t: float(self._w(t)), xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            else:
                continue
            ux = float(_jet(self.sol, z).u_x)
            if abs(ux) < 1e-8:
                raise PoleCrossingError(f"u + lambda has a double zero near x = {z!r}")
            if not out or abs(z - out[-1][0]) > 1e-12:
                out.append((z, 0.5 / ux))
        self._zero_cache[key] = out
        return out

    def _smooth(self, s, zeros):
        v = 0.5 / self._w(s)
        for z, r in zeros:
            v = v - r / (s - z)
        return v

    def _interval_integrals(self, pts, zeros):
        """Integrals of the smooth integrand over consecutive breakpoints (composite GL16)."""
        res = np.zeros(len(pts) - 1)
        nodes, weights, owner = [], [], []
        for i in range(len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            if b <= a:
                continue
            m = max(int(math.ceil((b - a) / self.panel)), 1)
            edges = np.linspace(a, b, m + 1)
            half = 0.5 * np.diff(edges)
            mid = 0.5 * (edges[1:] + edges[:-1])
            nodes.append((mid[:, None] + half[:, None] * _GL_X[None, :]).ravel())
            weights.append((half[:, None] * _GL_W[None, :]).ravel())
            owner.append(np.full(m * len(_GL_X), i))
        if nodes:
            s = np.concatenate(nodes)
            wts = np.concatenate(weights)
            idx = np.concatenate(owner)
            vals = self._smooth(s, zeros) * wts
            np.add.at(res, idx, vals)
        return res

    def phase(self, x):
        """theta(x) (without c0); x may be an array of any shape."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if flat.size == 0:
            return x.copy()
        lo = min(float(flat.min()), self.x_ref)
        hi = max(float(flat.max()), self.x_ref)
        zeros = self.zeros(lo, hi) if hi > lo else []
        if zeros and self.mode == "strict":
            for z, _ in zeros:
                crossing = ((flat - z) * (self.x_ref - z)) <= 0
                if np.any(crossing):
                    raise PoleCrossingError(
                        f"u + lambda changes sign at x = {z:.12g} between x_ref = {self.x_ref} and x")
            # zeros outside every path: integrate the raw integrand
            zeros_used = []
        else:
            zeros_used = zeros
        poles = self.sol.pole_locations(lo, hi)
        pts = np.unique(np.concatenate([flat, [self.x_ref], poles, [z for z, _ in zeros_used]]))
        pieces = self._interval_integrals(pts, zeros_used)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        i_ref = int(np.searchsorted(pts, self.x_ref))
        cum = cum - cum[i_ref]
        theta = cum[np.searchsorted(pts, flat)]
        for z, r in zeros_used:
            with np.errstate(divide="ignore"):
                theta = theta + r * (np.log(np.abs(flat - z)) - math.log(abs(self.x_ref - z)))
        return theta.reshape(x.shape)

    def __call__(self, x):
        return self.phase(x)


def phase_integral(sol, sp, x, method="quadrature", mode="strict"):
    """int_{x_ref}^x ds / (2(u + lambda)) by quadrature or by the closed form."""
    if method == "quadrature":
        return PhaseAccumulator(sol, _spectral(sol, sp), mode=mode).phase(x)
    if method == "closed_form":
        res = closed_phase(sol, sp, x)
        if res.fallback:
            raise EllipticDomainError(f"closed form not admissible: {res.reason}")
        return res.value
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ closed forms


@dataclass
class ClosedPhase:
    """Closed-form phase with its separate terms, aligned so theta(x_ref) = 0."""

    value: object
    terms: dict = field(default_factory=dict)
    variant: str = "corrected"
    fallback: bool = False
    reason: str = ""


def _jacobi_terms(sol, sp, u, eps, variant):
    k1, k2 = sol.k1, sol.k2
    lam = sp.lam
    sg = sp.sqrt_g
    f = sol.potential.f(u)
    sqf = np.sqrt(np.asarray(f, dtype=complex))
    if variant == "printed":
        num = (k2 - k2 - 2 * k2 * lam ** 2) * u ** 2 + (k2 - k1) * lam ** 2 + 2 * k1
    else:
        num = (k2 - k1 - 2 * k2 * lam ** 2) * u ** 2 + (k2 - k1) * lam ** 2 + 2 * k1
    sk1 = cmath.sqrt(k1)
    m = -k2 / k1
    pi_val = legendre_pi(np.asarray(u, dtype=complex), 1.0 / lam ** 2, m)
    if variant == "exponent":
        # exponent form: Pi coefficient eps/(lambda sqrt(k1)) and factor B^(-+eps/4)
        pi_term = eps / (lam * sk1) * pi_val
        ratio = (2 * sg * sqf + num) / (2 * sg * sqf - num)
        log_term = -eps / 4.0 * np.log(ratio) / sg
    else:
        pi_term = eps / (2 * lam * sk1) * pi_val
        log_term = -eps / (4 * sg) * np.arctanh(num / (2 * sg * sqf))
    return {"Pi": pi_term, "artanh": log_term}


def _weierstrass_terms(sol, sp, u, eps, variant):
    lam = sp.lam
    if variant == "printed":
        a1, a2 = weierstrass_root_pair(sol.inv)
        uu = np.sqrt((np.asarray(u, dtype=complex) + a1) / (a1 - a2))
        alpha2 = (a1 - a2) / (lam - a1)
        m = (a1 - a2) / (2 * a1 + a2)
        val = -1.0 / (2 * (lam - a1) * (2 * a1 + a2)) * legendre_pi(uu, alpha2 + 0 * uu, m + 0 * uu)
        return {"Pi": val}
    e1, e2, e3 = sol.inv.roots
    uc = np.asarray(u, dtype=complex)
    p = uc + lam
    if np.any(p.real <= 0):
        raise EllipticDomainError("u + lambda <= 0: R_J needs its principal value")
    rj = carlson_rj(uc - e1, uc - e2, uc - e3, p)
    # u_x = eps sqrt(f); int dx/(2w) = eps int du/(2 w sqrt f) = -eps R_J/6 + C
    return {"R_J": -eps * np.asarray(rj) / 6.0}


def closed_phase(sol, sp, x, variant="corrected"):
    """Closed-form phase theta(x) - theta(x_ref) on the monotone branch of x_ref.

    Variants: ``corrected`` (validated form), ``printed`` (numerator or
    reduction as printed) and, for Jacobi, ``exponent`` (the
    exponentiated form of Psi). Points on another monotone branch, or with
    inadmissible elliptic-integral arguments, set ``fallback`` and return
    the quadrature phase instead.
    """
    sp = _spectral(sol, sp)
    x = np.asarray(x, dtype=float)
    kind = getattr(sol, "kind", None)
    if kind not in ("sn", "cn", "dn", "wp"):
        return ClosedPhase(phase_integral(sol, sp, x), variant=variant, fallback=True,
                           reason="no closed form for this model")
    jr = sol.jet(sol.x_ref)
    jx = _jet(sol, x)
    eps = float(np.sign(jr.u_x)) or 1.0
    # same monotone branch: no zero of u_x between x_ref and x
    reason = ""
    branch_ok = _same_branch(sol, x, float(jr.u_x))
    if not np.all(branch_ok):
        reason = "x not on the monotone branch of x_ref"
    try:
        if kind == "wp":
            t_x = _weierstrass_terms(sol, sp, jx.u, eps, variant)
            t_r = _weierstrass_terms(sol, sp, jr.u, eps, variant)
        else:
            if variant != "printed" and variant != "exponent" and variant != "corrected":
                raise ValueError(variant)
            if np.any(np.abs(jx.u) >= abs(sp.lam)):
                raise EllipticDomainError("Pi argument: integrand pole at t = lambda inside path")
            m = -sol.k2 / sol.k1
            if np.any(m * np.asarray(jx.u) ** 2 > 1):
                raise EllipticDomainError("Pi argument: k^2 u^2 > 1")
            t_x = _jacobi_terms(sol, sp, jx.u, eps, variant)
            t_r = _jacobi_terms(sol, sp, jr.u, eps, variant)
    except (EllipticDomainError, ZeroDivisionError, FloatingPointError) as exc:
        return ClosedPhase(phase_integral(sol, sp, x, mode="pv"), variant=variant, fallback=True,
                           reason=str(exc))
    terms = {k: np.asarray(t_x[k]) - np.asarray(t_r[k]) for k in t_x}
    total = sum(terms.values())
    if reason:
        q = phase_integral(sol, sp, x, mode="pv")
        total = np.where(branch_ok, total, q)
    return ClosedPhase(total, terms, variant=variant, fallback=bool(reason), reason=reason)


def _same_branch(sol, x, ux_ref):
    """True where u_x keeps the sign of u_x(x_ref) on the whole path from x_ref."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    lo, hi = min(flat.min(), sol.x_ref), max(flat.max(), sol.x_ref)
    n = max(int(math.ceil((hi - lo) / ZERO_SCAN_STEP)), 1)
    xs = np.linspace(lo, hi, n + 1)
    poles = sol.pole_locations(lo - 1, hi + 1)
    if poles.size:
        near = np.min(np.abs(xs[:, None] - poles[None, :]), axis=1) < 1e-9
        xs[near] += 1e-7
    ux = np.asarray(_jet(sol, xs).u_x)
    bad = ux * ux_ref <= 0
    if poles.size:  # u_x flips sign through a pole of p
        bad_x = np.concatenate([xs[bad], poles])
    else:
        bad_x = xs[bad]
    ok = np.ones(flat.shape, dtype=bool)
    for b in bad_x:
        ok &= ~(((flat - b) * (sol.x_ref - b)) <= 0)
    return ok.reshape(x.shape)


def compare_closed_phase(sol, sp, xs, variants=("corrected", "printed")):
    """Max deviation of each closed-form variant from the quadrature phase.

    Returns ``{variant: {"max_abs": ..., "terms": {...}, "fallback": bool}}``;
    the per-term entries give the max magnitude of each term so a mismatch
    can be attributed to the term that carries it.
    """
    sp = _spectral(sol, sp)
    ref = phase_integral(sol, sp, xs, mode="pv")
    out = {}
    for v in variants:
        res = closed_phase(sol, sp, xs, variant=v)
        val = np.asarray(res.value)
        dev = np.abs(val - ref)
        if dev.size > 1:
            scale = np.polyfit(ref.ravel(), np.real(val).ravel(), 1)[0] if np.ptp(ref) > 0 else np.nan
        else:
            scale = float(np.real(val) / ref) if ref != 0 else np.nan
        out[v] = {"max_abs": float(np.max(dev)), "scale_fit": float(np.real(scale)),
                  "terms": {k: float(np.max(np.abs(t))) for k, t in res.terms.items()},
                  "fallback": res.fallback}
    return out


# ---------------------------------------------------------- wave function


@dataclass
class PsiPair:
    psi_plus: object
    psi_minus: object


def psi_pair(sol, sp, x, y, c0=0.0, phase=None, mode="strict"):
    """Psi(+-) = exp(+-sqrt(g)(y + theta(x) + c0)); theta from ``phase`` if given."""
    sp = _spectral(sol, sp)
    if phase is None:
        phase = PhaseAccumulator(sol, sp, mode=mode).phase(x)
    arg = sp.sqrt_g * (np.asarray(y) + phase + c0)
    return PsiPair(np.exp(arg), np.exp(-arg))


def normalized_constants(sqrt_g):
    """c1 = c2 = 1/2, c3 = -c4 = -1/(2 sqrt(g))."""
    return 0.5, 0.5, -0.5 / sqrt_g, 0.5 / sqrt_g


def det_from_constants(c, sqrt_g, convention="corrected"):
    """det Phi for Phi_1j = c_a phi_1+ + c_b phi_1-.

    The determinant equals 2 sqrt(g)(c1 c4 - c2 c3); ``convention="printed"``
    returns the opposite sign combination 2 sqrt(g)(c2 c3 - c1 c4).
    """
    c1, c2, c3, c4 = c
    if convention == "printed":
        return 2 * sqrt_g * (c2 * c3 - c1 * c4)
    return 2 * sqrt_g * (c1 * c4 - c2 * c3)


@dataclass
class WaveFn:
    """Wave function samples: ``matrix`` has shape (..., 2, 2)."""

    matrix: np.ndarray
    constants: tuple
    phi1: tuple          # (phi_1+, phi_1-)
    phi2: tuple          # (phi_2+, phi_2-)
    psi: PsiPair
    jet: object
    sp: SpectralPoint
    y: object
    mode: str = "complex"
    potential: object = None

    @property
    def det(self):
        return det2(self.matrix)

    def inverse(self):
        m = self.matrix
        out = np.empty_like(m)
        out[..., 0, 0] = m[..., 1, 1]
        out[..., 1, 1] = m[..., 0, 0]
        out[..., 0, 1] = -m[..., 0, 1]
        out[..., 1, 0] = -m[..., 1, 0]
        return out / self.det[..., None, None]


def branch_functions(jet, sp, psi, sqrt_g_sign_plus=1.0):
    """phi_{1,2}(+-) in complex arithmetic.

    ``sqrt_g_sign_plus`` flips the sign of sqrt(g) inside phi_1+ only; it
    exists to inject a defect for sensitivity checks.
    """
    s = sp.sqrt_g
    w = np.asarray(jet.u) + sp.lam
    sw = np.sqrt(w.astype(complex))
    ux = np.asarray(jet.u_x)
    p1p = (sqrt_g_sign_plus * s + ux) / sw * psi.psi_plus
    p1m = (-s + ux) / sw * psi.psi_minus
    p2p = sw * psi.psi_plus
    p2m = sw * psi.psi_minus
    return (p1p, p1m), (p2p, p2m)


def assemble(phi1, phi2, c):
    c1, c2, c3, c4 = c
    shape = np.broadcast(phi1[0], phi2[0]).shape
    m = np.empty(shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c1 * phi1[0] + c2 * phi1[1]
    m[..., 0, 1] = c3 * phi1[0] + c4 * phi1[1]
    m[..., 1, 0] = c1 * phi2[0] + c2 * phi2[1]
    m[..., 1, 1] = c3 * phi2[0] + c4 * phi2[1]
    return m


def wave_function(sol, sp, x, y, mode="complex", c0=0.0, phase=None, phase_mode="pv",
                  jet=None, defect=None):
    """Normalized wave function at (x, y) (broadcast).

    ``mode="real"`` requires u + lambda > 0 and returns real entries after
    checking the imaginary parts; ``mode="complex"`` returns the complex
    matrix (for u + lambda < 0 it equals i diag(-1, 1) times a real matrix).
    """
    sp = _spectral(sol, sp)
    if abs(sp.g) < 1e-14:
        raise ValueError("g(lambda) = 0: the normalized wave function is singular")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if jet is None:
        jet = _jet(sol, x)
    if phase is None:
        phase = PhaseAccumulator(sol, sp, mode=phase_mode).phase(x)
    psi = psi_pair(sol, sp, x, y, c0=c0, phase=phase)
    sign = -1.0 if defect == "flip_sqrt_g_plus" else 1.0
    phi1, phi2 = branch_functions(jet, sp, psi, sign)
    c = normalized_constants(sp.sqrt_g)
    m = assemble(phi1, phi2, c)
    if mode == "real":
        w = np.asarray(jet.u) + sp.lam
        if np.any(w <= 0):
            raise BranchError("u + lambda <= 0 at some sample; use mode='complex'")
        scale = np.maximum(1.0, np.abs(m))
        im = np.abs(m.imag) / scale
        if np.nanmax(im) > REALNESS_TOL:
            raise ValueError(f"wave function not real: relative imaginary part {np.nanmax(im):.3g}")
        m = m.real.copy()
    return WaveFn(m, c, phi1, phi2, psi, jet, sp, y, mode, sol.potential)


def lsp_branch_residuals(wf: WaveFn, with_scale=False):
    """The four scalar LSP equations for each branch, evaluated analytically.

    Returns an array of shape (4, 2, ...) holding

        D_x phi_1 - (l/2) phi_2,   D_x phi_2 - phi_1/2,
        d_y phi_1 - u_x phi_1 + q phi_2,   d_y phi_2 + u_x phi_2 - w phi_1,

    with l = f'/w - (f - g)/w^2 and q = (f - g)/w. D_x uses the chain rule
    with u_xx from the jet and D_x Psi = +-sqrt(g)/(2w) Psi. With
    ``with_scale`` a second array gives, per equation, the largest magnitude
    among its terms (the size against which rounding should be judged).
    """
    sp, jet = wf.sp, wf.jet
    ent = LaxEntries(wf.potential, sp, jet, guard=0)
    s = sp.sqrt_g
    w = ent.w
    sw = np.sqrt(w.astype(complex))
    ux = np.asarray(jet.u_x)
    uxx = np.asarray(jet.u_xx)
    out, scales = [], []
    for idx, sigma, psi in ((0, 1.0, wf.psi.psi_plus), (1, -1.0, wf.psi.psi_minus)):
        p1, p2 = wf.phi1[idx], wf.phi2[idx]
        ss = sigma * s
        # coefficient of Psi in phi_1 times sqrt(w), read back from phi_1 itself
        a = p1 * sw / psi
        dpsi = ss / (2 * w) * psi
        t1 = (uxx / sw * psi, -0.5 * a * ux / (w * sw) * psi, a / sw * dpsi, -0.5 * ent.ell * p2)
        t2 = (0.5 * ux / sw * psi, sw * dpsi, -0.5 * p1)
        t3 = (ss * p1, -ux * p1, ent.q * p2)
        t4 = (ss * p2, ux * p2, -w * p1)
        eqs = (t1, t2, t3, t4)
        out.append(np.stack([sum(t) for t in eqs]))
        scales.append(np.stack([np.max(np.abs(np.stack(t)), axis=0) for t in eqs]))
    res = np.stack(out, axis=1)
    if with_scale:
        return res, np.maximum(1.0, np.stack(scales, axis=1))
    return res


@dataclass
class LspReport:
    max_de: tuple           # max |residual| / max(1, term size) for (de1..de4), both branches
    max_det_dev: float
    max_de_abs: tuple = ()
    max_fd_x: float = float("nan")

    def passed(self, tol=1e-9, det_tol=1e-10, fd_tol=1e-7):
        ok = max(self.max_de) < tol and self.max_det_dev < det_tol
        if not math.isnan(self.max_fd_x):
            ok = ok and self.max_fd_x < fd_tol
        return ok


def lsp_residual(sol, sp, xs, ys, defect=None, fd=True, h=1e-5):
    """LSP residual report on the grid xs x ys (1-D arrays)."""
    sp = _spectral(sol, sp)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    wf = wave_function(sol, sp, X, Y, defect=defect)
    r, scale = lsp_branch_residuals(wf, with_scale=True)
    max_de = tuple(float(np.max(np.abs(r[i]) / scale[i])) for i in range(4))
    max_abs = tuple(float(np.max(np.abs(r[i]))) for i in range(4))
    det_dev = float(np.max(np.abs(wf.det - 1.0)))
    rep = LspReport(max_de, det_dev, max_abs)
    if fd:
        rep.max_fd_x = float(np.max(x_lsp_fd_residual(sol, sp, xs, ys, h=h)))
    return rep


def x_lsp_fd_residual(sol, sp, xs, ys, h=1e-5):
    """|D_x Phi - L Phi| with D_x Phi from central differences plus one Richardson step.

    Returned relative to max(1, |Phi|) per sample (max-entry norms).
    """
    sp = _spectral(sol, sp)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    offs = np.array([-2 * h, -h, 0.0, h, 2 * h])
    xx = (xs[:, None] + offs[None, :]).ravel()
    acc = PhaseAccumulator(sol, sp, mode="pv")
    th = acc.phase(xx).reshape(len(xs), 5)
    X = (xs[:, None] + offs[None, :])[:, :, None] * np.ones(len(ys))[None, None, :]
    TH = th[:, :, None] * np.ones(len(ys))[None, None, :]
    Y = np.broadcast_to(ys[None, None, :], X.shape)
    wf = wave_function(sol, sp, X, Y, phase=TH)
    m = wf.matrix
    d1 = (m[:, 3] - m[:, 1]) / (2 * h)
    d2 = (m[:, 4] - m[:, 0]) / (4 * h)
    dphi = (4 * d1 - d2) / 3.0
    jet0 = _jet(sol, X[:, 2])
    L = LaxEntries(sol.potential, sp, jet0, guard=0).L().matrix()
    res = dphi - L @ m[:, 2]
    scale = np.maximum(1.0, np.max(np.abs(m[:, 2]), axis=(-2, -1)))
    return np.max(np.abs(res), axis=(-2, -1)) / scale
