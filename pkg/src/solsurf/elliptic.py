"""Elliptic special functions.

Carlson's symmetric integrals R_F, R_J (real and complex arguments), the
Legendre integral of the third kind built on them, Jacobi's sn/cn/dn by the
descending Landen (AGM) transformation, and the Weierstrass p-function by a
Laurent series near the origin followed by repeated duplication.

All functions accept scalars or numpy arrays and broadcast their arguments.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

# Relative accuracy targeted by the Carlson duplication loops.
_CARLSON_RTOL = 1e-16
_MAX_DUPLICATIONS = 100

#: Default half-width of the excluded window around real lattice points of p.
POLE_RADIUS = 1e-3
#: Laurent series radius in units of 1/rho, rho = max(|g2|^(1/4), |g3|^(1/6)).
LAURENT_RADIUS = 0.9


class EllipticDomainError(ValueError):
    """Arguments outside the domain where an integral is defined."""


class PoleError(ValueError):
    """Evaluation requested too close to a pole."""

    def __init__(self, message, distance=None, location=None):
        super().__init__(message)
        self.distance = distance
        self.location = location


def _prepare(*args):
    arrs = np.broadcast_arrays(*[np.asarray(a) for a in args])
    is_complex = any(np.iscomplexobj(a) for a in arrs)
    dtype = complex if is_complex else float
    return [a.astype(dtype, copy=True) for a in arrs], is_complex


def _out(v):
    return v[()] if isinstance(v, np.ndarray) and v.ndim == 0 else v


def carlson_rf(x, y, z):
    """Carlson's R_F(x, y, z) = 1/2 int_0^inf dt / sqrt((t+x)(t+y)(t+z)).

    Real arguments must be non-negative with at most one zero. Complex
    arguments are accepted off the closed negative real axis (principal
    square roots); conjugate pairs give real results.
    """
    (x, y, z), is_complex = _prepare(x, y, z)
    if not is_complex and (np.any(x < 0) or np.any(y < 0) or np.any(z < 0)):
        raise EllipticDomainError("carlson_rf: negative argument")
    zeros = (x == 0).astype(int) + (y == 0).astype(int) + (z == 0).astype(int)
    if np.any(zeros > 1):
        raise EllipticDomainError("carlson_rf diverges: two or more zero arguments")

    a0 = (x + y + z) / 3.0
    q = (3.0 * _CARLSON_RTOL) ** (-1.0 / 6.0) * np.maximum(
        np.maximum(np.abs(a0 - x), np.abs(a0 - y)), np.abs(a0 - z))
    xm, ym, zm, am = x, y, z, a0.copy()
    fac = 1.0
    for _ in range(_MAX_DUPLICATIONS):
        if np.all(fac * q < np.abs(am)):
            break
        sx, sy, sz = np.sqrt(xm), np.sqrt(ym), np.sqrt(zm)
        lam = sx * sy + sx * sz + sy * sz
        xm, ym, zm = (xm + lam) / 4.0, (ym + lam) / 4.0, (zm + lam) / 4.0
        am = (am + lam) / 4.0
        fac /= 4.0
    X = (a0 - x) * fac / am
    Y = (a0 - y) * fac / am
    Z = -(X + Y)
    e2 = X * Y - Z * Z
    e3 = X * Y * Z
    res = (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / np.sqrt(am)
    return _out(res)


def carlson_rc(x, y):
    """Degenerate case R_C(x, y) = R_F(x, y, y)."""
    return carlson_rf(x, y, y)


def carlson_rj(x, y, z, p):
    """Carlson's R_J(x, y, z, p) = 3/2 int_0^inf dt / ((t+p) sqrt((t+x)(t+y)(t+z))).

    For real arguments p must be strictly positive (principal values are not
    supported). Complex arguments follow the same duplication iteration.
    """
    (x, y, z, p), is_complex = _prepare(x, y, z, p)
    if not is_complex:
        if np.any(x < 0) or np.any(y < 0) or np.any(z < 0):
            raise EllipticDomainError("carlson_rj: negative argument")
        if np.any(p <= 0):
            if np.any(p == 0):
                raise EllipticDomainError("carlson_rj: pole at p = 0")
            raise EllipticDomainError("carlson_rj: p < 0 (principal value) not supported")
    elif np.any(p == 0):
        raise EllipticDomainError("carlson_rj: pole at p = 0")
    zeros = (x == 0).astype(int) + (y == 0).astype(int) + (z == 0).astype(int)
    if np.any(zeros > 1):
        raise EllipticDomainError("carlson_rj diverges: two or more zero arguments")

    a0 = (x + y + z + 2.0 * p) / 5.0
    delta = (p - x) * (p - y) * (p - z)
    q = (_CARLSON_RTOL / 4.0) ** (-1.0 / 6.0) * np.maximum.reduce(
        [np.abs(a0 - x), np.abs(a0 - y), np.abs(a0 - z), np.abs(a0 - p)])
    xm, ym, zm, pm, am = x, y, z, p, a0.copy()
    fac = 1.0
    acc = np.zeros_like(am)
    for _ in range(_MAX_DUPLICATIONS):
        if np.all(fac * q < np.abs(am)):
            break
        sx, sy, sz, sp = np.sqrt(xm), np.sqrt(ym), np.sqrt(zm), np.sqrt(pm)
        lam = sx * sy + sx * sz + sy * sz
        d = (sp + sx) * (sp + sy) * (sp + sz)
        e = delta * fac ** 3 / (d * d)
        acc = acc + fac / d * carlson_rc(np.ones_like(e), 1.0 + e)
        xm, ym, zm, pm = (xm + lam) / 4.0, (ym + lam) / 4.0, (zm + lam) / 4.0, (pm + lam) / 4.0
        am = (am + lam) / 4.0
        fac /= 4.0
    X = (a0 - x) * fac / am
    Y = (a0 - y) * fac / am
    Z = (a0 - z) * fac / am
    P = -(X + Y + Z) / 2.0
    e2 = X * Y + X * Z + Y * Z - 3.0 * P * P
    e3 = X * Y * Z + 2.0 * e2 * P + 4.0 * P ** 3
    e4 = (2.0 * X * Y * Z + e2 * P + 3.0 * P ** 3) * P
    e5 = X * Y * Z * P * P
    series = (1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0 - 3.0 * e4 / 22.0
              - 9.0 * e2 * e3 / 52.0 + 3.0 * e5 / 26.0)
    res = fac * am ** -1.5 * series + 6.0 * acc
    return _out(res)


def legendre_pi(u, alpha2, m):
    """Third-kind integral in parameter form (m = k**2, complex allowed).

    int_0^u dt / ((1 - alpha2 t^2) sqrt(1 - t^2) sqrt(1 - m t^2))
    evaluated as u R_F(.) + alpha2 u^3/3 R_J(.). No domain checks.
    """
    u, alpha2, m = np.broadcast_arrays(np.asarray(u), np.asarray(alpha2), np.asarray(m))
    u2 = u * u
    a = 1.0 - u2
    b = 1.0 - m * u2
    one = np.ones_like(a)
    p = 1.0 - alpha2 * u2
    res = u * carlson_rf(a, b, one) + alpha2 * u * u2 / 3.0 * carlson_rj(a, b, one, p)
    return _out(np.asarray(res))


def ellint_pi(u, alpha2, k):
    """Normal elliptic integral of the third kind with upper limit ``u``.

    Pi(u, alpha2, k) = int_0^u dt / ((1 - alpha2 t^2) sqrt(1-t^2) sqrt(1-k^2 t^2))

    ``k`` may be purely imaginary (negative parameter). A pole of the
    integrand on [0, u] raises :class:`EllipticDomainError` naming t*.
    """
    u, alpha2, k = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(alpha2, dtype=float),
                                       np.asarray(k))
    m = (k * k).real if np.iscomplexobj(k) else k * k
    if np.any(np.abs(u) > 1.0):
        raise EllipticDomainError("ellint_pi: |u| must not exceed 1")
    if np.any(m * u * u > 1.0):
        raise EllipticDomainError("ellint_pi: k^2 u^2 > 1, integrand not real on path")
    bad = alpha2 * u * u >= 1.0
    if np.any(bad):
        tstar = 1.0 / math.sqrt(float(np.max(alpha2[bad])))
        raise EllipticDomainError(
            f"ellint_pi: integrand pole on the path at t* = {tstar:.17g}")
    return legendre_pi(u, alpha2, m)


# ---------------------------------------------------------------- Jacobi


def jacobi_sn_cn_dn(x, k):
    """Jacobi elliptic functions (sn, cn, dn) of real x for modulus 0 <= k <= 1.

    Descending Landen transformation (arithmetic-geometric mean); the
    amplitude is recovered by the backward recurrence and dn taken from
    dn^2 = 1 - k^2 sn^2 (dn > 0 on the real line).
    """
    x, k = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(k, dtype=float))
    if np.any(k < 0) or np.any(k > 1):
        raise EllipticDomainError("jacobi_sn_cn_dn: modulus must lie in [0, 1]")
    unit = k == 1.0
    kk = np.where(unit, 0.5, k)
    a = np.ones_like(kk)
    b = np.sqrt((1.0 - kk) * (1.0 + kk))
    c = kk.copy()
    a_seq, c_seq = [a], [c]
    for _ in range(60):
        if np.all(np.abs(c) <= 1e-17 * a):
            break
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    n = len(a_seq) - 1
    phi = (2.0 ** n) * a_seq[n] * x
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_seq[j] / a_seq[j] * np.sin(phi)))
    sn, cn = np.sin(phi), np.cos(phi)
    dn = np.sqrt(np.maximum(1.0 - (kk * sn) ** 2, 0.0))
    if np.any(unit):
        sech = 1.0 / np.cosh(x)
        sn = np.where(unit, np.tanh(x), sn)
        cn = np.where(unit, sech, cn)
        dn = np.where(unit, sech, dn)
    return _out(sn), _out(cn), _out(dn)


def complete_k(k):
    """Complete integral of the first kind K(k) = R_F(0, 1 - k^2, 1)."""
    k = np.asarray(k, dtype=float)
    return carlson_rf(np.zeros_like(k), (1.0 - k) * (1.0 + k), np.ones_like(k))


# ------------------------------------------------------------- Weierstrass


def cubic_roots(g2, g3):
    """Roots of 4u^3 - g2 u - g3 by Cardano's formula with a Newton polish.

    Returned as a tuple of three complex numbers: real roots first in
    descending order, then a conjugate pair (positive imaginary part first).
    """
    p = -g2 / 4.0
    q = -g3 / 4.0
    disc = complex(q * q / 4.0 + p ** 3 / 27.0)
    s = disc ** 0.5
    c1 = -q / 2.0 + s
    c2 = -q / 2.0 - s
    cc = c1 if abs(c1) >= abs(c2) else c2
    omega = complex(-0.5, math.sqrt(3.0) / 2.0)
    if cc == 0:
        roots = [0j, 0j, 0j]
    else:
        # principal cube root
        cr = cc ** (1.0 / 3.0)
        roots = []
        for j in range(3):
            t = cr * omega ** j
            roots.append(t - p / (3.0 * t))

    def poly(t):
        return 4.0 * t ** 3 - g2 * t - g3

    def dpoly(t):
        return 12.0 * t * t - g2

    polished = []
    for r in roots:
        for _ in range(3):
            d = dpoly(r)
            if d == 0:
                break
            step = poly(r) / d
            if not np.isfinite(step):
                break
            r = r - step
        polished.append(r)
    scale = max(1.0, max(abs(r) for r in polished))
    real, cplx = [], []
    for r in polished:
        if abs(r.imag) <= 1e-12 * scale:
            real.append(complex(r.real, 0.0))
        else:
            cplx.append(r)
    if len(real) == 1 and len(cplx) == 2:
        z = cplx[0] if cplx[0].imag > 0 else cplx[1]
        # conjugate pair summing exactly to -e1
        e1 = real[0].real
        pair = [complex(-e1 / 2.0, abs(z.imag)), complex(-e1 / 2.0, -abs(z.imag))]
        return (real[0], pair[0], pair[1])
    if len(real) != 3:
        # pathological rounding: fall back to numpy's companion matrix
        rr = np.roots([4.0, 0.0, -g2, -g3])
        real = [complex(r.real, 0.0) for r in rr]
    real.sort(key=lambda r: -r.real)
    return tuple(real)


@dataclass(frozen=True)
class WeierstrassInvariants:
    """Lattice invariants g2, g3 and the roots of 4u^3 - g2 u - g3."""

    g2: float
    g3: float
    roots: tuple = field(default=None, compare=False)

    def __post_init__(self):
        if self.roots is None:
            object.__setattr__(self, "roots", cubic_roots(float(self.g2), float(self.g3)))

    @property
    def discriminant(self):
        return self.g2 ** 3 - 27.0 * self.g3 ** 2

    @property
    def degenerate(self):
        return self.discriminant == 0.0

    @property
    def e1(self):
        """Largest real root."""
        return self.roots[0].real

    @cached_property
    def real_half_period(self):
        """Real half-period omega with p(omega) = e1; infinite if degenerate."""
        if self.degenerate:
            return math.inf
        e1, e2, e3 = self.roots
        val = carlson_rf(0j, e1 - e2, e1 - e3)
        if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
            raise EllipticDomainError("real half-period has an imaginary part")
        return float(val.real)

    @property
    def real_period(self):
        return 2.0 * self.real_half_period


@lru_cache(maxsize=64)
def _laurent_coefficients(g2, g3, nterms=48):
    c = [0.0] * (nterms + 1)
    if nterms >= 2:
        c[2] = g2 / 20.0
    if nterms >= 3:
        c[3] = g3 / 28.0
    for kk in range(4, nterms + 1):
        s = sum(c[m] * c[kk - m] for m in range(2, kk - 1))
        c[kk] = 3.0 * s / ((2 * kk + 1) * (kk - 3))
    return tuple(c)


def weierstrass_laurent(z, g2, g3, nterms=48):
    """Truncated Laurent series of (p, p') about the origin."""
    z = np.asarray(z, dtype=float)
    c = _laurent_coefficients(float(g2), float(g3), nterms)
    z2 = z * z
    p = np.zeros_like(z)
    dp = np.zeros_like(z)
    for kk in range(nterms, 1, -1):  # Horner in z^2
        p = p * z2 + c[kk]
        dp = dp * z2 + (2 * kk - 2) * c[kk]
    # p = z^-2 + z^2 * sum c_k z^(2k-4); p' = -2 z^-3 + z * sum (2k-2) c_k z^(2k-4)
    return _out(1.0 / z2 + z2 * p), _out(-2.0 / (z2 * z) + z * dp)


def _duplicate(p, dp, g2):
    d2 = 6.0 * p * p - 0.5 * g2
    d3 = 12.0 * p * dp
    ratio = d2 / (2.0 * dp)
    p2 = ratio * ratio - 2.0 * p
    dp2 = 0.5 * (d2 * (d3 * dp - d2 * d2) / (2.0 * dp ** 3) - 2.0 * dp)
    return p2, dp2


def weierstrass_p(x, inv, pole_radius=POLE_RADIUS):
    """Weierstrass p and p' at real ``x``.

    ``inv`` is a :class:`WeierstrassInvariants` or a ``(g2, g3)`` pair. The
    argument is reduced to (0, omega] using the real period and the symmetry
    p(2 omega - x) = p(x); there the Laurent series is summed at x / 2^n and
    doubled n times. Points closer than ``pole_radius`` to a real lattice
    point raise :class:`PoleError` (pass 0 to disable the guard).
    """
    if not isinstance(inv, WeierstrassInvariants):
        inv = WeierstrassInvariants(*inv)
    x = np.asarray(x, dtype=float)
    g2, g3 = float(inv.g2), float(inv.g3)

    if g2 == 0.0 and g3 == 0.0:
        dist = np.abs(x)
        if np.any(dist < pole_radius) or np.any(dist == 0):
            raise PoleError("weierstrass_p: too close to the pole at 0",
                            distance=float(np.min(dist)), location=0.0)
        return _out(1.0 / x ** 2), _out(-2.0 / x ** 3)
    if inv.degenerate:
        warnings.warn("degenerate lattice (repeated root); using the non-periodic branch",
                      RuntimeWarning, stacklevel=2)
        period = math.inf
    else:
        period = inv.real_period

    if math.isfinite(period):
        xr = np.mod(x, period)
        dist = np.minimum(xr, period - xr)
        location = np.round(x / period) * period
    else:
        xr = x.copy()
        dist = np.abs(x)
        location = np.zeros_like(x)
    if np.any(dist < pole_radius) or np.any(dist == 0):
        i = np.unravel_index(np.argmin(dist), dist.shape) if dist.ndim else ()
        raise PoleError(
            f"weierstrass_p: x within {float(dist[i]):.3g} of a lattice point",
            distance=float(dist[i]), location=float(location[i]))

    if math.isfinite(period):
        flip = xr > period / 2.0
        z = np.where(flip, period - xr, xr)
    else:
        flip = xr < 0
        z = np.abs(xr)
    # Lattice homogeneity: the shortest lattice vector is at least about 3/rho,
    # so |z| <= 0.9/rho keeps the series ratio below 0.1 per term.
    rho = max(abs(g2) ** 0.25, abs(g3) ** (1.0 / 6.0))
    radius = LAURENT_RADIUS / rho
    if math.isfinite(period):
        radius = min(radius, 0.5 * period)
    with np.errstate(divide="ignore"):
        n = np.maximum(np.ceil(np.log2(np.maximum(z, 1e-300) / radius)), 0).astype(int)
    z0 = z / 2.0 ** n
    p, dp = weierstrass_laurent(z0, g2, g3)
    p, dp = np.asarray(p, dtype=float), np.asarray(dp, dtype=float)
    for j in range(int(n.max()) if n.size else 0):
        active = n > j
        p2, dp2 = _duplicate(p, dp, g2)
        p = np.where(active, p2, p)
        dp = np.where(active, dp2, dp)
    dp = np.where(flip, -dp, dp)
    return _out(p), _out(dp)


def weierstrass_residual(p, dp, inv):
    """(p')^2 - (4 p^3 - g2 p - g3)."""
    if not isinstance(inv, WeierstrassInvariants):
        inv = WeierstrassInvariants(*inv)
    return dp * dp - (4.0 * p ** 3 - inv.g2 * p - inv.g3)
