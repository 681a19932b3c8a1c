"""Second-order ODEs u_xx = f'(u)/2 with polynomial f and their exact solutions.

A :class:`Potential` stores f by its coefficients; divided differences of f
give the Lax-pair entries without cancellation at u = -lambda. Named
solutions (Jacobi sn/cn/dn, Weierstrass p) and an RK4 integrator for
arbitrary polynomials supply :class:`JetPoint` values.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .elliptic import (PoleError, WeierstrassInvariants, jacobi_sn_cn_dn,
                       weierstrass_p)

__all__ = [
    "Potential", "JetPoint", "NamedSolution", "NumericSolution", "EllipticModulus",
    "eval_f", "discriminate", "solution_jet", "weierstrass_root_pair",
    "divided_difference", "parse_potential", "PoleError",
]

# Table of (k1, k2) as functions of k for the three Jacobi solutions.
JACOBI_CONSTANTS = {
    "sn": lambda k: (1.0, -k * k),
    "cn": lambda k: ((1.0 - k) * (1.0 + k), k * k),
    "dn": lambda k: (-(1.0 - k) * (1.0 + k), 1.0),
}


@dataclass(frozen=True)
class EllipticModulus:
    """Modulus k with complementary modulus k' (k^2 + k'^2 = 1)."""

    k: float

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ValueError("modulus must lie in [0, 1]")

    @property
    def k_prime(self):
        return math.sqrt((1.0 - self.k) * (1.0 + self.k))


def _poly_eval(coeffs, u):
    """Horner evaluation of f, f', f'' for ascending coefficients."""
    u = np.asarray(u)
    f = np.zeros_like(u, dtype=np.result_type(u, float))
    fp = np.zeros_like(f)
    fpp = np.zeros_like(f)
    for c in coeffs[::-1]:
        fpp = fpp * u + 2.0 * fp
        fp = fp * u + f
        f = f * u + c
    return f, fp, fpp


def _h_complete(m, u, a, v, b):
    """Complete homogeneous symmetric polynomial h_m of u (multiplicity a), v (multiplicity b)."""
    if m < 0:
        return np.zeros(np.broadcast(u, v).shape) if np.ndim(u) or np.ndim(v) else 0.0
    total = 0.0
    for i in range(m + 1):
        ca = comb(i + a - 1, a - 1) if a > 0 else (1 if i == 0 else 0)
        cb = comb(m - i + b - 1, b - 1) if b > 0 else (1 if m - i == 0 else 0)
        if ca and cb:
            total = total + ca * cb * u ** i * v ** (m - i)
    return total


def divided_difference(coeffs, u, a, v, b):
    """Divided difference f[u,...,u, v,...,v] with u repeated a times and v b times.

    For f = sum c_n t^n this is sum c_n h_{n-a-b+1}(u^a, v^b), a polynomial in
    u and v, so no cancellation occurs when u approaches v.
    """
    order = a + b - 1
    u = np.asarray(u)
    v = np.asarray(v)
    res = np.zeros(np.broadcast(u, v).shape, dtype=np.result_type(u, v, float))
    for n, c in enumerate(coeffs):
        if c != 0 and n >= order:
            res = res + c * _h_complete(n - order, u, a, v, b)
    return res[()] if res.ndim == 0 else res


@dataclass(frozen=True)
class Potential:
    """Polynomial f(u) (ascending coefficients, degree 1 to 4) with a kind tag.

    ``kind`` is ``"jacobi"`` (params k1, k2), ``"weierstrass"`` (g2, g3) or
    ``"polynomial"``.
    """

    coeffs: tuple
    kind: str = "polynomial"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = [float(x) for x in self.coeffs]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not 1 <= len(c) - 1 <= 4:
            raise ValueError(f"degree of f must be 1..4, got {len(c) - 1}")
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def jacobi(cls, k1, k2):
        # (1 - u^2)(k1 + k2 u^2) = k1 + (k2 - k1) u^2 - k2 u^4
        return cls((k1, 0.0, k2 - k1, 0.0, -k2), "jacobi", {"k1": float(k1), "k2": float(k2)})

    @classmethod
    def weierstrass(cls, g2, g3):
        return cls((-g3, -g2, 0.0, 4.0), "weierstrass", {"g2": float(g2), "g3": float(g3)})

    @classmethod
    def polynomial(cls, coeffs):
        return cls(tuple(coeffs), "polynomial", {})

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def f(self, u):
        return _poly_eval(self.coeffs, u)[0]

    def eval(self, u):
        return _poly_eval(self.coeffs, u)

    def third_derivative(self, u):
        c = self.coeffs
        u = np.asarray(u, dtype=float)
        res = np.zeros_like(u)
        for n in range(3, len(c)):
            res = res + n * (n - 1) * (n - 2) * c[n] * u ** (n - 3)
        return res

    def discriminate(self, lam):
        return self.eval(-np.asarray(lam))[0]

    def dd(self, u, a, v, b):
        return divided_difference(self.coeffs, u, a, v, b)

    def describe(self):
        if self.kind == "jacobi":
            return f"jacobi k1={self.params['k1']!r} k2={self.params['k2']!r}"
        if self.kind == "weierstrass":
            return f"weierstrass g2={self.params['g2']!r} g3={self.params['g3']!r}"
        return "polynomial coeffs=" + ",".join(repr(c) for c in self.coeffs)


def eval_f(pot: Potential, u):
    """Return (f, f', f'') at u."""
    return pot.eval(u)


def discriminate(pot: Potential, lam):
    """g(lambda) = f(-lambda)."""
    return pot.discriminate(lam)


@dataclass
class JetPoint:
    """Prolonged solution point; fields may be numpy arrays of a common shape."""

    x: object
    u: object
    u_x: object
    u_xx: object
    epsilon: object = 1.0

    def shifted(self, **changes):
        d = dict(x=self.x, u=self.u, u_x=self.u_x, u_xx=self.u_xx, epsilon=self.epsilon)
        d.update(changes)
        return JetPoint(**d)

    def first_integral_residual(self, pot):
        return np.asarray(self.u_x) ** 2 - pot.f(self.u)

    def ode_residual(self, pot):
        return np.asarray(self.u_xx) - 0.5 * pot.eval(self.u)[1]


class NamedSolution:
    """Closed-form solution u(x - x0) of u_xx = f'(u)/2.

    ``kind`` is one of ``sn``, ``cn``, ``dn`` (parameter ``k``) or ``wp``
    (parameters ``g2``, ``g3``). The phase reference point x_ref is 0 for
    the Jacobi functions and 0.5 for p.
    """

    def __init__(self, kind, x0=0.0, x_ref=None, pole_radius=1e-3, **params):
        kind = {"weierstrass_p": "wp", "weierstrass": "wp"}.get(kind, kind)
        if kind not in ("sn", "cn", "dn", "wp"):
            raise ValueError(f"unknown solution kind {kind!r}")
        self.kind = kind
        self.x0 = float(x0)
        self.pole_radius = pole_radius
        if kind == "wp":
            self.g2 = float(params.get("g2", 0.0))
            self.g3 = float(params.get("g3", 1.0))
            self.inv = WeierstrassInvariants(self.g2, self.g3)
            self.potential = Potential.weierstrass(self.g2, self.g3)
            default_ref = 0.5
        else:
            self.k = float(params["k"])
            k1, k2 = JACOBI_CONSTANTS[kind](self.k)
            self.k1, self.k2 = k1, k2
            self.potential = Potential.jacobi(k1, k2)
            default_ref = 0.0
        self.x_ref = float(default_ref if x_ref is None else x_ref)

    @property
    def params(self):
        if self.kind == "wp":
            return {"g2": self.g2, "g3": self.g3}
        return {"k": self.k}

    def __repr__(self):
        p = " ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"NamedSolution({self.kind} {p} x0={self.x0!r})"

    def jet(self, x, pole_radius=None):
        """Jet at x; ``pole_radius`` overrides the p-pole exclusion (0 disables it)."""
        x = np.asarray(x, dtype=float)
        t = x - self.x0
        if self.kind == "wp":
            radius = self.pole_radius if pole_radius is None else pole_radius
            p, dp = weierstrass_p(t, self.inv, pole_radius=radius)
            u, ux = np.asarray(p), np.asarray(dp)
            uxx = 6.0 * u * u - 0.5 * self.g2
        else:
            sn, cn, dn = jacobi_sn_cn_dn(t, self.k)
            kk = self.k * self.k
            if self.kind == "sn":
                u, ux, uxx = sn, cn * dn, -sn * (dn * dn + kk * cn * cn)
            elif self.kind == "cn":
                u, ux, uxx = cn, -sn * dn, -cn * (dn * dn - kk * sn * sn)
            else:
                u, ux, uxx = dn, -kk * sn * cn, -kk * dn * (cn * cn - sn * sn)
        eps = np.where(np.asarray(ux) < 0, -1.0, 1.0)
        return JetPoint(x=x, u=u, u_x=ux, u_xx=uxx, epsilon=eps[()] if eps.ndim == 0 else eps)

    def u(self, x):
        return self.jet(x).u

    def pole_locations(self, a, b):
        """Real poles of u in [a, b] (empty for the Jacobi functions)."""
        if self.kind != "wp" or self.inv.degenerate:
            return np.array([0.0 + self.x0]) if self.kind == "wp" and a <= self.x0 <= b else np.empty(0)
        T = self.inv.real_period
        k0 = math.ceil((a - self.x0) / T)
        k1 = math.floor((b - self.x0) / T)
        return self.x0 + T * np.arange(k0, k1 + 1)


class NumericSolution:
    """Solution of u_xx = f'(u)/2 for an arbitrary polynomial f by fixed-step RK4.

    Initial data (x0, u0) with u_x(x0) = epsilon * sqrt(f(u0)) so that the
    first integral u_x^2 = f(u) holds; its drift is tracked in
    ``max_first_integral_drift`` after each evaluation.
    """

    kind = "numeric"

    def __init__(self, potential, u0, epsilon=1.0, x0=0.0, step=1e-3, x_ref=None):
        self.potential = potential
        f0 = float(potential.f(u0))
        if f0 < 0:
            raise ValueError("initial point has f(u0) < 0; no real solution through it")
        self.x0 = float(x0)
        self.u0 = float(u0)
        self.v0 = float(epsilon) * math.sqrt(f0)
        self.step = float(step)
        self.x_ref = self.x0 if x_ref is None else float(x_ref)
        self.max_first_integral_drift = 0.0

    def _rhs(self, s):
        return np.array([s[1], 0.5 * self.potential.eval(s[0])[1]])

    def _integrate_to(self, targets):
        out = np.empty((len(targets), 2))
        order = np.argsort(targets)
        for direction in (1.0, -1.0):
            sel = [i for i in order if (targets[i] - self.x0) * direction >= 0]
            if direction < 0:
                sel = sel[::-1]
            s = np.array([self.u0, self.v0])
            x = self.x0
            for i in sel:
                while abs(targets[i] - x) > 0:
                    h = direction * min(self.step, abs(targets[i] - x))
                    k1 = self._rhs(s)
                    k2 = self._rhs(s + 0.5 * h * k1)
                    k3 = self._rhs(s + 0.5 * h * k2)
                    k4 = self._rhs(s + h * k3)
                    s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                    x = x + h
                    if abs(targets[i] - x) < 1e-15 * max(1.0, abs(x)):
                        x = targets[i]
                out[i] = s
        return out

    def pole_locations(self, a, b):
        return np.empty(0)

    def jet(self, x, pole_radius=None):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        s = self._integrate_to(flat)
        u = s[:, 0].reshape(x.shape)
        ux = s[:, 1].reshape(x.shape)
        uxx = 0.5 * self.potential.eval(u)[1]
        drift = np.max(np.abs(ux ** 2 - self.potential.f(u))) if u.size else 0.0
        self.max_first_integral_drift = max(self.max_first_integral_drift, float(drift))
        eps = np.where(ux < 0, -1.0, 1.0)
        return JetPoint(x=x, u=u, u_x=ux, u_xx=uxx, epsilon=eps)


def solution_jet(sol, x):
    """Jet (x, u, u_x, u_xx, epsilon) of a named or numeric solution."""
    return sol.jet(x)


def weierstrass_root_pair(inv):
    """Constants (a1, a2) with 4u^3 - g2 u - g3 = 4(u + a1)(u + a2)(u - a1 - a2).

    With one real root e1 and a conjugate pair e2, e3 we take a1 = -e2,
    a2 = -e3 (so a1 + a2 = e1). With three real roots e1 > e2 > e3 we take
    a1 = -e2, a2 = -e1.
    """
    if not isinstance(inv, WeierstrassInvariants):
        inv = WeierstrassInvariants(*inv)
    if inv.degenerate:
        warnings.warn("degenerate lattice: repeated root of 4u^3 - g2 u - g3",
                      RuntimeWarning, stacklevel=2)
    e1, e2, e3 = inv.roots
    if e2.imag != 0.0:
        return -e2, -e3
    return -e2, -e1


_KV = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)")


def parse_potential(text):
    """Parse ``jacobi_sn k=0.5``, ``weierstrass g2=0 g3=1``, ``jacobi k1=1 k2=-0.25``
    or ``polynomial coeffs=1,0,-2`` into a (Potential, NamedSolution or None) pair."""
    parts = text.strip().split(None, 1)
    if not parts:
        raise ValueError("empty potential specification")
    head = parts[0].lower()
    kv = dict(_KV.findall(parts[1])) if len(parts) > 1 else {}
    if head.startswith("jacobi_"):
        kind = head.split("_", 1)[1]
        if kind not in JACOBI_CONSTANTS:
            raise ValueError(f"unknown Jacobi function {kind!r}")
        sol = NamedSolution(kind, k=float(kv.get("k", 0.5)), x0=float(kv.get("x0", 0.0)))
        return sol.potential, sol
    if head in ("weierstrass", "wp"):
        sol = NamedSolution("wp", g2=float(kv.get("g2", 0.0)), g3=float(kv.get("g3", 1.0)),
                            x0=float(kv.get("x0", 0.0)))
        return sol.potential, sol
    if head == "jacobi":
        return Potential.jacobi(float(kv["k1"]), float(kv["k2"])), None
    if head == "polynomial":
        coeffs = [float(c) for c in kv["coeffs"].split(",")]
        return Potential.polynomial(coeffs), None
    raise ValueError(f"unknown potential kind {head!r}")
