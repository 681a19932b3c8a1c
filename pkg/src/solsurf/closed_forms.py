"""Printed closed-form fundamental forms, evaluated verbatim.

These formulas are implementations under test: the numeric forms in
:mod:`solsurf.metrics` are the reference. Each formula returns its printed
terms separately so a mismatch can be traced to one term.

Killing-form families (coefficients of I = E dx^2 + 2F dxdy + G dy^2):

    general   F^ST, F^{u_x} for arbitrary f
    jacobi    F^ST, F^{u_x} for the Jacobi potentials
    weierstrass F^ST, F^{u_x} for f = 4u^3 - g2 u - g3

Euclidean components (:func:`euclidean_printed`) depend on y through
Psi_+ = exp(sqrt(g)(y + theta)) and Psi_- = 1/Psi_+. They are represented
as Laurent polynomials in Psi_+ (:class:`PsiPoly`) whose coefficients depend
only on x, so they can be compared mode by mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UnsupportedFormError(ValueError):
    """No printed closed form exists for this family/model combination."""


@dataclass
class FundamentalForm:
    """Coefficients of E dx^2 + 2F dxdy + G dy^2 (F is half the dxdy coefficient)."""

    E: object
    F: object
    G: object
    terms: dict = field(default_factory=dict)

    def as_tuple(self):
        return self.E, self.F, self.G

    def scaled(self, c):
        return FundamentalForm(self.E * c, self.F * c, self.G * c, dict(self.terms))


# ----------------------------------------------------------- context


@dataclass
class FormContext:
    """Scalars entering the printed formulas at a set of jet points.

    ``gp`` is dg/dlambda; ``sg`` is the complex square root of g. Q, Qx,
    Qxx describe the characteristic (Q = u_x for F^{u_x}).
    """

    u: object
    ux: object
    lam: float
    f: object
    fp: object
    fpp: object
    g: object
    gp: object
    sg: object
    Q: object = None
    Qx: object = None
    Qxx: object = None
    params: dict = field(default_factory=dict)

    @property
    def w(self):
        return self.u + self.lam

    @classmethod
    def from_jet(cls, pot, lam, jet, qvalues=None, **params):
        u = np.asarray(jet.u, dtype=float)
        f, fp, fpp = pot.eval(u)
        g = float(pot.discriminate(lam))
        # g(lambda) = f(-lambda) so g' = -f'(-lambda)
        gp = -float(pot.eval(np.array(-lam))[1])
        sg = np.sqrt(complex(g))
        ctx = cls(u, np.asarray(jet.u_x, dtype=float), float(lam), f, fp, fpp, g, gp, sg, params=dict(params))
        if qvalues is not None:
            ctx.Q, ctx.Qx, ctx.Qxx = qvalues.Q, qvalues.Qx, qvalues.Qxx
        return ctx


# ------------------------------------------------------ Killing forms


def _half(d):
    return d / 2


def killing_general(ctx: FormContext, family, a=1.0, b=1.0):
    """Printed Killing forms for arbitrary f. "v + lambda" in the F^ST dy^2 term is read as u + lambda."""
    f, fp, fpp, g, gp, w = ctx.f, ctx.fp, ctx.fpp, ctx.g, ctx.gp, ctx.w
    zero = 0.0 * w
    if family == "ST":
        dxdy = 2 * (f - g) / w ** 3 - (fp - gp) / w ** 2
        dy2 = 2 * (gp / w + (f - g) / w ** 2)
        c = a * a
        return FundamentalForm(zero, _half(dxdy) * c, dy2 * c, {"dxdy": dxdy * c, "dy2": dy2 * c})
    if family == "Ux":
        dxdy = f * fpp / w - 2 * f * fp / w ** 2 + 2 * f * (f - g) / w ** 3
        dy2 = fp ** 2 / 2 - 2 * f * fp / w + 2 * f * (f - g) / w ** 2
        c = b * b
        return FundamentalForm(zero, _half(dxdy) * c, dy2 * c, {"dxdy": dxdy * c, "dy2": dy2 * c})
    raise UnsupportedFormError(f"no general Killing form for family {family!r}")


def killing_jacobi(ctx: FormContext, family, a=1.0, b=1.0):
    """Printed Killing forms for the Jacobi model (modulus ``ctx.params['k']``).

    The F^ST display has an unbalanced parenthesis; it is read as
    a^2/2 k^2 (u - lambda) dxdy - a^2/2 [...] dy^2.
    """
    k = ctx.params["k"]
    k2 = k * k
    kp2 = (1 - k) * (1 + k)
    u, lam = ctx.u, ctx.lam
    zero = 0.0 * u
    if family == "ST":
        A2 = a * a
        dxdy = A2 / 2 * (k2 * (u - lam))
        dy2 = -A2 / 2 * (k2 * (u ** 2 - 2 * lam * u + 3 * lam ** 2 - 2) + 1)
        return FundamentalForm(zero, _half(dxdy), dy2, {"dxdy": dxdy, "dy2": dy2})
    if family == "Ux":
        B2 = b * b
        k4 = k2 * k2
        dxdy = -k2 * B2 / 2 * (3 * u - lam) * (1 - u ** 2) * (k2 * u ** 2 + kp2)
        poly = (k4 * u ** 6 + 2 * u ** 5 * k4 * lam - u ** 4 * k4 * lam ** 2
                - (4 * k4 * lam - 2 * lam * k2) * u ** 3
                + (3 * k2 + 2 * k4 * lam ** 2 - 3 * k4 - k2 * lam ** 2) * u ** 2
                - (2 * lam * k2 - 2 * k4 * lam) * u
                - k4 * lam ** 2 + 2 * k4 + k2 * lam ** 2 - 3 * k2 + 1)
        dy2 = B2 / 2 * poly
        return FundamentalForm(zero, _half(dxdy), dy2, {"dxdy": dxdy, "dy2": dy2})
    raise UnsupportedFormError(f"no Jacobi Killing form for family {family!r}")


def killing_weierstrass(ctx: FormContext, family, a=1.0, b=1.0):
    """Printed Killing forms for f = 4u^3 - g2 u - g3 (``ctx.params['g2']``, ``['g3']``)."""
    g2, g3 = ctx.params["g2"], ctx.params["g3"]
    u, lam = ctx.u, ctx.lam
    zero = 0.0 * u
    if family == "ST":
        A2 = a * a
        dxdy = -2 * A2 + zero
        dy2 = -2 * A2 * 3 * A2 * (2 * lam - u)
        return FundamentalForm(zero, _half(dxdy), dy2, {"dxdy": dxdy, "dy2": dy2})
    if family == "Ux":
        B4 = 4 * b * b
        dxdy = B4 * (4 * u ** 3 - g2 * u - g3)
        dy2 = B4 * (2 * u ** 4 + 8 * lam * u ** 3 + g2 * u ** 2 - 2 * (g2 * lam - 2 * g3) * u
                    - 2 * lam * g3 + g2 ** 2 / 8)
        return FundamentalForm(zero, _half(dxdy), dy2, {"dxdy": dxdy, "dy2": dy2})
    raise UnsupportedFormError(f"no Weierstrass Killing form for family {family!r}")


KILLING_FORMS = {"general": killing_general, "jacobi": killing_jacobi, "weierstrass": killing_weierstrass}


def fff_closed(metric, family, model, ctx: FormContext, a=1.0, b=1.0):
    """Printed first fundamental form; ``model`` is general, jacobi or weierstrass."""
    tag = getattr(metric, "tag", metric)
    if tag != "Killing":
        raise UnsupportedFormError("closed forms as coefficients exist only for the Killing metric; "
                                   "use euclidean_printed for the Euclidean components")
    try:
        fn = KILLING_FORMS[model]
    except KeyError:
        raise UnsupportedFormError(f"unknown model {model!r}") from None
    return fn(ctx, family, a=a, b=b)


# ----------------------------------------------- Euclidean components


class PsiPoly:
    """Laurent polynomial sum_n c_n Psi_+^n with Psi_- = Psi_+^-1.

    Coefficients may be numpy arrays or sympy expressions.
    """

    # make numpy defer to the reflected operators
    __array_ufunc__ = None

    def __init__(self, coeffs=None):
        self.c = {k: v for k, v in (coeffs or {}).items()}

    @classmethod
    def psi(cls, n=1):
        return cls({n: 1})

    @classmethod
    def const(cls, v):
        return cls({0: v})

    def _lift(self, o):
        return o if isinstance(o, PsiPoly) else PsiPoly.const(o)

    def __add__(self, o):
        o = self._lift(o)
        out = dict(self.c)
        for k, v in o.c.items():
            out[k] = out[k] + v if k in out else v
        return PsiPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return PsiPoly({k: -v for k, v in self.c.items()})

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        if not isinstance(o, PsiPoly):
            return PsiPoly({k: v * o for k, v in self.c.items()})
        out = {}
        for i, a in self.c.items():
            for j, b in o.c.items():
                out[i + j] = out[i + j] + a * b if i + j in out else a * b
        return PsiPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return PsiPoly({k: v / o for k, v in self.c.items()})

    def __pow__(self, n):
        out = PsiPoly.const(1)
        for _ in range(int(n)):
            out = out * self
        return out

    def coeff(self, n):
        return self.c.get(n, 0)

    def modes(self):
        return sorted(self.c)

    def evaluate(self, psi_plus):
        return sum(v * psi_plus ** k for k, v in self.c.items())


PP = PsiPoly.psi(1)
PM = PsiPoly.psi(-1)


def _sum_terms(terms):
    out = PsiPoly()
    for t in terms.values():
        out = out + t
    return out


def euclidean_printed(ctx: FormContext, family, component):
    """Printed Euclidean component as {term name: PsiPoly}; the component is their sum.

    ``family`` is "ST", "Q" (general characteristic, uses ctx.Q, Qx, Qxx) or
    "Ux" (the Q = u_x specialization); ``component`` is "xx", "xy" or "yy".
    Where a printed line break hides an operator, "+" is used; where
    parentheses are unbalanced the reading is stated next to the term.
    """
    f, fp, fpp, g, gp, sg, w, ux = ctx.f, ctx.fp, ctx.fpp, ctx.g, ctx.gp, ctx.sg, ctx.w, ctx.ux
    G1 = g ** 2 + g + 1
    G2 = g ** 2 - 1
    P4s, P4d = PP ** 4 + PM ** 4, PP ** 4 - PM ** 4
    P2s, P2d = PP ** 2 + PM ** 2, PP ** 2 - PM ** 2
    g32 = sg ** 3
    key = (family, component)
    if key == ("ST", "xx"):
        pre = (((fp - gp) * w - 2 * (f - g)) / (64 * w ** 2 * g)) ** 2
        return {"bracket": pre * (G1 * P4s + 4 * G2 * P2s + 2 * (3 * g ** 2 - g + 3))}
    if key == ("ST", "xy"):
        pre = (2 * (f - g) - (fp - gp) * w) / (32 * w ** 3 * g32)
        return {
            "const": PsiPoly.const(pre * (2 * (3 * g ** 2 - g + 3) * w * gp - 4 * g * G1)),
            "ux": pre * (-2 * (PP ** 4 - 1) * (G1 * (1 + PM ** 4) + 2 * G2 * PM ** 2) * ux),
            "psi4": pre * (G1 * (gp * w - 2 * g) * P4s),
            "psi2": pre * (4 * G2 * (gp * w - g) * P2s),
        }
    if key == ("ST", "yy"):
        # the printed display has no operator before the second line; "+" assumed
        first = -(PP ** 4 - 1) / (4 * g32 * w ** 2) * ((G1 * (gp * w - 2 * g) * (1 + PM ** 4)
                                                        + 2 * gp * G2 * w * PM ** 2) * ux)
        pre = 1 / (16 * w ** 2 * g ** 2)
        return {
            "ux": first,
            # "(g^2+g+1)((g'w-2g)^2+4gf)" read as a product
            "psi4": pre * (G1 * ((gp * w - 2 * g) ** 2 + 4 * g * f) * P4s),
            "psi2": pre * (4 * gp * G2 * w * (gp * w - 2 * g) * P2s),
            "const": PsiPoly.const(pre * (2 * w ** 2 * (3 - g + 3 * g ** 2) * gp ** 2
                                          - 8 * g * (g ** 2 - g + 1) * w * gp)),
        }
    if family in ("Q", "Ux"):
        if family == "Ux":
            Q, Qx, Qxx = ux, fp / 2 + 0.0 * ux, fpp * ux / 2
        else:
            Q, Qx, Qxx = ctx.Q, ctx.Qx, ctx.Qxx
        K = fpp * w ** 2 - 2 * w * fp + 2 * (f - g)
        if key == ("Q", "xx"):
            pre = Q ** 2 * K ** 2 / (64 * w ** 4 * g ** 2)
            return {"bracket": pre * (G1 * P4s + 4 * f * G2 * P2s + 2 * (g ** 2 - g + 3))}
        if key == ("Ux", "xx"):
            pre = f * K ** 2 / (64 * w ** 4 * g ** 2)
            return {"bracket": pre * (G1 * P4s + 4 * f * G2 * P2s + 2 * (g ** 2 - g + 3))}
        if key == ("Q", "xy"):
            # "(...)^2)" has a stray parenthesis; the square is kept
            pre = Q * K ** 2 / (32 * w ** 3 * g ** 2)
            return {
                "const": PsiPoly.const(pre * (Q * g * (g ** 2 + 1))),
                "odd": pre * (2 * sg * (Qx - Q * ux) * (G1 * P4d + 2 * G2 * P2d)),
                "even": pre * ((2 * Qx * ux - Q * fp * w + 2 * g * Q)
                               * (G1 * P4s + 2 * G2 * P2s + 2 * (3 * g ** 2 - g + 3))),
            }
        if key == ("Ux", "xy"):
            # the printed second line has no operator; "+" assumed
            pre = K ** 2 / (32 * g32 * w ** 3)
            return {
                "odd": pre * ((fp * w - 2 * f) * ux * (G1 * P4d + 2 * G2 * P2d)),
                "even": pre * (2 * sg * f * (G1 * P4s + 2 * G2 * P2s + 2 * (g ** 2 - g + 1))),
            }
        if key == ("Q", "yy"):
            a = G1 / (16 * g ** 2 * w ** 2)
            b = G2 / (4 * g ** 2 * w)
            return {
                "psi4_odd": a * ((4 * sg * (fp * w + 2 * g) * ux * Q ** 2 + 2 * Qxx * ux
                                  - 2 * (fp * w + 2 * g + 2 * f) * Qx * Q) * P4d),
                "psi4_even": a * ((((fp * w + 2 * g) ** 2 + 4 * g * f) * Q ** 2
                                   - 4 * (fp * w + 4 * g) * Qx * Q * ux + 4 * (f + g) * Qx ** 2) * P4s),
                "psi2_odd": b * (2 * sg * (fp * Q ** 2 * ux + 4 * w * Qx ** 2 * ux
                                           - 2 * (fp * w + 2 * f) * Qx * Q) * P2d),
                "psi2_even": b * (-(4 * (fp * w + g) * Qx * Q * ux + (fp * w + 2 * g) * fp * Q ** 2
                                    + w * f * Qx ** 2) * P2s),
                "const_Qx": PsiPoly.const(-((3 * g ** 2 - g + 3) * (fp * Qx * Q * ux + f * Qx ** 2)
                                            + g * (g ** 2 - g + 1) * Qx ** 2) / g ** 2),
                "const_Q2": PsiPoly.const(((3 * g ** 2 - g + 3) * fp ** 2 / (8 * g ** 2)
                                           + (g ** 2 - g + 1) * fp / (2 * g * w)
                                           + (g ** 2 - g + 1) * (g - f) / (2 * g * w ** 2)) * Q ** 2),
            }
        if key == ("Ux", "yy"):
            # "(2f - f'(u+lambda)" is unbalanced; read as (2f - f' w)
            return {
                "odd": G1 * (2 * f - fp * w) / (4 * sg * w ** 2) * P4d * ux,
                "even": 1 / (w ** 2 * g) * ((fpp * w ** 2 - 4 * fp * f * w + 4 * f * (f + g)) * G1 * P4s),
                "const": PsiPoly.const(1 / (w ** 2 * g) * (-2 * (fpp * w ** 2 - 4 * fp * f * w
                                                                 + 4 * f * (f - g)) * (g ** 2 - g + 1))),
            }
    raise UnsupportedFormError(f"no printed Euclidean component {key!r}")


def euclidean_printed_total(ctx, family, component):
    return _sum_terms(euclidean_printed(ctx, family, component))


# ------------------------------------------------------ typo registry


@dataclass(frozen=True)
class KnownTypo:
    form: str          # e.g. "killing/jacobi/ST" or "euclid/ST/xx"
    coefficient: str   # "dxdy", "dy2", a Psi mode "mode<n>" or "*"
    kind: str          # "scale" or "structural"
    note: str


# Populated from a symbolic re-derivation of each display, independent of
# the numeric reports that are later checked against it.
KNOWN_TYPOS = (
    KnownTypo("killing/jacobi/ST", "dxdy", "structural",
              "unbalanced parenthesis; for sn the general form gives -2a^2 k^2(u - lambda), -4x the printed term; "
              "for cn the whole display is 1/4 of the general form"),
    KnownTypo("killing/jacobi/ST", "dy2", "structural",
              "for sn the general form gives 2a^2[k^2(u^2 - 2 lambda u + 3 lambda^2 - 1) - 1]"),
    KnownTypo("killing/jacobi/Ux", "dxdy", "structural",
              "factor (k^2u^2 + k'^2) belongs to cn, where the display is 1/4 of the general form; wrong for sn"),
    KnownTypo("killing/jacobi/Ux", "dy2", "structural",
              "polynomial fits cn up to the factor 1/4; does not reduce to the general form for sn"),
    KnownTypo("killing/weierstrass/ST", "dxdy", "scale", "printed -2a^2, general form gives -4a^2"),
    KnownTypo("killing/weierstrass/ST", "dy2", "scale",
              "nested a^2 makes the a-scaling a^4; at a = 1 the general form gives -8(2 lambda - u), 4/3 of the printed"),
    KnownTypo("killing/weierstrass/Ux", "dxdy", "scale", "printed 4b^2 f, general form gives 8b^2 f"),
    KnownTypo("euclid/ST/xx", "*", "scale", "the 64 sits inside the square: prefactor is N^2/(64 w^4 g^2)"),
    KnownTypo("euclid/ST/xy", "*", "structural",
              "u_x appears without its sqrt(g) factor, g^(3/2) should be g^2, constant term has g^2 + g + 1 for g^2 - g + 1"),
    KnownTypo("euclid/ST/yy", "mode0", "structural",
              "constant term misses the f-dependent part; the Psi^(+-2), Psi^(+-4) terms are right"),
    KnownTypo("euclid/Q/xx", "mode-2", "structural", "spurious factor f in the Psi^2 term"),
    KnownTypo("euclid/Q/xx", "mode2", "structural", "spurious factor f in the Psi^2 term"),
    KnownTypo("euclid/Q/xx", "mode0", "structural", "g^2 - g + 3 where 3g^2 - g + 3 is needed"),
    KnownTypo("euclid/Q/xy", "*", "structural", "squared prefactor; bracket terms do not follow from the tangent pair"),
    KnownTypo("euclid/Q/yy", "*", "structural", "terms do not reduce to the pairing of the y-tangents"),
    KnownTypo("euclid/Ux/xx", "mode-2", "structural", "spurious factor f in the Psi^2 term"),
    KnownTypo("euclid/Ux/xx", "mode2", "structural", "spurious factor f in the Psi^2 term"),
    KnownTypo("euclid/Ux/xx", "mode0", "structural", "g^2 - g + 3 where 3g^2 - g + 3 is needed"),
    KnownTypo("euclid/Ux/xy", "*", "structural",
              "squared prefactor, missing operator between lines, sign of f' w - 2f in the odd terms"),
    KnownTypo("euclid/Ux/yy", "*", "structural",
              "f'' w^2 where (f' w)^2 enters; the correct Psi^(+-4) coefficient is (f' w -+ 2 sqrt(g) u_x - 2f)^2 (g^2+g+1)/(16 g w^2)"),
)


def registered(form, coefficient, kind=None):
    """True when (form, coefficient) is in the registry (``*`` matches any coefficient)."""
    for t in KNOWN_TYPOS:
        if t.form == form and t.coefficient in ("*", coefficient) and (kind is None or t.kind == kind):
            return True
    return False
