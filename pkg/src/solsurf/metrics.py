"""Inner products on sl(2), numeric first fundamental forms and discrepancy reports.

Numeric forms are the reference. Printed closed forms from
:mod:`solsurf.closed_forms` are compared against them coefficient by
coefficient (Killing metric) or Psi-mode by Psi-mode (Euclidean metric).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closed_forms import (FormContext, FundamentalForm, PsiPoly, euclidean_printed, fff_closed,
                           registered)
from .lax import SpectralPoint
from .sl2 import KILLING, Sl2Element
from .surface import EmptyGridError, Frame, f_q1, f_sym_tafel, grid_mask, prolonged_lax

MATCH_TOL = 1e-6
INVARIANCE_TOL = 1e-10
GRAM_TOL = 1e-12


@dataclass(frozen=True)
class MetricKind:
    tag: str

    @property
    def matrix(self):
        return np.eye(3) if self.tag == "Euclidean" else KILLING.copy()


EUCLIDEAN = MetricKind("Euclidean")
KILLING_METRIC = MetricKind("Killing")


def metric_kind(name):
    name = getattr(name, "tag", name)
    key = str(name).lower()
    if key in ("euclidean", "euclid", "e"):
        return EUCLIDEAN
    if key in ("killing", "b", "k"):
        return KILLING_METRIC
    raise ValueError(f"unknown metric {name!r}")


def inner(metric, X, Y):
    """Euclidean sum X^i Y^i or Killing tr(XY) = X1 Y2 + X2 Y1 + 2 X3 Y3."""
    m = metric_kind(metric)
    a = X.coords if isinstance(X, Sl2Element) else np.asarray(X)
    b = Y.coords if isinstance(Y, Sl2Element) else np.asarray(Y)
    if m.tag == "Euclidean":
        return np.sum(a * b, axis=-1)
    return a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0] + 2.0 * a[..., 2] * b[..., 2]


def fff_numeric(metric, sample, check_invariance=True, tol=INVARIANCE_TOL):
    """E, F, G from metric pairings of the tangents of ``sample``.

    For the Killing metric, when the un-conjugated fields A, B are attached,
    the Phi-frame pairings are checked against the A, B pairings (relative to
    the rounding scale |F_x| |F_y|, within ``tol``) and the A, B pairings are
    returned: they are equal in exact arithmetic and do not carry the
    rounding of a large Phi.
    """
    m = metric_kind(metric)
    Fx, Fy = sample.Fx, sample.Fy
    if m.tag == "Killing" and sample.A is not None:
        if check_invariance:
            dev = conjugation_deviation(sample)
            if dev > tol:
                raise ValueError(f"Killing form not conjugation invariant: deviation {dev:.3g}")
        A, B = sample.A, sample.B
        form = FundamentalForm(inner(m, A, A), inner(m, A, B), inner(m, B, B))
        if check_invariance:
            form.terms["invariance"] = dev
        return form
    return FundamentalForm(inner(m, Fx, Fx), inner(m, Fx, Fy), inner(m, Fy, Fy))


def conjugation_deviation(sample):
    """Largest Killing-pairing difference between the Phi-frame and the A, B frame."""
    Fx, Fy, A, B = sample.Fx, sample.Fy, sample.A, sample.B
    worst = 0.0
    for (p, q), (r, s) in (((Fx, Fx), (A, A)), ((Fx, Fy), (A, B)), ((Fy, Fy), (B, B))):
        d = np.abs(inner(KILLING_METRIC, p, q) - inner(KILLING_METRIC, r, s))
        scale = np.maximum(1.0, p.norm() * q.norm())
        v = d / scale
        v = v[np.isfinite(v)]
        if v.size:
            worst = max(worst, float(np.max(v)))
    return worst


def gram_determinant(form: FundamentalForm):
    return form.E * form.G - form.F ** 2


def immersive(sample, metric=EUCLIDEAN, tol=GRAM_TOL):
    """Cells whose Gram determinant exceeds ``tol`` (NaN cells are False)."""
    gd = gram_determinant(fff_numeric(metric, sample, check_invariance=False))
    return np.where(np.isfinite(gd), gd, -np.inf) > tol


def tangent_rank(sample, tol=1e-9):
    """Rank of the 3x2 matrix [F_x F_y] per cell."""
    M = np.stack([sample.Fx.coords, sample.Fy.coords], axis=-1)
    ok = np.all(np.isfinite(M), axis=(-2, -1))
    M = np.where(ok[..., None, None], M, 0.0)
    sv = np.linalg.svd(M, compute_uv=False)
    return np.sum(sv > tol * np.maximum(1.0, sv[..., :1]), axis=-1)


# ------------------------------------------------------------ reports


@dataclass
class CoefficientReport:
    name: str
    max_rel: float
    classification: str          # match | scale | structural
    best_fit: float = float("nan")
    registered: bool = False
    detail: str = ""


@dataclass
class DiscrepancyReport:
    form: str
    rows: list = field(default_factory=list)
    a_exponent: float = float("nan")
    a_exponent_numeric: float = float("nan")

    @property
    def structural(self):
        return [r for r in self.rows if r.classification == "structural"]

    @property
    def unregistered(self):
        return [r for r in self.rows if r.classification != "match" and not r.registered]

    def lines(self):
        out = []
        for r in self.rows:
            extra = f" best_fit={r.best_fit:.9g}" if r.classification == "scale" else ""
            reg = " [registered]" if r.registered else ""
            out.append(f"{self.form} {r.name}: {r.classification} max_rel={r.max_rel:.3g}{extra}{reg}")
        if not math.isnan(self.a_exponent):
            out.append(f"{self.form} a-exponent printed={self.a_exponent:.6g} numeric={self.a_exponent_numeric:.6g}")
        return out


def classify(numeric, closed, tol=MATCH_TOL):
    """(max relative deviation, classification, best-fit constant).

    Deviations are relative to the largest |numeric| on the grid, so values
    crossing zero do not inflate them. A pure scale mismatch is detected by
    the least-squares constant c with numeric ~ c closed.
    """
    n = np.asarray(numeric).ravel()
    c = np.asarray(closed).ravel()
    ok = np.isfinite(n) & np.isfinite(c)
    n, c = n[ok], c[ok]
    scale = max(float(np.max(np.abs(n))) if n.size else 0.0, 1e-300)
    dev = float(np.max(np.abs(n - c))) / scale if n.size else 0.0
    if np.max(np.abs(n), initial=0.0) < 1e-12 and np.max(np.abs(c), initial=0.0) < 1e-12:
        return 0.0, "match", 1.0
    if dev < tol:
        return dev, "match", 1.0
    cc = np.vdot(c, c)
    if abs(cc) == 0:
        return dev, "structural", float("nan")
    fit = np.vdot(c, n) / cc
    resid = float(np.max(np.abs(n - fit * c))) / scale
    if resid < tol:
        return dev, "scale", complex(fit).real if abs(complex(fit).imag) < 1e-12 * abs(fit) else fit
    return dev, "structural", float("nan")


def killing_report(family, model, sol, sp, xs, ys, a=1.0, b=1.0):
    """Compare printed Killing forms (``model`` general/jacobi/weierstrass) with numerics."""
    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    fr = Frame(sol, sp, X, Y)

    def numeric(scale):
        if family == "ST":
            s = f_sym_tafel(sol, sp, scale, X, Y, frame=fr)
        else:
            s = f_q1(sol, sp, scale, X, Y, frame=fr)
        return fff_numeric(KILLING_METRIC, s)

    def closed(scale):
        ctx = FormContext.from_jet(sol.potential, sp.lam, fr.jet, **sol.params)
        kw = {"a": scale} if family == "ST" else {"b": scale}
        return fff_closed(KILLING_METRIC, family, model, ctx, **kw)

    num1, cl1 = numeric(1.0), closed(1.0)
    form = f"killing/{model}/{family}"
    rep = DiscrepancyReport(form)
    mask = fr.mask
    for name, nv, cv in (("dx2", num1.E, cl1.E), ("dxdy", 2 * num1.F, 2 * cl1.F), ("dy2", num1.G, cl1.G)):
        dev, cls, fit = classify(np.where(mask, nv, np.nan), np.where(mask, cv, np.nan))
        rep.rows.append(CoefficientReport(name, dev, cls, fit, registered(form, name)))
    # scaling exponent of the printed form in a (or b), from two scales
    num2, cl2 = numeric(2.0), closed(2.0)
    rep.a_exponent = _exponent(cl1, cl2, mask)
    rep.a_exponent_numeric = _exponent(num1, num2, mask)
    return rep


def _exponent(f1, f2, mask):
    vals = []
    for p, q in ((f1.F, f2.F), (f1.G, f2.G)):
        p = np.asarray(p)[mask]
        q = np.asarray(q)[mask]
        good = np.abs(p) > 1e-12
        if np.any(good):
            vals.append(np.median(np.log2(np.abs(q[good] / p[good]))))
    return float(max(vals)) if vals else float("nan")


# ---------------------------------------------------- Euclidean modes

MODES = (-4, -2, 0, 2, 4)


def _mode_samples(sp, theta, n=9):
    """y offsets giving well-conditioned mode fits at a point with phase theta."""
    s = abs(sp.sqrt_g)
    if sp.g > 0:
        t = np.linspace(-0.6, 0.6, n)
    else:
        t = np.pi * np.arange(n) / n
    return t / s - theta


def euclidean_modes(family, sol, sp, xs, Q=None, n=9):
    """Numeric Psi-mode coefficients of the Euclidean components at each x.

    Masked abscissae are dropped. Returns {component: array (n_usable, 5)}
    for the modes Psi_+^n, n in (-4, -2, 0, 2, 4), fitted by least squares
    over ``n`` values of y.
    """
    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    xs = np.asarray(xs, float)
    xs = xs[grid_mask(sol, sp, xs)]
    if xs.size == 0:
        raise EmptyGridError("every abscissa is masked")
    fr0 = Frame(sol, sp, xs, np.zeros_like(xs))
    theta = np.log(fr0.wf.psi.psi_plus).real / max(abs(sp.sqrt_g), 1e-300)
    if sp.g < 0:
        theta = np.angle(fr0.wf.psi.psi_plus) / abs(sp.sqrt_g)
    Y = np.stack([_mode_samples(sp, th, n) for th in theta])
    X = np.repeat(xs[:, None], n, axis=1)
    fr = Frame(sol, sp, X, Y, mask=np.ones(X.shape, dtype=bool))
    A, B = _fields(family, sol, fr, Q)
    Fx, Fy = fr.conj(A), fr.conj(B)
    comps = {"xx": inner(EUCLIDEAN, Fx, Fx), "xy": inner(EUCLIDEAN, Fx, Fy), "yy": inner(EUCLIDEAN, Fy, Fy)}
    P = fr.wf.psi.psi_plus
    V = np.stack([P ** k for k in MODES], axis=-1)          # (nx, n, 5)
    out = {}
    for key, val in comps.items():
        coef = np.empty((len(xs), len(MODES)), dtype=complex)
        for i in range(len(xs)):
            coef[i] = np.linalg.lstsq(V[i], val[i].astype(complex), rcond=None)[0]
        out[key] = coef
    return out, fr0


def _fields(family, sol, fr, Q):
    ent = fr.ent
    if family == "ST":
        return ent.dL_dlam(), ent.dM_dlam()
    if family == "Ux":
        return ent.DxL(), ent.DxM()
    if family == "Q":
        return prolonged_lax(Q, sol, ent, fr.jet)
    raise ValueError(f"unknown family {family!r}")


def euclidean_report(family, sol, sp, xs, Q=None):
    """Mode-by-mode comparison of printed Euclidean components with numerics."""
    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    modes, fr0 = euclidean_modes(family, sol, sp, xs, Q)
    qv = Q.values(sol, fr0.jet) if (family == "Q" and Q is not None) else None
    ctx = FormContext.from_jet(sol.potential, sp.lam, fr0.jet, qvalues=qv)
    reports = []
    for comp in ("xx", "xy", "yy"):
        form = f"euclid/{family}/{comp}"
        terms = euclidean_printed(ctx, family, comp)
        total = sum(terms.values(), start=PsiPoly())
        rep = DiscrepancyReport(form)
        for j, k in enumerate(MODES):
            nv = modes[comp][:, j]
            cv = np.broadcast_to(np.asarray(total.coeff(k), dtype=complex), nv.shape)
            dev, cls, fit = classify(nv, cv)
            owners = [name for name, t in terms.items() if np.any(np.abs(np.asarray(t.coeff(k))) > 0)]
            rep.rows.append(CoefficientReport(f"mode{k}", dev, cls, fit, registered(form, f"mode{k}"),
                                              detail="terms: " + ",".join(owners)))
        reports.append(rep)
    return reports


def discrepancy_report(metric, family, model, sol, sp, xs, ys=None, a=1.0, b=1.0, Q=None):
    """Killing: per-coefficient report for ``model``; Euclidean: per-mode reports."""
    m = metric_kind(metric)
    if m.tag == "Killing":
        return killing_report(family, model, sol, sp, xs, ys, a=a, b=b)
    return euclidean_report(family, sol, sp, xs, Q=Q)


__all__ = [
    "MetricKind", "EUCLIDEAN", "KILLING_METRIC", "metric_kind", "inner", "fff_numeric",
    "conjugation_deviation", "gram_determinant", "immersive", "tangent_rank", "classify",
    "killing_report", "euclidean_modes", "euclidean_report", "discrepancy_report",
    "CoefficientReport", "DiscrepancyReport",
]
