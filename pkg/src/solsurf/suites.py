"""Verification suites run by ``solsurf verify``.

Each suite returns a list of :class:`Check` records. A check passes when its
value is below its tolerance; a suite passes when all of its checks do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_forms import FormContext, UnsupportedFormError, fff_closed
from .lax import SpectralPoint, lax_residual
from .metrics import KILLING_METRIC, classify, conjugation_deviation, discrepancy_report, fff_numeric
from .surface import (Frame, GaugeField, ab_compatibility_residual, f_q1, f_sym_tafel, gauge_fields,
                      grid_mask, integrate_surface, mixed_partial_residual, q1_fields, sym_tafel_fields)
from .symmetry import (Characteristic, CharacteristicError, Q2Integral, compare_defect_pattern,
                       determining_residual, lsp_symmetry_defect, printed_defect_pattern)
from .sl2 import det2
from .wavefunction import lsp_residual, wave_function

SUITES = ("lax", "lsp", "symmetry", "compat", "fff")

TOL = {
    "lax": 1e-9,
    "lsp": 1e-9,
    "det": 1e-10,
    "lsp_fd": 1e-7,
    "determining": 1e-8,
    "q1_defect": 1e-9,
    "pattern": 1e-8,
    "entry21": 1e-10,
    "compat": 1e-6,
    "mixed": 5e-6,
    "integrate": 1e-6,
    "invariance": 1e-10,
    "null_e": 1e-9,
    "closed": 1e-6,
}


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tol: float
    note: str = ""

    @property
    def passed(self):
        return bool(math.isfinite(self.value) and self.value < self.tol)

    def line(self):
        status = "pass" if self.passed else "FAIL"
        tail = f"\t{self.note}" if self.note else ""
        return f"{self.suite}\t{self.name}\t{self.value:.3e}\t{self.tol:.0e}\t{status}{tail}"

    def as_dict(self):
        return {"suite": self.suite, "name": self.name, "value": self.value, "tol": self.tol,
                "passed": self.passed, "note": self.note}


def _usable(sol, sp, xs):
    xs = np.asarray(xs, float)
    return xs[grid_mask(sol, sp, xs)]


def lax_suite(sol, sp, xs):
    xs = _usable(sol, sp, xs)
    r = lax_residual(sol.potential, sp, sol, xs)
    return [Check("lax", "max |D_x M + [M, L]|", float(np.max(r)), TOL["lax"], f"{len(xs)} points")]


def _resample(xs, n):
    return np.linspace(np.min(xs), np.max(xs), n)


def lsp_suite(sol, sp, xs, ys, n=50):
    xs = _usable(sol, sp, _resample(xs, n))
    ys = _resample(ys, n)
    rep = lsp_residual(sol, sp, xs, ys)
    out = [Check("lsp", f"de{i + 1}", v, TOL["lsp"]) for i, v in enumerate(rep.max_de)]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    m = wave_function(sol, sp, X, Y).matrix
    # det = ad - bc cancels products of size |ad| + |bc|, which is large when g >> 0
    size = np.abs(m[..., 0, 0] * m[..., 1, 1]) + np.abs(m[..., 0, 1] * m[..., 1, 0])
    det_rel = float(np.max(np.abs(det2(m) - 1.0) / np.maximum(1.0, size)))
    note = "" if rep.max_det_dev == det_rel else f"absolute {rep.max_det_dev:.1e}; relative to |ad| + |bc|"
    out.append(Check("lsp", "det Phi - 1", det_rel, TOL["det"], note))
    out.append(Check("lsp", "x-LSP finite difference", rep.max_fd_x, TOL["lsp_fd"]))
    return out


def q2_window(sol, xs):
    """(base, window) for Q2: the base is the point of xs farthest in u from a
    turning point, the window the admissible interval around it."""
    probe = Q2Integral(sol, base=float(np.mean(xs)), margin=0.0)
    u = np.asarray(sol.jet(xs).u)
    dist = np.min(np.abs(u[:, None] - probe.turning[None, :]), axis=1) if probe.turning.size else np.ones_like(u)
    base = float(xs[int(np.argmax(dist))])
    integ = Q2Integral(sol, base=base)
    win = integ.admissible_window(float(np.min(xs)), float(np.max(xs)))
    if win is None:
        return base, None
    return base, np.linspace(win[0], win[1], len(xs))


def symmetry_suite(sol, sp, xs, ys, n=50):
    pot = sol.potential
    xs = _usable(sol, sp, _resample(xs, n))
    ys = _resample(ys, n)
    out = []
    chars = [("Q1", Characteristic.q1(), xs)]
    if sol.kind == "dn":
        base, xw = q2_window(sol, xs)
        if xw is not None:
            chars.append(("Q2", Characteristic.q2(sol, base=base), xw))
    try:
        chars.append(("Q3", Characteristic.q3(pot), xs))
    except CharacteristicError:
        pass
    for name, Q, x in chars:
        out.append(Check("symmetry", f"{name} determining equation",
                         float(np.max(determining_residual(Q, pot, sol, x))), TOL["determining"]))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    wf = wave_function(sol, sp, X, Y)
    d = lsp_symmetry_defect(Characteristic.q1(), sol, sp, X, Y, wf=wf)
    worst = float(max(np.max(np.abs(d.x_defect)), np.max(np.abs(d.y_defect))))
    # the defect carries Psi factors, so it is measured against the size of Phi
    size = max(1.0, float(np.max(np.abs(wf.matrix))))
    out.append(Check("symmetry", "Q1 LSP defect", worst / size, TOL["q1_defect"],
                     "" if size == 1.0 else f"absolute {worst:.1e}; relative to max |Phi|"))
    for name, Q, x in chars[1:]:
        Xq, Yq = np.meshgrid(x, ys, indexing="ij")
        wq = wave_function(sol, sp, Xq, Yq)
        px, py = printed_defect_pattern(Q, sol, sp, Xq, Yq, wf=wq)
        for dep in ("u", "x"):
            d = lsp_symmetry_defect(Q, sol, sp, Xq, Yq, wf=wq, phase_dependence=dep)
            eqs = (("x", d.x_defect, px), ("y", d.y_defect, py)) if dep == "u" else (("x", d.x_defect, px),)
            for eq, comp, pr in eqs:
                c = compare_defect_pattern(comp, pr)
                bad = ",".join(c["mismatched_entries"]) or "none"
                tag = f"{name} {eq}-defect (phase in {dep})" if eq == "x" else f"{name} y-defect"
                out.append(Check("symmetry", f"{tag} vs printed pattern", c["max_rel"], TOL["pattern"],
                                 f"mismatched entries: {bad}"))
                out.append(Check("symmetry", f"{tag} entry (2,1)", c["entry21"], TOL["entry21"]))
    return out


def _compat_grid(sol, sp, xs, ys, n=15):
    xs = _usable(sol, sp, np.linspace(np.min(xs), np.max(xs), n))
    return xs, np.linspace(np.min(ys), np.max(ys), n)


def compat_suite(sol, sp, xs, ys):
    out = []
    cx, cy = _compat_grid(sol, sp, xs, ys)
    pairs = (("Sym-Tafel", sym_tafel_fields(1.0)), ("Q1", q1_fields(1.0)),
             ("gauge e3", gauge_fields(GaugeField.constant(0.0, 0.0, 1.0), sol, sp)))
    for name, (A, B) in pairs:
        out.append(Check("compat", f"A/B compatibility {name}",
                         ab_compatibility_residual(A, B, sol, sp, cx, cy, relative=True), TOL["compat"],
                         "relative to max(1, term size)"))
    builders = (("F^ST", lambda X, Y: f_sym_tafel(sol, sp, 1.0, X, Y)),
                ("F^Q1", lambda X, Y: f_q1(sol, sp, 1.0, X, Y)),
                ("F^S e3", lambda X, Y: _gauge_sample(sol, sp, X, Y)))
    for name, bld in builders:
        out.append(Check("compat", f"mixed partials {name}", mixed_partial_residual(bld, cx, cy), TOL["mixed"]))
    out.append(_integration_check(sol, sp, cx, cy))
    return out


def _gauge_sample(sol, sp, X, Y):
    from .surface import f_gauge
    return f_gauge(sol, sp, GaugeField.constant(0.0, 0.0, 1.0), X, Y)


def _integration_check(sol, sp, xs, ys, n=21, span=2.0):
    """Q1 surface rebuilt from its tangents against b Phi^-1 L Phi on a pole-free block."""
    bx, by = integration_block(sol, sp, xs, ys, n, span)
    X, Y = np.meshgrid(bx, by, indexing="ij")
    closed = f_q1(sol, sp, 1.0, X, Y)
    integ = integrate_surface(Characteristic.q1(), sol, sp, bx, by, F0=closed.F.coords[0, 0])
    dev = np.max(np.abs(integ.F.coords - closed.F.coords)) / max(1.0, np.max(np.abs(closed.F.coords)))
    return Check("compat", "integrated Q1 vs closed form", float(dev), TOL["integrate"],
                 f"closure {integ.meta['closure']:.1e} on x [{bx[0]:.3g}, {bx[-1]:.3g}]")


def integration_block(sol, sp, xs, ys, n=21, span=2.0):
    """n x n block of width <= span centred in the longest unmasked run of x.

    Integration paths may not cross a mask, so the run is found on a fine
    grid and the block keeps a 10% margin from its ends.
    """
    fine = np.linspace(np.min(xs), np.max(xs), 4001)
    ok = np.append(grid_mask(sol, sp, fine), False)
    best, start = (0, 0), None
    for i, v in enumerate(ok):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    lo, hi = fine[best[0]], fine[best[1] - 1]
    half = min(0.5 * span, 0.4 * (hi - lo))
    mid = 0.5 * (lo + hi)
    yc = 0.5 * (np.min(ys) + np.max(ys))
    yh = min(0.5 * span, 0.5 * (np.max(ys) - np.min(ys)))
    return np.linspace(mid - half, mid + half, n), np.linspace(yc - yh, yc + yh, n)


def fff_suite(sol, sp, xs, ys, n_random=1000, seed=0):
    out = []
    cx, cy = _compat_grid(sol, sp, xs, ys)
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    fr = Frame(sol, sp, X, Y)
    samples = {"ST": f_sym_tafel(sol, sp, 1.0, X, Y, frame=fr), "Ux": f_q1(sol, sp, 1.0, X, Y, frame=fr)}
    rng = np.random.default_rng(seed)
    rx = rng.uniform(np.min(cx), np.max(cx), n_random)
    ry = rng.uniform(np.min(cy), np.max(cy), n_random)
    rs = f_sym_tafel(sol, sp, 1.0, rx, ry)
    out.append(Check("fff", "Killing conjugation invariance", conjugation_deviation(rs), TOL["invariance"],
                     f"{int(np.sum(rs.mask))} random points"))
    ctx = FormContext.from_jet(sol.potential, sp.lam, fr.jet, **sol.params)
    for fam, s in samples.items():
        num = fff_numeric(KILLING_METRIC, s)
        cl = fff_closed(KILLING_METRIC, fam, "general", ctx)
        worst = 0.0
        for nv, cv in ((num.E, cl.E), (num.F, cl.F), (num.G, cl.G)):
            dev, _, _ = classify(np.where(fr.mask, nv, np.nan), np.where(fr.mask, cv, np.nan))
            worst = max(worst, dev)
        out.append(Check("fff", f"general Killing form {fam}", worst, TOL["closed"]))
        if sol.kind == "wp":
            out.append(Check("fff", f"null x-tangent {fam} |E|", float(np.nanmax(np.abs(num.E))), TOL["null_e"]))
    model = "weierstrass" if sol.kind == "wp" else "jacobi"
    reports = []
    for fam in ("ST", "Ux"):
        try:
            reports.append(discrepancy_report("Killing", fam, model, sol, sp, cx, cy))
        except UnsupportedFormError:
            pass
        reports.extend(discrepancy_report("Euclidean", fam, None, sol, sp, cx))
    unreg = [f"{r.form}:{row.name}" for r in reports for row in r.unregistered]
    n_struct = sum(len(r.structural) for r in reports)
    out.append(Check("fff", "unregistered printed-form mismatches", float(len(unreg)), 0.5,
                     f"{n_struct} registered mismatches" + (f"; unregistered: {', '.join(unreg)}" if unreg else "")))
    return out


def run_suites(names, sol, sp, xs, ys):
    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    table = {"lax": lambda: lax_suite(sol, sp, xs), "lsp": lambda: lsp_suite(sol, sp, xs, ys),
             "symmetry": lambda: symmetry_suite(sol, sp, xs, ys), "compat": lambda: compat_suite(sol, sp, xs, ys),
             "fff": lambda: fff_suite(sol, sp, xs, ys)}
    checks = []
    for name in names:
        checks.extend(table[name]())
    return checks
