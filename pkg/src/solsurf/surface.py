"""Immersion functions F: R^2 -> sl(2) built from the wave function.

Three families are provided:

    F^ST  = a Phi^-1 d_lambda Phi     tangents  a Phi^-1 (d_lambda L) Phi,  a Phi^-1 (d_lambda M) Phi
    F^S   = Phi^-1 S Phi               tangents  Phi^-1 (D_x S + [S, L]) Phi,  Phi^-1 (d_y S + [S, M]) Phi
    F^Q1  = b Phi^-1 L Phi             tangents  b Phi^-1 (D_x L) Phi,  b Phi^-1 (D_x M) Phi

and, for any characteristic Q, the tangent pair Phi^-1 (pr v_Q L) Phi,
Phi^-1 (pr v_Q M) Phi, which :func:`integrate_surface` turns into a surface
by line integration when no closed form exists.

Samples carry a validity mask: cells with |u + lambda| < ``W_MARGIN`` or
within ``POLE_STRIP`` of a pole of u are masked and hold NaN.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lax import LaxEntries, SpectralPoint
from .sl2 import Sl2Element, adjugate, bracket
from .symmetry import Characteristic
from .wavefunction import PhaseAccumulator, wave_function

W_MARGIN = 0.05
POLE_STRIP = 0.1
REAL_TOL = 1e-8
LAMBDA_STEP = 1e-5


class CompatibilityError(RuntimeError):
    """Line integrals along the two paths disagree: the tangent field is not closed."""


class SpectralStepError(ValueError):
    """The lambda-difference stencil cannot avoid a sign change of g."""


class EmptyGridError(ValueError):
    """Every cell of the grid is masked."""


@dataclass
class SurfaceParams:
    """Coefficients of a(lambda) Phi^-1 d_lambda Phi + Phi^-1 S Phi + b Phi^-1 D_x Phi."""

    lam: float
    a: float = 0.0
    b: float = 0.0
    gauge: Optional["GaugeField"] = None

    def validate(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and math.isfinite(self.lam)):
            raise ValueError("a, b and lambda must be finite")
        if self.a == 0.0 and self.b == 0.0 and self.gauge is None:
            raise ValueError("at least one of a, b, S must be active")
        return self


@dataclass
class SurfaceSample:
    """F and its tangents on a grid; ``A`` and ``B`` are the un-conjugated tangent fields."""

    x: np.ndarray
    y: np.ndarray
    F: Sl2Element
    Fx: Sl2Element
    Fy: Sl2Element
    mask: np.ndarray
    A: Optional[Sl2Element] = None
    B: Optional[Sl2Element] = None
    family: str = ""
    meta: dict = field(default_factory=dict)

    def __add__(self, other):
        def add(p, q):
            if p is None or q is None:
                return None
            return p + q
        return SurfaceSample(self.x, self.y, self.F + other.F, self.Fx + other.Fx, self.Fy + other.Fy,
                             self.mask & other.mask, add(self.A, other.A), add(self.B, other.B),
                             f"{self.family}+{other.family}", {**self.meta, **other.meta})


# --------------------------------------------------------------- frame


def grid_mask(sol, sp, X, w_margin=W_MARGIN, pole_strip=POLE_STRIP):
    """True where the sample is usable: |u + lambda| >= w_margin and away from poles."""
    X = np.asarray(X, dtype=float)
    lam = sp.lam if isinstance(sp, SpectralPoint) else float(sp)
    ok = np.ones(X.shape, dtype=bool)
    if X.size == 0:
        return ok
    poles = sol.pole_locations(float(X.min()) - pole_strip, float(X.max()) + pole_strip)
    if len(poles):
        d = np.min(np.abs(X[..., None] - np.asarray(poles)), axis=-1)
        ok &= d >= pole_strip
    with np.errstate(all="ignore"):
        u = np.asarray(sol.jet(np.where(ok, X, _safe_x(sol, X)), pole_radius=0.0).u)
    ok &= np.abs(u + lam) >= w_margin
    return ok


def _safe_x(sol, X):
    # any non-pole abscissa; only used to fill masked cells before evaluation
    return np.full(np.shape(X), float(sol.x_ref))


class Frame:
    """Wave function, its inverse, jets and Lax entries on a grid.

    Masked cells are evaluated at the reference point and overwritten with
    NaN on output, so no pole or branch point is ever touched.
    """

    def __init__(self, sol, sp, X, Y, mask=None, phase_mode="pv"):
        if not isinstance(sp, SpectralPoint):
            sp = SpectralPoint.make(sol.potential, sp)
        self.sol, self.sp = sol, sp
        X, Y = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
        self.X, self.Y = X, Y
        self.mask = grid_mask(sol, sp, X) if mask is None else np.asarray(mask, dtype=bool)
        self.Xe = np.where(self.mask, X, _safe_x(sol, X))
        self.phase_mode = phase_mode
        self.jet = sol.jet(self.Xe, pole_radius=0.0)
        self.ent = LaxEntries(sol.potential, sp, self.jet, guard=0)
        self.wf = self.wave(sp)
        self.phi = self.wf.matrix
        # det Phi = 1 by normalization; the adjugate avoids dividing by a
        # determinant that loses digits when Phi is nearly rank one
        self.phi_inv = adjugate(self.phi)

    def wave(self, sp):
        phase = PhaseAccumulator(self.sol, sp, mode=self.phase_mode).phase(self.Xe)
        return wave_function(self.sol, sp, self.Xe, self.Y, phase=phase, jet=self.jet)

    def conj(self, elem, what="conjugated field"):
        """Phi^-1 X Phi as a real element; NaN on masked cells."""
        m = self.phi_inv @ elem.matrix() @ self.phi
        return self._finish(Sl2Element.from_matrix(m, check=False), what)

    def _finish(self, elem, what):
        c = elem.coords
        if np.iscomplexobj(c):
            scale = np.maximum(1.0, np.max(np.abs(c), axis=-1))
            im = np.max(np.abs(c.imag), axis=-1) / scale
            im = np.where(self.mask, im, 0.0)
            if im.size and np.max(im) > REAL_TOL:
                raise ValueError(f"{what} is not real: relative imaginary part {np.max(im):.3g}")
            c = c.real.copy()
        else:
            c = c.copy()
        c[~self.mask] = np.nan
        return Sl2Element(c)

    def raw(self, elem):
        """Un-conjugated field with masked cells set to NaN."""
        c = np.array(np.broadcast_to(elem.coords, self.X.shape + (3,)), dtype=float)
        c[~self.mask] = np.nan
        return Sl2Element(c)

    def rate(self):
        """Local growth rate of Phi in x and y, used to size difference steps."""
        w = np.abs(self.ent.w)
        sg = abs(self.sp.sqrt_g)
        return sg * (1.0 + 0.5 / w) + (np.abs(self.jet.u_x) + 1.0) / w + 1.0

    def sample(self, F, A, B, family, **meta):
        Fx = self.conj(A, f"{family} x-tangent")
        Fy = self.conj(B, f"{family} y-tangent")
        meta = dict(meta, rate=np.where(self.mask, self.rate(), np.nan))
        return SurfaceSample(self.X, self.Y, F, Fx, Fy, self.mask.copy(), self.raw(A), self.raw(B),
                             family, meta)


def _frame(sol, sp, x, y, frame):
    if frame is not None:
        return frame
    return Frame(sol, sp, x, y)


# --------------------------------------------------------- Sym-Tafel


def d_lambda_phi(frame: Frame, h=None, shrink=3):
    """d Phi / d lambda by central differences with one Richardson level.

    The step is h = 1e-5 max(1, |lambda|); it is divided by 10 (at most
    ``shrink`` times) while g changes sign inside the stencil.
    """
    sp = frame.sp
    pot = frame.sol.potential
    lam = sp.lam
    h = LAMBDA_STEP * max(1.0, abs(lam)) if h is None else float(h)
    for _ in range(shrink + 1):
        gs = [pot.discriminate(lam + k * h) for k in (-2, -1, 1, 2)]
        if all(np.sign(gv) == np.sign(sp.g) and gv != 0 for gv in gs):
            break
        h /= 10.0
    else:
        raise SpectralStepError(f"g changes sign within {2 * h:.3g} of lambda = {lam!r}")
    mats = {}
    for k in (-2, -1, 1, 2):
        spk = SpectralPoint.make(pot, lam + k * h)
        mats[k] = frame.wave(spk).matrix
    d1 = (mats[1] - mats[-1]) / (2 * h)
    d2 = (mats[2] - mats[-2]) / (4 * h)
    return (4 * d1 - d2) / 3.0, h


def f_sym_tafel(sol, sp, params, x, y, frame=None):
    """F^ST = a Phi^-1 d_lambda Phi with tangents a Phi^-1 (d_lambda L, d_lambda M) Phi.

    ``params`` is a :class:`SurfaceParams` or the scale a itself.
    """
    a = params.a if isinstance(params, SurfaceParams) else float(params)
    fr = _frame(sol, sp, x, y, frame)
    dphi, h = d_lambda_phi(fr)
    # Phi^-1 d_lambda Phi is traceless; the trace left by rounding is dropped
    F = fr._finish(Sl2Element.from_matrix(fr.phi_inv @ dphi, check=False), "F^ST") * a
    A = fr.ent.dL_dlam() * a
    B = fr.ent.dM_dlam() * a
    return fr.sample(F, A, B, "ST", a=a, lambda_step=h)


# ------------------------------------------------------------- gauge


class GaugeField:
    """Gauge term S(lambda, y, [u]) with its derivatives D_x S and d_y S.

    ``func(ent, jet, y)`` returns S as an :class:`Sl2Element`; ``dx`` and
    ``dy`` (same signature) give D_x S and d_y S. When a derivative is not
    supplied it is taken by a central difference (along the solution for
    D_x, in y for d_y), with step ``h``.
    """

    def __init__(self, func, dx=None, dy=None, name="S", h=1e-4):
        self.func, self.dx, self.dy, self.name, self.h = func, dx, dy, name, h

    @classmethod
    def constant(cls, s1, s2, s3):
        c = np.array([s1, s2, s3], dtype=float)

        def func(ent, jet, y):
            return Sl2Element(np.broadcast_to(c, np.shape(ent.w) + (3,)).copy())

        def zero(ent, jet, y):
            return Sl2Element.zeros(np.shape(ent.w))
        return cls(func, zero, zero, name=f"const({s1},{s2},{s3})")

    @classmethod
    def y_profile(cls, s, ds, direction):
        """S = s(y) X for a fixed element X."""
        c = direction.coords if isinstance(direction, Sl2Element) else np.asarray(direction, float)

        def func(ent, jet, y):
            return Sl2Element(np.asarray(s(y))[..., None] * c) + Sl2Element.zeros(np.shape(ent.w))

        def dx(ent, jet, y):
            return Sl2Element.zeros(np.shape(ent.w))

        def dy(ent, jet, y):
            return Sl2Element(np.asarray(ds(y))[..., None] * c) + Sl2Element.zeros(np.shape(ent.w))
        return cls(func, dx, dy, name="s(y)X")

    @classmethod
    def lax_l(cls):
        """S = L, with D_x S = D_x L and d_y S = 0."""
        return cls(lambda ent, jet, y: ent.L(), lambda ent, jet, y: ent.DxL(),
                   lambda ent, jet, y: Sl2Element.zeros(np.shape(ent.w)), name="L")

    def values(self, sol, sp, X, Y, ent=None, jet=None):
        if jet is None:
            jet = sol.jet(X, pole_radius=0.0)
        if ent is None:
            ent = LaxEntries(sol.potential, sp, jet, guard=0)
        S = self.func(ent, jet, Y)
        if self.dx is not None:
            Sx = self.dx(ent, jet, Y)
        else:
            Sx = _central(lambda t: self.func(*_ent_at(sol, sp, X + t), Y), self.h)
        if self.dy is not None:
            Sy = self.dy(ent, jet, Y)
        else:
            Sy = _central(lambda t: self.func(ent, jet, Y + t), self.h)
        return S, Sx, Sy


def _ent_at(sol, sp, X):
    jet = sol.jet(X, pole_radius=0.0)
    return LaxEntries(sol.potential, sp, jet, guard=0), jet


def _central(fn, h):
    """Fourth-order central difference of an Sl2Element-valued function at 0."""
    d1 = (fn(h).coords - fn(-h).coords) / (2 * h)
    d2 = (fn(2 * h).coords - fn(-2 * h).coords) / (4 * h)
    return Sl2Element((4 * d1 - d2) / 3.0)


def f_gauge(sol, sp, S: GaugeField, x, y, frame=None):
    """F^S = Phi^-1 S Phi with tangents Phi^-1 (D_x S + [S, L]) Phi and Phi^-1 (d_y S + [S, M]) Phi."""
    fr = _frame(sol, sp, x, y, frame)
    Sv, Sx, Sy = S.values(sol, fr.sp, fr.Xe, fr.Y, fr.ent, fr.jet)
    F = fr.conj(Sv, "F^S")
    A = Sx + bracket(Sv, fr.ent.L())
    B = Sy + bracket(Sv, fr.ent.M())
    return fr.sample(F, A, B, "S", gauge=S.name)


# ----------------------------------------------------------- Q1 / F^Q


def f_q1(sol, sp, b, x, y, frame=None):
    """F^{u_x} = b Phi^-1 D_x Phi = b Phi^-1 L Phi with tangents b Phi^-1 (D_x L, D_x M) Phi."""
    b = b.b if isinstance(b, SurfaceParams) else float(b)
    fr = _frame(sol, sp, x, y, frame)
    F = fr.conj(fr.ent.L() * b, "F^Q1")
    return fr.sample(F, fr.ent.DxL() * b, fr.ent.DxM() * b, "Q1", b=b)


def prolonged_lax(Q: Characteristic, sol, ent: LaxEntries, jet):
    """(pr v_Q L, pr v_Q M) = (L_u Q, M_u Q + M_{u_x} D_x Q)."""
    qv = Q.values(sol, jet)
    A = ent.dL_du() * qv.Q
    B = ent.dM_du() * qv.Q + ent.dM_dux() * qv.Qx
    return A, B


def fq_tangents(Q: Characteristic, sol, sp, x, y, frame=None):
    """Tangent pair Phi^-1 (pr v_Q L) Phi, Phi^-1 (pr v_Q M) Phi."""
    fr = _frame(sol, sp, x, y, frame)
    A, B = prolonged_lax(Q, sol, fr.ent, fr.jet)
    return fr.conj(A, "F^Q x-tangent"), fr.conj(B, "F^Q y-tangent")


def build_surface(sol, sp, params: SurfaceParams, x, y):
    """Sum of the active Sym-Tafel, gauge and Q1 terms on one shared frame."""
    params.validate()
    fr = Frame(sol, sp, x, y)
    parts = []
    if params.a != 0.0:
        parts.append(f_sym_tafel(sol, sp, params.a, x, y, frame=fr))
    if params.gauge is not None:
        parts.append(f_gauge(sol, sp, params.gauge, x, y, frame=fr))
    if params.b != 0.0:
        parts.append(f_q1(sol, sp, params.b, x, y, frame=fr))
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


# ------------------------------------------------------- integration


def _cum_simpson(T, h, per_cell):
    """Cumulative composite Simpson integral at every ``per_cell``-th node along axis 0.

    T has 1 + n * per_cell samples spaced h (per_cell even).
    """
    pair = h / 3.0 * (T[0:-1:2] + 4.0 * T[1::2] + T[2::2])
    half = per_cell // 2
    cells = pair.reshape((-1, half) + pair.shape[1:]).sum(axis=1)
    zero = np.zeros((1,) + cells.shape[1:], dtype=cells.dtype)
    return np.concatenate([zero, np.cumsum(cells, axis=0)])


def _fine(v, per_cell):
    v = np.asarray(v, dtype=float)
    t = np.linspace(0.0, 1.0, per_cell + 1)[:-1]
    inner = (v[:-1, None] + np.diff(v)[:, None] * t[None, :]).ravel()
    return np.concatenate([inner, v[-1:]])


def _uniform(v):
    d = np.diff(v)
    if len(v) < 2 or np.any(np.abs(d - d[0]) > 1e-9 * max(1.0, abs(d[0]))):
        raise ValueError("integration grid must be uniform with at least two nodes")
    return d[0]


def tangent_field(Q, sol, sp):
    """(X, Y) -> (Fx, Fy, mask) for a characteristic, or a callable passed through."""
    if not isinstance(Q, Characteristic):
        return Q

    def field(X, Y):
        fr = Frame(sol, sp, X, Y)
        A, B = prolonged_lax(Q, sol, fr.ent, fr.jet)
        return fr.conj(A), fr.conj(B), fr.mask
    return field


def integrate_surface(Q, sol, sp, xs, ys, F0=None, substeps=None, closure_tol=1e-5):
    """Reconstruct F from its tangents on the grid xs x ys by line integration.

    Path one runs along y at x = xs[0], then along x on every row; path two
    runs along x at y = ys[0], then along y on every column. Along a line
    the tangent depends only on the position, so each RK4 step reduces to
    Simpson's rule with ``substeps`` Simpson pairs per grid cell. By default
    substeps is at least 8 and grows with the local rate of Phi so that
    rate * step stays below 0.05.
    F(xs[0], ys[0]) = F0 (default 0). The returned sample holds the
    path-one surface; ``meta["closure"]`` is the largest path disagreement
    relative to max(1, max |F| over the grid), and a disagreement above ``closure_tol``
    raises :class:`CompatibilityError`.
    """
    field = tangent_field(Q, sol, sp)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    hx, hy = _uniform(xs), _uniform(ys)
    if substeps is None:
        substeps = auto_substeps(Q, sol, sp, xs, ys, hx, hy)
    per = 2 * int(substeps)
    xf, yf = _fine(xs, per), _fine(ys, per)
    F0 = np.zeros(3) if F0 is None else np.asarray(getattr(F0, "coords", F0), dtype=float)

    def eval_field(X, Y, which):
        Fx, Fy, mask = field(X, Y)
        if not np.all(mask):
            raise ValueError("integration path crosses a masked cell (pole or |u + lambda| < margin)")
        return (Fx if which == "x" else Fy).coords

    # path one: first column along y, then rows along x
    col = eval_field(np.full_like(yf, xs[0]), yf, "y")
    F_col = F0 + _cum_simpson(col, hy / per, per)                      # (ny, 3)
    Xr, Yr = np.meshgrid(xf, ys, indexing="ij")
    rows = eval_field(Xr, Yr, "x")                                      # (nxf, ny, 3)
    F1 = F_col[None, :, :] + _cum_simpson(rows, hx / per, per)          # (nx, ny, 3)

    # path two: first row along x, then columns along y
    row = eval_field(xf, np.full_like(xf, ys[0]), "x")
    F_row = F0 + _cum_simpson(row, hx / per, per)                       # (nx, 3)
    Xc, Yc = np.meshgrid(xs, yf, indexing="ij")
    cols = eval_field(Xc, Yc, "y")                                      # (nx, nyf, 3)
    F2 = F_row[:, None, :] + np.moveaxis(_cum_simpson(np.moveaxis(cols, 1, 0), hy / per, per), 0, 1)

    # F can span many orders of magnitude when g > 0 is large; integration
    # error scales with the largest values met along the path, so the
    # disagreement is measured against the grid-wide magnitude
    scale = max(1.0, float(np.max(np.abs(F1))))
    closure = float(np.max(np.abs(F1 - F2)) / scale)
    if closure > closure_tol:
        raise CompatibilityError(f"path-dependent integral: transposed paths differ by {closure:.3g}")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Fx, Fy, mask = field(X, Y)
    kind = Q.kind if isinstance(Q, Characteristic) else "field"
    return SurfaceSample(X, Y, Sl2Element(F1), Fx, Fy, mask, family=f"int[{kind}]",
                         meta={"closure": closure, "transposed": Sl2Element(F2), "substeps": int(substeps)})


def auto_substeps(Q, sol, sp, xs, ys, hx, hy, target=0.05, minimum=8):
    """Simpson pairs per cell so that rate * (fine step) <= target."""
    if not isinstance(Q, Characteristic):
        return minimum
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    fr = Frame(sol, sp, X, Y)
    rate = float(np.max(np.where(fr.mask, fr.rate(), 0.0)))
    need = rate * max(hx, hy) / (2.0 * target)
    return max(minimum, int(math.ceil(need)))


# ------------------------------------------------------- residuals


def sym_tafel_fields(a=1.0):
    return (lambda ent, jet, Y: ent.dL_dlam() * a, lambda ent, jet, Y: ent.dM_dlam() * a)


def q1_fields(b=1.0):
    return (lambda ent, jet, Y: ent.DxL() * b, lambda ent, jet, Y: ent.DxM() * b)


def gauge_fields(S: GaugeField, sol, sp):
    def A(ent, jet, Y):
        Sv, Sx, _ = S.values(sol, sp, jet.x, Y, ent, jet)
        return Sx + bracket(Sv, ent.L())

    def B(ent, jet, Y):
        Sv, _, Sy = S.values(sol, sp, jet.x, Y, ent, jet)
        return Sy + bracket(Sv, ent.M())
    return A, B


def ab_compatibility_residual(A_field, B_field, sol, sp, xs, ys, h=1e-4, relative=False):
    """max |d_y A - D_x B + [A, M] + [L, B]| on the grid, derivatives by central differences.

    Fields are callables ``(ent, jet, Y) -> Sl2Element``. D_x moves along the
    solution, so it is the total derivative. With ``relative`` each cell is
    divided by max(1, largest of the four terms), which removes the
    difference-quotient error that grows with the field near a pole.
    """
    if not isinstance(sp, SpectralPoint):
        sp = SpectralPoint.make(sol.potential, sp)
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    ent, jet = _ent_at(sol, sp, X)
    A = A_field(ent, jet, Y)
    B = B_field(ent, jet, Y)
    dyA = _central(lambda t: A_field(ent, jet, Y + t), h)
    dxB = _central(lambda t: B_field(*_ent_at(sol, sp, X + t), Y), h)
    t1, t2 = bracket(A, ent.M()), bracket(ent.L(), B)
    res = (dyA - dxB + t1 + t2).norm()
    if relative:
        res = res / np.maximum.reduce([np.ones_like(res), dyA.norm(), dxB.norm(), t1.norm(), t2.norm()])
    return float(np.nanmax(res))


def _steps(centre, h):
    """Per-cell step min(h, 0.02 / rate) so that h * rate stays small."""
    rate = centre.meta.get("rate")
    if rate is None:
        return np.full(centre.x.shape, h)
    return np.minimum(h, 0.02 / np.where(np.isfinite(rate), rate, 1.0))


def mixed_partial_residual(builder: Callable, xs, ys, h=1e-3):
    """Largest |d_y F_x - d_x F_y| over the grid, relative to max(1, |F_x|, |F_y|).

    ``builder(X, Y)`` returns a :class:`SurfaceSample` with analytic tangents;
    the cross derivatives are fourth-order central differences of those
    tangents, with the step shrunk where Phi grows quickly. Cells whose
    stencil touches a mask are ignored.
    """
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    centre = builder(X, Y)
    h = _steps(centre, h)[..., None]
    offs = (-2 * h[..., 0], -h[..., 0], h[..., 0], 2 * h[..., 0])
    Xs = np.stack([X] * 4 + [X + o for o in offs])
    Ys = np.stack([Y + o for o in offs] + [Y] * 4)
    s = builder(Xs, Ys)
    fx = s.Fx.coords[:4]
    fy = s.Fy.coords[4:]
    dy = (8 * (fx[2] - fx[1]) - (fx[3] - fx[0])) / (12 * h)
    dx = (8 * (fy[2] - fy[1]) - (fy[3] - fy[0])) / (12 * h)
    scale = np.maximum(1.0, np.maximum(centre.Fx.norm(), centre.Fy.norm()))
    r = np.sqrt(np.sum((dy - dx) ** 2, axis=-1)) / scale
    ok = np.all(s.mask, axis=0) & centre.mask
    if not np.any(ok):
        raise EmptyGridError("no unmasked stencil on the grid")
    return float(np.max(r[ok]))


def tangent_fd_check(builder: Callable, X, Y, h=1e-3):
    """(x, y) deviations of finite-difference dF against the attached tangents.

    Fourth-order central differences of F with the step shrunk where Phi
    grows quickly; each deviation is relative to max(1, |tangent|) and
    maximized over unmasked cells.
    """
    X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
    centre = builder(X, Y)
    h = _steps(centre, h)
    offs = (-2 * h, -h, h, 2 * h)
    s = builder(np.stack([X + o for o in offs] + [X] * 4), np.stack([Y] * 4 + [Y + o for o in offs]))
    c = s.F.coords
    h = h[..., None]
    dx = (8 * (c[2] - c[1]) - (c[3] - c[0])) / (12 * h)
    dy = (8 * (c[6] - c[5]) - (c[7] - c[4])) / (12 * h)
    ok = np.all(s.mask, axis=0) & centre.mask
    ex = np.linalg.norm(dx - centre.Fx.coords, axis=-1) / np.maximum(1.0, centre.Fx.norm())
    ey = np.linalg.norm(dy - centre.Fy.coords, axis=-1) / np.maximum(1.0, centre.Fy.norm())
    return float(np.max(ex[ok])), float(np.max(ey[ok]))
