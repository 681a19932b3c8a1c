"""Traceless 2x2 matrices in the basis e1 = [[0,0],[1,0]], e2 = [[0,1],[0,0]], e3 = diag(1,-1).

Coordinates are stored in the last axis of an array of shape (..., 3), so
one object can carry a whole grid of values.
"""
from __future__ import annotations

import numpy as np

E1 = np.array([[0.0, 0.0], [1.0, 0.0]])
E2 = np.array([[0.0, 1.0], [0.0, 0.0]])
E3 = np.array([[1.0, 0.0], [0.0, -1.0]])

KILLING = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]])


class Sl2Element:
    """Element X^1 e1 + X^2 e2 + X^3 e3 of sl(2) (real or complex)."""

    __slots__ = ("coords",)
    __array_priority__ = 100

    def __init__(self, coords):
        c = np.asarray(coords)
        if c.shape[-1:] != (3,):
            raise ValueError("coordinates need a trailing axis of length 3")
        self.coords = c

    @classmethod
    def from_components(cls, x1, x2, x3):
        x1, x2, x3 = np.broadcast_arrays(np.asarray(x1), np.asarray(x2), np.asarray(x3))
        return cls(np.stack([x1, x2, x3], axis=-1))

    @classmethod
    def from_matrix(cls, m, check=True, atol=1e-12):
        m = np.asarray(m)
        if check:
            tr = m[..., 0, 0] + m[..., 1, 1]
            scale = np.maximum(1.0, np.abs(m).max(axis=(-2, -1)))
            if np.any(np.abs(tr) > atol * scale):
                raise ValueError("matrix is not traceless")
        return cls.from_components(m[..., 1, 0], m[..., 0, 1], 0.5 * (m[..., 0, 0] - m[..., 1, 1]))

    @classmethod
    def zeros(cls, shape=(), dtype=float):
        return cls(np.zeros(tuple(shape) + (3,), dtype=dtype))

    @property
    def x1(self):
        return self.coords[..., 0]

    @property
    def x2(self):
        return self.coords[..., 1]

    @property
    def x3(self):
        return self.coords[..., 2]

    @property
    def shape(self):
        return self.coords.shape[:-1]

    def matrix(self):
        c = self.coords
        m = np.empty(c.shape[:-1] + (2, 2), dtype=c.dtype)
        m[..., 0, 0] = c[..., 2]
        m[..., 0, 1] = c[..., 1]
        m[..., 1, 0] = c[..., 0]
        m[..., 1, 1] = -c[..., 2]
        return m

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Sl2Element(self.coords[idx + (slice(None),)])

    def __add__(self, other):
        return Sl2Element(self.coords + _coords(other))

    def __sub__(self, other):
        return Sl2Element(self.coords - _coords(other))

    def __neg__(self):
        return Sl2Element(-self.coords)

    def __mul__(self, scalar):
        return Sl2Element(self.coords * np.asarray(scalar)[..., None])

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Sl2Element(self.coords / np.asarray(scalar)[..., None])

    def bracket(self, other):
        """[X, Y] from structure constants."""
        return bracket(self, other)

    def conjugate_by(self, phi, phi_inv=None):
        """phi^{-1} X phi for (batched) 2x2 matrices phi."""
        if phi_inv is None:
            phi_inv = inv2(phi)
        return Sl2Element.from_matrix(phi_inv @ self.matrix() @ phi, check=False)

    def real(self, atol=None, what="sl(2) element"):
        """Real part, optionally asserting the imaginary part is below ``atol``."""
        if not np.iscomplexobj(self.coords):
            return self
        if atol is not None:
            im = np.nanmax(np.abs(self.coords.imag)) if self.coords.size else 0.0
            if im > atol:
                raise ValueError(f"{what} has imaginary part {im:.3g} > {atol:.3g}")
        return Sl2Element(self.coords.real.copy())

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.coords) ** 2, axis=-1))

    def __repr__(self):
        return f"Sl2Element({self.coords!r})"


def _coords(x):
    return x.coords if isinstance(x, Sl2Element) else np.asarray(x)


def bracket(x, y):
    """Lie bracket in components: [X,Y] = (2(X1Y3-X3Y1), 2(X3Y2-X2Y3), X2Y1-X1Y2)."""
    a, b = _coords(x), _coords(y)
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2]
    return Sl2Element(np.stack([2.0 * (a1 * b3 - a3 * b1),
                                2.0 * (a3 * b2 - a2 * b3),
                                a2 * b1 - a1 * b2], axis=-1))


def bracket_matrix(x, y):
    """Lie bracket via matrix products (independent path used for cross-checks)."""
    mx, my = x.matrix(), y.matrix()
    return Sl2Element.from_matrix(mx @ my - my @ mx, check=False)


def killing(x, y):
    """tr(XY) = X1 Y2 + X2 Y1 + 2 X3 Y3."""
    a, b = _coords(x), _coords(y)
    return a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0] + 2.0 * a[..., 2] * b[..., 2]


def euclidean(x, y):
    a, b = _coords(x), _coords(y)
    return np.sum(a * b, axis=-1)


def adjugate(m):
    """Adjugate of (batched) 2x2 matrices; equals the inverse when det = 1."""
    m = np.asarray(m)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def inv2(m):
    """Inverse of (batched) 2x2 matrices by the adjugate formula."""
    m = np.asarray(m)
    return adjugate(m) / det2(m)[..., None, None]


def det2(m):
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


e1 = Sl2Element(np.array([1.0, 0.0, 0.0]))
e2 = Sl2Element(np.array([0.0, 1.0, 0.0]))
e3 = Sl2Element(np.array([0.0, 0.0, 1.0]))
