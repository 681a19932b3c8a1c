"""Figure presets: the parameter sets of the published surface plots.

Each :class:`MeshPreset` describes one surface (model, lambda, family, grid).
Preset names resolve to lists of meshes: ``fig1`` (six), ``fig2`` (two),
``fig3`` (four, including the corrected lambda = -2 row), one name per
(figure, modulus) pair such as ``fig1-sn-k05``, and one name per mesh such
as ``fig1-sn-k05-st``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lax import SpectralPoint
from .potential import NamedSolution

# Caption values exactly as printed, one row per plotted surface.
CAPTION_TABLE = (
    # figure, family, model, modulus or invariants, lambda, x range, y range
    ("fig1", "ST", "sn", "k=0", "1.2", "[-8,8]", "[-8,8]"),
    ("fig1", "ST", "sn", "k=0.5", "1.2", "[-8,8]", "[-8,8]"),
    ("fig1", "ST", "sn", "k=0.8", "1.2", "[-8,8]", "[-8,8]"),
    ("fig1", "Ux", "sn", "k=0", "1.2", "[-8,8]", "[-8,8]"),
    ("fig1", "Ux", "sn", "k=0.5", "1.2", "[-8,8]", "[-8,8]"),
    ("fig1", "Ux", "sn", "k=0.8", "1.2", "[-8,8]", "[-8,8]"),
    ("fig2", "ST", "sn", "k=0.2", "0.5", "[-20,20]", "[-5,5]"),
    ("fig2", "Ux", "sn", "k=0.2", "0.5", "[-20,20]", "[-5,5]"),
    ("fig3", "ST", "wp", "g2=0,g3=1", "1", "[0.2,3]", "[-pi/g(1),pi/g(1)]"),
    ("fig3", "Ux", "wp", "g2=0,g3=1", "1", "[0.2,3]", "[-pi/g(1),pi/g(1)]"),
    ("fig3", "Ux", "wp", "g2=0,g3=1", "-5", "[-1,1]", "[-0.5,0.5]"),
)

# Caption discriminant values for the rows that state one.
CAPTION_G = {("fig3", "ST", "1"): "-5", ("fig3", "Ux", "1"): "-5", ("fig3", "Ux", "-5"): "31"}

CORRECTIONS = {
    "fig3-g-value": ("caption pairs lambda=-5 with g(lambda)=31, but g(-5)=f(5)=499 for g2=0, g3=1; "
                     "lambda=-2 gives g=31, so both rows are generated and labeled"),
    "fig3-y-range": ("caption y-range [-pi/g(1), pi/g(1)] is reversed for g(1)=-5; "
                     "generated as [-pi/|g(1)|, pi/|g(1)|]"),
}

DEFAULT_RESOLUTION = {"fig1": (81, 81), "fig2": (161, 41), "fig3": (57, 41)}


@dataclass(frozen=True)
class MeshPreset:
    name: str
    figure: str
    family: str                 # "ST" (a = 1) or "Ux" (b = 1)
    kind: str                   # sn, cn, dn or wp
    params: tuple               # ((key, value), ...) for the named solution
    lam: float
    x_range: tuple
    y_range: tuple
    resolution: tuple
    label: str
    caption: dict = field(default_factory=dict, compare=False)
    corrections: tuple = ()

    def solution(self):
        return NamedSolution(self.kind, **dict(self.params))

    def spectral_point(self):
        sol = self.solution()
        return SpectralPoint.make(sol.potential, self.lam)

    @property
    def a(self):
        return 1.0 if self.family == "ST" else 0.0

    @property
    def b(self):
        return 1.0 if self.family == "Ux" else 0.0

    def metadata(self):
        """Plain dict written next to exported meshes."""
        sp = self.spectral_point()
        meta = {
            "preset": self.name,
            "figure": self.figure,
            "label": self.label,
            "family": self.family,
            "model": self.kind,
            "lambda": repr(self.lam),
            "g": repr(float(sp.g)),
            "x_range": f"{self.x_range[0]!r}:{self.x_range[1]!r}",
            "y_range": f"{self.y_range[0]!r}:{self.y_range[1]!r}",
        }
        meta.update({k: repr(v) for k, v in self.params})
        meta.update({f"caption_{k}": v for k, v in self.caption.items()})
        for key in self.corrections:
            meta[f"correction_{key}"] = CORRECTIONS[key]
        return meta


def _ktag(k):
    return "k" + str(k).replace(".", "").replace("-", "m")


def _fig1():
    out = []
    for fam, flabel in (("ST", "F^ST"), ("Ux", "F^{u_x}")):
        for k in (0.0, 0.5, 0.8):
            kc = "0" if k == 0.0 else repr(k)
            out.append(MeshPreset(
                f"fig1-sn-{_ktag(kc)}-{fam.lower()}", "fig1", fam, "sn", (("k", k),), 1.2,
                (-8.0, 8.0), (-8.0, 8.0), DEFAULT_RESOLUTION["fig1"],
                f"{flabel}: lambda=1.2, k={kc}",
                {"model": f"k={kc}", "lambda": "1.2", "x": "[-8,8]", "y": "[-8,8]"}))
    return out


def _fig2():
    return [MeshPreset(
        f"fig2-sn-k02-{fam.lower()}", "fig2", fam, "sn", (("k", 0.2),), 0.5,
        (-20.0, 20.0), (-5.0, 5.0), DEFAULT_RESOLUTION["fig2"],
        f"{flabel}: lambda=0.5, k=0.2",
        {"model": "k=0.2", "lambda": "0.5", "x": "[-20,20]", "y": "[-5,5]"})
        for fam, flabel in (("ST", "F^ST"), ("Ux", "F^{u_x}"))]


def _fig3():
    params = (("g2", 0.0), ("g3", 1.0))
    g1 = -5.0                                   # g(1) = f(-1) = -4 - 1
    yneg = (-math.pi / abs(g1), math.pi / abs(g1))
    neg_caption = {"model": "g2=0,g3=1", "x": "[0.2,3]", "y": "[-pi/g(1),pi/g(1)]",
                   "lambda": "1", "g": "-5"}
    pos_caption = {"model": "g2=0,g3=1", "x": "[-1,1]", "y": "[-0.5,0.5]"}
    res = DEFAULT_RESOLUTION["fig3"]
    return [
        MeshPreset("fig3-wp-l1-st", "fig3", "ST", "wp", params, 1.0, (0.2, 3.0), yneg, res,
                   "F^ST: lambda=1, g(lambda)=-5", neg_caption, ("fig3-y-range",)),
        MeshPreset("fig3-wp-l1-ux", "fig3", "Ux", "wp", params, 1.0, (0.2, 3.0), yneg, res,
                   "F^{u_x}: lambda=1, g(lambda)=-5", neg_caption, ("fig3-y-range",)),
        MeshPreset("fig3-wp-lm5-ux", "fig3", "Ux", "wp", params, -5.0, (-1.0, 1.0), (-0.5, 0.5), res,
                   "F^{u_x}: lambda=-5, g(lambda)=499 (caption lambda)",
                   {**pos_caption, "lambda": "-5", "g": "31"}, ("fig3-g-value",)),
        MeshPreset("fig3-wp-lm2-ux", "fig3", "Ux", "wp", params, -2.0, (-1.0, 1.0), (-0.5, 0.5), res,
                   "F^{u_x}: lambda=-2, g(lambda)=31 (caption g)",
                   {**pos_caption, "lambda": "-5", "g": "31"}, ("fig3-g-value",)),
    ]


def all_meshes():
    return _fig1() + _fig2() + _fig3()


def _groups():
    meshes = all_meshes()
    groups = {}
    for m in meshes:
        groups.setdefault(m.figure, []).append(m)
        groups[m.name] = [m]
        stem = m.name.rsplit("-", 1)[0]
        groups.setdefault(stem, []).append(m)
    return groups


PRESETS = _groups()


def preset_names():
    return sorted(PRESETS)


def resolve(name):
    """List of meshes for a preset name; KeyError lists the valid names."""
    try:
        return list(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}") from None
