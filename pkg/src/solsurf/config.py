"""Run configuration: plain-text ``key = value`` lines with ``#`` comments.

Later assignments win, both within a file and between a file and command
line overrides. :meth:`RunConfig.canonical` renders a config so that parsing
the text gives back an equal config.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

MODELS = ("sn", "cn", "dn", "wp")
FAMILIES = ("ST", "Ux", "gauge", "combo")
METRICS = ("Killing", "Euclidean")
FORMATS = ("csv", "obj", "ply")
MODEL_ALIASES = {"weierstrass": "wp", "jacobi_sn": "sn", "jacobi_cn": "cn", "jacobi_dn": "dn"}
FAMILY_ALIASES = {"st": "ST", "sym-tafel": "ST", "ux": "Ux", "q1": "Ux", "u_x": "Ux"}


class ConfigError(ValueError):
    """Malformed configuration; ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None, source="<config>"):
        self.line, self.column, self.source = line, column, source
        where = source if line is None else f"{source}:{line}:{column or 1}"
        super().__init__(f"{where}: {message}")


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {text!r}")
    return v


def _range(text):
    """``lo:hi`` or ``lo:hi:n`` (n samples, inclusive)."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"range must be lo:hi or lo:hi:n, got {text!r}")
    lo, hi = _float(parts[0]), _float(parts[1])
    if not lo < hi:
        raise ValueError(f"range needs lo < hi, got {text!r}")
    n = int(parts[2]) if len(parts) == 3 else None
    if n is not None and n < 2:
        raise ValueError("range needs at least 2 samples")
    return lo, hi, n


def _model(text):
    t = MODEL_ALIASES.get(text.lower(), text.lower())
    if t not in MODELS:
        raise ValueError(f"model must be one of {', '.join(MODELS)}, got {text!r}")
    return t


def _choice(options, aliases=None):
    def parse(text):
        t = (aliases or {}).get(text.lower(), text)
        for o in options:
            if o.lower() == t.lower():
                return o
        raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
    return parse


def _gauge(text):
    """``e1``, ``e2``, ``e3``, ``L`` or three comma-separated constants."""
    t = text.strip()
    if t in ("e1", "e2", "e3", "L"):
        return t
    parts = t.split(",")
    if len(parts) != 3:
        raise ValueError(f"gauge must be e1, e2, e3, L or s1,s2,s3, got {text!r}")
    return ",".join(repr(_float(p)) for p in parts)


_PARSERS = {
    "preset": str,
    "model": _model,
    "k": _float,
    "g2": _float,
    "g3": _float,
    "lambda": _float,
    "family": _choice(FAMILIES, FAMILY_ALIASES),
    "a": _float,
    "b": _float,
    "gauge": _gauge,
    "x": _range,
    "y": _range,
    "nx": int,
    "ny": int,
    "metric": _choice(METRICS),
    "form": _choice(("general", "jacobi", "weierstrass")),
    "format": _choice(FORMATS),
    "output": str,
}
KEYS = tuple(_PARSERS)
_ATTR = {"lambda": "lam"}


@dataclass(frozen=True)
class RunConfig:
    preset: str | None = None
    model: str = "sn"
    k: float = 0.5
    g2: float = 0.0
    g3: float = 1.0
    lam: float = 1.2
    family: str = "ST"
    a: float = 1.0
    b: float = 1.0
    gauge: str | None = None
    x: tuple = (-8.0, 8.0, None)
    y: tuple = (-8.0, 8.0, None)
    nx: int = 41
    ny: int = 41
    metric: str = "Killing"
    form: str = "general"
    format: str = "csv"
    output: str | None = None

    def solution(self):
        from .potential import NamedSolution
        if self.model == "wp":
            return NamedSolution("wp", g2=self.g2, g3=self.g3)
        return NamedSolution(self.model, k=self.k)

    def spectral_point(self):
        from .lax import SpectralPoint
        return SpectralPoint.make(self.solution().potential, self.lam)

    def grid(self):
        import numpy as np
        (x0, x1, nx), (y0, y1, ny) = self.x, self.y
        return np.linspace(x0, x1, nx or self.nx), np.linspace(y0, y1, ny or self.ny)

    def canonical(self):
        """Text form that parses back to an equal config."""
        lines = []
        for key in KEYS:
            v = getattr(self, _ATTR.get(key, key))
            if v is None:
                continue
            if isinstance(v, tuple):
                lo, hi, n = v
                text = f"{lo!r}:{hi!r}" + ("" if n is None else f":{n}")
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def updated(self, values: dict):
        return replace(self, **{_ATTR.get(k, k): v for k, v in values.items()})


def parse_value(key, text, line=None, column=None, source="<config>"):
    if key not in _PARSERS:
        raise ConfigError(f"unknown key {key!r}", line, column, source)
    try:
        return _PARSERS[key](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", line, column, source) from None


def parse_text(text, source="<config>"):
    """Ordered list of (key, parsed value) pairs; duplicates are kept in order."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError("expected key = value", lineno, col, source)
        key_part, val_part = body.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        if not key:
            raise ConfigError("missing key before '='", lineno, key_col, source)
        val = val_part.strip()
        val_col = len(key_part) + 1 + len(val_part) - len(val_part.lstrip()) + 1
        if not val:
            raise ConfigError(f"missing value for {key!r}", lineno, val_col, source)
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno, key_col, source)
        out.append((key, parse_value(key, val, lineno, val_col, source)))
    return out


def apply_preset(cfg: RunConfig, name):
    """Copy model, lambda, family and grid of the first mesh of a preset."""
    from .presets import resolve
    mesh = resolve(name)[0]
    p = dict(mesh.params)
    nx, ny = mesh.resolution
    return replace(cfg, preset=name, model=mesh.kind, k=p.get("k", cfg.k), g2=p.get("g2", cfg.g2),
                   g3=p.get("g3", cfg.g3), lam=mesh.lam, family=mesh.family,
                   x=(mesh.x_range[0], mesh.x_range[1], None), y=(mesh.y_range[0], mesh.y_range[1], None),
                   nx=nx, ny=ny)


def build_config(assignments, base=None):
    """Fold (key, value) pairs into a config, last assignment winning.

    A preset fills its values first; every explicit key overrides it
    regardless of order.
    """
    cfg = base or RunConfig()
    values = {}
    for key, val in assignments:
        values[key] = val
    if values.get("preset"):
        try:
            cfg = apply_preset(cfg, values["preset"])
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    return cfg.updated(values)


def load(text, overrides=(), source="<config>"):
    return build_config(list(parse_text(text, source)) + list(overrides))


def canonical_fields():
    return tuple(f.name for f in fields(RunConfig))
