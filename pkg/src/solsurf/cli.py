"""Command-line entry point.

Subcommands:
    verify [SUITE ...]   run verification suites (lax, lsp, symmetry, compat, fff)
    surface              sample a surface or a figure preset and write CSV/OBJ/PLY
    fff                  first fundamental form grid as CSV, numeric next to printed
    elliptic NAME        evaluate sn, cn, dn, wp, ellint_pi, rf or rj on a grid

Exit codes: 0 pass, 1 tolerance breach, 2 usage or configuration error.
SOLITON_SURF_THREADS caps the number of meshes generated concurrently.
"""
from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgmod
from . import elliptic as ell
from .config import ConfigError, RunConfig
from .export import fff_csv, fmt, write_metadata, write_surface
from .surface import EmptyGridError, GaugeField, SurfaceParams, build_surface

EXIT_OK, EXIT_BREACH, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "SOLITON_SURF_THREADS"


class UsageError(Exception):
    pass


# ------------------------------------------------------------ arguments

_CONFIG_FLAGS = (
    ("--preset", "preset", "figure preset name (see `surface --list-presets`)"),
    ("--model", "model", "sn, cn, dn or wp"),
    ("--k", "k", "Jacobi modulus"),
    ("--g2", "g2", "Weierstrass invariant g2"),
    ("--g3", "g3", "Weierstrass invariant g3"),
    ("--lambda", "lambda", "spectral parameter"),
    ("--family", "family", "ST, Ux, gauge or combo"),
    ("--a", "a", "Sym-Tafel coefficient a(lambda)"),
    ("--b", "b", "coefficient of the u_x term"),
    ("--gauge", "gauge", "gauge term S: e1, e2, e3, L or s1,s2,s3"),
    ("--x", "x", "x range lo:hi[:n]"),
    ("--y", "y", "y range lo:hi[:n]"),
    ("--nx", "nx", "number of x samples"),
    ("--ny", "ny", "number of y samples"),
    ("--metric", "metric", "Killing or Euclidean"),
    ("--form", "form", "printed Killing form: general, jacobi or weierstrass"),
    ("--format", "format", "csv, obj or ply"),
    ("--output", "output", "output file or directory"),
)


class _Ordered(argparse.Action):
    """Record config flags in command-line order so the last one wins."""

    def __call__(self, parser, namespace, values, option_string=None):
        seq = list(getattr(namespace, "assignments", None) or [])
        seq.append((self.dest, values))
        namespace.assignments = seq


def _add_config_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    for flag, key, text in _CONFIG_FLAGS:
        p.add_argument(flag, dest=key, action=_Ordered, metavar=key.upper(), help=text)
    p.set_defaults(assignments=[])


def build_parser():
    parser = argparse.ArgumentParser(prog="solsurf", description="Soliton surfaces from elliptic solutions")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("suites", nargs="*", metavar="SUITE",
                   help="any of lax, lsp, symmetry, compat, fff (default: all)")
    v.add_argument("--json", dest="json_out", help="write the machine-readable summary to this file")
    _add_config_flags(v)

    s = sub.add_parser("surface", help="sample surfaces and write meshes")
    s.add_argument("--list-presets", action="store_true")
    _add_config_flags(s)

    f = sub.add_parser("fff", help="first fundamental form grid as CSV")
    _add_config_flags(f)

    e = sub.add_parser("elliptic", help="evaluate special functions")
    e.add_argument("name", choices=("sn", "cn", "dn", "wp", "ellint_pi", "rf", "rj"))
    for flag in ("--x", "--k", "--g2", "--g3", "--u", "--alpha2", "--y", "--z", "--p"):
        e.add_argument(flag, help="value, comma list or lo:hi:step")
    return parser


def _config_from_args(args):
    text, source = "", "<config>"
    if args.config:
        source = args.config
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source=source) from None
    cli = [(key, cfgmod.parse_value(key, str(val), source="<command line>")) for key, val in args.assignments]
    return cfgmod.load(text, cli, source=source)


def thread_cap():
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# --------------------------------------------------------------- verify


def run_verify(cfg: RunConfig, suites=None, out=None, json_path=None):
    """Run suites for the configured model; returns (exit code, checks)."""
    out = out or sys.stdout
    from .suites import SUITES, run_suites
    names = list(suites) or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    sol, sp = cfg.solution(), cfg.spectral_point()
    xs, ys = _verify_grid(cfg)
    checks = run_suites(names, sol, sp, xs, ys)
    out.write(f"# model={cfg.model} {' '.join(f'{k}={v!r}' for k, v in sol.params.items())} "
              f"lambda={cfg.lam!r} g={float(sp.g)!r}\n")
    out.write("suite\tcheck\tvalue\ttol\tstatus\n")
    for c in checks:
        out.write(c.line() + "\n")
    ok = all(c.passed for c in checks)
    summary = {"model": cfg.model, "params": sol.params, "lambda": cfg.lam, "passed": ok,
               "checks": [c.as_dict() for c in checks]}
    out.write("RESULT\t" + ("pass" if ok else "fail") + "\n")
    if json_path:
        with open(json_path, "w", newline="\n", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return (EXIT_OK if ok else EXIT_BREACH), checks


def _verify_grid(cfg):
    # suites resample these ranges to their own resolution
    return np.linspace(cfg.x[0], cfg.x[1], 200), np.linspace(cfg.y[0], cfg.y[1], 50)


# -------------------------------------------------------------- surface


def _gauge_field(spec):
    if spec is None:
        return None
    if spec == "L":
        return GaugeField.lax_l()
    basis = {"e1": (1.0, 0.0, 0.0), "e2": (0.0, 1.0, 0.0), "e3": (0.0, 0.0, 1.0)}
    vals = basis.get(spec) or tuple(float(t) for t in spec.split(","))
    return GaugeField.constant(*vals)


def surface_params(cfg: RunConfig):
    fam = cfg.family
    if fam == "ST":
        return SurfaceParams(cfg.lam, a=cfg.a)
    if fam == "Ux":
        return SurfaceParams(cfg.lam, b=cfg.b)
    if fam == "gauge":
        if cfg.gauge is None:
            raise ConfigError("family gauge needs a gauge term (gauge = e3, L or s1,s2,s3)")
        return SurfaceParams(cfg.lam, gauge=_gauge_field(cfg.gauge))
    return SurfaceParams(cfg.lam, a=cfg.a, b=cfg.b, gauge=_gauge_field(cfg.gauge))


def _sample(sol, sp_or_lam, params, xs, ys):
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return build_surface(sol, sp_or_lam, params, X, Y)


def mesh_jobs(cfg: RunConfig):
    """(name, solution, params, xs, ys, metadata) for each mesh to generate."""
    from .presets import resolve
    if cfg.preset:
        jobs = []
        for m in resolve(cfg.preset):
            # preset ranges are fixed; an explicit sample count (lo:hi:n) overrides the resolution
            nx, ny = m.resolution
            xs = np.linspace(*m.x_range, cfg.x[2] or nx)
            ys = np.linspace(*m.y_range, cfg.y[2] or ny)
            jobs.append((m.name, m.solution(), SurfaceParams(m.lam, a=m.a, b=m.b), xs, ys, m.metadata()))
        return jobs
    xs, ys = cfg.grid()
    sol = cfg.solution()
    meta = {"model": cfg.model, "lambda": repr(cfg.lam), "family": cfg.family,
            **{k: repr(v) for k, v in sol.params.items()}}
    return [("surface", sol, surface_params(cfg), xs, ys, meta)]


def run_surface(cfg: RunConfig, out=None, threads=1):
    """Generate the configured meshes; returns the written paths."""
    out = out or sys.stdout
    jobs = mesh_jobs(cfg)
    target = cfg.output
    ext = cfg.format
    single = len(jobs) == 1 and target is not None and not os.path.isdir(target) and target.endswith("." + ext)
    if not single:
        target = target or "."
        os.makedirs(target, exist_ok=True)

    def work(job):
        name, sol, params, xs, ys, meta = job
        s = _sample(sol, params.lam, params, xs, ys)
        if not np.any(s.mask):
            raise EmptyGridError(f"{name}: every grid cell is masked; nothing to export")
        bad = ~np.isfinite(s.F.coords[s.mask])
        if np.any(bad):
            raise FloatingPointError(f"{name}: non-finite values in unmasked cells")
        return name, s, meta

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(work, jobs))
    paths = []
    for name, s, meta in results:
        meta = dict(meta, masked_cells=str(int(np.sum(~s.mask))), cells=str(s.mask.size))
        path = target if single else os.path.join(target, f"{name}.{ext}")
        write_surface(s, path, ext, meta)
        write_metadata(os.path.splitext(path)[0] + ".meta.txt", meta)
        out.write(f"{path}\t{int(np.sum(s.mask))} cells\n")
        paths.append(path)
    return paths


# ------------------------------------------------------------------ fff


def run_fff(cfg: RunConfig, stream):
    from .closed_forms import FormContext, euclidean_printed_total, fff_closed, FundamentalForm
    from .metrics import fff_numeric, metric_kind
    from .surface import Frame, f_q1, f_sym_tafel

    sol, sp = cfg.solution(), cfg.spectral_point()
    xs, ys = cfg.grid()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    fr = Frame(sol, sp, X, Y)
    if cfg.family == "ST":
        s = f_sym_tafel(sol, sp, cfg.a, X, Y, frame=fr)
    elif cfg.family == "Ux":
        s = f_q1(sol, sp, cfg.b, X, Y, frame=fr)
    else:
        raise ConfigError("fff supports the ST and Ux families")
    metric = metric_kind(cfg.metric)
    num = fff_numeric(metric, s)
    ctx = FormContext.from_jet(sol.potential, sp.lam, fr.jet, **sol.params)
    if metric.tag == "Killing":
        closed = fff_closed(metric, cfg.family, cfg.form, ctx, a=cfg.a, b=cfg.b)
        closed = FundamentalForm(*(np.broadcast_to(np.asarray(v, float), X.shape) for v in closed.as_tuple()))
    else:
        psi = fr.wf.psi.psi_plus
        coef = cfg.a ** 2 if cfg.family == "ST" else cfg.b ** 2
        vals = [coef * np.real(euclidean_printed_total(ctx, cfg.family, c).evaluate(psi))
                for c in ("xx", "xy", "yy")]
        closed = FundamentalForm(*vals)
    closed = FundamentalForm(*(np.where(fr.mask, v, np.nan) for v in closed.as_tuple()))
    fff_csv(stream, X, Y, num, closed)


# ------------------------------------------------------------- elliptic


def parse_values(text, name):
    """``v``, ``v1,v2,...`` or ``lo:hi:step`` (inclusive)."""
    if text is None:
        raise UsageError(f"--{name} is required")
    try:
        if ":" in text:
            lo, hi, step = (float(t) for t in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return lo + step * np.arange(n)
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise UsageError(f"--{name}: expected a number, list or lo:hi:step, got {text!r}") from None


def _quad_pi(u, alpha2, k):
    from scipy.integrate import quad
    return quad(lambda t: 1.0 / ((1 - alpha2 * t * t) * np.sqrt((1 - t * t) * (1 - k * k * t * t))),
                0.0, u, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def run_elliptic(args, out=None):
    out = out or sys.stdout
    name = args.name
    if name in ("sn", "cn", "dn"):
        cols = ("x", "k", name)
        rows = []
        for x, k in itertools.product(parse_values(args.x, "x"), parse_values(args.k, "k")):
            sn, cn, dn = ell.jacobi_sn_cn_dn(x, k)
            rows.append((x, k, {"sn": sn, "cn": cn, "dn": dn}[name]))
    elif name == "wp":
        cols = ("x", "g2", "g3", "wp", "wp_x", "ode_residual")
        rows = []
        for x, g2, g3 in itertools.product(parse_values(args.x, "x"), parse_values(args.g2 or "0", "g2"),
                                           parse_values(args.g3 or "1", "g3")):
            inv = ell.WeierstrassInvariants(g2, g3)
            p, dp = ell.weierstrass_p(x, inv)
            rows.append((x, g2, g3, p, dp, ell.weierstrass_residual(p, dp, inv)))
    elif name == "ellint_pi":
        cols = ("u", "alpha2", "k", "ellint_pi", "quadrature_delta")
        rows = []
        for u, a2, k in itertools.product(parse_values(args.u, "u"), parse_values(args.alpha2, "alpha2"),
                                          parse_values(args.k, "k")):
            v = ell.ellint_pi(u, a2, k)
            rows.append((u, a2, k, v, v - _quad_pi(u, a2, k)))
    elif name == "rf":
        cols = ("x", "y", "z", "rf")
        rows = [(x, y, z, ell.carlson_rf(x, y, z)) for x, y, z in itertools.product(
            parse_values(args.x, "x"), parse_values(args.y, "y"), parse_values(args.z, "z"))]
    else:
        cols = ("x", "y", "z", "p", "rj")
        rows = [(x, y, z, p, ell.carlson_rj(x, y, z, p)) for x, y, z, p in itertools.product(
            parse_values(args.x, "x"), parse_values(args.y, "y"), parse_values(args.z, "z"),
            parse_values(args.p, "p"))]
    out.write("\t".join(cols) + "\n")
    for r in rows:
        out.write("\t".join(fmt(float(v)) for v in r) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------- main


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)     # exits with status 2 and usage text on malformed flags
    try:
        if args.command == "elliptic":
            return run_elliptic(args)
        if args.command == "surface" and args.list_presets:
            from .presets import preset_names
            sys.stdout.write("\n".join(preset_names()) + "\n")
            return EXIT_OK
        cfg = _config_from_args(args)
        if args.command == "verify":
            return run_verify(cfg, args.suites, json_path=args.json_out)[0]
        if args.command == "surface":
            run_surface(cfg, threads=thread_cap())
            return EXIT_OK
        target = cfg.output
        if target:
            with open(target, "w", newline="\n", encoding="ascii") as fh:
                run_fff(cfg, fh)
        else:
            run_fff(cfg, sys.stdout)
        return EXIT_OK
    except (ConfigError, UsageError, KeyError) as exc:
        parser.print_usage(sys.stderr)
        msg = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        sys.stderr.write(f"solsurf: error: {msg}\n")
        return EXIT_USAGE
    except (EmptyGridError, ell.EllipticDomainError) as exc:
        # the request itself cannot produce output
        sys.stderr.write(f"solsurf: error: {exc}\n")
        return EXIT_USAGE
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
