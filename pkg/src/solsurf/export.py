"""CSV, OBJ and PLY writers for sampled surfaces.

Numbers are written with 17 significant digits, ``.`` as decimal separator
and LF line endings, so identical inputs give byte-identical files. Mesh
vertices are (F1, F2, F3) in the e-basis; the grid is triangulated row-major
and every triangle touching a masked cell is dropped.
"""
from __future__ import annotations

import io

import numpy as np

from .surface import EmptyGridError

NUM = "%.17g"


def fmt(v):
    return NUM % v


def _components(sample):
    F = sample.F
    return np.stack([np.asarray(F.x1, float), np.asarray(F.x2, float), np.asarray(F.x3, float)], axis=-1)


def _check_nonempty(mask):
    if not np.any(mask):
        raise EmptyGridError("every grid cell is masked; nothing to export")


def write_table(stream, header, columns):
    """Comma-separated header row, then one row per sample at %.17g."""
    stream.write(",".join(header) + "\n")
    cols = [np.ravel(np.asarray(c, dtype=float)) for c in columns]
    for row in zip(*cols):
        stream.write(",".join(fmt(v) for v in row) + "\n")


def surface_csv(sample, stream, include_masked=False):
    """Rows (x, y, F1, F2, F3); masked cells are skipped unless requested (then NaN)."""
    mask = np.asarray(sample.mask, bool)
    _check_nonempty(mask)
    C = _components(sample)
    X = np.broadcast_to(sample.x, mask.shape)
    Y = np.broadcast_to(sample.y, mask.shape)
    keep = np.ones_like(mask) if include_masked else mask
    write_table(stream, ("x", "y", "F1", "F2", "F3"),
                (X[keep], Y[keep], C[..., 0][keep], C[..., 1][keep], C[..., 2][keep]))


def triangulate(mask):
    """Row-major triangles over an (nx, ny) grid, two per quad, skipping masked corners.

    Vertex index of cell (i, j) is i * ny + j.
    """
    mask = np.asarray(mask, bool)
    nx, ny = mask.shape
    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b = i * ny + j, i * ny + j + 1
            c, d = (i + 1) * ny + j, (i + 1) * ny + j + 1
            if mask[i, j] and mask[i + 1, j] and mask[i + 1, j + 1]:
                tris.append((a, c, d))
            if mask[i, j] and mask[i + 1, j + 1] and mask[i, j + 1]:
                tris.append((a, d, b))
    return np.array(tris, dtype=int).reshape(-1, 3)


def _mesh(sample):
    mask = np.asarray(sample.mask, bool)
    if mask.ndim != 2:
        raise ValueError("meshes need a 2-D grid sample")
    _check_nonempty(mask)
    V = _components(sample).reshape(-1, 3)
    T = triangulate(mask)
    used = np.zeros(len(V), bool)
    used[T.ravel()] = True
    used |= mask.ravel()
    new_index = np.cumsum(used) - 1
    return V[used], new_index[T]


def surface_obj(sample, stream, comments=None):
    V, T = _mesh(sample)
    for key, val in (comments or {}).items():
        stream.write(f"# {key}: {val}\n")
    for v in V:
        stream.write("v " + " ".join(fmt(c) for c in v) + "\n")
    for t in T:
        stream.write("f " + " ".join(str(i + 1) for i in t) + "\n")


def surface_ply(sample, stream, comments=None):
    V, T = _mesh(sample)
    stream.write("ply\nformat ascii 1.0\n")
    for key, val in (comments or {}).items():
        stream.write(f"comment {key}: {val}\n")
    stream.write(f"element vertex {len(V)}\nproperty double x\nproperty double y\nproperty double z\n")
    stream.write(f"element face {len(T)}\nproperty list uchar int vertex_indices\nend_header\n")
    for v in V:
        stream.write(" ".join(fmt(c) for c in v) + "\n")
    for t in T:
        stream.write("3 " + " ".join(str(i) for i in t) + "\n")


WRITERS = {"csv": lambda s, f, meta: surface_csv(s, f), "obj": surface_obj, "ply": surface_ply}


def write_surface(sample, path, fmt_name="csv", meta=None):
    """Write ``sample`` to ``path`` (LF line endings regardless of platform)."""
    buf = io.StringIO()
    WRITERS[fmt_name](sample, buf, meta)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(buf.getvalue())


def write_metadata(path, meta):
    """``key = value`` lines, keys sorted."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"{key} = {meta[key]}\n")


def fff_csv(stream, X, Y, numeric, closed):
    """Columns x, y, E, F, G, E_closed, F_closed, G_closed (NaN where masked)."""
    write_table(stream, ("x", "y", "E", "F", "G", "E_closed", "F_closed", "G_closed"),
                (X, Y, numeric.E, numeric.F, numeric.G, closed.E, closed.F, closed.G))
