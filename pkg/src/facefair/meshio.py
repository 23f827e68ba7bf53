"""Mesh and normal-field file I/O: OBJ, ASCII PLY, text normals, reports.

All writers go through an atomic replace so a failed run never leaves a
partial output file.
"""

from __future__ import annotations

import os

import numpy as np

from .mesh import MeshError, NormalField, build_mesh

__all__ = [
    "MeshIOError",
    "read_mesh",
    "write_mesh",
    "read_normal_field",
    "write_normal_field",
    "write_report",
    "write_histogram_csv",
    "read_config",
]


class MeshIOError(ValueError):
    """Malformed or unsupported mesh/normal file."""


def _atomic_write(path, text):
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as handle:
        handle.write(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    return format(float(x), ".9g")


def read_mesh(path, return_normals=False):
    """Read an OBJ or ASCII PLY mesh (by extension).

    With return_normals=True, returns (mesh, per-vertex NormalField or
    None when the file carries no normals).
    """
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".obj":
        mesh, normals = _read_obj(path)
    elif ext == ".ply":
        mesh, normals = _read_ply(path)
    else:
        raise MeshIOError(f"unsupported mesh format {ext!r}")
    return (mesh, normals) if return_normals else mesh


def _read_obj(path):
    vertices = []
    faces = []
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise MeshIOError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise MeshIOError(f"{path}:{lineno}: malformed vertex line") from None
            elif tag == "f":
                refs = tokens[1:]
                if len(refs) != 3:
                    raise MeshIOError(
                        f"{path}:{lineno}: face has {len(refs)} vertices, only triangles are supported"
                    )
                idx = []
                for ref in refs:
                    head = ref.split("/", 1)[0]
                    try:
                        value = int(head)
                    except ValueError:
                        raise MeshIOError(f"{path}:{lineno}: malformed face index {ref!r}") from None
                    if value < 1:
                        raise MeshIOError(f"{path}:{lineno}: face indices must be positive (1-based)")
                    idx.append(value - 1)
                faces.append(idx)
            # Other directives (vn, vt, o, g, s, usemtl, ...) are ignored.
    try:
        return build_mesh(vertices, faces), None
    except MeshError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc


def _read_ply(path):
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshIOError(f"{path}:1: not a PLY file")

    elements = []  # (name, count, [property names]); list props get one name
    cursor = 1
    in_format = False
    while cursor < len(lines):
        tokens = lines[cursor].split()
        cursor += 1
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1:2] != ["ascii"]:
                raise MeshIOError(f"{path}: only ascii PLY is supported")
            in_format = True
        elif tokens[0] == "element":
            elements.append([tokens[1], int(tokens[2]), []])
        elif tokens[0] == "property":
            if not elements:
                raise MeshIOError(f"{path}:{cursor}: property before element")
            if tokens[1] == "list":
                elements[-1][2].append(("list", tokens[-1]))
            else:
                elements[-1][2].append(("scalar", tokens[-1]))
        elif tokens[0] == "end_header":
            break
    else:
        raise MeshIOError(f"{path}: missing end_header")
    if not in_format:
        raise MeshIOError(f"{path}: missing format line")

    vertices, normals, faces = None, None, None
    for name, count, props in elements:
        rows = lines[cursor : cursor + count]
        if len(rows) < count:
            raise MeshIOError(f"{path}: truncated element {name!r}")
        cursor += count
        if name == "vertex":
            names = [p[1] for p in props]
            for needed in ("x", "y", "z"):
                if needed not in names:
                    raise MeshIOError(f"{path}: vertex element lacks property {needed!r}")
            table = np.empty((count, len(names)))
            for r, row in enumerate(rows):
                parts = row.split()
                if len(parts) != len(names):
                    raise MeshIOError(f"{path}: vertex row {r + 1} has {len(parts)} values")
                table[r] = [float(p) for p in parts]
            vertices = table[:, [names.index(a) for a in "xyz"]]
            if all(a in names for a in ("nx", "ny", "nz")):
                raw = table[:, [names.index(a) for a in ("nx", "ny", "nz")]]
                norms = np.linalg.norm(raw, axis=1)
                if (norms <= 1e-12).any():
                    raise MeshIOError(f"{path}: near-zero vertex normal")
                normals = NormalField("vertex", raw / norms[:, None])
        elif name == "face":
            faces = []
            for r, row in enumerate(rows):
                parts = row.split()
                if not parts or int(parts[0]) != 3 or len(parts) < 4:
                    raise MeshIOError(f"{path}: face row {r + 1} is not a triangle")
                faces.append([int(p) for p in parts[1:4]])
        # Unknown elements are skipped by the cursor advance above.
    if vertices is None or faces is None:
        raise MeshIOError(f"{path}: PLY needs vertex and face elements")
    try:
        return build_mesh(vertices, faces), normals
    except MeshError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc


def write_mesh(mesh, path, vertex_normals=None):
    """Write OBJ or ASCII PLY (by extension), atomically."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".obj":
        _atomic_write(path, _format_obj(mesh))
    elif ext == ".ply":
        _atomic_write(path, _format_ply(mesh, vertex_normals))
    else:
        raise MeshIOError(f"unsupported mesh format {ext!r}")


def _format_obj(mesh):
    out = []
    for v in mesh.vertices:
        out.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    for f in mesh.faces:
        out.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(out) + "\n"


def _format_ply(mesh, vertex_normals=None):
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if vertex_normals is not None:
        if vertex_normals.domain != "vertex" or len(vertex_normals) != mesh.n_vertices:
            raise MeshIOError("vertex normals do not match the mesh")
        header += ["property float nx", "property float ny", "property float nz"]
    header += [
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    out = list(header)
    for i, v in enumerate(mesh.vertices):
        row = f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}"
        if vertex_normals is not None:
            n = vertex_normals.values[i]
            row += f" {_fmt(n[0])} {_fmt(n[1])} {_fmt(n[2])}"
        out.append(row)
    for f in mesh.faces:
        out.append(f"3 {f[0]} {f[1]} {f[2]}")
    return "\n".join(out) + "\n"


def read_normal_field(path, expected_len, domain="vertex") -> NormalField:
    """Read one whitespace-separated 'nx ny nz' triple per line.

    Vectors are normalized on load; near-zero or non-finite vectors and a
    line count other than expected_len are rejected.
    """
    rows = []
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise MeshIOError(f"{path}:{lineno}: expected 3 components")
            try:
                vec = [float(p) for p in parts]
            except ValueError:
                raise MeshIOError(f"{path}:{lineno}: malformed normal line") from None
            rows.append(vec)
    values = np.array(rows, dtype=np.float64).reshape(-1, 3)
    if len(values) != expected_len:
        raise MeshIOError(
            f"{path}: normal field has {len(values)} entries, expected {expected_len}"
        )
    if not np.isfinite(values).all():
        raise MeshIOError(f"{path}: normal field contains non-finite values")
    norms = np.linalg.norm(values, axis=1)
    if (norms <= 1e-12).any():
        raise MeshIOError(f"{path}: normal field contains near-zero vectors")
    return NormalField(domain, values / norms[:, None])


def write_normal_field(field, path):
    out = [f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}" for v in field.values]
    _atomic_write(path, "\n".join(out) + "\n")


def write_report(record, path):
    """Flat key=value text record."""
    _atomic_write(path, "".join(f"{k}={v}\n" for k, v in record.items()))


def write_histogram_csv(edges, counts, path):
    """One CSV row per bin: lower_edge_deg,count."""
    rows = ["lower_edge_deg,count"]
    rows += [f"{_fmt(edges[i])},{int(counts[i])}" for i in range(len(counts))]
    _atomic_write(path, "\n".join(rows) + "\n")


def read_config(path) -> dict:
    """key=value file; '#' starts a comment; dashes normalize to underscores."""
    config = {}
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise MeshIOError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            config[key.strip().replace("-", "_")] = value.strip()
    return config
