"""Indexed triangle mesh with derived topology, normals, and local scale."""

from __future__ import annotations

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "NormalField",
    "build_mesh",
    "mean_edge_length",
    "face_areas",
    "face_area",
    "face_centroids",
    "face_centroid",
    "degenerate_face_mask",
    "face_normal_field",
    "face_normal",
    "corner_angles",
    "vertex_normal_field",
    "vertex_normal",
    "vertex_face_ring",
    "face_neighborhood",
    "face_adjacency_pairs",
    "local_scales",
    "local_scale",
]


class MeshError(ValueError):
    """Invalid mesh construction or query."""


# A face is degenerate when its edge cross-product norm (twice the area)
# falls below this fraction of the squared mean edge length.
DEGENERACY_REL_TOL = 1e-12


class NormalField:
    """Unit 3-vectors attached to faces or vertices.

    Entries flagged in ``degenerate`` (zero-area faces, or vertices with no
    usable incident face) are exempt from the unit-norm invariant and are
    excluded from downstream averages and weight sums.
    """

    __slots__ = ("domain", "values", "degenerate")

    def __init__(self, domain, values, degenerate=None):
        if domain not in ("face", "vertex"):
            raise MeshError(f"unknown normal domain {domain!r}")
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != 3:
            raise MeshError("normal field values must be an (n, 3) array")
        if degenerate is None:
            degenerate = np.zeros(len(values), dtype=bool)
        else:
            degenerate = np.asarray(degenerate, dtype=bool)
            if degenerate.shape != (len(values),):
                raise MeshError("degenerate mask length does not match values")
        ok = values[~degenerate]
        if not np.isfinite(ok).all():
            raise MeshError("normal field contains non-finite vectors")
        norms = np.linalg.norm(ok, axis=1)
        if norms.size and np.abs(norms - 1.0).max() > 1e-9:
            raise MeshError("normal field contains non-unit vectors")
        self.domain = domain
        self.values = values
        self.degenerate = degenerate

    def __len__(self):
        return len(self.values)

    def copy(self):
        return NormalField(self.domain, self.values.copy(), self.degenerate.copy())


class Mesh:
    """Immutable indexed triangle mesh.

    Vertex positions and CCW-oriented face triples are stored as read-only
    arrays. Topology (edge set, vertex->face incidence, boundary vertices)
    is derived once at construction. Geometric quantities are module
    functions of the mesh, so positions can be swapped with
    :meth:`replace_vertices` without re-deriving topology.
    """

    def __init__(self, vertices, faces, *, _topology_from=None):
        vertices = np.array(vertices, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if not np.isfinite(vertices).all():
            raise MeshError("vertices contain non-finite values")
        vertices.setflags(write=False)
        self.vertices = vertices
        self._geom_cache = {}
        if _topology_from is not None:
            other = _topology_from
            self.faces = other.faces
            self.edges = other.edges
            self.edge_face_counts = other.edge_face_counts
            self.boundary_mask = other.boundary_mask
            self.vertex_faces = other.vertex_faces
            return
        faces = np.array(faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError("faces must be an (m, 3) array of vertex triples")
        if len(faces) == 0:
            raise MeshError("mesh needs at least one face")
        bad = np.nonzero((faces < 0) | (faces >= len(vertices)))[0]
        if bad.size:
            raise MeshError(f"face {bad[0]} references a vertex out of range")
        repeated = np.nonzero(
            (faces[:, 0] == faces[:, 1])
            | (faces[:, 1] == faces[:, 2])
            | (faces[:, 0] == faces[:, 2])
        )[0]
        if repeated.size:
            raise MeshError(f"face {repeated[0]} repeats a vertex")
        faces.setflags(write=False)
        self.faces = faces
        self._derive_topology()

    def _derive_topology(self):
        faces = self.faces
        half = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        edges, counts = np.unique(half, axis=0, return_counts=True)
        boundary = np.zeros(self.n_vertices, dtype=bool)
        boundary[edges[counts == 1].ravel()] = True
        # Stable sort of the raveled face array groups face ids per vertex
        # in ascending order (each face lists a vertex at most once).
        order = np.argsort(faces.ravel(), kind="stable")
        incident = np.bincount(faces.ravel(), minlength=self.n_vertices)
        for arr in (edges, counts, boundary):
            arr.setflags(write=False)
        self.edges = edges
        self.edge_face_counts = counts
        self.boundary_mask = boundary
        self.vertex_faces = [a for a in np.split(order // 3, np.cumsum(incident)[:-1])]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.nonzero(self.boundary_mask)[0]

    def replace_vertices(self, vertices) -> "Mesh":
        """New mesh with identical topology and different positions."""
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise MeshError("replacement vertices have the wrong shape")
        return Mesh(vertices, None, _topology_from=self)

    def __repr__(self):
        return f"Mesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


def build_mesh(vertices, faces) -> Mesh:
    """Validate and build a mesh, deriving adjacency, edges, and boundary."""
    return Mesh(vertices, faces)


def _cached(mesh, key, compute):
    cache = mesh._geom_cache
    if key not in cache:
        value = compute()
        # Cached geometry is shared between callers; freeze arrays so an
        # accidental in-place edit cannot corrupt the mesh.
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
        elif isinstance(value, NormalField):
            value.values.setflags(write=False)
            value.degenerate.setflags(write=False)
        cache[key] = value
    return cache[key]


def mean_edge_length(mesh) -> float:
    """Mean length over the unique undirected edges."""

    def compute():
        d = mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]]
        return float(np.linalg.norm(d, axis=1).mean())

    return _cached(mesh, "mean_edge_length", compute)


def _face_cross(mesh):
    def compute():
        v = mesh.vertices[mesh.faces]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    return _cached(mesh, "face_cross", compute)


def face_areas(mesh) -> np.ndarray:
    return 0.5 * np.linalg.norm(_face_cross(mesh), axis=1)


def face_area(mesh, f) -> float:
    return float(face_areas(mesh)[f])


def face_centroids(mesh) -> np.ndarray:
    def compute():
        return mesh.vertices[mesh.faces].mean(axis=1)

    return _cached(mesh, "face_centroids", compute)


def face_centroid(mesh, f) -> np.ndarray:
    return face_centroids(mesh)[f]


def degenerate_face_mask(mesh) -> np.ndarray:
    """Faces with no reliable plane: cross norm <= 1e-12 x mean edge length^2."""

    def compute():
        norms = np.linalg.norm(_face_cross(mesh), axis=1)
        return norms <= DEGENERACY_REL_TOL * mean_edge_length(mesh) ** 2

    return _cached(mesh, "degenerate_faces", compute)


def face_normal_field(mesh) -> NormalField:
    """Unit face normals, right-handed w.r.t. the CCW vertex order.

    Degenerate faces get a zero vector and are flagged.
    """

    def compute():
        cross = _face_cross(mesh)
        bad = degenerate_face_mask(mesh)
        norms = np.linalg.norm(cross, axis=1)
        safe = np.where(bad, 1.0, norms)
        values = cross / safe[:, None]
        values[bad] = 0.0
        return NormalField("face", values, bad)

    return _cached(mesh, "face_normals", compute)


def face_normal(mesh, f, on_degenerate="error") -> np.ndarray:
    """Unit normal of one face; policy for zero-area faces is caller-selected."""
    field = face_normal_field(mesh)
    if field.degenerate[f]:
        if on_degenerate == "error":
            raise MeshError(f"face {f} is degenerate (zero area)")
        if on_degenerate == "zero":
            return np.zeros(3)
        raise MeshError(f"unknown degenerate-face policy {on_degenerate!r}")
    return field.values[f]


def corner_angles(mesh) -> np.ndarray:
    """Interior angles in degrees, one row of three per face.

    Corners with a zero-length incident edge get 90 as a placeholder; such
    faces are degenerate and callers apply their own convention.
    """

    def compute():
        v = mesh.vertices[mesh.faces]
        out = np.empty((mesh.n_faces, 3))
        for k in range(3):
            u = v[:, (k + 1) % 3] - v[:, k]
            w = v[:, (k + 2) % 3] - v[:, k]
            denom = np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1)
            dot = (u * w).sum(axis=1)
            cos = np.divide(dot, denom, out=np.zeros(len(v)), where=denom > 0)
            out[:, k] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
        return out

    return _cached(mesh, "corner_angles", compute)


def vertex_normal_field(mesh, scheme="angle", face_normals=None) -> NormalField:
    """Per-vertex normals as weighted averages of incident face normals.

    scheme "angle" weights by the incident corner angle, "area" by face
    area. ``face_normals`` substitutes an external per-face field (e.g.
    mollified normals) while keeping weights from the mesh geometry.
    """
    if scheme not in ("angle", "area"):
        raise MeshError(f"unknown vertex-normal scheme {scheme!r}")
    if face_normals is None:
        face_normals = face_normal_field(mesh)
    if face_normals.domain != "face" or len(face_normals) != mesh.n_faces:
        raise MeshError("face_normals does not match the mesh")

    if scheme == "angle":
        weights = corner_angles(mesh)
    else:
        weights = np.repeat(face_areas(mesh)[:, None], 3, axis=1)
    weights = np.where(face_normals.degenerate[:, None], 0.0, weights)

    sums = np.zeros((mesh.n_vertices, 3))
    wsum = np.zeros(mesh.n_vertices)
    flat = mesh.faces.ravel()
    np.add.at(sums, flat, np.repeat(face_normals.values, 3, axis=0) * weights.ravel()[:, None])
    np.add.at(wsum, flat, weights.ravel())

    norms = np.linalg.norm(sums, axis=1)
    bad = (wsum <= 0.0) | (norms <= 1e-12 * np.maximum(wsum, 1e-300))
    safe = np.where(bad, 1.0, norms)
    values = sums / safe[:, None]
    values[bad] = 0.0
    return NormalField("vertex", values, bad)


def vertex_normal(mesh, v, scheme="angle") -> np.ndarray:
    field = vertex_normal_field(mesh, scheme)
    if field.degenerate[v]:
        raise MeshError(f"vertex {v} has no usable incident face")
    return field.values[v]


def vertex_face_ring(mesh, v) -> np.ndarray:
    """Faces incident to vertex v, ascending face index."""
    return mesh.vertex_faces[v]


def face_neighborhood(mesh, f) -> np.ndarray:
    """Faces sharing at least one vertex with f, excluding f, ascending."""
    nbrs = np.unique(np.concatenate([mesh.vertex_faces[c] for c in mesh.faces[f]]))
    return nbrs[nbrs != f]


def face_adjacency_pairs(mesh):
    """Directed pairs (i, j) with j in the vertex-sharing neighborhood of i."""

    def compute():
        src, dst = [], []
        for f in range(mesh.n_faces):
            nbrs = face_neighborhood(mesh, f)
            src.append(np.full(len(nbrs), f, dtype=np.int64))
            dst.append(nbrs)
        return np.concatenate(src), np.concatenate(dst)

    return _cached(mesh, "face_adjacency_pairs", compute)


def local_scales(mesh) -> np.ndarray:
    """Per-vertex mean incident edge length; NaN for isolated vertices."""

    def compute():
        lengths = np.linalg.norm(
            mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]], axis=1
        )
        sums = np.zeros(mesh.n_vertices)
        counts = np.zeros(mesh.n_vertices)
        np.add.at(sums, mesh.edges[:, 0], lengths)
        np.add.at(sums, mesh.edges[:, 1], lengths)
        np.add.at(counts, mesh.edges[:, 0], 1.0)
        np.add.at(counts, mesh.edges[:, 1], 1.0)
        with np.errstate(invalid="ignore"):
            return np.where(counts > 0, sums / np.maximum(counts, 1.0), np.nan)

    return _cached(mesh, "local_scales", compute)


def local_scale(mesh, v) -> float:
    value = local_scales(mesh)[v]
    if not np.isfinite(value):
        raise MeshError(f"vertex {v} has no incident edge")
    return float(value)
