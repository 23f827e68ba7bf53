"""Experiment fixtures: grids, subdivided cube, UV sphere, edge collapse."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, build_mesh

__all__ = [
    "make_grid_mesh",
    "collapse_edges",
    "make_cube_mesh",
    "make_sphere_mesh",
]


def make_grid_mesh(n, spacing=1.0) -> Mesh:
    """Right-triangulated planar grid with n x n cells in the z=0 plane.

    (n+1)^2 vertices and 2 n^2 faces, all CCW with +z normals.
    """
    if n < 1:
        raise ValueError("grid needs at least one cell")
    coords = np.arange(n + 1) * spacing
    xx, yy = np.meshgrid(coords, coords)
    vertices = np.column_stack([xx.ravel(), yy.ravel(), np.zeros((n + 1) ** 2)])

    def idx(i, j):
        return i * (n + 1) + j

    faces = []
    for i in range(n):
        for j in range(n):
            a, b = idx(i, j), idx(i, j + 1)
            c, d = idx(i + 1, j + 1), idx(i + 1, j)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return build_mesh(vertices, faces)


def collapse_edges(mesh, fraction, seed, jitter_scale=0.35) -> Mesh:
    """Corrupt a planar mesh by collapsing a fraction of interior edges.

    Each selected edge moves one endpoint onto the other and then jitters
    it in the xy-plane by jitter_scale x the original edge length, which
    produces skinny and folded faces. Topology is untouched; only vertex
    positions change. Vertices take part in at most one collapse.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    vertices = mesh.vertices.copy()
    interior = ~mesh.boundary_mask
    candidates = np.nonzero(interior[mesh.edges[:, 0]] & interior[mesh.edges[:, 1]])[0]
    k = int(round(fraction * len(candidates)))
    if k == 0:
        return mesh.replace_vertices(vertices)

    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=k, replace=False)
    touched = np.zeros(mesh.n_vertices, dtype=bool)
    for e in candidates[chosen]:
        a, b = mesh.edges[e]
        if touched[a] or touched[b]:
            continue
        length = float(np.linalg.norm(vertices[a] - vertices[b]))
        jitter = rng.normal(0.0, jitter_scale * length, size=2)
        vertices[a] = vertices[b]
        vertices[a, :2] += jitter
        touched[a] = touched[b] = True
    return mesh.replace_vertices(vertices)


# Cube faces: (axis, sign, u-axis, v-axis) with e_u x e_v = sign * e_axis,
# so CCW cells in (u, v) give outward normals.
_CUBE_FACES = (
    (0, +1, 1, 2),
    (0, -1, 2, 1),
    (1, +1, 2, 0),
    (1, -1, 0, 2),
    (2, +1, 0, 1),
    (2, -1, 1, 0),
)


def make_cube_mesh(divisions=16, side=2.0) -> Mesh:
    """Uniformly subdivided cube, welded at edges and corners.

    divisions=16 gives the 1538-vertex / 3072-face configuration.
    """
    if divisions < 1:
        raise ValueError("divisions must be at least 1")
    lattice = {}
    positions = []

    def vertex_id(coord):
        key = tuple(coord)
        if key not in lattice:
            lattice[key] = len(positions)
            positions.append(coord)
        return lattice[key]

    faces = []
    for axis, sign, ua, va in _CUBE_FACES:
        fixed = divisions if sign > 0 else 0

        def corner(i, j):
            coord = [0, 0, 0]
            coord[axis] = fixed
            coord[ua] = i
            coord[va] = j
            return vertex_id(coord)

        for i in range(divisions):
            for j in range(divisions):
                a = corner(i, j)
                b = corner(i + 1, j)
                c = corner(i + 1, j + 1)
                d = corner(i, j + 1)
                faces.append((a, b, c))
                faces.append((a, c, d))
    vertices = (np.array(positions, dtype=np.float64) / divisions - 0.5) * side
    return build_mesh(vertices, faces)


def make_sphere_mesh(segments=32, rings=30, radius=1.0) -> Mesh:
    """Latitude/longitude sphere with two pole fans.

    segments=32, rings=30 gives 962 vertices and 1920 faces. Faces are
    oriented outward.
    """
    if segments < 3 or rings < 1:
        raise ValueError("sphere needs at least 3 segments and 1 ring")
    vertices = [(0.0, 0.0, radius)]
    for r in range(1, rings + 1):
        theta = np.pi * r / (rings + 1)
        z = radius * np.cos(theta)
        s = radius * np.sin(theta)
        for k in range(segments):
            phi = 2.0 * np.pi * k / segments
            vertices.append((s * np.cos(phi), s * np.sin(phi), z))
    vertices.append((0.0, 0.0, -radius))
    south = len(vertices) - 1

    def ring_vertex(r, k):
        return 1 + (r - 1) * segments + k % segments

    faces = []
    for k in range(segments):
        faces.append((0, ring_vertex(1, k), ring_vertex(1, k + 1)))
    for r in range(1, rings):
        for k in range(segments):
            u0, u1 = ring_vertex(r, k), ring_vertex(r, k + 1)
            d0, d1 = ring_vertex(r + 1, k), ring_vertex(r + 1, k + 1)
            faces.append((u0, d0, d1))
            faces.append((u0, d1, u1))
    for k in range(segments):
        faces.append((south, ring_vertex(rings, k + 1), ring_vertex(rings, k)))
    return build_mesh(np.array(vertices), faces)
