import numpy as np
import pytest

from facefair.fixtures import make_cube_mesh, make_grid_mesh, make_sphere_mesh
from facefair.mesh import build_mesh

TETRA_VERTICES = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
TETRA_FACES = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]


@pytest.fixture
def single_triangle():
    return build_mesh([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2)])


@pytest.fixture
def tetrahedron():
    return build_mesh(TETRA_VERTICES, TETRA_FACES)


@pytest.fixture
def cube_corner():
    """Three mutually orthogonal equal-area right triangles meeting at the
    origin, normals +z, +x, +y."""
    vertices = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    faces = [(0, 1, 2), (0, 2, 3), (0, 3, 1)]
    return build_mesh(vertices, faces)


@pytest.fixture
def pyramid():
    """Symmetric 4-sided pyramid, apex index 4 at (0, 0, 1)."""
    vertices = [(1, 1, 0), (-1, 1, 0), (-1, -1, 0), (1, -1, 0), (0, 0, 1)]
    faces = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return build_mesh(vertices, faces)


def jittered_grid(n, seed, amplitude=0.1, in_plane=False):
    """Grid with seeded vertex jitter; in_plane keeps z exactly zero."""
    grid = make_grid_mesh(n)
    rng = np.random.default_rng(seed)
    vertices = grid.vertices + rng.normal(0.0, amplitude, grid.vertices.shape)
    if in_plane:
        vertices[:, 2] = 0.0
    return grid.replace_vertices(vertices)


@pytest.fixture(scope="session")
def small_sphere():
    return make_sphere_mesh(segments=16, rings=11)  # 178 vertices


@pytest.fixture(scope="session")
def paper_cube():
    return make_cube_mesh()


@pytest.fixture(scope="session")
def paper_sphere():
    return make_sphere_mesh()
