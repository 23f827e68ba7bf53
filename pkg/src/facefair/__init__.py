"""Face-fairness mesh optimization: denoising and mesh-normal fusion."""

from .mesh import (
    Mesh,
    MeshError,
    NormalField,
    build_mesh,
    face_area,
    face_areas,
    face_centroid,
    face_centroids,
    face_neighborhood,
    face_normal,
    face_normal_field,
    local_scale,
    local_scales,
    mean_edge_length,
    vertex_face_ring,
    vertex_normal,
    vertex_normal_field,
)
from .solver import (
    SolverParams,
    SolveInfo,
    SparseBlockOperator,
    assemble_fairness,
    assemble_laplacian,
    cost_and_gradient,
    fairness_weight,
    fairness_weights,
    laplacian_weight,
    solve_vertices,
)
from .mollify import MollifyParams, mollify_normals, mollify_weight
from .pipelines import (
    DenoiseConfig,
    FusionInput,
    RoundDiagnostics,
    denoise,
    fuse_normals,
    vertex_to_face_normals,
)
from .metrics import (
    MetricsReport,
    add_gaussian_noise,
    corner_angle_histogram,
    count_flipped_faces,
    evaluate,
    face_reference_normals,
    normal_angle_error,
    vertex_position_error,
)
from .fixtures import collapse_edges, make_cube_mesh, make_grid_mesh, make_sphere_mesh

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
