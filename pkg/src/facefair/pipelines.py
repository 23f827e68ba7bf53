"""End-to-end pipelines: denoising and mesh-normal fusion.

Denoising alternates global normal mollification with the quadratic
vertex solve (two outer rounds by default); fusion transfers an external
per-vertex normal field onto faces and runs the same solve against the
smooth input mesh. Topology is never modified.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    Mesh,
    MeshError,
    NormalField,
    face_normal_field,
    local_scales,
    vertex_normal_field,
)
from .metrics import count_flipped_faces, face_reference_normals
from .mollify import MollifyParams, mollify_normals
from .solver import (
    SolverParams,
    assemble_fairness,
    assemble_laplacian,
    cost_and_gradient,
    solve_vertices,
)

__all__ = [
    "DenoiseConfig",
    "FusionInput",
    "RoundDiagnostics",
    "denoise",
    "vertex_to_face_normals",
    "fuse_normals",
]


@dataclass
class DenoiseConfig:
    mollify: MollifyParams = field(default_factory=MollifyParams)
    solver: SolverParams = field(default_factory=SolverParams)
    outer_rounds: int = 2

    def __post_init__(self):
        if self.outer_rounds < 1:
            raise ValueError("outer_rounds must be at least 1")


@dataclass
class FusionInput:
    """Smooth base mesh plus a high-quality per-vertex normal field."""

    mesh: Mesh
    vertex_normals: NormalField

    def __post_init__(self):
        if self.vertex_normals.domain != "vertex":
            raise MeshError("fusion normals must live on vertices")
        if len(self.vertex_normals) != self.mesh.n_vertices:
            raise MeshError("fusion normal field length does not match the mesh")


@dataclass
class RoundDiagnostics:
    round_index: int
    cost_before: float
    cost_after: float
    grad_inf_norm: float
    solver_iterations: int
    flipped_faces: int
    elapsed_seconds: float


def _solve_round(mesh, face_field, vertex_field, solver_params):
    """Assemble frozen operators from the given normals and solve once."""
    scales = local_scales(mesh)
    L = assemble_laplacian(mesh, face_field, scales, solver_params)
    K = assemble_fairness(mesh, vertex_field, face_field, solver_params.delta)
    v_obs = mesh.vertices.ravel()
    cost_before, _ = cost_and_gradient(
        v_obs, v_obs, L, K, solver_params.lambda_v, solver_params.eta
    )
    v_hat, info = solve_vertices(mesh, v_obs, L, K, solver_params)
    return mesh.replace_vertices(v_hat.reshape(-1, 3)), cost_before, info


def denoise(mesh, cfg=None):
    """Denoise a mesh; returns (denoised mesh, per-round diagnostics).

    Each round: mollify the current face normals, recompute local scale,
    vertex normals and fairness weights from the current geometry plus
    the mollified normals, assemble the frozen operators, and solve the
    quadratic system anchored at the round's input vertices.
    """
    if cfg is None:
        cfg = DenoiseConfig()
    current = mesh
    diagnostics = []
    for round_index in range(1, cfg.outer_rounds + 1):
        start = time.perf_counter()
        try:
            noisy_normals = face_normal_field(current)
            mollified = mollify_normals(current, noisy_normals, cfg.mollify)
            vertex_field = vertex_normal_field(current, "angle", face_normals=mollified)
            current, cost_before, info = _solve_round(
                current, mollified, vertex_field, cfg.solver
            )
        except MeshError as exc:
            raise MeshError(f"denoise round {round_index}: {exc}") from exc
        diagnostics.append(
            RoundDiagnostics(
                round_index=round_index,
                cost_before=cost_before,
                cost_after=info.cost,
                grad_inf_norm=info.grad_inf_norm,
                solver_iterations=info.iterations,
                flipped_faces=count_flipped_faces(current, face_reference_normals(current)),
                elapsed_seconds=time.perf_counter() - start,
            )
        )
    return current, diagnostics


def vertex_to_face_normals(mesh, vertex_normals, smooth_face_normals=None):
    """Transfer a per-vertex normal field onto faces.

    Each face takes the normalized sum of its three corners' normals,
    weighted by max(corner normal . smooth face normal, 0). Faces where
    all three weights clip to zero fall back to the smooth face normal;
    returns (field, fallback face ids).
    """
    if vertex_normals.domain != "vertex" or len(vertex_normals) != mesh.n_vertices:
        raise MeshError("vertex_normals does not match the mesh")
    if smooth_face_normals is None:
        smooth_face_normals = face_normal_field(mesh)
    corner_normals = vertex_normals.values[mesh.faces]  # (m, 3, 3)
    weights = (corner_normals * smooth_face_normals.values[:, None, :]).sum(axis=2)
    weights = np.maximum(weights, 0.0)
    sums = (weights[:, :, None] * corner_normals).sum(axis=1)
    norms = np.linalg.norm(sums, axis=1)
    usable = norms > 1e-12
    values = np.where(usable[:, None], sums / np.maximum(norms, 1e-300)[:, None], 0.0)
    fallback = ~usable & ~smooth_face_normals.degenerate
    values[fallback] = smooth_face_normals.values[fallback]
    degenerate = ~usable & smooth_face_normals.degenerate
    return (
        NormalField("face", values, degenerate),
        np.nonzero(fallback)[0],
    )


def fuse_normals(fusion, params=None, outer_rounds=1):
    """Fit the smooth mesh to a high-quality vertex-normal field.

    The transferred face normals define both the Laplacian projectors and
    the fairness flatness weights; the fairness projector uses the input
    vertex normals directly. Returns (mesh, per-round diagnostics).
    """
    if params is None:
        params = SolverParams()
    if outer_rounds < 1:
        raise ValueError("outer_rounds must be at least 1")
    current = fusion.mesh
    diagnostics = []
    for round_index in range(1, outer_rounds + 1):
        start = time.perf_counter()
        face_field, _ = vertex_to_face_normals(current, fusion.vertex_normals)
        current, cost_before, info = _solve_round(
            current, face_field, fusion.vertex_normals, params
        )
        diagnostics.append(
            RoundDiagnostics(
                round_index=round_index,
                cost_before=cost_before,
                cost_after=info.cost,
                grad_inf_norm=info.grad_inf_norm,
                solver_iterations=info.iterations,
                flipped_faces=count_flipped_faces(current, face_reference_normals(current)),
                elapsed_seconds=time.perf_counter() - start,
            )
        )
    return current, diagnostics
