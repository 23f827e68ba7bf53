"""Noise synthesis and the evaluation metrics (NE, VPE, flips, angles)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (
    Mesh,
    MeshError,
    NormalField,
    corner_angles,
    degenerate_face_mask,
    face_normal_field,
    mean_edge_length,
    vertex_normal_field,
)

__all__ = [
    "MetricsReport",
    "add_gaussian_noise",
    "normal_angle_error",
    "vertex_position_error",
    "count_flipped_faces",
    "face_reference_normals",
    "corner_angle_histogram",
    "evaluate",
]


@dataclass
class MetricsReport:
    """Evaluation record: normal-angle error (degrees), vertex-position
    error (mesh units), flipped-face count, and corner-angle histogram."""

    mean_ne_deg: float
    median_ne_deg: float
    mean_vpe: float
    median_vpe: float
    flipped_face_count: int
    hist_edges_deg: np.ndarray
    hist_counts: np.ndarray

    def record(self) -> dict:
        """Flat key=value view (histogram is serialized separately)."""
        return {
            "mean_NE_deg": f"{self.mean_ne_deg:.10g}",
            "median_NE_deg": f"{self.median_ne_deg:.10g}",
            "mean_VPE": f"{self.mean_vpe:.10g}",
            "median_VPE": f"{self.median_vpe:.10g}",
            "flipped_face_count": str(self.flipped_face_count),
        }


def add_gaussian_noise(mesh, sigma_rel, seed) -> Mesh:
    """Displace each vertex by i.i.d. Gaussian noise with per-coordinate
    standard deviation sigma_rel x global mean edge length."""
    if sigma_rel < 0:
        raise ValueError("sigma_rel must be nonnegative")
    rng = np.random.default_rng(seed)
    sigma = sigma_rel * mean_edge_length(mesh)
    offsets = rng.normal(0.0, sigma, size=mesh.vertices.shape) if sigma > 0 else 0.0
    return mesh.replace_vertices(mesh.vertices + offsets)


def _check_same_topology(est, gt):
    # Orientation differences are measurement targets (a reversed face is a
    # 180-degree normal error), so faces compare as unordered triples.
    if est.n_vertices != gt.n_vertices or est.n_faces != gt.n_faces:
        raise MeshError("meshes differ in vertex or face count")
    if not np.array_equal(np.sort(est.faces, axis=1), np.sort(gt.faces, axis=1)):
        raise MeshError("meshes differ in face topology")


def normal_angle_error(est, gt):
    """Mean and median per-face normal deviation in degrees.

    Faces degenerate in either mesh are excluded.
    """
    _check_same_topology(est, gt)
    ne = face_normal_field(est)
    ng = face_normal_field(gt)
    ok = ~ne.degenerate & ~ng.degenerate
    if not ok.any():
        raise MeshError("no non-degenerate faces to compare")
    a, b = ne.values[ok], ng.values[ok]
    # atan2 keeps identical normals at exactly zero and is well conditioned
    # near both 0 and 180 degrees, unlike arccos of the clipped dot.
    angles = np.degrees(
        np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), (a * b).sum(axis=1))
    )
    return float(angles.mean()), float(np.median(angles))


def vertex_position_error(est, gt):
    """Mean and median Euclidean distance between corresponding vertices."""
    if est.n_vertices != gt.n_vertices:
        raise MeshError("meshes differ in vertex count")
    d = np.linalg.norm(est.vertices - gt.vertices, axis=1)
    return float(d.mean()), float(np.median(d))


def count_flipped_faces(mesh, reference) -> int:
    """Number of faces whose normal opposes the per-face reference."""
    if reference.domain != "face" or len(reference) != mesh.n_faces:
        raise MeshError("reference normals do not match the mesh")
    field = face_normal_field(mesh)
    ok = ~field.degenerate & ~reference.degenerate
    dots = (field.values[ok] * reference.values[ok]).sum(axis=1)
    return int((dots < 0.0).sum())


def face_reference_normals(mesh) -> NormalField:
    """Fallback flip reference: per-face average of the angle-weighted
    vertex normals at its three corners."""
    vn = vertex_normal_field(mesh, "angle")
    sums = vn.values[mesh.faces].sum(axis=1)
    norms = np.linalg.norm(sums, axis=1)
    bad = vn.degenerate[mesh.faces].any(axis=1) | (norms <= 1e-12)
    safe = np.where(bad, 1.0, norms)
    values = sums / safe[:, None]
    values[bad] = 0.0
    return NormalField("face", values, bad)


def corner_angle_histogram(mesh, bin_width_deg):
    """Histogram of all 3 x n_faces interior angles.

    bin_width_deg must divide 180. Degenerate faces contribute {0, 0, 180}
    by convention so the total count stays 3 x n_faces.
    """
    nbins = 180.0 / bin_width_deg
    if abs(nbins - round(nbins)) > 1e-9:
        raise ValueError("bin width must divide 180")
    nbins = int(round(nbins))
    angles = corner_angles(mesh).copy()
    angles[degenerate_face_mask(mesh)] = (0.0, 0.0, 180.0)
    edges = np.linspace(0.0, 180.0, nbins + 1)
    # Nanodegree quantization keeps exact geometric angles (60, 45, 90) out
    # of the neighbouring bin when arccos lands an ulp below the edge.
    angles = np.round(angles, 9)
    counts, _ = np.histogram(np.clip(angles.ravel(), 0.0, 180.0), bins=edges)
    return edges, counts


def evaluate(est, gt, bin_width_deg=5.0, reference=None) -> MetricsReport:
    """Full metrics report of ``est`` against ground truth ``gt``.

    Flips are counted against ``reference`` when given, else against the
    ground-truth face normals.
    """
    mean_ne, median_ne = normal_angle_error(est, gt)
    mean_vpe, median_vpe = vertex_position_error(est, gt)
    if reference is None:
        reference = face_normal_field(gt)
    flipped = count_flipped_faces(est, reference)
    edges, counts = corner_angle_histogram(est, bin_width_deg)
    return MetricsReport(mean_ne, median_ne, mean_vpe, median_vpe, flipped, edges, counts)
