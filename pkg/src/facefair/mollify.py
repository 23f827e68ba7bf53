"""Global face-normal mollification.

Minimizes  sum_i ||n^_i - n_i||^2
         + lambda_n sum_i sum_{j in N_F(i)} w_ij^2 ||n^_j - n^_i||^2
subject to unit norms, by projected gradient descent (step, then
renormalize). w_ij is the area-weighted bilateral kernel on normal
difference and centroid distance; the exponent decays (Gaussian), and by
default the weights are recomputed every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (
    MeshError,
    NormalField,
    face_adjacency_pairs,
    face_areas,
    face_centroids,
    face_neighborhood,
    mean_edge_length,
)

__all__ = ["MollifyParams", "mollify_weight", "mollify_normals"]


@dataclass
class MollifyParams:
    """Controls for normal mollification.

    sigma1 is the normal-difference bandwidth (unitless); sigma2 the
    centroid-distance bandwidth in mesh units, defaulting to the mean
    edge length when None.
    """

    lambda_n: float = 2.0
    sigma1: float = 0.4
    sigma2: float | None = None
    max_iters: int = 50
    grad_tol: float = 1e-6
    reweight_every_iter: bool = True

    def __post_init__(self):
        if self.lambda_n < 0:
            raise ValueError("lambda_n must be nonnegative")
        if self.sigma1 <= 0 or (self.sigma2 is not None and self.sigma2 <= 0):
            raise ValueError("bandwidths must be positive")


def _resolve_sigma2(mesh, params) -> float:
    return params.sigma2 if params.sigma2 is not None else mean_edge_length(mesh)


def mollify_weight(mesh, i, j, normals, params) -> float:
    """Bilateral smoothing weight between neighboring faces i and j.

    w = A_j exp(-||n_j - n_i||^2 / (2 s1^2) - ||c_j - c_i||^2 / (2 s2^2));
    zero when face j is degenerate.
    """
    if j not in face_neighborhood(mesh, i):
        raise MeshError(f"face {j} is not in the neighborhood of face {i}")
    if normals.degenerate[j] or normals.degenerate[i]:
        return 0.0
    sigma2 = _resolve_sigma2(mesh, params)
    dn = normals.values[j] - normals.values[i]
    dc = face_centroids(mesh)[j] - face_centroids(mesh)[i]
    return float(
        face_areas(mesh)[j]
        * np.exp(-(dn @ dn) / (2.0 * params.sigma1**2) - (dc @ dc) / (2.0 * sigma2**2))
    )


def _pair_weights(values, pair_i, pair_j, spatial, sigma1):
    dn = values[pair_j] - values[pair_i]
    return spatial * np.exp(-(dn**2).sum(axis=1) / (2.0 * sigma1**2))


def _cost(values, observed, pair_i, pair_j, wsq, lambda_n):
    data = float(((values - observed) ** 2).sum())
    dn = values[pair_j] - values[pair_i]
    return data + lambda_n * float((wsq * (dn**2).sum(axis=1)).sum())


def _gradient(values, observed, pair_i, pair_j, wsq, lambda_n):
    grad = 2.0 * (values - observed)
    dn = values[pair_i] - values[pair_j]
    contrib = (2.0 * lambda_n * wsq)[:, None] * dn
    np.add.at(grad, pair_i, contrib)
    np.add.at(grad, pair_j, -contrib)
    return grad


def mollify_normals(mesh, face_normals, params, return_trace=False):
    """Smooth a per-face normal field by projected gradient descent.

    Degenerate faces keep their input entries and take no part in the
    smoothness term. With lambda_n = 0 the input is returned unchanged.
    With return_trace=True also returns the per-accepted-iteration record
    of (cost, smoothness energy) under the weights current at that step.
    """
    if face_normals.domain != "face" or len(face_normals) != mesh.n_faces:
        raise MeshError("face_normals does not match the mesh")
    if not np.isfinite(face_normals.values[~face_normals.degenerate]).all():
        raise MeshError("face normals contain non-finite values")
    if params.lambda_n == 0.0:
        out = face_normals.copy()
        return (out, []) if return_trace else out

    bad = face_normals.degenerate
    pair_i, pair_j = face_adjacency_pairs(mesh)
    keep = ~bad[pair_i] & ~bad[pair_j]
    pair_i, pair_j = pair_i[keep], pair_j[keep]
    sigma2 = _resolve_sigma2(mesh, params)
    centroids = face_centroids(mesh)
    dc = centroids[pair_j] - centroids[pair_i]
    spatial = face_areas(mesh)[pair_j] * np.exp(-(dc**2).sum(axis=1) / (2.0 * sigma2**2))

    observed = face_normals.values.copy()
    values = observed.copy()
    ok = ~bad

    def renormalize(v):
        norms = np.linalg.norm(v[ok], axis=1)
        v[ok] = v[ok] / np.maximum(norms, 1e-300)[:, None]
        return v

    def smoothness(v, w):
        dn = v[pair_j] - v[pair_i]
        return float((w * (dn**2).sum(axis=1)).sum())

    wsq = _pair_weights(values, pair_i, pair_j, spatial, params.sigma1) ** 2
    cost = _cost(values, observed, pair_i, pair_j, wsq, params.lambda_n)
    trace = [(cost, smoothness(values, wsq))]
    step = 1.0
    for _ in range(params.max_iters):
        grad = _gradient(values, observed, pair_i, pair_j, wsq, params.lambda_n)
        # Convergence is judged in the tangent space of each normal.
        tangential = grad - (grad * values).sum(axis=1)[:, None] * values
        tangential[bad] = 0.0
        if np.abs(tangential).max() <= params.grad_tol:
            break
        step = min(step * 2.0, 1e6)
        accepted = False
        for _ in range(60):
            trial = values - step * grad
            trial[bad] = values[bad]
            trial = renormalize(trial)
            trial_cost = _cost(trial, observed, pair_i, pair_j, wsq, params.lambda_n)
            if trial_cost < cost:
                values, cost = trial, trial_cost
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        if params.reweight_every_iter:
            wsq = _pair_weights(values, pair_i, pair_j, spatial, params.sigma1) ** 2
            cost = _cost(values, observed, pair_i, pair_j, wsq, params.lambda_n)
        trace.append((cost, smoothness(values, wsq)))
    out = NormalField("face", values, bad.copy())
    return (out, trace) if return_trace else out
